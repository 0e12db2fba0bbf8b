mod common;

use std::fs;
use std::path::PathBuf;

use common::{in_order, load_config};
use rmfs_core::engine::{Engine, EventLog};

fn run(cfg: &str) -> String {
    let mut e = Engine::new(load_config(cfg), EventLog::memory()).unwrap();
    let s = e.run().unwrap();
    assert_eq!(s.completed_orders, 1, "{cfg}");
    String::from_utf8(e.into_log().into_bytes().unwrap()).unwrap()
}

fn golden(name: &str, got: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, got).unwrap();
        return;
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if want != got {
        let line = want
            .lines()
            .zip(got.lines())
            .position(|(a, b)| a != b)
            .unwrap_or(want.lines().count().min(got.lines().count()));
        panic!(
            "{name} differs at line {}:\n  want {:?}\n  got  {:?}",
            line + 1,
            want.lines().nth(line),
            got.lines().nth(line)
        );
    }
}

#[test]
fn five_apples_matches_golden() {
    let log = run("five_apples.cfg");
    in_order(
        &log,
        &[
            "\tOrderArrival\t",
            "\tPPS\t",
            "\tPickup\tr0 p0",
            "\tPickingInfo\ts1 m1 q0 o0 p0 c=[1,2] apple*5",
            "\tStationConfirm\ts1 m1 Ok",
            "\tInventory\tp0 c=[1,2] apple 5->0",
            "\tOrderDone\to0",
            "\tRelease\tp0 store",
            "\tSetdown\tr0 p0",
        ],
    );
    assert_eq!(log.matches("\tInventory\t").count(), 1);
    golden("five_apples.log", &log);
}

#[test]
fn station_error_requeues_at_tail_without_stock_change() {
    let log = run("five_apples_error.cfg");
    let at = in_order(
        &log,
        &[
            "\tPickingInfo\ts1 m1 q0",
            "\tStationConfirm\ts1 m1 Error damaged",
            "\tRequeue\tq0 s1 tail requeues=1 error=damaged",
            "\tPickingInfo\ts1 m2 q0",
            "\tStationConfirm\ts1 m2 Ok",
            "\tInventory\tp0 c=[1,2] apple 5->0",
            "\tOrderDone\to0",
        ],
    );
    let lines: Vec<&str> = log.lines().collect();
    assert!(
        !lines[at[1]..at[4]].iter().any(|l| l.contains("\tInventory\t") || l.contains("\tMove\t")),
        "stock moved before the retry was confirmed"
    );
    assert_eq!(log.matches("\tInventory\t").count(), 1);
    golden("five_apples_error.log", &log);
}
