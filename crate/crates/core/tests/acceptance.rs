//! Acceptance criteria, one PASS/FAIL line each. Run a subset by passing
//! criterion numbers: `cargo test --test acceptance -- 4 6`.

mod common;

use std::fs::{self, File};
use std::io::{BufReader, Cursor};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

use common::{any_frame, frame_of, garbage_line, in_order, load_config, mapf_scenario, random_config, rel, LogLedger};
use rmfs_core::config::{Config, CostKind};
use rmfs_core::engine::{EmuRobot, EmuStation, Engine, EventLog};
use rmfs_core::ids::{RobotId, WaypointId};
use rmfs_core::kinematics::{Heading, Kinematics};
use rmfs_core::layout::{build_layout, LayoutConfig};
use rmfs_core::planner::verify::{dwell_overlaps, max_implied_speed, scan_conflicts};
use rmfs_core::planner::{plan, PlanLimits, PlanRequest, ReservationTable};
use rmfs_core::wire::client::{spawn_robot, spawn_station};
use rmfs_core::wire::link::serve;
use rmfs_core::wire::server::{ServerOptions, WireServer};
use rmfs_core::wire::{decode, encode, Frame, FrameReader};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn pods_of(cfg: &Config) -> f64 {
    let layout = cfg.build_layout().unwrap();
    cfg.build_world(&layout).unwrap().pods().count() as f64
}

// 1. decomposed estimate against the direct average over a long run
fn ledger_identity() -> Outcome {
    let cfg = load_config("identity.cfg");
    check(cfg.ledger.cost == CostKind::Hops, "identity.cfg must price in hops")?;
    let n = 50_000;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("events.log");
    let file = File::create(&path).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let mut engine = Engine::new(cfg, EventLog::to_writer(Box::new(file))).map_err(|e| e.to_string())?;
    engine.run().map_err(|e| e.to_string())?;
    let wall = t0.elapsed();
    let report = engine.ledger().report(n).map_err(|e| e.to_string())?;
    drop(engine);

    let oracle = LogLedger::parse(BufReader::new(File::open(&path).map_err(|e| e.to_string())?));
    check(oracle.epochs.len() >= n, format!("log has {} epochs", oracle.epochs.len()))?;
    let sums = oracle.sums(n);
    check(
        rel(report.direct_avg, sums.direct) <= 1e-9,
        format!("direct {} vs log {}", report.direct_avg, sums.direct),
    )?;
    check(
        rel(report.decomposed_est, sums.decomposed) <= 1e-9,
        format!("decomposed {} vs log {}", report.decomposed_est, sums.decomposed),
    )?;
    let dev = rel(sums.decomposed, sums.direct);
    check(dev <= 0.02, format!("deviation {dev:.4} over 0.02"))?;
    check(wall < Duration::from_secs(60), format!("took {wall:?}"))?;
    Ok(format!(
        "N={n} direct={:.5} decomposed={:.5} deviation={:.4} wall={:.1}s",
        sums.direct,
        sums.decomposed,
        dev,
        wall.as_secs_f64()
    ))
}

fn identity_run(stop: usize) -> Result<(Engine, f64), String> {
    let mut cfg = load_config("identity.cfg");
    cfg.sim.stop_after_epochs = Some(stop);
    let pods = pods_of(&cfg);
    let mut engine = Engine::new(cfg, EventLog::memory()).map_err(|e| e.to_string())?;
    engine.run().map_err(|e| e.to_string())?;
    Ok((engine, pods))
}

// 2. residual part of the split and the exact partition
fn residual_bound() -> Outcome {
    let (engine, pods) = identity_run(10_000)?;
    let log = engine.log().bytes().ok_or("memory log")?.to_vec();
    let oracle = LogLedger::parse(Cursor::new(log));
    let c_max = engine.ledger().costs().c_max();
    let mut out = Vec::new();
    for n in [100, 1_000, 10_000] {
        let r = engine.ledger().report(n).map_err(|e| e.to_string())?;
        let bound = pods * c_max / n as f64;
        check(r.residual_part <= bound, format!("N={n}: residual {} over {bound}", r.residual_part))?;
        check(
            r.direct_avg.to_bits() == (r.departed_part + r.residual_part).to_bits()
                && r.direct_total.to_bits() == (r.departed_total + r.residual_total).to_bits(),
            format!("N={n}: partition not exact"),
        )?;
        let sums = oracle.sums(n);
        check(
            (r.residual_part - sums.residual).abs() <= 1e-9 * sums.direct
                && (r.departed_part - sums.departed).abs() <= 1e-9 * sums.direct,
            format!("N={n}: split {}+{} vs log {}+{}", r.departed_part, r.residual_part, sums.departed, sums.residual),
        )?;
        out.push(format!("N={n} residual={:.5}<={bound:.5}", r.residual_part));
    }
    Ok(out.join(" "))
}

const ONE_STATION: &str = r#"
[sim]
seed = 3
horizon_s = 1e12
stop_after_epochs = 3000

[layout]
rows = 3
cols = 4
stations = [{ id = 0, kind = "pick", at = [2, 3] }]

[robots]
count = 2

[pods]
rows = 2
cols = 3
capacity = 2000

[pods.generate]
count = 6
skus = ["a", "b", "c", "d", "e", "f"]
fill = 1000
mode = "dedicated"

[orders]
rate_per_hour = 20.0
receipts_per_hour = 0.0
mean_lines = 1.0
max_lines = 1
max_quantity = 1

[ledger]
burn_in = 10
checkpoints = [100, 1000, 3000]
"#;

// 3. shifted average against direct, and the single-station case
fn shifted_bound() -> Outcome {
    let (engine, pods) = identity_run(10_000)?;
    let log = engine.log().bytes().ok_or("memory log")?.to_vec();
    let oracle = LogLedger::parse(Cursor::new(log));
    let c_max = engine.ledger().costs().c_max();
    let mut worst: f64 = 0.0;
    for n in [100, 1_000, 10_000] {
        let r = engine.ledger().report(n).map_err(|e| e.to_string())?;
        let sums = oracle.sums(n);
        check(
            rel(r.shifted_avg, sums.shifted) <= 1e-9,
            format!("N={n}: shifted {} vs log {}", r.shifted_avg, sums.shifted),
        )?;
        let gap = (r.shifted_avg - r.direct_avg).abs();
        let bound = 2.0 * pods * c_max / n as f64;
        check(gap <= bound, format!("N={n}: |shifted-direct|={gap} over {bound}"))?;
        worst = worst.max(gap / bound);
    }

    let cfg = Config::from_toml_str(ONE_STATION).map_err(|e| e.to_string())?;
    let mut one = Engine::new(cfg, EventLog::memory()).map_err(|e| e.to_string())?;
    one.run().map_err(|e| e.to_string())?;
    for n in [100, 1_000, 3_000] {
        let r = one.ledger().report(n).map_err(|e| e.to_string())?;
        check(
            r.decomposed_est.to_bits() == r.shifted_avg.to_bits(),
            format!("one station N={n}: decomposed {} != shifted {}", r.decomposed_est, r.shifted_avg),
        )?;
    }
    Ok(format!("worst gap/bound={worst:.3}; one station decomposed==shifted at N=100,1000,3000"))
}

// 4. many random multi-robot scenarios, scanned for conflicts
fn mapf() -> Outcome {
    const SCENARIOS: u64 = 10_000;
    let workers = thread::available_parallelism().map_or(4, |n| n.get()) as u64;
    let results: Vec<Result<(usize, f64), String>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let (mut legs, mut vmax) = (0usize, 0.0f64);
                    for seed in (w..SCENARIOS).step_by(workers as usize) {
                        let run = mapf_scenario(seed, 3);
                        let found = scan_conflicts(&run.trajectories, 0.1);
                        if let Some(c) = found.first() {
                            return Err(format!("seed {seed} ({}x{}, {} robots): {c:?}", run.rows, run.cols, run.robots));
                        }
                        if let Some(o) = dwell_overlaps(&run.trajectories).first() {
                            return Err(format!("seed {seed}: dwell overlap {o:?}"));
                        }
                        for tr in &run.trajectories {
                            let v = max_implied_speed(tr, run.layout.spacing_m());
                            if v > run.kinematics.v_max * (1.0 + 1e-9) {
                                return Err(format!("seed {seed} {}: speed {v}", tr.robot));
                            }
                            vmax = vmax.max(v);
                        }
                        legs += run.legs;
                    }
                    Ok((legs, vmax))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let (mut legs, mut vmax) = (0, 0.0f64);
    for r in results {
        let (l, v) = r?;
        legs += l;
        vmax = vmax.max(v);
    }
    Ok(format!("{SCENARIOS} scenarios, {legs} legs, 0 conflicts, max speed {vmax} m/s"))
}

// 5. travel and turn times
fn kinematics() -> Outcome {
    let layout = build_layout(&LayoutConfig::grid(3, 4)).map_err(|e| e.to_string())?;
    let kin = Kinematics::default();
    let leg = |goal: u32| {
        let req = PlanRequest {
            robot: RobotId(0),
            start: WaypointId(0),
            heading: Heading::East,
            start_time: 0.0,
            goal: WaypointId(goal),
        };
        plan(&layout, &ReservationTable::new(), &kin, &req, &PlanLimits::default()).map_err(|e| e.to_string())
    };
    let straight = leg(2)?;
    check(straight.moves() == 2, "straight leg is not two edges")?;
    check(straight.total_duration() == 40.0, format!("straight took {}", straight.total_duration()))?;
    let turned = leg(5)?;
    check(turned.moves() == 2, "turning leg is not two edges")?;
    let extra = turned.total_duration() - straight.total_duration();
    check(extra == 0.75, format!("quarter turn added {extra}"))?;
    Ok(format!("2 edges {}s, with one quarter turn {}s", straight.total_duration(), turned.total_duration()))
}

// 6. bundled scenario completes every accepted order, deterministically
fn bundled_run() -> Outcome {
    let run = || -> Result<_, String> {
        let mut e = Engine::new(load_config("threebyfour.cfg"), EventLog::memory()).map_err(|e| e.to_string())?;
        let s = e.run().map_err(|e| e.to_string())?;
        Ok((s, e.into_log().into_bytes().ok_or("memory log")?))
    };
    let (s, a) = run()?;
    let (_, b) = run()?;
    check(s.accepted_orders > 0, "no orders accepted")?;
    check(
        s.completed_orders == s.accepted_orders && s.open_orders == 0,
        format!("{} of {} accepted orders completed", s.completed_orders, s.accepted_orders),
    )?;
    check(a == b, "same seed gave different logs")?;
    Ok(format!(
        "{}/{} orders, {} parked, ended {:.0}s, log {} bytes identical",
        s.completed_orders,
        s.accepted_orders,
        s.parked_orders,
        s.end_time,
        a.len()
    ))
}

// 7. scripted single order, with and without a station error
fn five_apples() -> Outcome {
    let run = |cfg: &str| -> Result<String, String> {
        let mut e = Engine::new(load_config(cfg), EventLog::memory()).map_err(|e| e.to_string())?;
        e.run().map_err(|e| e.to_string())?;
        String::from_utf8(e.into_log().into_bytes().ok_or("memory log")?).map_err(|e| e.to_string())
    };
    let golden = |name: &str| {
        let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
        fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
    };
    let ok = run("five_apples.cfg")?;
    check(ok == golden("five_apples.log")?, "five_apples log differs from golden")?;
    let err = run("five_apples_error.cfg")?;
    check(err == golden("five_apples_error.log")?, "error variant differs from golden")?;
    let at = panic::catch_unwind(|| {
        in_order(
            &err,
            &[
                "\tStationConfirm\ts1 m1 Error damaged",
                "\tRequeue\tq0 s1 tail requeues=1",
                "\tPickingInfo\ts1 m2 q0",
                "\tStationConfirm\ts1 m2 Ok",
            ],
        )
    })
    .map_err(|_| "error variant out of order".to_owned())?;
    let lines: Vec<&str> = err.lines().collect();
    check(
        !lines[at[0]..at[3]].iter().any(|l| l.contains("\tInventory\t")),
        "inventory changed before the retry",
    )?;
    check(err.matches("\tInventory\t").count() == 1, "inventory changed more than once")?;
    Ok("golden logs match; error requeued at tail with no inventory change".into())
}

fn emulate(cfg: &Config, server: &WireServer) {
    let layout = cfg.build_layout().unwrap();
    let world = cfg.build_world(&layout).unwrap();
    for r in world.robots() {
        let emu = EmuRobot::new(
            r.id,
            r.waypoint,
            r.heading,
            cfg.kinematics,
            layout.spacing_m(),
            cfg.agents.pickup_fault_rate,
            cfg.sim.seed,
        );
        spawn_robot(server.local_addr(), emu, None);
    }
    for s in layout.stations() {
        spawn_station(server.local_addr(), EmuStation::new(s.id, &cfg.agents.station_errors));
    }
}

// 8. frame round-trips, resync after bad lines, loopback equivalence
fn wire() -> Outcome {
    for kind in Frame::KINDS {
        let mut runner = TestRunner::new(RunnerConfig {
            cases: 1_000,
            failure_persistence: None,
            ..RunnerConfig::default()
        });
        runner
            .run(&frame_of(kind), |f| {
                let line = encode(&f);
                prop_assert_eq!(line.matches('\n').count(), 1);
                prop_assert_eq!(decode(&line).unwrap(), f);
                Ok(())
            })
            .map_err(|e| format!("{kind}: {e}"))?;
    }

    let mut runner = TestRunner::new(RunnerConfig {
        cases: 1_000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let stream = proptest::collection::vec(prop_oneof![any_frame().prop_map(Ok), garbage_line().prop_map(Err)], 1..12);
    runner
        .run(&stream, |items| {
            let mut text = String::new();
            for it in &items {
                match it {
                    Ok(f) => text.push_str(&encode(f)),
                    Err(g) => {
                        text.push_str(g);
                        // plus a blank line, which the reader skips
                        text.push_str("\n \t\n");
                    }
                }
            }
            let mut reader = FrameReader::new(Cursor::new(text.into_bytes()));
            for it in &items {
                let got = reader.next_frame().unwrap().expect("one item per line");
                prop_assert_eq!(it.is_ok(), got.is_ok());
                if let (Ok(f), Ok(g)) = (it, got) {
                    prop_assert_eq!(f, &g);
                }
            }
            prop_assert!(reader.next_frame().unwrap().is_none());
            Ok(())
        })
        .map_err(|e| format!("resync: {e}"))?;

    let mut cfg = load_config("threebyfour.cfg");
    cfg.sim.horizon_s = 3600.0;
    cfg.agents.pickup_fault_rate = 0.05;
    let mut reference = Engine::new(cfg.clone(), EventLog::memory()).map_err(|e| e.to_string())?;
    reference.run().map_err(|e| e.to_string())?;
    let want = reference.into_log().into_bytes().ok_or("memory log")?;
    let server = WireServer::bind(
        "127.0.0.1:0",
        ServerOptions {
            wire_log: None,
            ..ServerOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    emulate(&cfg, &server);
    let (summary, log) = serve(cfg, server, EventLog::memory(), false).map_err(|e| e.to_string())?;
    check(summary.fallback.is_empty(), format!("fell back for {:?}", summary.fallback))?;
    let got = log.into_bytes().ok_or("memory log")?;
    check(got == want, "loopback log differs from in-process log")?;
    Ok(format!(
        "{} kinds x 1000 round-trips, 1000 resync streams, loopback log identical ({} bytes)",
        Frame::KINDS.len(),
        got.len()
    ))
}

// 9. stock conservation and pod exclusivity in random runs
fn conservation() -> Outcome {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 100,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner
        .run(&any::<u64>(), |seed| {
            let mut e = Engine::new(random_config(seed), EventLog::null()).unwrap();
            let start = e.world().conservation_balance();
            let mut steps = 0;
            while steps < 1_000 && e.step().unwrap() {
                steps += 1;
                prop_assert_eq!(&e.world().conservation_balance(), &start, "seed {} step {}", seed, steps);
                let ex = e.world().check_exclusivity();
                prop_assert!(ex.is_ok(), "seed {} step {}: {:?}", seed, steps, ex);
            }
            prop_assert_eq!(steps, 1_000, "seed {} stopped early", seed);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("100 random runs x 1000 events".into())
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "ledger identity", ledger_identity),
        (2, "residual bound", residual_bound),
        (3, "shifted bound", shifted_bound),
        (4, "mapf safety", mapf),
        (5, "kinematics", kinematics),
        (6, "bundled scenario", bundled_run),
        (7, "five apples", five_apples),
        (8, "wire", wire),
        (9, "conservation", conservation),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n} {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n} {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
