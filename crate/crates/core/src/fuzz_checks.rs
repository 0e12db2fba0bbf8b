//! Invariants exercised by the fuzz targets and by the corpus replay test.
//! Each function panics when an invariant breaks and returns quietly on
//! input that is merely invalid.

use std::io::Cursor;

use crate::config::Config;
use crate::engine::{Engine, EventLog};
use crate::ledger::dump::{verify, EpochDump};
use crate::wire::{decode, encode, FrameReader};

/// Every decodable line survives an encode/decode round trip, and the
/// stream reader yields one result per line without failing.
pub fn wire_decode(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        for line in text.split('\n') {
            if let Ok(f) = decode(line) {
                let again = encode(&f);
                assert_eq!(decode(&again).as_ref(), Ok(&f), "round trip of {line:?}");
            }
        }
    }
    let mut reader = FrameReader::new(Cursor::new(data));
    let mut n = 0;
    while let Some(item) = reader.next_frame().expect("in-memory reads never fail") {
        if let Ok(f) = item {
            assert_eq!(decode(&encode(&f)).as_ref(), Ok(&f));
        }
        n += 1;
        assert!(n <= data.len() + 1, "reader does not advance");
    }
}

/// Accepted configs build, and small ones run a few hundred events.
pub fn config_parse(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::from_toml_str(text) else { return };
    if u64::from(cfg.layout.rows) * u64::from(cfg.layout.cols) > 400 {
        return;
    }
    let Ok(layout) = cfg.build_layout() else { return };
    let Ok(world) = cfg.build_world(&layout) else { return };
    if world.robots().count() > 8 || world.pods().count() > 64 {
        return;
    }
    let Ok(mut engine) = Engine::new(cfg, EventLog::null()) else { return };
    for _ in 0..300 {
        match engine.step() {
            Ok(true) => {}
            Ok(false) | Err(_) => break,
        }
    }
}

/// A parsed dump prints back to text that parses to the same dump, and
/// verification never panics.
pub fn epoch_dump(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(dump) = EpochDump::parse(text) else { return };
    let printed = dump.to_text();
    let again = EpochDump::parse(&printed).expect("printed dump parses");
    assert_eq!(again.to_text(), printed);
    if dump.epochs.len() <= 100_000 {
        let _ = verify(&dump);
    }
}
