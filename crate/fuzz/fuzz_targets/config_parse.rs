#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| rmfs_core::fuzz_checks::config_parse(data));
