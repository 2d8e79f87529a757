//! Fuzz the value-surface grid parser: arbitrary bytes must either parse or
//! fail with an error — never panic, abort, or build an unusable grid.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mmktd::harness::GridSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = GridSpec::parse(text);
});
