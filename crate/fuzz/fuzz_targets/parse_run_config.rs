//! Fuzz the run-configuration parser: arbitrary bytes must either parse into
//! a config that re-serializes and re-parses cleanly, or fail with an error —
//! never panic or abort.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mmktd::harness::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        let round = cfg.serialize();
        let again = RunConfig::parse(&round).expect("serialized config must re-parse");
        assert_eq!(round, again.serialize(), "serialize must be a fixpoint");
    }
});
