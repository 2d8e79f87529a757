//! Fuzz the agent-snapshot parser: arbitrary bytes must either parse into a
//! snapshot that re-serializes and re-parses cleanly, or fail with an error —
//! never panic or abort.

#![no_main]

use libfuzzer_sys::fuzz_target;
use mmktd::harness::AgentSnapshot;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(snapshot) = AgentSnapshot::parse(text) {
        let round = snapshot.serialize();
        let again = AgentSnapshot::parse(&round).expect("serialized snapshot must re-parse");
        assert_eq!(round, again.serialize(), "serialize must be a fixpoint");
    }
});
