#![no_main]

use libfuzzer_sys::fuzz_target;
use twinmaser::cycles::parse_branch_jsonl;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_branch_jsonl(text) {
        assert!(records.iter().all(|r| r.tau > 0.0 && r.tau.is_finite()));
    }
});
