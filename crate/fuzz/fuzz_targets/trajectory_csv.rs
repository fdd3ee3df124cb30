#![no_main]

use libfuzzer_sys::fuzz_target;
use twinmaser::integrate::parse_samples;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((names, rows)) = parse_samples::<3>(text) {
        assert_eq!(names.len(), 3);
        assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    }
    let _ = parse_samples::<6>(text);
});
