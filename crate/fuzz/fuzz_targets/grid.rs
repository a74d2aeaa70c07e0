#![no_main]

use libfuzzer_sys::fuzz_target;
use steinkit_cli::config::{parse_er_grid, parse_jack_grid};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(points) = parse_er_grid(s) {
        assert!(!points.is_empty());
    }
    if let Ok(points) = parse_jack_grid(s) {
        for p in points {
            assert!(p.alpha.value_f64(p.n) > 0.0);
        }
    }
});
