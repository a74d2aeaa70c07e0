#![no_main]

use libfuzzer_sys::fuzz_target;
use steinkit_cli::config::parse_thresholds;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_thresholds(s);
});
