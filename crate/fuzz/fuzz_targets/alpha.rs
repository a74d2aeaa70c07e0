#![no_main]

use libfuzzer_sys::fuzz_target;
use num_traits::Signed;
use steinkit::jack_model::parse_alpha;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = parse_alpha(s) {
        assert!(a.is_positive());
        assert_eq!(parse_alpha(&a.to_string()).unwrap(), a);
    }
});
