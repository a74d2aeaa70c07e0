#![no_main]

use libfuzzer_sys::fuzz_target;
use steinkit_cli::config::{parse_kv_config, CONFIG_KEYS};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(map) = parse_kv_config(s) {
        assert!(map.keys().all(|k| CONFIG_KEYS.contains(&k.as_str())));
    }
});
