#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // must never panic; on success the serialize/parse loop must close
        if let Ok(cfg) = stefan_core::config::parse_config(text) {
            let round = stefan_core::config::parse_config(&cfg.serialize())
                .expect("serialized config must reparse");
            assert_eq!(cfg, round);
        }
    }
});
