#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(snap) = stefan_core::emit::parse_interface_snapshot(text) {
            let n = snap.s.len();
            assert!(n > 0);
            assert_eq!(snap.h.len(), n);
            assert_eq!(snap.curvature.len(), n);
            assert_eq!(snap.beta.len(), n);
            assert_eq!(snap.v.len(), n);
        }
    }
});
