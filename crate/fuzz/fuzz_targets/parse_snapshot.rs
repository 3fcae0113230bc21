#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = stefan_core::emit::parse_snapshot(text) {
            // accepted snapshots expose a consistent tiling
            assert_eq!(grid.theta.len(), grid.s.len() * grid.r.len());
            assert!(!grid.s.is_empty() && !grid.r.is_empty());
        }
    }
});
