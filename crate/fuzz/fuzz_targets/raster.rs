#![no_main]

//! The raster parser either rejects the input or returns a rectangular
//! table of positive finite values.

use libfuzzer_sys::fuzz_target;
use nosas::mesh::parse_raster;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = parse_raster(data) {
        assert_eq!(r.values.len(), r.rows * r.cols);
        assert!(r.values.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
});
