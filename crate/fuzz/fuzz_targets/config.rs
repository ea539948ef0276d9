#![no_main]

//! Parsing never panics, and anything accepted survives a JSON round trip.

use libfuzzer_sys::fuzz_target;
use nosas::bench::parse_config;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = parse_config(text) {
        let json = serde_json::to_string(&cfg).expect("config serializes");
        assert_eq!(parse_config(&json).expect("round trip parses"), cfg);
    }
});
