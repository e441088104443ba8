#![no_main]

use lagflow::config::{parse, BoosterConfig, ConeConfig, RegularizeConfig};
use lagflow::geometry::{cone_invariance_check, cone_slope, Booster};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = parse::<ConeConfig>(text) {
        if let Ok(sol) = cone_slope(c.delta1, c.delta2) {
            assert!(sol.tau >= 1.0);
            let _ = cone_invariance_check(&sol, 16, c.seed);
        }
    }
    if let Ok(b) = parse::<BoosterConfig>(text) {
        if b.k <= 1e6 {
            if let Ok(booster) = Booster::new(b.kind, b.k, b.tau, b.theta) {
                let _ = booster.value(1.0);
            }
        }
    }
    let _ = parse::<RegularizeConfig>(text);
});
