#![no_main]

use lagflow::config::{parse, FlowConfig};
use lagflow::flow::InitialData;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse::<FlowConfig>(text) else {
        return;
    };
    let again = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse::<FlowConfig>(&again).unwrap(), cfg);
    let Ok(domain) = cfg.domain.build() else {
        return;
    };
    // keep sampling cheap; csv data would touch the filesystem
    if domain.node_count() > 4096 || matches!(cfg.initial, InitialData::Csv { .. }) {
        return;
    }
    if let InitialData::RandomFourier { max_wavenumber, .. } = cfg.initial {
        if max_wavenumber > 16 {
            return;
        }
    }
    if cfg.initial.validate(&domain).is_ok() {
        let _ = cfg.initial.sample(&domain, cfg.seed);
    }
});
