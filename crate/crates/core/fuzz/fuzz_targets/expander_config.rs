#![no_main]

use lagflow::config::{parse, ExpanderConfig};
use lagflow::expander::homogeneity_check;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse::<ExpanderConfig>(text) else {
        return;
    };
    let again = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse::<ExpanderConfig>(&again).unwrap(), cfg);
    let u0 = &cfg.expander.u0;
    let pts = [vec![1.0], vec![-0.5], vec![2.0]];
    let _ = homogeneity_check(|x| u0.eval(x), &pts, &[0.5, 2.0]);
});
