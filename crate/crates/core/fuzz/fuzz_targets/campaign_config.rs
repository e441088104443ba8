#![no_main]

use lagflow::config::{parse, VerifyConfig};
use lagflow::inequality::{run_campaign, CampaignConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = serde_json::from_str::<CampaignConfig>(text) {
        let back: CampaignConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
    let Ok(mut cfg) = parse::<VerifyConfig>(text) else {
        return;
    };
    cfg.campaign.samples = cfg.campaign.samples.min(8);
    cfg.campaign.box_half_width = cfg.campaign.box_half_width.map(|b| b.min(1e6));
    let _ = run_campaign(&cfg.campaign);
});
