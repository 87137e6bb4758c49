#![no_main]

use dcsim::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ScenarioConfig::from_toml_str(text) else { return };
    // validation may reject, but must not panic
    if dcsim::harness::validate(&cfg).is_ok() {
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).expect("re-parse");
        assert_eq!(back, cfg);
    }
});
