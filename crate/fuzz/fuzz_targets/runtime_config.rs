#![no_main]

use eventide::runtime::RuntimeConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RuntimeConfig::from_toml_str(data) {
        let again = RuntimeConfig::from_toml_str(&cfg.to_toml_string()).expect("rendered config parses");
        assert_eq!(again.to_toml_string(), cfg.to_toml_string());
    }
});
