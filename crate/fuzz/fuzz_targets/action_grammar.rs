#![no_main]

use eventide::model::{parse_action, parse_pattern};
use libfuzzer_sys::fuzz_target;

// Anything accepted must render back to the trimmed input.
fuzz_target!(|data: &str| {
    if let Ok(a) = parse_action(data) {
        assert_eq!(a.render(), data.trim());
        assert_eq!(parse_action(&a.render()).unwrap(), a);
    }
    if let Ok(p) = parse_pattern(data) {
        assert_eq!(p.render(), data.trim());
    }
});
