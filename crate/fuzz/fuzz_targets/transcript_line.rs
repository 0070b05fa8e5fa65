#![no_main]

use eventide::runtime::parse_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(r) = parse_line(data) {
        let line = r.to_line();
        assert_eq!(parse_line(&line).unwrap().to_line(), line);
    }
});
