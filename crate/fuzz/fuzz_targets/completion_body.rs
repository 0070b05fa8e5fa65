#![no_main]

use eventide::provider::parse_completion_body;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_completion_body(data);
});
