#![no_main]

use eventide::memory::parse_context_reply;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_context_reply(data);
});
