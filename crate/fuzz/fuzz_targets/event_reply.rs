#![no_main]

use eventide::pipeline::parse_event_reply;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_event_reply(data);
});
