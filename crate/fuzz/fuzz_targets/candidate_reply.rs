#![no_main]

use eventide::decision::parse_candidate_reply;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_candidate_reply(data);
});
