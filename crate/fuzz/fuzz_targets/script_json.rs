#![no_main]

use eventide::provider::Script;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = Script::from_json(data);
});
