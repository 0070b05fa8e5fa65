#![no_main]

use eventide::decision::{parse_dispatch_reply, DispatchChoice};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let n = usize::from(n % 8);
    if let Ok(DispatchChoice::Index(i)) = parse_dispatch_reply(text, n) {
        assert!(i < n);
    }
});
