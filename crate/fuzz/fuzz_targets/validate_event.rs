#![no_main]

use eventide::model::{validate_event, EventDefaults, IdGen, Source, Timestamp};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(raw) = serde_json::from_slice::<serde_json::Value>(data) else {
        return;
    };
    let ids = IdGen::new("evt");
    let defaults = EventDefaults {
        ids: &ids,
        now: Timestamp::new(1, 1),
        source: Source::Client,
    };
    if let Ok(e) = validate_event(&raw, &defaults) {
        assert!(!e.intent.trim().is_empty());
    }
});
