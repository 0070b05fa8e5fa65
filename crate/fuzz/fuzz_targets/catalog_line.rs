#![no_main]

use eventide::shopsim::{parse_catalog, parse_product_line, parse_task_line, parse_tasks};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_product_line(data);
    let _ = parse_task_line(data);
    let _ = parse_catalog(data);
    let _ = parse_tasks(data);
});
