#![no_main]

use agentkit::blocks::parse_plan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|reply: &str| {
    let _ = parse_plan(reply);
});
