#![no_main]

use agentkit::llm::parse_recording;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_recording(text);
});
