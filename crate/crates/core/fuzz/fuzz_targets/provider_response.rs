#![no_main]

use agentkit::llm::{parse_gemini_response, parse_openai_response};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_openai_response(text);
    let _ = parse_gemini_response(text);
});
