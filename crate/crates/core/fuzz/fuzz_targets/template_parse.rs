#![no_main]

use agentkit::{PromptTemplate, ResponseTemplate};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|source: &str| {
    let _ = PromptTemplate::new(source).and_then(|t| t.render_text());
    let _ = ResponseTemplate::new(source);
});
