#![no_main]

use agentkit::ResponseTemplate;
use libfuzzer_sys::fuzz_target;

// First line is the template, the rest is the reply.
fuzz_target!(|data: &str| {
    let (source, reply) = data.split_once('\n').unwrap_or((data, ""));
    if let Ok(mut t) = ResponseTemplate::new(source) {
        let _ = t.infer_bindings(reply);
    }
});
