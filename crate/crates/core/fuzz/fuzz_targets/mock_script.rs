#![no_main]

use agentkit::MockScript;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = MockScript::from_json(text);
});
