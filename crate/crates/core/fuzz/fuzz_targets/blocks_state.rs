#![no_main]

use agentkit::blocks::BlocksState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(state) = serde_json::from_str::<BlocksState>(text) {
        let _ = state.check();
        let _ = state.to_beliefs();
    }
});
