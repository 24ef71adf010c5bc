#![no_main]

use agentkit::Predicate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|src: &str| {
    if let Ok(p) = Predicate::parse(src) {
        let again = Predicate::parse(&p.to_string()).expect("display output parses");
        assert_eq!(p, again);
    }
});
