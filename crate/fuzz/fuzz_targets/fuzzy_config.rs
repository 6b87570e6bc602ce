#![no_main]

use libfuzzer_sys::fuzz_target;

use binmatch::fuzzy::{sugeno_infer, FuzzyMatcherConfig};

fuzz_target!(|line: &str| {
    if let Ok(cfg) = line.parse::<FuzzyMatcherConfig>() {
        for d in [0.0, 12.5, 128.0, 256.0] {
            let y = sugeno_infer(&cfg, d).unwrap();
            assert!(y >= cfg.singleton_nomatch() && y <= cfg.singleton_match());
        }
    }
});
