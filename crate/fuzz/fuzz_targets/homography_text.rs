#![no_main]

use libfuzzer_sys::fuzz_target;

use binmatch::geometry::{parse_homography, Point};

fuzz_target!(|text: &str| {
    if let Ok(h) = parse_homography(text) {
        let _ = h.apply(&Point::new(1.0, 2.0));
        let _ = h.inverse();
    }
});
