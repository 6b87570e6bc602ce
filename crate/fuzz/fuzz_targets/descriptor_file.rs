#![no_main]

use libfuzzer_sys::fuzz_target;

use binmatch::features::{decode_descriptors, encode_descriptors};

fuzz_target!(|data: &[u8]| {
    if let Ok((kps, descs)) = decode_descriptors(data) {
        assert_eq!(kps.len(), descs.len());
        assert_eq!(encode_descriptors(&kps, &descs).unwrap(), data);
    }
});
