#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = binmatch::imageio::decode_netpbm(data) {
        assert_eq!(img.data().len(), img.width() * img.height());
        let again = binmatch::imageio::decode_netpbm(&binmatch::imageio::encode_pgm(&img)).unwrap();
        assert_eq!(again, img);
        if img.width() >= 5 && img.height() >= 5 {
            let _ = binmatch::imageio::box_smooth(&img);
        }
    }
});
