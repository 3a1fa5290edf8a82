#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::imagecore::decode_image;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        assert!(img.width() > 0 && img.height() > 0);
    }
});
