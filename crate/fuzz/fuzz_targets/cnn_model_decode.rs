#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::nn::{decode_model, encode_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_model(data) {
        // anything accepted must survive a round trip unchanged
        let bytes = encode_model(&model).expect("decoded model re-encodes");
        let again = decode_model(&bytes).expect("re-encoded model decodes");
        assert_eq!(encode_model(&again).unwrap(), bytes);
    }
});
