#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::bof::{decode_bof, encode_bof};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_bof(data) {
        let bytes = encode_bof(&model).expect("decoded model re-encodes");
        let again = decode_bof(&bytes).expect("re-encoded model decodes");
        assert_eq!(encode_bof(&again).unwrap(), bytes);
    }
});
