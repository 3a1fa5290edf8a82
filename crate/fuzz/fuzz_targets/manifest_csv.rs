#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::data::{parse_manifest, write_manifest};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_manifest(data) {
        let mut out = Vec::new();
        write_manifest(&rows, &mut out).expect("parsed manifest re-serialises");
        let _ = parse_manifest(out.as_slice()).expect("written manifest parses");
    }
});
