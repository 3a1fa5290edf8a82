#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::data::{parse_labels_csv, write_labels_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_labels_csv(data) {
        let mut out = Vec::new();
        write_labels_csv(&rows, &mut out).expect("parsed labels re-serialise");
        assert_eq!(parse_labels_csv(out.as_slice()).expect("written labels parse"), rows);
    }
});
