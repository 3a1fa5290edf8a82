#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_core::data::OverrideTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = OverrideTable::parse(data) {
        let mut out = Vec::new();
        table.write(&mut out).expect("parsed overrides re-serialise");
        let _ = OverrideTable::parse(out.as_slice()).expect("written overrides parse");
    }
});
