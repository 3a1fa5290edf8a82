#![no_main]

use libfuzzer_sys::fuzz_target;
use pnkit_cli::{parse_config_str, CliConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = parse_config_str(text) {
            if let Ok(cfg) = CliConfig::from_file(&file) {
                let _ = cfg.finish();
            }
        }
    }
});
