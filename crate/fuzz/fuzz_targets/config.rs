#![no_main]

use std::path::Path;

use cone_ot_cli::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 8192 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        if cfg.source.dim <= 3 && cfg.source.vertices.len() <= 64 && cfg.target.vertices.len() <= 64 {
            // Table paths resolve against a directory that does not exist.
            let _ = cfg.resolve(Path::new("/nonexistent"));
        }
        let _ = cfg.hash();
    }
});
