#![no_main]

use cone_ot::convex_func::FunctionFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = FunctionFile::parse(text);
});
