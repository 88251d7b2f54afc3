#![no_main]

use cone_ot::densities::DensityTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = DensityTable::parse(text) {
        let d = t.lo.len();
        for probe in [0.0, 0.5, -3.0, 1e300] {
            let _ = t.interpolate(&vec![probe; d]);
        }
        let _ = t.interpolate(&t.hi);
    }
});
