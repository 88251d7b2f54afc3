#![no_main]

use cone_ot::convex_geom::{polar_dual, Polytope, PolytopeSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Hull construction is exponential in the dimension; keep inputs small.
    if data.len() > 4096 {
        return;
    }
    let Ok(spec) = serde_json::from_slice::<PolytopeSpec>(data) else {
        return;
    };
    if spec.dim > 3 || spec.vertices.len() > 64 {
        return;
    }
    if let Ok(p) = Polytope::from_spec(&spec) {
        let x = vec![1.0; p.dim];
        let _ = p.support(&x);
        let _ = polar_dual(&p);
    }
});
