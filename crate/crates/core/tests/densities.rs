use std::path::Path;

use cone_ot::convex_geom::Polytope;
use cone_ot::densities::*;
use proptest::prelude::*;

fn square() -> Polytope {
    Polytope::cube(2, 0.5)
}

fn bilinear_table() -> DensityTable {
    // h(y) = 1 + y1 + 2 y2 + y1 y2 sampled on [-1, 1]^2.
    let (lo, hi, m) = (-1.0, 1.0, 5);
    let mut values = vec![];
    for i in 0..m {
        for j in 0..m {
            let (a, b) = (lo + (hi - lo) * i as f64 / (m - 1) as f64, lo + (hi - lo) * j as f64 / (m - 1) as f64);
            values.push(1.0 + a + 2.0 * b + a * b);
        }
    }
    DensityTable { lo: vec![lo; 2], hi: vec![hi; 2], shape: vec![m, m], values }
}

fn kinds() -> Vec<DensityKind> {
    vec![
        DensityKind::Lebesgue,
        DensityKind::Monomial(vec![2.0, 0.5]),
        DensityKind::BoundaryPower(1.5),
        DensityKind::Tabulated(bilinear_table()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_kind_is_homogeneous(t in 1e-3f64..1e3, a in -0.6f64..0.6, b in -0.6f64..0.6, h in 0.1f64..5.0, deg in 0.0f64..4.0) {
        for kind in kinds() {
            let d = HomogeneousDensity::new(deg, kind, square()).unwrap();
            let y = [a * h, b * h, h];
            let ty = [t * a * h, t * b * h, t * h];
            let base = d.eval_cone(&y).unwrap();
            let scaled = d.eval_cone(&ty).unwrap();
            prop_assert!((scaled - t.powf(deg) * base).abs() <= 1e-12 * scaled.abs().max(t.powf(deg) * base.abs()), "{scaled} vs {}", t.powf(deg) * base);
        }
    }

    #[test]
    fn link_density_is_nonnegative_and_vanishes_outside(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        for kind in kinds() {
            let d = HomogeneousDensity::new(0.0, kind, square()).unwrap();
            let h = d.link_eval(&[a, b]);
            prop_assert!(h >= 0.0 && h <= d.sup_link() * (1.0 + 1e-9) + 1e-12);
            if a.abs() > 0.5 + 1e-9 || b.abs() > 0.5 + 1e-9 {
                prop_assert_eq!(h, 0.0);
            }
        }
    }

    #[test]
    fn table_reproduces_bilinear_data(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let t = bilinear_table();
        let exact = 1.0 + a + 2.0 * b + a * b;
        prop_assert!((t.interpolate(&[a, b]) - exact.max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn apex_and_below_are_rejected() {
    let d = HomogeneousDensity::lebesgue(square());
    assert!(d.eval_cone(&[0.1, 0.1, 0.0]).is_err());
    assert!(d.eval_cone(&[0.1, 0.1, -1.0]).is_err());
}

#[test]
fn table_spec_resolves_relative_to_base() {
    let dir = std::env::temp_dir().join(format!("cone-ot-density-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("h.json"), serde_json::to_string(&bilinear_table()).unwrap()).unwrap();
    let spec: DensitySpec = serde_json::from_str(r#"{"degree": 1, "kind": {"table": "h.json"}}"#).unwrap();
    let d = spec.resolve(&dir, square()).unwrap();
    assert!((d.link_eval(&[0.25, -0.25]) - (1.0 + 0.25 - 0.5 - 0.0625)).abs() < 1e-12);
    assert!(spec.resolve(Path::new("/nonexistent"), square()).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn spec_rejects_unknown_fields_and_bad_exponents() {
    assert!(serde_json::from_str::<DensitySpec>(r#"{"degree": 0, "kind": "lebesgue", "extra": 1}"#).is_err());
    let spec: DensitySpec = serde_json::from_str(r#"{"degree": 0, "kind": {"monomial": [1, -1]}}"#).unwrap();
    assert!(spec.resolve(Path::new("."), square()).is_err());
    let spec: DensitySpec = serde_json::from_str(r#"{"degree": -1, "kind": "lebesgue"}"#).unwrap();
    assert!(spec.resolve(Path::new("."), square()).is_err());
}

#[test]
fn vanishing_at_a_single_vertex_is_localized() {
    let p = square();
    let corner = [0.5, 0.5];
    let h = |y: &[f64]| ((y[0] - corner[0]).powi(2) + (y[1] - corner[1]).powi(2)).min(1.0);
    let rep = check_vanishing_order(&h, &p, 1.0);
    assert!(!rep.passes);
    let at_corner = rep.orders.iter().find(|o| (o.0[0] - 0.5).abs() < 1e-12 && (o.0[1] - 0.5).abs() < 1e-12).unwrap();
    assert!((at_corner.1 - 2.0).abs() < 0.1, "{at_corner:?}");
    assert!(rep.orders.iter().filter(|o| o.0 != at_corner.0).all(|o| o.1 < 0.1), "{:?}", rep.orders);
}
