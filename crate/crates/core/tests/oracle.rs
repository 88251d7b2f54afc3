use std::sync::Arc;

use cone_ot::convex_func::DiscreteConvexFunction;
use cone_ot::convex_geom::{ConeSpec, Polytope};
use cone_ot::densities::{DensityKind, HomogeneousDensity};
use cone_ot::homogenization::{fd_gradient, fd_hessian};
use cone_ot::mesh::SimplexMesh;
use cone_ot::oracle::*;
use cone_ot::Error;
use proptest::prelude::*;

fn square() -> Polytope {
    Polytope::cube(2, 0.5)
}

fn leb(p: &Polytope) -> HomogeneousDensity {
    HomogeneousDensity::lebesgue(p.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_closed_form_derivatives(a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let r = IdentityReference { n: 2 };
        let y = [a, b];
        let f = |z: &[f64]| r.eval(z);
        let g = fd_gradient(&f, &y, 1e-5);
        for (x, e) in g.iter().zip(r.gradient(&y)) {
            prop_assert!((x - e).abs() <= 1e-9);
        }
        let det = fd_hessian(&f, &y, 1e-4).determinant();
        prop_assert!((det - r.hessian_det(&y)).abs() <= 1e-6 * r.hessian_det(&y), "{det} vs {}", r.hessian_det(&y));
    }
}

#[test]
fn identity_reference_requires_matching_data() {
    let p = square();
    let g = leb(&p);
    assert!(identity_reference(&p, &ConeSpec::compact(p.clone()), &g, &g).is_ok());
    let other = p.scale(1.1);
    assert!(matches!(identity_reference(&p, &ConeSpec::compact(other.clone()), &g, &leb(&other)), Err(Error::ConfigMismatch(_))));
    assert!(matches!(identity_reference(&p, &ConeSpec::compact(p.clone()), &g, &g.clone().with_degree(1.0)), Err(Error::ConfigMismatch(_))));
    let mono = HomogeneousDensity::new(0.0, DensityKind::Monomial(vec![1.0, 0.0]), p.clone()).unwrap();
    assert!(matches!(identity_reference(&p, &ConeSpec::compact(p.clone()), &mono, &g), Err(Error::ConfigMismatch(_))));
    let factor = Polytope::interval(-0.5, 0.5);
    assert!(matches!(identity_reference(&p, &ConeSpec::split(factor, 2).unwrap(), &g, &g), Err(Error::ConfigMismatch(_))));
}

#[test]
fn shooting_on_symmetric_data_is_even() {
    let p = Polytope::interval(-0.4, 0.4);
    let s = Polytope::interval(-0.7, 0.7);
    let gs = leb(&s).with_degree(1.0);
    let sol = shoot_1d(&p, &s, &leb(&p), &gs, &ShootOptions::default()).unwrap();
    assert!(sol.dv0.abs() <= 1e-8, "{}", sol.dv0);
    for y in [0.05, 0.13, 0.29, 0.4] {
        assert!((sol.eval(y) - sol.eval(-y)).abs() <= 1e-8 * sol.v0, "{y}");
    }
}

#[test]
fn shooting_reproduces_the_identity() {
    let p = Polytope::interval(-0.5, 0.5);
    let sol = shoot_1d(&p, &p, &leb(&p), &leb(&p), &ShootOptions::default()).unwrap();
    let r = IdentityReference { n: 1 };
    // Solutions are determined up to scale.
    let c = sol.v0 / r.eval(&[0.0]);
    for k in 0..=20 {
        let y = -0.5 + k as f64 / 20.0;
        assert!((sol.eval(y) / (c * r.eval(&[y])) - 1.0).abs() <= 1e-8, "y = {y}");
    }
}

#[test]
fn shooting_converges_at_fourth_order() {
    let p = Polytope::interval(-0.4, 0.6);
    let s = Polytope::interval(-0.5, 0.7);
    let order = shooting_order(&p, &s, &leb(&p), &leb(&s).with_degree(1.0), 20).unwrap();
    assert!(order >= 3.8, "{order}");
}

fn grid_function(f: impl Fn(&[f64]) -> f64) -> DiscreteConvexFunction {
    let mesh = Arc::new(SimplexMesh::on_polytope(&square(), 9).unwrap());
    DiscreteConvexFunction::from_fn(mesh, square(), f)
}

#[test]
fn paraboloid_has_unit_monge_ampere_density() {
    let v = grid_function(|y| 1.0 + 0.5 * (y[0] * y[0] + y[1] * y[1]));
    let one = |_: &[f64], _: f64, _: &[f64]| 1.0;
    let rep = ma_measure_check(&v, &one, None, false).unwrap();
    assert_eq!(rep.compared, 49);
    for d in rep.discrepancy.iter().flatten() {
        assert!(*d <= 1e-12, "{d}");
    }
    // Subdifferentials of distinct nodes only meet in null sets.
    assert!((rep.total_measure - 49.0 / 64.0).abs() <= 1e-12);
}

#[test]
fn cone_concentrates_its_measure_at_the_apex() {
    let v = grid_function(|y| 1.0 + y[0].abs().max(y[1].abs()));
    let one = |_: &[f64], _: f64, _: &[f64]| 1.0;
    let rep = ma_measure_check(&v, &one, None, false).unwrap();
    let apex = v.mesh.points.iter().position(|y| y[0].abs() < 1e-12 && y[1].abs() < 1e-12).unwrap();
    assert!((rep.measure[apex].unwrap() - 2.0).abs() <= 1e-12);
    for (i, m) in rep.measure.iter().enumerate() {
        if i != apex {
            assert!(m.is_none_or(|m| m <= 1e-12), "node {i}: {m:?}");
        }
    }
    assert!((rep.total_measure - 2.0).abs() <= 1e-12);
}
