use std::sync::Arc;

use cone_ot::convex_func::DiscreteConvexFunction;
use cone_ot::convex_geom::{ConeSpec, Polytope};
use cone_ot::densities::HomogeneousDensity;
use cone_ot::energy::{default_dual_nodes, EnergyModel};
use cone_ot::homogenization::*;
use cone_ot::mesh::SimplexMesh;
use cone_ot::oracle::identity_reference;
use cone_ot::Error;
use proptest::prelude::*;

fn square() -> Polytope {
    Polytope::cube(2, 0.5)
}

struct Identity {
    p: Polytope,
    sigma: ConeSpec,
    g: HomogeneousDensity,
}

fn identity_problem() -> Identity {
    Identity { p: square(), sigma: ConeSpec::compact(square()), g: HomogeneousDensity::lebesgue(square()) }
}

fn identity_on(nodes: usize) -> (Identity, DiscreteConvexFunction) {
    let pr = identity_problem();
    let r = identity_reference(&pr.p, &pr.sigma, &pr.g, &pr.g).unwrap();
    let mesh = Arc::new(SimplexMesh::on_polytope(&pr.p, nodes).unwrap());
    let v = DiscreteConvexFunction::from_fn(mesh, pr.p.clone(), |y| r.eval(y));
    (pr, v)
}

fn quadratic_v(a: f64, c: f64, b: f64) -> impl Fn(&[f64]) -> f64 + Sync + Copy {
    move |y: &[f64]| 1.0 + a * y[0] * y[0] + c * y[1] * y[1] + b * y[0]
}

/// Cone point over the link point `(a, b)` of the square at height `h`.
fn cone_point(a: f64, b: f64, h: f64) -> Vec<f64> {
    vec![a * h, b * h, h]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_is_homogeneous(a in -0.5f64..0.5, b in -0.5f64..0.5, h in 0.1f64..3.0, t in 1e-2f64..1e2, alpha in 0.0f64..2.0, beta in 0.0f64..2.0) {
        let (_, v) = identity_on(9);
        let sol = lift(&v, alpha, beta).unwrap();
        let y = cone_point(a, b, h);
        let ty: Vec<f64> = y.iter().map(|c| t * c).collect();
        let (f, ft) = (sol.phi(&y).unwrap(), sol.phi(&ty).unwrap());
        let expect = t.powf(sol.exponent()) * f;
        prop_assert!((ft - expect).abs() <= 1e-12 * expect, "{ft} vs {expect}");
    }

    #[test]
    fn identity_lifts_to_half_square_norm(a in -0.5f64..0.5, b in -0.5f64..0.5, h in 0.1f64..3.0) {
        let pr = identity_problem();
        let r = identity_reference(&pr.p, &pr.sigma, &pr.g, &pr.g).unwrap();
        let y = cone_point(a, b, h);
        let l = lift_value(&|z| r.eval(z), 1.0 + gamma(2, 0.0, 0.0), &y).unwrap();
        let exact = 0.5 * y.iter().map(|c| c * c).sum::<f64>();
        prop_assert!((l - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn lift_is_convex_along_segments(p0 in (-0.5f64..0.5, -0.5f64..0.5, 0.2f64..2.0), p1 in (-0.5f64..0.5, -0.5f64..0.5, 0.2f64..2.0), alpha in 0.0f64..2.0, beta in 0.0f64..2.0, s in 0.0f64..1.0) {
        let pr = identity_problem();
        let mesh = Arc::new(SimplexMesh::on_polytope(&pr.p, 9).unwrap());
        let v = DiscreteConvexFunction::from_fn(mesh, pr.p, quadratic_v(0.7, 1.3, 0.2));
        let sol = lift(&v, alpha, beta).unwrap();
        let (y0, y1) = (cone_point(p0.0, p0.1, p0.2), cone_point(p1.0, p1.1, p1.2));
        let ys: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        let (f0, f1, fs) = (sol.phi(&y0).unwrap(), sol.phi(&y1).unwrap(), sol.phi(&ys).unwrap());
        prop_assert!(fs <= (1.0 - s) * f0 + s * f1 + 1e-12 * (f0 + f1), "{fs} > {}", (1.0 - s) * f0 + s * f1);
    }
}

#[test]
fn determinant_identity_on_analytic_functions() {
    let samples: Vec<Vec<f64>> = (0..5).flat_map(|i| (0..5).map(move |j| cone_point(-0.4 + 0.2 * i as f64, -0.4 + 0.2 * j as f64, 0.5 + 0.3 * ((i + j) % 3) as f64))).collect();
    let f1 = quadratic_v(0.7, 1.3, 0.2);
    let f2 = |y: &[f64]| ((1.0 + y[0] * y[0] + y[1] * y[1]) / 2.0).sqrt();
    let f3 = |y: &[f64]| (0.5 * y[0] - 0.2 * y[1]).exp() + 0.3 * y[1] * y[1];
    let fns: [&(dyn Fn(&[f64]) -> f64 + Sync); 3] = [&f1, &f2, &f3];
    for (k, f) in fns.iter().enumerate() {
        for p in [1.5, 2.0, 2.0 + 1.0 / 3.0] {
            let rep = check_det_identity(*f, p, &samples, 1e-3);
            assert_eq!(rep.checked, samples.len());
            assert!(rep.max_rel_error <= 1e-5, "function {k}, p = {p}: {}", rep.max_rel_error);
        }
        // One-homogeneous lift: both sides vanish.
        let rep = check_det_identity(*f, 1.0, &samples, 1e-3);
        assert!(rep.max_rhs == 0.0 && rep.max_lhs <= 1e-4 * (1.0 + rep.max_rhs), "function {k}: {rep:?}");
    }
}

#[test]
fn phi_rejects_points_outside_the_cone() {
    let (_, v) = identity_on(9);
    let sol = lift(&v, 0.0, 0.0).unwrap();
    assert!(matches!(sol.phi(&[0.0, 0.0, 0.0]), Err(Error::OutsideCone)));
    assert!(matches!(sol.phi(&[0.0, 0.0, -1.0]), Err(Error::OutsideCone)));
    assert!(matches!(sol.phi(&[0.9, 0.0, 1.0]), Err(Error::OutsideCone)));
    assert!(sol.phi(&[0.0, 0.0]).is_err());
    let neg = v.with_values(vec![-1.0; v.values.len()]);
    assert!(lift(&neg, 0.0, 0.0).is_err());
}

#[test]
fn transport_residuals_separate_solution_from_perturbation() {
    let (pr, v) = identity_on(17);
    let opts = TransportOptions::default();
    let good = verify_transport(&lift(&v, 0.0, 0.0).unwrap(), &pr.sigma, &pr.g, &pr.g, &opts).unwrap();
    // Both boundary formulations measure the same thing.
    let (b, bl) = (good.boundary.p95, good.boundary_link.p95);
    assert!(b <= 2.0 * bl + 1e-12 && bl <= 2.0 * b + 1e-12, "{b} vs {bl}");
    let bent = v.with_values(v.mesh.points.iter().zip(&v.values).map(|(y, x)| x * (1.0 + 0.3 * y[0] * y[0])).collect());
    let bad = verify_transport(&lift(&bent, 0.0, 0.0).unwrap(), &pr.sigma, &pr.g, &pr.g, &opts).unwrap();
    assert!(bad.interior.p95 >= 10.0 * good.interior.p95, "{} vs {}", bad.interior.p95, good.interior.p95);
}

#[test]
fn transport_residuals_ignore_overall_scale() {
    let (pr, v) = identity_on(17);
    let opts = TransportOptions::default();
    let a = verify_transport(&lift(&v, 0.0, 0.0).unwrap(), &pr.sigma, &pr.g, &pr.g, &opts).unwrap();
    let b = verify_transport(&lift(&v.scaled(3.0), 0.0, 0.0).unwrap(), &pr.sigma, &pr.g, &pr.g, &opts).unwrap();
    for (x, y) in [(a.interior.p95, b.interior.p95), (a.boundary.p95, b.boundary.p95), (a.interior.max, b.interior.max)] {
        assert!((x - y).abs() <= 1e-6 * x.max(1e-12), "{x} vs {y}");
    }
}

#[test]
fn pushforward_error_decreases_under_refinement() {
    let tv = |nodes: usize| {
        let (pr, v) = identity_on(nodes);
        let model = EnergyModel::new(pr.sigma, pr.g.clone(), pr.g, default_dual_nodes(2, nodes)).unwrap();
        pushforward_check(&model, &v, 8).unwrap().tv
    };
    let (coarse, fine) = (tv(9), tv(17));
    assert!(fine < coarse, "{fine} vs {coarse}");
}
