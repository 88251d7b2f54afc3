use std::sync::Arc;

use cone_ot::convex_func::DiscreteConvexFunction;
use cone_ot::convex_geom::{ConeSpec, Polytope};
use cone_ot::densities::{DensityKind, HomogeneousDensity};
use cone_ot::energy::*;
use cone_ot::mesh::SimplexMesh;
use cone_ot::numeric::{dot, golden_section_polished};
use cone_ot::Error;
use proptest::prelude::*;

fn pentagon() -> Polytope {
    Polytope::from_vertices(2, vec![vec![0.3, 0.0], vec![0.1, 0.25], vec![-0.2, 0.2], vec![-0.25, -0.15], vec![0.05, -0.25]]).unwrap()
}

fn triangle() -> Polytope {
    Polytope::from_vertices(2, vec![vec![0.8, -0.2], vec![-0.3, 0.7], vec![-0.4, -0.6]]).unwrap()
}

fn model(beta: f64) -> (EnergyModel, Arc<SimplexMesh>) {
    let p = pentagon();
    let mesh = Arc::new(SimplexMesh::on_polytope(&p, 9).unwrap());
    let g_p = HomogeneousDensity::new(0.5, DensityKind::Monomial(vec![0.0, 0.0]), p).unwrap();
    let g_s = HomogeneousDensity::lebesgue(triangle()).with_degree(beta);
    (EnergyModel::new(ConeSpec::compact(triangle()), g_p, g_s, default_dual_nodes(2, 9)).unwrap(), mesh)
}

/// Positive convex function: quadratic plus a facet-like ridge.
fn sample(mesh: &Arc<SimplexMesh>, a: f64, c: f64, t: [f64; 2], ridge: f64) -> DiscreteConvexFunction {
    DiscreteConvexFunction::from_fn(mesh.clone(), pentagon(), move |y| {
        1.0 + a * y[0] * y[0] + c * y[1] * y[1] + t[0] * y[0] + t[1] * y[1] + ridge * (y[0] - y[1]).abs()
    })
}

fn params() -> impl Strategy<Value = (f64, f64, [f64; 2], f64)> {
    (0.1f64..2.0, 0.1f64..2.0, -0.5f64..0.5, -0.5f64..0.5, 0.0f64..0.5).prop_map(|(a, c, t0, t1, r)| (a, c, [t0, t1], r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn functionals_obey_scaling_laws((a, c, t, r) in params(), beta in 0.0f64..2.0, s in 0.25f64..4.0) {
        let (m, mesh) = model(beta);
        let v = sample(&mesh, a, c, t, r);
        let rep = m.energy(&v).unwrap();
        prop_assert!(rep.i > 0.0 && rep.j > 0.0);
        let scaled = m.energy(&v.scaled(s)).unwrap();
        let deg_i = 3.0 + beta;
        let tol_i = 2.0 * rep.i_error_estimate * s.powf(deg_i) + 1e-10 * scaled.i;
        let tol_j = 2.0 * rep.j_error_estimate * s.powf(-m.m()) + 1e-12 * scaled.j;
        prop_assert!((scaled.i - s.powf(deg_i) * rep.i).abs() <= tol_i, "I: {} vs {}", scaled.i, s.powf(deg_i) * rep.i);
        prop_assert!((scaled.j - s.powf(-m.m()) * rep.j).abs() <= tol_j, "J: {} vs {}", scaled.j, s.powf(-m.m()) * rep.j);
        prop_assert!((scaled.e - m.profile(&rep, s)).abs() <= 2.0 * rep.quadrature_error_estimate + 1e-10);
    }

    #[test]
    fn t_star_minimizes_the_ray((a, c, t, r) in params(), beta in 0.0f64..2.0) {
        let (m, mesh) = model(beta);
        let v = sample(&mesh, a, c, t, r);
        let rep = m.energy(&v).unwrap();
        let tg = golden_section_polished(|s| m.profile(&rep, s), 1e-2 * rep.t_star, 1e2 * rep.t_star, 1e-12);
        prop_assert!((tg - rep.t_star).abs() <= 1e-8 * rep.t_star, "{tg} vs {}", rep.t_star);
        let best = m.profile(&rep, rep.t_star);
        prop_assert!(m.profile(&rep, 1e-3) >= best + 5.0 && m.profile(&rep, 1e3) >= best + 5.0);
    }

    #[test]
    fn variation_along_the_ray((a, c, t, r) in params(), beta in 0.0f64..2.0) {
        // d/ds E(s v) at s = 1 equals J^{-1/m} - (n+1+β).
        let (m, mesh) = model(beta);
        let v = sample(&mesh, a, c, t, r);
        let rep = m.energy(&v).unwrap();
        let dv = m.first_variation(&v, &v.values).unwrap();
        let expect = rep.j.powf(-1.0 / m.m()) - (3.0 + beta);
        // I is homogeneous only up to quadrature error.
        let tol = 1e-8 + 3.0 * (3.0 + beta) * rep.i_error_estimate / rep.i;
        prop_assert!((dv - expect).abs() <= tol, "{dv} vs {expect}, tol {tol}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let (m, mesh) = model(1.0);
    let bases = [sample(&mesh, 1.0, 0.5, [0.1, -0.2], 0.0), sample(&mesh, 0.3, 1.5, [0.0, 0.3], 0.3), sample(&mesh, 2.0, 2.0, [-0.4, 0.1], 0.1)];
    let mut rng = 0x2545f4914f6cdd1du64;
    let mut uniform = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for v in &bases {
        let g = m.evaluate(v, true).unwrap().gradient.unwrap();
        for _ in 0..20 {
            let dir: Vec<f64> = (0..v.values.len()).map(|_| uniform()).collect();
            let eps = 1e-5;
            let shift = |s: f64| v.with_values(v.values.iter().zip(&dir).map(|(x, d)| x + s * d).collect());
            let fd = (m.evaluate(&shift(eps), false).unwrap().report.e - m.evaluate(&shift(-eps), false).unwrap().report.e) / (2.0 * eps);
            let an = dot(&g, &dir);
            assert!((an - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "{an} vs {fd}");
        }
    }
}

#[test]
fn nonpositive_functions_are_rejected() {
    let (m, mesh) = model(0.0);
    let v = sample(&mesh, 1.0, 1.0, [0.0, 0.0], 0.0);
    let shifted = v.with_values(v.values.iter().map(|x| x - 1.05).collect());
    assert!(matches!(m.energy(&shifted), Err(Error::EnergyUndefined(_))));
    let zero = v.with_values(vec![0.0; v.values.len()]);
    assert!(matches!(m.energy(&zero), Err(Error::EnergyUndefined(_))));
}

#[test]
fn kernel_is_increasing_and_homogeneous() {
    let sigma = ConeSpec::compact(triangle());
    for beta in [0.0, 0.5, 2.0] {
        let g = HomogeneousDensity::lebesgue(triangle()).with_degree(beta);
        let x = [0.2, -0.1];
        let mut prev = 0.0;
        for s in [0.1, 0.5, 1.0, 3.0] {
            let k = kernel_k(&x, s, &sigma, &g).unwrap();
            assert!(k > prev);
            prev = k;
            let tx = [2.0 * x[0], 2.0 * x[1]];
            let kt = kernel_k(&tx, 2.0 * s, &sigma, &g).unwrap();
            assert!((kt - 2f64.powf(1.0 + beta) * k).abs() <= 1e-12 * kt, "{kt} vs {k}");
        }
    }
}
