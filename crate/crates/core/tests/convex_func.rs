use std::sync::Arc;

use cone_ot::convex_func::*;
use cone_ot::convex_geom::{ConeSpec, Polytope};
use cone_ot::densities::{DensityKind, HomogeneousDensity};
use cone_ot::mesh::SimplexMesh;
use cone_ot::minimizer::{minimize_partial, Mode, SolveConfig};
use cone_ot::numeric::dot;
use proptest::prelude::*;

fn pentagon() -> Polytope {
    Polytope::from_vertices(2, vec![vec![0.6, 0.0], vec![0.2, 0.5], vec![-0.4, 0.4], vec![-0.5, -0.3], vec![0.1, -0.5]]).unwrap()
}

fn setup(nodes: usize) -> (Arc<SimplexMesh>, Polytope) {
    let p = pentagon();
    (Arc::new(SimplexMesh::on_polytope(&p, nodes).unwrap()), p)
}

/// Convex quadratic plus tilt, positive on the pentagon.
fn quadratic(a: f64, b: f64, c: f64, t: [f64; 2]) -> impl Fn(&[f64]) -> f64 {
    move |y: &[f64]| 2.0 + a * y[0] * y[0] + 2.0 * b * y[0] * y[1] + c * y[1] * y[1] + t[0] * y[0] + t[1] * y[1]
}

fn quad_params() -> impl Strategy<Value = (f64, f64, f64, [f64; 2])> {
    (0.1f64..3.0, -0.9f64..0.9, 0.1f64..3.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, r, c, t0, t1)| (a, r * (a * c).sqrt(), c, [t0, t1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn biconjugate_is_a_fixed_point((a, b, c, t) in quad_params(), noise in prop::collection::vec(-0.05f64..0.05, 400)) {
        let (mesh, p) = setup(13);
        let f = quadratic(a, b, c, t);
        let raw: Vec<f64> = mesh.points.iter().enumerate().map(|(i, y)| f(y) + noise[i % noise.len()]).collect();
        let v = convexify(mesh.clone(), p, &raw);
        let env = lower_envelope(&mesh, &v.values);
        // Slopes of the supporting planes are where v** attains its values.
        let mut slopes: Vec<Vec<f64>> = (0..mesh.simplices.len()).map(|s| v.simplex_gradient(s)).collect();
        slopes.extend(env.slopes.iter().cloned());
        let u: Vec<f64> = slopes.iter().map(|x| v.conjugate_at(x).0).collect();
        for (i, y) in mesh.points.iter().enumerate() {
            let vss = slopes.iter().zip(&u).map(|(x, ux)| dot(x, y) - ux).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((vss - v.values[i]).abs() <= 1e-10, "node {i}: {vss} vs {}", v.values[i]);
        }
    }

    #[test]
    fn fenchel_young_holds_with_equality_on_subgradients((a, b, c, t) in quad_params(), x in prop::collection::vec(-4.0f64..4.0, 2)) {
        let (mesh, p) = setup(11);
        let v = DiscreteConvexFunction::from_fn(mesh.clone(), p, quadratic(a, b, c, t));
        let v = convexify(mesh.clone(), v.domain.clone(), &v.values);
        let (ux, _) = v.conjugate_at(&x);
        for (y, vy) in mesh.points.iter().zip(&v.values) {
            prop_assert!(ux + vy >= dot(&x, y) - 1e-12);
        }
        let env = lower_envelope(&mesh, &v.values);
        for (i, g) in env.slopes.iter().enumerate() {
            let (ug, _) = v.conjugate_at(g);
            prop_assert!((ug + v.values[i] - dot(g, &mesh.points[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn supporting_slopes_are_monotone((a, b, c, t) in quad_params(), noise in prop::collection::vec(-0.05f64..0.05, 200)) {
        let (mesh, p) = setup(11);
        let f = quadratic(a, b, c, t);
        let raw: Vec<f64> = mesh.points.iter().enumerate().map(|(i, y)| f(y) + noise[i % noise.len()]).collect();
        let v = convexify(mesh.clone(), p, &raw);
        let env = lower_envelope(&mesh, &v.values);
        let y = &mesh.points;
        for i in 0..y.len() {
            for j in 0..i {
                let ip: f64 = (0..2).map(|k| (env.slopes[i][k] - env.slopes[j][k]) * (y[i][k] - y[j][k])).sum();
                prop_assert!(ip >= -1e-10, "nodes {i}, {j}: {ip}");
            }
        }
    }

    #[test]
    fn envelope_is_stable_under_noise((a, b, c, t) in quad_params(), eps in 1e-4f64..0.1, seed in prop::collection::vec(-1.0f64..1.0, 200)) {
        let (mesh, p) = setup(11);
        let f = quadratic(a, b, c, t);
        let clean: Vec<f64> = mesh.points.iter().map(|y| f(y)).collect();
        let clean = convexify(mesh.clone(), p.clone(), &clean);
        let noisy: Vec<f64> = clean.values.iter().enumerate().map(|(i, v)| v + eps * seed[i % seed.len()]).collect();
        let out = convexify(mesh.clone(), p, &noisy);
        prop_assert!(out.convexity_certificate(CONVEXITY_TOL).certified);
        for (i, (o, v)) in out.values.iter().zip(&clean.values).enumerate() {
            prop_assert!((o - v).abs() <= eps * (1.0 + 1e-9), "node {i}: {o} vs {v}, eps {eps}");
            prop_assert!(*o <= noisy[i] + 1e-12);
        }
    }
}

#[test]
fn constant_function_conjugates_to_shifted_support() {
    let (mesh, p) = setup(9);
    let v = DiscreteConvexFunction::from_fn(mesh, p.clone(), |_| 0.7);
    for x in [[1.0, 0.0], [-0.3, 2.0], [0.5, -0.5], [0.0, 0.0]] {
        assert!((v.conjugate_at(&x).0 - (p.support(&x) - 0.7)).abs() < 1e-12);
    }
}

#[test]
fn affine_function_has_constant_star() {
    let (mesh, p) = setup(9);
    let v = DiscreteConvexFunction::from_fn(mesh, p, |y| 1.5 + 0.3 * y[0] - 0.2 * y[1]);
    assert!(star_transform(&v).iter().all(|s| (s + 1.5).abs() < 1e-12));
}

#[test]
fn function_file_round_trips() {
    let (mesh, p) = setup(9);
    let v = DiscreteConvexFunction::from_fn(mesh, p, quadratic(1.0, 0.2, 0.5, [0.1, 0.0]));
    let text = serde_json::to_string(&v.to_file()).unwrap();
    let back = FunctionFile::parse(&text).unwrap();
    assert_eq!(v.values_from_file(&back).unwrap(), v.values);
    let mut moved = back.clone();
    moved.nodes[3][0] += 1e-3;
    assert!(v.values_from_file(&moved).is_err());
}

#[test]
fn gradient_projection_matches_the_slice() {
    // Split target [-1/2, 1/2] x R over the unit square: the gradients of the
    // boundary-normalized minimizer project onto Ω′.
    let p = Polytope::cube(2, 0.5);
    let factor = Polytope::interval(-0.5, 0.5);
    let sigma = ConeSpec::split(factor.clone(), 2).unwrap();
    let gp = HomogeneousDensity::new(0.0, DensityKind::BoundaryPower(1.0), p.clone()).unwrap();
    let gs = HomogeneousDensity::lebesgue(factor).with_degree(1.0);
    let cfg = SolveConfig { mode: Mode::Partial, mesh: 9, ..Default::default() };
    let b = minimize_partial(&p, &sigma, &gp, &gs, &cfg).unwrap();
    let polar = cone_ot::convex_geom::PolarSupport::new(&sigma).unwrap();
    let grid = dual_grid_for(&b.v, &polar, 129).unwrap();
    let pair = LegendrePair::build(&b.v, &grid, &polar);
    let fb = extract_free_boundary(&pair, &polar, Some(1)).unwrap();
    let slice = fb.omega_prime.expect("split target has a slice");
    let ends: Vec<f64> = slice.radial.iter().map(|(d, r)| d[0] * r).collect();
    let (lo, hi) = (ends.iter().copied().fold(f64::INFINITY, f64::min), ends.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let gy: Vec<f64> = (0..b.v.mesh.simplices.len()).map(|s| b.v.simplex_gradient(s)[1]).collect();
    let (glo, ghi) = (gy.iter().copied().fold(f64::INFINITY, f64::min), gy.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let cell = grid.spacing()[1];
    let mesh_slack = b.v.mesh.max_edge() * (ghi - glo);
    assert!((glo - lo).abs() <= cell + mesh_slack && (ghi - hi).abs() <= cell + mesh_slack, "gradients [{glo}, {ghi}] vs slice [{lo}, {hi}], cell {cell}");
}
