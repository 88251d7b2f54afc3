use cone_ot::convex_geom::*;
use cone_ot::Error;
use proptest::prelude::*;

/// Polygon with one vertex per angular sector, so the origin is interior.
fn polygon() -> impl Strategy<Value = Polytope> {
    (5usize..10).prop_flat_map(|k| prop::collection::vec((0.05f64..0.95, 0.3f64..2.0), k)).prop_map(|pts| {
        let k = pts.len() as f64;
        let verts = pts
            .iter()
            .enumerate()
            .map(|(i, (u, r))| {
                let a = std::f64::consts::TAU * (i as f64 + u) / k;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        Polytope::from_vertices(2, verts).unwrap()
    })
}

/// Cube with each corner pushed radially by its own factor.
fn solid() -> impl Strategy<Value = Polytope> {
    prop::collection::vec(0.5f64..1.5, 8).prop_map(|s| {
        let verts = (0..8)
            .map(|c| (0..3).map(|i| if c >> i & 1 == 1 { s[c] } else { -s[c] }).collect())
            .collect();
        Polytope::from_vertices(3, verts).unwrap()
    })
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn neg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|c| -c).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bipolar_is_an_involution_in_the_plane(k in polygon()) {
        let back = polar_dual(&polar_dual(&k).unwrap()).unwrap();
        prop_assert!(back.approx_eq(&k, 1e-9));
    }

    #[test]
    fn bipolar_is_an_involution_in_space(k in solid()) {
        let back = polar_dual(&polar_dual(&k).unwrap()).unwrap();
        prop_assert!(back.approx_eq(&k, 1e-9));
    }

    #[test]
    fn support_is_sublinear(k in polygon(), x in vector(2), y in vector(2), t in 0.0f64..10.0) {
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(support_function(&k, &s) <= support_function(&k, &x) + support_function(&k, &y) + 1e-12);
        let tx: Vec<f64> = x.iter().map(|c| t * c).collect();
        prop_assert!((support_function(&k, &tx) - t * support_function(&k, &x)).abs() <= 1e-12 * (1.0 + t));
    }

    #[test]
    fn minkowski_sum_adds_support_functions(p in polygon(), s in polygon(), x in vector(2)) {
        let polar = polar_dual(&s).unwrap();
        let mut sums = vec![];
        for a in &p.vertices {
            for b in &polar.vertices {
                sums.push(vec![a[0] + b[0], a[1] + b[1]]);
            }
        }
        let sum = Polytope::from_vertices(2, sums).unwrap();
        let lhs = sum.support(&x);
        let rhs = p.support(&x) + polar.support(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn obliqueness_formulations_agree(p in polygon(), s in polygon(), scale in 0.05f64..1.5) {
        let p = p.scale(scale);
        let rep = check_strong_obliqueness(&p, &s).unwrap();
        // −P ⊂ int Σ° and −Σ ⊂ int P°, through support functions.
        let a = p.vertices.iter().all(|y| s.support(&neg(y)) < 1.0);
        let b = s.vertices.iter().all(|x| p.support(&neg(x)) < 1.0);
        prop_assert_eq!(a, b);
        prop_assert_eq!(rep.mode == ObliquenessMode::Strong, a);
        prop_assert_eq!(rep.margin > 0.0, a);
    }

    #[test]
    fn roundness_radii_are_ordered(p in polygon(), s in polygon(), scale in 0.02f64..0.3) {
        let p = p.scale(scale);
        prop_assume!(check_strong_obliqueness(&p, &s).unwrap().mode == ObliquenessMode::Strong);
        let (r, big_r) = roundness_constants(&p, &s).unwrap();
        prop_assert!(r > 0.0 && r <= big_r, "r = {r}, R = {big_r}");
    }

    #[test]
    fn full_split_equals_strong(p in polygon(), s in polygon(), scale in 0.05f64..1.5) {
        let p = p.scale(scale);
        let strong = check_strong_obliqueness(&p, &s).unwrap();
        let partial = check_partial_obliqueness(&p, &ConeSpec::split(s.clone(), 2).unwrap()).unwrap();
        prop_assert_eq!(strong.mode, partial.mode);
        prop_assert_eq!(strong.margin, partial.margin);
        prop_assert!(strong.r == partial.r || (strong.r.is_nan() && partial.r.is_nan()));
    }

    #[test]
    fn john_translation_is_equivariant(k in polygon(), a in prop::collection::vec(-0.2f64..0.2, 2)) {
        let (t0, k0, _) = john_translate(&k).unwrap();
        let (t1, k1, _) = john_translate(&k.translate(&a)).unwrap();
        for i in 0..2 {
            prop_assert!((t1[i] - t0[i] - a[i]).abs() < 1e-6, "{t0:?} {t1:?} {a:?}");
        }
        prop_assert!(k1.approx_eq(&k0, 1e-6));
    }
}

#[test]
fn tiny_source_is_strongly_oblique() {
    let s = Polytope::from_vertices(2, vec![vec![3.0, 0.0], vec![-1.0, 2.0], vec![-1.0, -2.5]]).unwrap();
    let rep = check_strong_obliqueness(&Polytope::cube(2, 1e-3), &s).unwrap();
    assert_eq!(rep.mode, ObliquenessMode::Strong);
    assert!(rep.margin > 0.99);
}

#[test]
fn partial_obliqueness_fails_on_wide_factor() {
    let rep = check_partial_obliqueness(&Polytope::cube(2, 1.0), &ConeSpec::split(Polytope::interval(-2.0, 2.0), 2).unwrap()).unwrap();
    assert_eq!(rep.mode, ObliquenessMode::Fails);
    assert!(rep.margin <= 0.0);
}

#[test]
fn bodies_without_interior_origin_are_rejected() {
    let off = Polytope::axis_box(&[0.1, 0.1], &[1.0, 1.0]);
    assert!(matches!(polar_dual(&off), Err(Error::OriginNotInterior)));
    assert!(matches!(check_strong_obliqueness(&off, &Polytope::cube(2, 0.5)), Err(Error::OriginNotInterior)));
}

/// Largest ellipse centered at `c` inside the triangle, by brute force over
/// shapes `[[a, b], [b, d]]`; returns `log det`.
fn best_centered_ellipse(tri: &Polytope, c: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let steps = 40;
    for i in 1..=steps {
        for j in 1..=steps {
            for k in 0..=steps {
                let (a, d) = (0.5 * i as f64 / steps as f64, 0.5 * j as f64 / steps as f64);
                let b = (k as f64 / steps as f64 - 0.5) * (a * d).sqrt() * 1.9;
                let det = a * d - b * b;
                if det <= 0.0 {
                    continue;
                }
                // E = {c + B u}: fits iff |B n| <= slack(c) for every facet.
                let fits = tri.halfspaces.iter().all(|h| {
                    let bn = [a * h.normal[0] + b * h.normal[1], b * h.normal[0] + d * h.normal[1]];
                    (bn[0] * bn[0] + bn[1] * bn[1]).sqrt() <= h.slack(c)
                });
                if fits {
                    best = best.max(det.ln());
                }
            }
        }
    }
    best
}

#[test]
fn john_center_of_triangle_beats_grid_of_centers() {
    let tri = Polytope::from_vertices(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let (t, _, rep) = john_translate(&tri).unwrap();
    let at_center = best_centered_ellipse(&tri, &t);
    let mut grid_best = (f64::NEG_INFINITY, vec![0.0, 0.0]);
    for i in 1..12 {
        for j in 1..12 - i {
            let c = vec![i as f64 / 12.0, j as f64 / 12.0];
            let v = best_centered_ellipse(&tri, &c);
            if v > grid_best.0 {
                grid_best = (v, c);
            }
        }
    }
    assert!(at_center >= grid_best.0 - 1e-9, "center {t:?}: {at_center} < grid {grid_best:?}");
    assert!(rep.log_volume >= at_center - 1e-6);
    assert!((t[0] - 1.0 / 3.0).abs() < 1e-6 && (t[1] - 1.0 / 3.0).abs() < 1e-6, "{t:?}");
}
