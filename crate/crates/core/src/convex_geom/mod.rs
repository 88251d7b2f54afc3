//! Convex geometry of the links: support functions, polar duals, the
//! obliqueness predicates, roundness constants and John's position.

mod john;
mod polytope;

pub use john::{john_translate, JohnReport};
pub use polytope::{Halfspace, Polytope, PolytopeSpec, VERTEX_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

/// `phi_K(x) = sup_{y in K} <x, y>`.
pub fn support_function(k: &Polytope, x: &[f64]) -> f64 {
    k.support(x)
}

/// `K° = {x : phi_K(x) <= 1}`; one halfspace per vertex of `K`.
pub fn polar_dual(k: &Polytope) -> Result<Polytope> {
    if !k.contains_origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    let hs: Vec<Halfspace> = k.vertices.iter().map(|v| Halfspace::new(v.clone(), 1.0)).collect();
    Polytope::from_halfspaces(k.dim, &hs)
}

/// Target link, either compact or split as `Sigma^k x R^(n-k)`.
///
/// When `split_k` is set, `link` is the compact factor `Sigma^k` living in the
/// first `k` coordinates of R^n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeSpec {
    pub link: Polytope,
    pub n: usize,
    #[serde(default)]
    pub split_k: Option<usize>,
}

impl ConeSpec {
    pub fn compact(link: Polytope) -> Self {
        let n = link.dim;
        Self { link, n, split_k: None }
    }

    pub fn split(factor: Polytope, n: usize) -> Result<Self> {
        let k = factor.dim;
        if k > n {
            return Err(Error::Invalid(format!("split factor dimension {k} exceeds n = {n}")));
        }
        Ok(Self { link: factor, n, split_k: Some(k) })
    }

    pub fn k(&self) -> usize {
        self.split_k.unwrap_or(self.n)
    }

    pub fn is_split(&self) -> bool {
        self.split_k.is_some_and(|k| k < self.n)
    }

    /// Polar dual of the (factor of the) target link, in the first `k` coordinates.
    pub fn polar_factor(&self) -> Result<Polytope> {
        polar_dual(&self.link)
    }

    /// `phi_{Sigma°}` evaluated at a full point of R^n.
    pub fn polar_support(&self, polar: &Polytope, x: &[f64]) -> f64 {
        polar.support(&x[..self.k()])
    }

    /// Whether a link point lies in `Sigma` (the split factor constrains only
    /// the first `k` coordinates).
    pub fn link_contains(&self, x: &[f64], tol: f64) -> bool {
        self.link.contains(&x[..self.k()], tol)
    }
}

/// Precomputed support data for `Sigma°`, so hot loops avoid re-deriving it.
#[derive(Debug, Clone)]
pub struct PolarSupport {
    pub k: usize,
    pub vertices: Vec<Vec<f64>>,
}

impl PolarSupport {
    pub fn new(sigma: &ConeSpec) -> Result<Self> {
        let polar = sigma.polar_factor()?;
        Ok(Self { k: sigma.k(), vertices: polar.vertices })
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, &x[..self.k])).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObliquenessMode {
    Strong,
    Partial,
    Fails,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObliquenessReport {
    pub mode: ObliquenessMode,
    /// `min <x, y> + 1` over vertex pairs.
    pub margin: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

const PREDICATE_TOL: f64 = 1e-12;

/// Vertex-pair margin between two bodies living in dual spaces.
fn pair_margin(p: &Polytope, sigma: &Polytope) -> f64 {
    let mut m = f64::INFINITY;
    for y in &p.vertices {
        for x in &sigma.vertices {
            m = m.min(dot(x, y) + 1.0);
        }
    }
    m
}

/// Checks `-P ⊂ int(Sigma°)` and `-Sigma ⊂ int(P°)` through the polar
/// halfspace representations, independently of the vertex-pair margin.
fn containment_predicates(p: &Polytope, sigma: &Polytope) -> Result<(bool, bool)> {
    let sigma_polar = polar_dual(sigma)?;
    let p_polar = polar_dual(p)?;
    let neg_p_in = p.vertices.iter().all(|y| {
        let neg: Vec<f64> = y.iter().map(|c| -c).collect();
        sigma_polar.boundary_distance(&neg) > 0.0
    });
    let neg_s_in = sigma.vertices.iter().all(|x| {
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        p_polar.boundary_distance(&neg) > 0.0
    });
    Ok((neg_p_in, neg_s_in))
}

fn strong_report(p: &Polytope, sigma: &Polytope) -> Result<ObliquenessReport> {
    if !p.contains_origin_interior() || !sigma.contains_origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    let margin = pair_margin(p, sigma);
    let (a, b) = containment_predicates(p, sigma)?;
    let by_margin = margin > 0.0;
    if margin.abs() > PREDICATE_TOL && (a != by_margin || b != by_margin) {
        return Err(Error::InconsistentPredicates { margin, containment: a && b });
    }
    if !by_margin {
        return Ok(ObliquenessReport { mode: ObliquenessMode::Fails, margin, r: f64::NAN, big_r: f64::NAN });
    }
    let rc = roundness_bounds(p, sigma)?;
    Ok(ObliquenessReport { mode: ObliquenessMode::Strong, margin, r: rc.r, big_r: rc.big_r })
}

/// Strong obliqueness of a pair of compact links.
pub fn check_strong_obliqueness(p: &Polytope, sigma: &Polytope) -> Result<ObliquenessReport> {
    if p.dim != sigma.dim {
        return Err(Error::Invalid("P and Sigma live in different dimensions".into()));
    }
    strong_report(p, sigma)
}

/// Slice `P ∩ A''` where `A''` is spanned by the first `k` coordinates.
pub fn slice_first_coords(p: &Polytope, k: usize) -> Result<Polytope> {
    if k == p.dim {
        return Ok(p.clone());
    }
    let hs: Vec<Halfspace> = p
        .halfspaces
        .iter()
        .filter(|h| norm(&h.normal[..k]) > 1e-14)
        .map(|h| Halfspace::new(h.normal[..k].to_vec(), h.offset))
        .collect();
    if k == 0 {
        return Err(Error::EmptySlice);
    }
    // Constraints with no A'' component read 0 <= b, which holds since 0 ∈ int P.
    Polytope::from_halfspaces(k, &hs).map_err(|_| Error::EmptySlice)
}

/// Strong partial obliqueness for a split target `Sigma^k x R^(n-k)`.
pub fn check_partial_obliqueness(p: &Polytope, sigma: &ConeSpec) -> Result<ObliquenessReport> {
    let k = sigma.split_k.ok_or_else(|| Error::Invalid("partial obliqueness needs split_k".into()))?;
    if k == p.dim {
        return check_strong_obliqueness(p, &sigma.link);
    }
    if !p.contains_origin_interior() || !sigma.link.contains_origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    let slice = slice_first_coords(p, k)?;
    let margin = pair_margin(&slice, &sigma.link);
    let (a, _) = containment_predicates(&slice, &sigma.link)?;
    if margin.abs() > PREDICATE_TOL && a != (margin > 0.0) {
        return Err(Error::InconsistentPredicates { margin, containment: a });
    }
    if margin <= 0.0 {
        return Ok(ObliquenessReport { mode: ObliquenessMode::Fails, margin, r: f64::NAN, big_r: f64::NAN });
    }
    let polar = sigma.polar_factor()?;
    let n = p.dim;
    // 1/R over unit directions of A''.
    let inv_big_r = angular_extremum(k, &directions_for(k, &[&polar, &slice]), |t| polar.support(t) - slice.support(&neg(t)), false);
    // 1/r over all unit directions of R^n.
    let dirs_n = directions_for(n, &[p]);
    let inv_r = angular_extremum(n, &dirs_n, |t| polar.support(&t[..k]) + p.support(t), true);
    if inv_big_r <= 0.0 {
        return Err(Error::NotOblique(inv_big_r));
    }
    Ok(ObliquenessReport { mode: ObliquenessMode::Partial, margin, r: 1.0 / inv_r, big_r: 1.0 / inv_big_r })
}

fn neg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|c| -c).collect()
}

/// Number of uniform directions sampled on the sphere for n = 3.
pub const ANGULAR_SAMPLES: usize = 4096;

/// Candidate unit directions: facet normals and vertex directions (both
/// signs), sums of vertex pairs across bodies, plus a uniform sample.
fn directions_for(dim: usize, bodies: &[&Polytope]) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = vec![];
    let mut push = |d: Vec<f64>| {
        let l = norm(&d);
        if l > 1e-14 {
            let u: Vec<f64> = d.iter().map(|c| c / l).collect();
            dirs.push(neg(&u));
            dirs.push(u);
        }
    };
    for b in bodies {
        for h in &b.halfspaces {
            push(h.normal.clone());
        }
        for v in &b.vertices {
            push(v.clone());
        }
    }
    if bodies.len() >= 2 {
        for x in &bodies[0].vertices {
            for y in &bodies[1].vertices {
                push(crate::numeric::add(x, y));
                push(crate::numeric::sub(x, y));
            }
        }
    }
    match dim {
        1 => {
            push(vec![1.0]);
        }
        2 => {
            for i in 0..ANGULAR_SAMPLES {
                let t = 2.0 * std::f64::consts::PI * i as f64 / ANGULAR_SAMPLES as f64;
                push(vec![t.cos(), t.sin()]);
            }
        }
        _ => {
            // Fibonacci sphere
            let g = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..ANGULAR_SAMPLES {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / ANGULAR_SAMPLES as f64;
                let rad = (1.0 - z * z).sqrt();
                let th = g * i as f64;
                push(vec![rad * th.cos(), rad * th.sin(), z]);
            }
        }
    }
    dirs
}

fn angular_extremum<F: Fn(&[f64]) -> f64>(_dim: usize, dirs: &[Vec<f64>], f: F, max: bool) -> f64 {
    let vals = dirs.iter().map(|d| f(d));
    if max {
        vals.fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.fold(f64::INFINITY, f64::min)
    }
}

/// Roundness constants with their rigorous bracket.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoundnessBounds {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Lower bound on `inf phi_U`, from the sampled minimum minus the
    /// Lipschitz constant times the sample covering radius (n = 3 only; exact otherwise).
    pub inv_big_r_lower: f64,
    /// Upper bound on `sup phi_{P + Sigma°}`.
    pub inv_r_upper: f64,
}

fn roundness_bounds(p: &Polytope, sigma: &Polytope) -> Result<RoundnessBounds> {
    let polar = polar_dual(sigma)?;
    let dirs = directions_for(p.dim, &[&polar, &p.reflect()]);
    let phi_u = |t: &[f64]| polar.support(t) - p.support(&neg(t));
    let phi_sum = |t: &[f64]| polar.support(t) + p.support(t);
    let inv_big_r = angular_extremum(p.dim, &dirs, phi_u, false);
    let inv_r = angular_extremum(p.dim, &dirs, phi_sum, true);
    if inv_big_r <= 0.0 {
        return Err(Error::NotOblique(inv_big_r));
    }
    // In dimensions 1 and 2 the candidate set contains every critical
    // direction, so the sampled extrema are exact.
    let slack = if p.dim <= 2 {
        0.0
    } else {
        let lip = polar.max_vertex_norm() + p.max_vertex_norm();
        let cover = (4.0 * std::f64::consts::PI / ANGULAR_SAMPLES as f64).sqrt() * 1.5;
        lip * cover
    };
    Ok(RoundnessBounds { r: 1.0 / inv_r, big_r: 1.0 / inv_big_r, inv_big_r_lower: inv_big_r - slack, inv_r_upper: inv_r + slack })
}

/// `(r, R)` with `1/R = inf phi_{Sigma°}(θ) - phi_P(-θ)` and `1/r = sup phi_{P + Sigma°}(θ)`.
pub fn roundness_constants(p: &Polytope, sigma: &Polytope) -> Result<(f64, f64)> {
    let b = roundness_bounds(p, sigma)?;
    Ok((b.r, b.big_r))
}

pub fn roundness_report(p: &Polytope, sigma: &Polytope) -> Result<RoundnessBounds> {
    roundness_bounds(p, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(h: f64) -> Polytope {
        Polytope::cube(2, h)
    }

    #[test]
    fn support_examples() {
        assert_eq!(support_function(&sq(1.0), &[1.0, 0.0]), 1.0);
        assert_eq!(support_function(&sq(0.5), &[0.0, 0.0]), 0.0);
        assert_eq!(support_function(&sq(0.5), &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn polar_of_cube_is_cross_polytope() {
        for s in [0.5, 1.0, 2.0] {
            let polar = polar_dual(&Polytope::cube(3, s)).unwrap();
            assert_eq!(polar.vertices.len(), 6);
            for v in &polar.vertices {
                let l1: f64 = v.iter().map(|c| c.abs()).sum();
                assert!((l1 - 1.0 / s).abs() < 1e-12);
            }
            let back = polar_dual(&polar).unwrap();
            assert!(back.approx_eq(&Polytope::cube(3, s), 1e-9));
        }
    }

    #[test]
    fn polar_of_skew_simplex_matches_sampled_membership() {
        let tri = Polytope::from_vertices(2, vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]]).unwrap();
        let polar = polar_dual(&tri).unwrap();
        let mut checked = 0;
        for i in 0..=80 {
            for j in 0..=80 {
                let x = [-3.0 + 6.0 * i as f64 / 80.0, -3.0 + 6.0 * j as f64 / 80.0];
                let oracle = tri.vertices.iter().map(|v| dot(v, &x)).fold(f64::NEG_INFINITY, f64::max);
                if (oracle - 1.0).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(oracle <= 1.0, polar.contains(&x, 0.0), "{x:?}");
                checked += 1;
            }
        }
        assert!(checked > 6000);
    }

    #[test]
    fn polar_requires_interior_origin() {
        let off = Polytope::axis_box(&[0.1, 0.1], &[1.0, 1.0]);
        assert!(matches!(polar_dual(&off), Err(Error::OriginNotInterior)));
    }

    #[test]
    fn strong_obliqueness_examples() {
        let rep = check_strong_obliqueness(&sq(0.5), &sq(0.5)).unwrap();
        assert_eq!(rep.mode, ObliquenessMode::Strong);
        assert!((rep.margin - 0.5).abs() < 1e-15);
        assert!(rep.r <= rep.big_r);
        let rep = check_strong_obliqueness(&sq(1.0), &sq(1.0)).unwrap();
        assert_eq!(rep.mode, ObliquenessMode::Fails);
        assert!((rep.margin + 1.0).abs() < 1e-15);
        let tiny = check_strong_obliqueness(&sq(1e-4), &Polytope::cube(2, 50.0)).unwrap();
        assert_eq!(tiny.mode, ObliquenessMode::Strong);
    }

    #[test]
    fn partial_obliqueness_examples() {
        let s = ConeSpec::split(Polytope::interval(-0.5, 0.5), 2).unwrap();
        let rep = check_partial_obliqueness(&sq(0.5), &s).unwrap();
        assert_eq!(rep.mode, ObliquenessMode::Partial);
        assert!((rep.margin - 0.75).abs() < 1e-15);
        assert!(rep.r > 0.0 && rep.r <= rep.big_r);

        let s = ConeSpec::split(Polytope::interval(-2.0, 2.0), 2).unwrap();
        let rep = check_partial_obliqueness(&sq(1.0), &s).unwrap();
        assert_eq!(rep.mode, ObliquenessMode::Fails);

        let full = ConeSpec::split(sq(0.5), 2).unwrap();
        let a = check_partial_obliqueness(&sq(0.3), &full).unwrap();
        let b = check_strong_obliqueness(&sq(0.3), &sq(0.5)).unwrap();
        assert_eq!(a.mode, b.mode);
        assert_eq!(a.margin, b.margin);
        assert_eq!(a.r, b.r);
    }

    #[test]
    fn roundness_identity_square() {
        let (r, big_r) = roundness_constants(&sq(0.5), &sq(0.5)).unwrap();
        // phi_U(θ) = 2|θ|_inf - |θ|_1 / 2, minimized on the diagonal.
        assert!((1.0 / big_r - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        // phi_P + phi_{Sigma°} = 2.5 cos t + 0.5 sin t on the first octant.
        assert!((1.0 / r - 6.5f64.sqrt()).abs() < 1e-12);
        assert!(r <= big_r);
    }

    #[test]
    fn roundness_scales_with_source() {
        let sigma = sq(0.5);
        let (r1, _) = roundness_constants(&sq(0.2), &sigma).unwrap();
        let (r2, _) = roundness_constants(&sq(0.4), &sigma).unwrap();
        // 1/r = sup (2 + λ) cos t + λ sin t = |(2 + λ, λ)|.
        assert!((1.0 / r1 - (2.2f64.powi(2) + 0.04).sqrt()).abs() < 1e-12);
        assert!((1.0 / r2 - (2.4f64.powi(2) + 0.16).sqrt()).abs() < 1e-12);
    }
}
