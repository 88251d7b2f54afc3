//! The lift `φ(y) = (y_{n+1} v(ỹ))^{1+γ}` of a link solution to the cone and
//! a posteriori checks of the transport equation it should solve.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_func::DiscreteConvexFunction;
use crate::convex_geom::{ConeSpec, PolarSupport, Polytope};
use crate::densities::HomogeneousDensity;
use crate::energy::{EnergyModel, Level, LinkQuadrature};
use crate::error::{Error, Result};
use crate::laguerre::omega_cells;
use crate::numeric::{compensated_sum, dist, dot, norm};

/// Smoothing radius of the moving least-squares mollifier, in mesh cells.
pub const DEFAULT_SMOOTHING_CELLS: f64 = 4.0;

/// `γ` with `1 + γ = 1 + (n+1+α)/(n+1+β)`.
pub fn gamma(n: usize, alpha: f64, beta: f64) -> f64 {
    (n as f64 + 1.0 + alpha) / (n as f64 + 1.0 + beta)
}

/// `(y_{n+1} v(ỹ))^{p}` for a link function `v`; `None` below the apex.
pub fn lift_value(v: &dyn Fn(&[f64]) -> f64, p: f64, y: &[f64]) -> Option<f64> {
    let t = *y.last()?;
    if !(t > 0.0) {
        return None;
    }
    let link: Vec<f64> = y[..y.len() - 1].iter().map(|c| c / t).collect();
    Some((t * v(&link)).powf(p))
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub v: DiscreteConvexFunction,
    pub gamma: f64,
    pub residual_stats: Option<TransportReport>,
}

/// Lifts a positive convex link function to the cone.
pub fn lift(v: &DiscreteConvexFunction, alpha: f64, beta: f64) -> Result<ConeSolution> {
    let vmin = v.min_value();
    if !(vmin > 0.0) {
        return Err(Error::NonPositiveV(vmin));
    }
    let g = gamma(v.dim(), alpha, beta);
    if !(g > 0.0) {
        return Err(Error::Invalid(format!("lift exponent gamma = {g} must be positive")));
    }
    Ok(ConeSolution { v: v.clone(), gamma: g, residual_stats: None })
}

impl ConeSolution {
    pub fn exponent(&self) -> f64 {
        1.0 + self.gamma
    }

    /// `φ(y)` with the PL link function.
    pub fn phi(&self, y: &[f64]) -> Result<f64> {
        let n = self.v.dim();
        if y.len() != n + 1 {
            return Err(Error::Invalid(format!("cone point has dimension {}, expected {}", y.len(), n + 1)));
        }
        let t = y[n];
        if !(t > 0.0) {
            return Err(Error::OutsideCone);
        }
        let link: Vec<f64> = y[..n].iter().map(|c| c / t).collect();
        if !self.v.domain.contains(&link, 1e-12) {
            return Err(Error::OutsideCone);
        }
        let val = self.v.eval(&link).ok_or(Error::OutsideCone)?;
        Ok((t * val).powf(self.exponent()))
    }
}

/// Moving least-squares polynomial fit of nodal data (cubic by default): a
/// smooth function that reproduces cubics exactly and averages PL kinks over the radius.
#[derive(Debug, Clone)]
pub struct Mollified {
    n: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    pub radius: f64,
    pub degree: usize,
    lo: Vec<f64>,
    counts: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

/// Characteristic node spacing `(|P| / #nodes)^{1/n}`.
pub fn mesh_spacing(v: &DiscreteConvexFunction) -> f64 {
    let n = v.dim() as f64;
    (v.mesh.total_volume() / v.mesh.num_nodes() as f64).powf(1.0 / n)
}

impl Mollified {
    pub fn new(v: &DiscreteConvexFunction, cells: f64) -> Self {
        let radius = cells * mesh_spacing(v);
        Self::from_points(v.mesh.points.clone(), v.values.clone(), radius)
    }

    pub fn from_points(points: Vec<Vec<f64>>, values: Vec<f64>, radius: f64) -> Self {
        let n = points[0].len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &points {
            for k in 0..n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let counts: Vec<usize> = (0..n).map(|k| (((hi[k] - lo[k]) / radius).floor() as usize + 1).max(1)).collect();
        let mut buckets = vec![vec![]; counts.iter().product()];
        let mut me = Self { n, points, values, radius, degree: 3, lo, counts, buckets: vec![] };
        for (i, p) in me.points.iter().enumerate() {
            let b = me.bucket(&me.cell_index(p));
            buckets[b].push(i);
        }
        me.buckets = buckets;
        me
    }

    fn cell_index(&self, y: &[f64]) -> Vec<i64> {
        (0..self.n).map(|k| ((y[k] - self.lo[k]) / self.radius).floor() as i64).collect()
    }

    fn bucket(&self, idx: &[i64]) -> usize {
        let mut f = 0;
        for k in (0..self.n).rev() {
            f = f * self.counts[k] + idx[k].clamp(0, self.counts[k] as i64 - 1) as usize;
        }
        f
    }

    fn neighbors(&self, y: &[f64], r: f64) -> Vec<usize> {
        let reach = (r / self.radius).ceil() as i64;
        let c = self.cell_index(y);
        let mut out = vec![];
        let span = 2 * reach + 1;
        let total = span.pow(self.n as u32);
        for f in 0..total {
            let mut g = f;
            let mut idx = vec![0i64; self.n];
            let mut inside = true;
            for k in 0..self.n {
                idx[k] = c[k] + g % span - reach;
                g /= span;
                if idx[k] < 0 || idx[k] >= self.counts[k] as i64 {
                    inside = false;
                }
            }
            if !inside {
                continue;
            }
            for &i in &self.buckets[self.bucket(&idx)] {
                if dist(&self.points[i], y) < r {
                    out.push(i);
                }
            }
        }
        out
    }

    /// Smoothed value at `y` (also slightly outside the node hull).
    pub fn eval(&self, y: &[f64]) -> f64 {
        let nb = self.exponents().len();
        let mut r = self.radius;
        for _ in 0..8 {
            if let Some(val) = self.fit(y, r, nb) {
                return val;
            }
            r *= 1.5;
        }
        f64::NAN
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    /// Monomial exponents of total degree at most `degree`.
    fn exponents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![0; self.n]];
        for _ in 0..self.degree {
            let mut next = out.clone();
            for e in &out {
                for k in 0..self.n {
                    let mut f = e.clone();
                    f[k] += 1;
                    if !next.contains(&f) {
                        next.push(f);
                    }
                }
            }
            out = next;
        }
        out
    }

    fn fit(&self, y: &[f64], r: f64, nb: usize) -> Option<f64> {
        let ids = self.neighbors(y, r);
        if ids.len() < nb {
            return None;
        }
        let n = self.n;
        let exps = self.exponents();
        let mut a = DMatrix::<f64>::zeros(nb, nb);
        let mut rhs = DVector::<f64>::zeros(nb);
        let mut b = vec![0.0; nb];
        for &i in &ids {
            let d: Vec<f64> = (0..n).map(|k| (self.points[i][k] - y[k]) / r).collect();
            let q = 1.0 - dot(&d, &d);
            let w = q * q * q * q;
            for (bp, e) in b.iter_mut().zip(&exps) {
                *bp = e.iter().zip(&d).map(|(p, x)| x.powi(*p as i32)).product();
            }
            for p in 0..nb {
                rhs[p] += w * b[p] * self.values[i];
                for s in 0..nb {
                    a[(p, s)] += w * b[p] * b[s];
                }
            }
        }
        let sol = a.cholesky()?.solve(&rhs);
        Some(sol[0])
    }
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    let mut p = y.to_vec();
    (0..y.len())
        .map(|k| {
            p[k] = y[k] + h;
            let a = f(&p);
            p[k] = y[k] - h;
            let b = f(&p);
            p[k] = y[k];
            (a - b) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> DMatrix<f64> {
    let d = y.len();
    let f0 = f(y);
    let mut m = DMatrix::zeros(d, d);
    let mut p = y.to_vec();
    for k in 0..d {
        p[k] = y[k] + h;
        let a = f(&p);
        p[k] = y[k] - h;
        let b = f(&p);
        p[k] = y[k];
        m[(k, k)] = (a - 2.0 * f0 + b) / (h * h);
        for l in k + 1..d {
            let mut e = |sk: f64, sl: f64| {
                p[k] = y[k] + sk * h;
                p[l] = y[l] + sl * h;
                let r = f(&p);
                p[k] = y[k];
                p[l] = y[l];
                r
            };
            let c = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h * h);
            m[(k, l)] = c;
            m[(l, k)] = c;
        }
    }
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetIdentityReport {
    pub max_rel_error: f64,
    pub max_lhs: f64,
    pub max_rhs: f64,
    pub checked: usize,
    /// Samples skipped because `det D²v` was negative beyond tolerance.
    pub singular_skipped: usize,
}

/// Compares `det D²φ` (finite differences on the lift) with
/// `(f')ⁿ f'' v² y_{n+1}^{-n} det D²v` for `f(s) = s^p`.
///
/// `step` is relative: the cone step is `step·|y|`, the link step `step·(1+|ỹ|)`.
pub fn check_det_identity(v: &(dyn Fn(&[f64]) -> f64 + Sync), p: f64, samples: &[Vec<f64>], step: f64) -> DetIdentityReport {
    let rows: Vec<Option<(f64, f64, f64)>> = samples
        .par_iter()
        .map(|y| {
            let n = y.len() - 1;
            let t = y[n];
            let link: Vec<f64> = y[..n].iter().map(|c| c / t).collect();
            let phi = |z: &[f64]| lift_value(v, p, z).unwrap_or(f64::NAN);
            let hphi = fd_hessian(&phi, y, step * norm(y));
            let lhs = hphi.determinant();
            let hv = fd_hessian(v, &link, step * (1.0 + norm(&link)));
            let dv = hv.determinant();
            let scale = hv.norm().powi(n as i32);
            if dv < -1e-6 * scale {
                return None;
            }
            let vv = v(&link);
            let s = t * vv;
            let f1 = p * s.powf(p - 1.0);
            let f2 = p * (p - 1.0) * s.powf(p - 2.0);
            let rhs = f1.powi(n as i32) * f2 * vv * vv / t.powi(n as i32) * dv;
            let floor = 1e-5 * hphi.norm().powi(n as i32 + 1);
            let err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor);
            Some((err, lhs.abs(), rhs.abs()))
        })
        .collect();
    let mut rep = DetIdentityReport { max_rel_error: 0.0, max_lhs: 0.0, max_rhs: 0.0, checked: 0, singular_skipped: 0 };
    for r in rows {
        match r {
            Some((e, l, h)) => {
                rep.checked += 1;
                rep.max_rel_error = rep.max_rel_error.max(e);
                rep.max_lhs = rep.max_lhs.max(l);
                rep.max_rhs = rep.max_rhs.max(h);
            }
            None => rep.singular_skipped += 1,
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut s: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if s.is_empty() {
            return Self { count: 0, p50: f64::NAN, p95: f64::NAN, max: f64::NAN };
        }
        s.sort_by(f64::total_cmp);
        let q = |p: f64| s[((p * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
        Self { count: values.len(), p50: q(0.5), p95: q(0.95), max: *s.last().unwrap() }
    }

    pub fn line(&self, name: &str) -> String {
        format!("{name}: n={} p50={:.3e} p95={:.3e} max={:.3e}", self.count, self.p50, self.p95, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportOptions {
    pub interior_samples: usize,
    pub boundary_samples: usize,
    pub smoothing_cells: f64,
    /// Finite-difference step as a fraction of the smoothing radius.
    pub fd_fraction: f64,
    pub seed: u64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { interior_samples: 256, boundary_samples: 128, smoothing_cells: DEFAULT_SMOOTHING_CELLS, fd_fraction: 0.02, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportReport {
    pub gamma: f64,
    pub smoothing_radius: f64,
    /// Multiplier `s` with `s·v` solving the equation with unit constant.
    pub equation_scale: f64,
    pub interior: Quantiles,
    pub boundary: Quantiles,
    /// The same boundary condition written on the link, `v⋆ + φ_{Σ°}(∇v)`.
    pub boundary_link: Quantiles,
    /// Positive part of the relative halfspace slack of `∇φ` against `C(Σ)`.
    pub containment: Quantiles,
    pub containment_violations: usize,
    /// Largest distance from a vertex of `Σ` to the link shadow of the samples, over `diam Σ`.
    pub coverage_gap: f64,
    /// Every vertex node of `P` owns a nonempty cell of `Ω`.
    pub vertices_covered: bool,
    pub active_fraction: f64,
    pub interior_field: Vec<(Vec<f64>, f64)>,
    pub boundary_field: Vec<(Vec<f64>, f64)>,
}

impl TransportReport {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("gamma={:.6} smoothing_radius={:.4e} equation_scale={:.6e}", self.gamma, self.smoothing_radius, self.equation_scale),
            self.interior.line("interior"),
            self.boundary.line("boundary"),
            self.boundary_link.line("boundary_link"),
            self.containment.line("containment"),
            format!("containment_violations={} coverage_gap={:.3e} vertices_covered={} active_fraction={:.4}", self.containment_violations, self.coverage_gap, self.vertices_covered, self.active_fraction),
        ]
    }
}

fn interior_samples(p: &Polytope, margin: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (lo, hi) = p.bounding_box();
    let mut margin = margin;
    let mut out = vec![];
    let mut tries = 0;
    while out.len() < count {
        let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        if p.boundary_distance(&y) >= margin {
            out.push(y);
        }
        tries += 1;
        if tries > 1000 * count {
            margin *= 0.5;
            tries = 0;
        }
    }
    out
}

fn boundary_samples(p: &Polytope, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = p.vertices.clone();
    while out.len() < count + p.vertices.len() {
        let d: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm(&d) < 1e-3 {
            continue;
        }
        let rho = p
            .halfspaces
            .iter()
            .filter_map(|h| {
                let c = dot(&h.normal, &d);
                (c > 0.0).then(|| h.offset / c)
            })
            .fold(f64::INFINITY, f64::min);
        out.push(d.iter().map(|c| c * rho).collect());
    }
    out
}

/// Interior, boundary and mapping residuals of the lifted solution.
///
/// `v` is smoothed by a moving least-squares cubic fit before finite
/// differencing. The interior residual is taken after fitting the constant
/// multiple of `v` that solves the equation, since the minimizer is only
/// determined up to scale.
pub fn verify_transport(
    sol: &ConeSolution,
    sigma: &ConeSpec,
    g_p: &HomogeneousDensity,
    g_sigma: &HomogeneousDensity,
    opts: &TransportOptions,
) -> Result<TransportReport> {
    let v = &sol.v;
    let n = v.dim();
    let p = &v.domain;
    let polar = PolarSupport::new(sigma)?;
    let k = sigma.k();
    let mol = Mollified::new(v, opts.smoothing_cells);
    let r = mol.radius;
    let fd = opts.fd_fraction * r;
    let pw = sol.exponent();
    let vs = |y: &[f64]| mol.eval(y);
    let phi = |y: &[f64]| lift_value(&vs, pw, y).unwrap_or(f64::NAN);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7472_616e);

    let inner = interior_samples(p, r, opts.interior_samples, &mut rng);
    let heights: Vec<f64> = inner.iter().map(|_| 2f64.powf(rng.gen_range(-1.0..1.0))).collect();
    // (ratio, containment slack, link shadow)
    let interior_rows: Vec<(f64, f64, Vec<f64>)> = inner
        .par_iter()
        .zip(&heights)
        .map(|(yt, t)| {
            let mut y: Vec<f64> = yt.iter().map(|c| c * t).collect();
            y.push(*t);
            let h = fd_hessian(&phi, &y, fd * t);
            let g = fd_gradient(&phi, &y, fd * t);
            let det = h.determinant();
            let gs = g_sigma.eval_cone(&g).unwrap_or(0.0);
            let gp = g_p.eval_cone(&y).unwrap_or(f64::NAN);
            let (slack, shadow) = shadow_slack(&g, sigma, k);
            (det * gs / gp, slack, shadow)
        })
        .collect();
    let e = pw * (n as f64 + 1.0 + g_sigma.degree);
    let mut ratios: Vec<f64> = interior_rows.iter().map(|r| r.0).filter(|x| x.is_finite() && *x > 0.0).collect();
    ratios.sort_by(f64::total_cmp);
    let med = if ratios.is_empty() { f64::NAN } else { ratios[ratios.len() / 2] };
    let fitted = 1.0 / med;
    let interior_res: Vec<f64> = interior_rows.iter().map(|r| if r.0.is_finite() { (r.0 * fitted - 1.0).abs() } else { f64::INFINITY }).collect();

    let bpts = boundary_samples(p, opts.boundary_samples, &mut rng);
    let boundary_rows: Vec<(f64, f64, f64, Vec<f64>)> = bpts
        .par_iter()
        .map(|yt| {
            let mut y = yt.clone();
            y.push(1.0);
            let g = fd_gradient(&phi, &y, fd);
            let cone = (g[n] - polar.eval(&g[..n])).abs() / norm(&g);
            let gv = fd_gradient(&vs, yt, fd);
            let val = vs(yt);
            let star = dot(yt, &gv) - val;
            let mut full = gv.clone();
            full.push(-star);
            let link = (star + polar.eval(&gv)).abs() / norm(&full);
            let (slack, shadow) = shadow_slack(&g, sigma, k);
            (cone, link, slack, shadow)
        })
        .collect();

    let mut slacks: Vec<f64> = interior_rows.iter().map(|r| r.1).collect();
    slacks.extend(boundary_rows.iter().map(|r| r.2));
    let violations = slacks.iter().filter(|s| **s > 1e-2).count();
    let shadows: Vec<&Vec<f64>> = interior_rows.iter().map(|r| &r.2).chain(boundary_rows.iter().map(|r| &r.3)).collect();
    let sdiam = sigma.link.diameter();
    let coverage_gap = sigma
        .link
        .vertices
        .iter()
        .map(|s| shadows.iter().map(|z| dist(s, &z[..s.len()])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        / sdiam;

    let cells = omega_cells(v, &polar)?;
    let active = cells.iter().filter(|c| c.is_some()).count();
    let vertices_covered = p.vertices.iter().all(|pv| {
        v.mesh
            .points
            .iter()
            .enumerate()
            .filter(|(_, y)| dist(y, pv) < 1e-9 * (1.0 + p.diameter()))
            .any(|(i, _)| cells[i].is_some())
    });

    Ok(TransportReport {
        gamma: sol.gamma,
        smoothing_radius: r,
        equation_scale: fitted.powf(1.0 / e),
        interior: Quantiles::of(&interior_res),
        boundary: Quantiles::of(&boundary_rows.iter().map(|r| r.0).collect::<Vec<_>>()),
        boundary_link: Quantiles::of(&boundary_rows.iter().map(|r| r.1).collect::<Vec<_>>()),
        containment: Quantiles::of(&slacks.iter().map(|s| s.max(0.0)).collect::<Vec<_>>()),
        containment_violations: violations,
        coverage_gap,
        vertices_covered,
        active_fraction: active as f64 / cells.len() as f64,
        interior_field: inner.into_iter().zip(interior_res).collect(),
        boundary_field: bpts.into_iter().zip(boundary_rows.iter().map(|r| r.0)).collect(),
    })
}

/// Relative slack of `x = ∇φ` against `C(Σ)` and its link shadow `x̄ / x_{n+1}`.
fn shadow_slack(x: &[f64], sigma: &ConeSpec, k: usize) -> (f64, Vec<f64>) {
    let n = x.len() - 1;
    let t = x[n];
    if !(t > 0.0) {
        return (f64::INFINITY, vec![f64::NAN; n]);
    }
    let z: Vec<f64> = x[..n].iter().map(|c| c / t).collect();
    let slack = sigma.link.halfspaces.iter().map(|h| -h.slack(&z[..k]) / h.offset).fold(f64::NEG_INFINITY, f64::max);
    (slack, z)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub tv: f64,
    pub bins_per_axis: usize,
    /// Totals before normalization.
    pub mu_mass: f64,
    pub nu_mass: f64,
    pub mu_bins: Vec<f64>,
    pub nu_bins: Vec<f64>,
}

/// Binned total variation between `(∇u)_# μ` and `ν`.
///
/// The μ-mass of each cell of `Ω` is carried to its node, then spread over
/// the node's hat function so that both measures live on the same P1 scale.
pub fn pushforward_check(model: &EnergyModel, v: &DiscreteConvexFunction, bins_per_axis: usize) -> Result<PushforwardReport> {
    let n = v.dim();
    let mesh = &v.mesh;
    let ii = model.functional_i(v, Level::Refined, false)?;
    let nu_q = LinkQuadrature::new(mesh, &model.g_p, Level::Refined);
    let leb = LinkQuadrature::new(mesh, &HomogeneousDensity::lebesgue(v.domain.clone()), Level::Refined);
    let mut hat = vec![0.0; mesh.num_nodes()];
    for (s, ids) in mesh.simplices.iter().enumerate() {
        for q in leb.ranges[s].clone() {
            for (l, &i) in leb.point(q).iter().zip(ids) {
                hat[i] += l * leb.weights[q];
            }
        }
    }
    let (lo, hi) = v.domain.bounding_box();
    let nb = bins_per_axis.max(1);
    let bin_of = |y: &[f64]| -> usize {
        let mut f = 0;
        for k in (0..n).rev() {
            let c = ((y[k] - lo[k]) / (hi[k] - lo[k]) * nb as f64).floor() as i64;
            f = f * nb + c.clamp(0, nb as i64 - 1) as usize;
        }
        f
    };
    let at = |s: usize, b: &[f64]| -> Vec<f64> { mesh.point_at(s, b) };
    let expo = n as f64 + 2.0 + model.alpha();
    let total_bins = nb.pow(n as u32);
    let mut mu = vec![0.0; total_bins];
    let mut nu = vec![0.0; total_bins];
    for (s, ids) in mesh.simplices.iter().enumerate() {
        for q in nu_q.ranges[s].clone() {
            let b = nu_q.point(q);
            let val: f64 = b.iter().zip(ids).map(|(l, &i)| l * v.values[i]).sum();
            nu[bin_of(&at(s, b))] += nu_q.weights[q] * val.powf(-expo);
        }
        for q in leb.ranges[s].clone() {
            let b = leb.point(q);
            let m: f64 = b.iter().zip(ids).map(|(l, &i)| if hat[i] > 0.0 { l * ii.cell_mass[i] / hat[i] } else { 0.0 }).sum();
            mu[bin_of(&at(s, b))] += leb.weights[q] * m;
        }
    }
    let mu_mass = compensated_sum(mu.iter().copied());
    let nu_mass = compensated_sum(nu.iter().copied());
    if !(mu_mass > 0.0 && nu_mass > 0.0) {
        return Err(Error::EnergyUndefined(crate::error::EnergyCause::EmptyDomain));
    }
    mu.iter_mut().for_each(|x| *x /= mu_mass);
    nu.iter_mut().for_each(|x| *x /= nu_mass);
    let tv = 0.5 * compensated_sum(mu.iter().zip(&nu).map(|(a, b)| (a - b).abs()));
    Ok(PushforwardReport { tv, bins_per_axis: nb, mu_mass, nu_mass, mu_bins: mu, nu_bins: nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SimplexMesh;
    use std::sync::Arc;

    #[test]
    fn mollifier_reproduces_quadratics() {
        let p = Polytope::cube(2, 0.5);
        let mesh = Arc::new(SimplexMesh::on_polytope(&p, 9).unwrap());
        let f = |y: &[f64]| 1.0 + 0.3 * y[0] - y[1] + y[0] * y[0] + 0.5 * y[0] * y[1];
        let v = DiscreteConvexFunction::from_fn(mesh, p, f);
        let m = Mollified::new(&v, DEFAULT_SMOOTHING_CELLS);
        for y in [[0.1, 0.2], [0.5, 0.5], [-0.5, 0.3], [0.52, -0.1]] {
            assert!((m.eval(&y) - f(&y)).abs() < 1e-10, "{y:?}: {}", m.eval(&y) - f(&y));
        }
    }

    #[test]
    fn quantiles_of_range() {
        let q = Quantiles::of(&(0..101).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!((q.p50, q.p95, q.max), (50.0, 95.0, 100.0));
    }
}
