//! Homogeneous densities on cones and their restrictions to the links.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex_geom::Polytope;
use crate::laguerre::Cell;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, norm};

/// Tabulated link density on a regular grid, multilinearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major values, last axis fastest.
    pub values: Vec<f64>,
}

impl DensityTable {
    pub fn validate(&self) -> Result<()> {
        let d = self.lo.len();
        if d == 0 || d > 3 || self.hi.len() != d || self.shape.len() != d {
            return Err(Error::Invalid("table lo/hi/shape must share a dimension in 1..=3".into()));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::Invalid("table shape entries must be >= 2".into()));
        }
        let total = self.shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        if total != Some(self.values.len()) {
            return Err(Error::Invalid(format!("table has {} values, shape needs {:?}", self.values.len(), total)));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && b > a)) {
            return Err(Error::Invalid("table bounds must be finite with hi > lo".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("table values must be finite".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn interpolate(&self, y: &[f64]) -> f64 {
        let d = self.lo.len();
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for i in 0..d {
            let s = (y[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) * (self.shape[i] - 1) as f64;
            let s = s.clamp(0.0, (self.shape[i] - 1) as f64);
            let b = (s.floor() as usize).min(self.shape[i] - 2);
            base[i] = b;
            frac[i] = s - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for i in 0..d {
                let bit = corner >> i & 1;
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                idx = idx * self.shape[i] + base[i] + bit;
            }
            acc += w * self.values[idx];
        }
        if acc < 0.0 {
            log::warn!("negative interpolated table density {acc:e} clamped to 0");
            0.0
        } else {
            acc
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Lebesgue,
    /// `prod |y_i|^{e_i}`.
    Monomial(Vec<f64>),
    /// `d(y, ∂K)^p`.
    BoundaryPower(f64),
    Tabulated(DensityTable),
}

/// Config form of a density kind; tables are referenced by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKindSpec {
    Lebesgue,
    Monomial(Vec<f64>),
    BoundaryPower(f64),
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub degree: f64,
    pub kind: DensityKindSpec,
}

impl DensitySpec {
    /// Resolves table paths relative to `base` and attaches the link domain.
    pub fn resolve(&self, base: &Path, domain: Polytope) -> Result<HomogeneousDensity> {
        if !self.degree.is_finite() || self.degree < 0.0 {
            return Err(Error::Invalid(format!("density degree must be finite and >= 0, got {}", self.degree)));
        }
        let kind = match &self.kind {
            DensityKindSpec::Lebesgue => DensityKind::Lebesgue,
            DensityKindSpec::Monomial(e) => {
                if e.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Invalid("monomial exponents must be finite and >= 0".into()));
                }
                DensityKind::Monomial(e.clone())
            }
            DensityKindSpec::BoundaryPower(p) => {
                if !p.is_finite() || *p < 0.0 {
                    return Err(Error::Invalid("boundary_power exponent must be finite and >= 0".into()));
                }
                DensityKind::BoundaryPower(*p)
            }
            DensityKindSpec::Table(path) => {
                let text = std::fs::read_to_string(base.join(path))?;
                DensityKind::Tabulated(DensityTable::parse(&text)?)
            }
        };
        HomogeneousDensity::new(self.degree, kind, domain)
    }
}

/// `g(y) = y_{n+1}^degree * h(ỹ)` with `h` extended by zero outside the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousDensity {
    pub degree: f64,
    pub kind: DensityKind,
    /// Link domain; for a split target this is the compact factor and only the
    /// leading coordinates of a link point are consulted.
    pub domain: Polytope,
}

impl HomogeneousDensity {
    pub fn new(degree: f64, kind: DensityKind, domain: Polytope) -> Result<Self> {
        match &kind {
            DensityKind::Monomial(e) if e.len() != domain.dim => {
                return Err(Error::Invalid(format!("monomial has {} exponents for a {}-dimensional link", e.len(), domain.dim)))
            }
            DensityKind::Tabulated(t) => {
                t.validate()?;
                if t.lo.len() != domain.dim {
                    return Err(Error::Invalid("table dimension differs from link dimension".into()));
                }
            }
            _ => {}
        }
        Ok(Self { degree, kind, domain })
    }

    pub fn lebesgue(domain: Polytope) -> Self {
        Self { degree: 0.0, kind: DensityKind::Lebesgue, domain }
    }

    pub fn with_degree(mut self, degree: f64) -> Self {
        self.degree = degree;
        self
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DensityKind::Lebesgue)
    }

    /// Link density `h`, zero outside the domain.
    pub fn link_eval(&self, y: &[f64]) -> f64 {
        let y = &y[..self.domain.dim];
        let dist = self.domain.boundary_distance(y);
        if dist < -1e-12 {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Lebesgue => 1.0,
            DensityKind::Monomial(e) => y.iter().zip(e).map(|(c, p)| c.abs().powf(*p)).product(),
            DensityKind::BoundaryPower(p) => dist.max(0.0).powf(*p),
            DensityKind::Tabulated(t) => t.interpolate(y),
        }
    }

    /// Splits a link cell into pieces on which `h` is smooth: the regions
    /// of the nearest facet for boundary powers, the coordinate orthants for
    /// monomials, and the table cells for tabulated densities.
    pub fn smooth_pieces(&self, cell: &Cell) -> Vec<Cell> {
        let n = cell.dim();
        let pad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| a.get(i).copied().unwrap_or(0.0)).collect() };
        let axis = |i: usize| -> Vec<f64> { (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
        match &self.kind {
            DensityKind::Lebesgue => vec![cell.clone()],
            DensityKind::BoundaryPower(_) => {
                let hs = &self.domain.halfspaces;
                let mut out = vec![];
                'facet: for (a, ha) in hs.iter().enumerate() {
                    let mut piece = cell.clone();
                    for (b, hb) in hs.iter().enumerate() {
                        if a == b {
                            continue;
                        }
                        // slack_a <= slack_b
                        let d: Vec<f64> = hb.normal.iter().zip(&ha.normal).map(|(x, y)| x - y).collect();
                        if !piece.clip(&pad(&d), hb.offset - ha.offset) {
                            continue 'facet;
                        }
                    }
                    out.push(piece);
                }
                out
            }
            DensityKind::Monomial(e) => {
                let mut cells = vec![cell.clone()];
                for (i, ei) in e.iter().enumerate() {
                    if *ei != 0.0 {
                        cells = cells.iter().flat_map(|c| c.split(&axis(i), 0.0)).collect();
                    }
                }
                cells
            }
            DensityKind::Tabulated(t) => {
                let mut cells = vec![cell.clone()];
                let (lo, hi) = cell.bounds();
                for i in 0..t.lo.len().min(n) {
                    let h = (t.hi[i] - t.lo[i]) / (t.shape[i] - 1) as f64;
                    for g in 1..t.shape[i] - 1 {
                        let x = t.lo[i] + g as f64 * h;
                        if x > lo[i] && x < hi[i] {
                            cells = cells.iter().flat_map(|c| c.split(&axis(i), x)).collect();
                        }
                    }
                }
                cells
            }
        }
    }

    /// Full cone density `y_{n+1}^degree * h(ȳ / y_{n+1})`.
    pub fn eval_cone(&self, y: &[f64]) -> Result<f64> {
        let t = *y.last().expect("nonempty point");
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::ApexEvaluation(t));
        }
        let link: Vec<f64> = y[..y.len() - 1].iter().map(|c| c / t).collect();
        Ok(t.powf(self.degree) * self.link_eval(&link))
    }

    /// Sampled supremum of `h` over the link (grid plus vertices).
    pub fn sup_link(&self) -> f64 {
        if self.is_constant() {
            return 1.0;
        }
        let (lo, hi) = self.domain.bounding_box();
        let m = match self.domain.dim {
            1 => 2049,
            2 => 129,
            _ => 33,
        };
        let mut best = self.domain.vertices.iter().map(|v| self.link_eval(v)).fold(0.0, f64::max);
        let mut idx = vec![0usize; self.domain.dim];
        loop {
            let y: Vec<f64> = (0..self.domain.dim).map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (m - 1) as f64).collect();
            best = best.max(self.link_eval(&y));
            let mut i = 0;
            while i < idx.len() {
                idx[i] += 1;
                if idx[i] < m {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == idx.len() {
                break;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub trials_used: usize,
    /// Trials where both integrals vanished (ellipsoid in a zero region).
    pub skipped: usize,
    pub cap: f64,
}

/// Default ratio cap above which doubling is declared to fail.
pub const DOUBLING_CAP: f64 = 1e4;

/// Unit-ball quadrature points (midpoints of a cube grid masked to the ball).
fn ball_grid(dim: usize) -> Vec<Vec<f64>> {
    let m: usize = match dim {
        1 => 400,
        2 => 48,
        _ => 20,
    };
    let mut pts = vec![];
    let mut idx = vec![0usize; dim];
    loop {
        let z: Vec<f64> = idx.iter().map(|&i| -1.0 + (2 * i + 1) as f64 / m as f64).collect();
        if norm(&z) <= 1.0 {
            pts.push(z);
        }
        let mut i = 0;
        while i < dim {
            idx[i] += 1;
            if idx[i] < m {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == dim {
            return pts;
        }
    }
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    // Gram-Schmidt on Gaussian-ish vectors.
    let mut basis: Vec<Vec<f64>> = vec![];
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let p = crate::numeric::dot(&v, b);
            for k in 0..dim {
                v[k] -= p * b[k];
            }
        }
        let l = norm(&v);
        if l > 1e-3 {
            basis.push(v.iter().map(|c| c / l).collect());
        }
    }
    basis
}

/// Empirical doubling check on random ellipsoids centered in `k`.
pub fn check_doubling(d: &HomogeneousDensity, k: &Polytope, trials: usize, seed: u64) -> Result<DoublingReport> {
    check_doubling_with_cap(d, k, trials, seed, DOUBLING_CAP)
}

pub fn check_doubling_with_cap(d: &HomogeneousDensity, k: &Polytope, trials: usize, seed: u64, cap: f64) -> Result<DoublingReport> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be >= 1".into()));
    }
    let dim = k.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = ball_grid(dim);
    let (lo, hi) = k.bounding_box();
    let diam = k.diameter();
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..trials {
        let center = loop {
            let c: Vec<f64> = (0..dim).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
            if k.contains(&c, 0.0) {
                break c;
            }
        };
        let rot = random_rotation(dim, &mut rng);
        let axes: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.02..0.5) * diam).collect();
        let map = |z: &[f64], s: f64| -> Vec<f64> {
            let mut y = center.clone();
            for (j, b) in rot.iter().enumerate() {
                for i in 0..dim {
                    y[i] += s * axes[j] * z[j] * b[i];
                }
            }
            y
        };
        // Common volume factor cancels except for the 2^n scale.
        let full = compensated_sum(grid.iter().map(|z| d.link_eval(&map(z, 1.0))));
        let half = compensated_sum(grid.iter().map(|z| d.link_eval(&map(z, 0.5)))) / (1u64 << dim) as f64;
        if full < 1e-300 && half < 1e-300 {
            skipped += 1;
            continue;
        }
        let ratio = if half < 1e-300 { cap } else { (full / half).min(cap) };
        worst = worst.max(ratio);
    }
    if skipped == trials {
        return Err(Error::QuadratureUnderflow);
    }
    Ok(DoublingReport { holds: worst < cap, worst_ratio: worst, trials_used: trials - skipped, skipped, cap })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanishingReport {
    pub passes: bool,
    /// `(boundary point, fitted order)`; `NaN` marks a failed fit.
    pub orders: Vec<(Vec<f64>, f64)>,
}

/// Slack added to `v_max` when comparing fitted orders.
pub const VANISHING_FIT_TOL: f64 = 0.1;

fn boundary_samples(p: &Polytope) -> Vec<Vec<f64>> {
    let mut pts = p.vertices.clone();
    if p.dim >= 2 {
        for h in &p.halfspaces {
            let face = p.facet_vertices_ordered(h);
            let k = face.len() as f64;
            pts.push((0..p.dim).map(|i| face.iter().map(|v| v[i]).sum::<f64>() / k).collect());
        }
    }
    pts
}

fn log_log_slope(ts: &[f64], hs: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits the local power law of `h` at boundary points of `p` along a cone of
/// inward directions and compares the best order against `v_max`.
pub fn check_vanishing_order(h: &dyn Fn(&[f64]) -> f64, p: &Polytope, v_max: f64) -> VanishingReport {
    let c = p.vertex_centroid();
    let mut orders = vec![];
    let mut passes = true;
    for y0 in boundary_samples(p) {
        let inward = crate::numeric::sub(&c, &y0);
        let reach = norm(&inward);
        let d0: Vec<f64> = inward.iter().map(|x| x / reach).collect();
        let mut dirs = vec![d0.clone()];
        if p.dim == 2 {
            for ang in [-0.5f64, -0.25, 0.25, 0.5] {
                let (s, co) = ang.sin_cos();
                dirs.push(vec![co * d0[0] - s * d0[1], s * d0[0] + co * d0[1]]);
            }
        }
        let delta = 0.25 * reach;
        let ts: Vec<f64> = (0..20).map(|i| delta * 10f64.powf(-3.0 + 3.0 * i as f64 / 19.0)).collect();
        let mut best = f64::INFINITY;
        for d in &dirs {
            let pts: Vec<Vec<f64>> = ts.iter().map(|t| crate::numeric::add(&y0, &crate::numeric::scale(d, *t))).collect();
            if !pts.iter().all(|y| p.contains(y, 1e-12)) {
                continue;
            }
            let vals: Vec<f64> = pts.iter().map(|y| h(y)).collect();
            if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                continue;
            }
            best = best.min(log_log_slope(&ts, &vals));
        }
        if !best.is_finite() {
            passes = false;
            orders.push((y0, f64::NAN));
            continue;
        }
        if best > v_max + VANISHING_FIT_TOL {
            passes = false;
        }
        orders.push((y0, best));
    }
    VanishingReport { passes, orders }
}
