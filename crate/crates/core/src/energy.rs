//! The kernel `K`, the functionals `I`, `J`, the energy and its first variation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_func::{dual_grid_for, DiscreteConvexFunction};
use crate::convex_geom::{ConeSpec, PolarSupport};
use crate::densities::HomogeneousDensity;
use crate::error::{EnergyCause, Error, Result};
use crate::laguerre::{omega_cells, padded_polar, polar_pieces, Cell};
use crate::mesh::{BoxGrid, QuadRule, SimplexMesh};
use crate::numeric::{compensated_sum, dot, gauss_legendre_unit, Accumulator};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub t_star: f64,
    pub grad_norm: f64,
    /// Level difference of `E` between the working and the refined rules.
    pub quadrature_error_estimate: f64,
    /// Level differences of `I` and `J` separately.
    pub i_error_estimate: f64,
    pub j_error_estimate: f64,
}

/// `K(x, s)` by adaptive quadrature (closed form for constant `h_Σ`).
pub fn kernel_k(x: &[f64], s: f64, sigma: &ConeSpec, g_sigma: &HomogeneousDensity) -> Result<f64> {
    if s < 0.0 || !s.is_finite() {
        return Err(Error::Invalid(format!("kernel needs s >= 0, got {s}")));
    }
    let polar = PolarSupport::new(sigma)?;
    let phi = polar.eval(x);
    let beta = g_sigma.degree;
    if g_sigma.is_constant() {
        return Ok(((s + phi).powf(1.0 + beta) - phi.powf(1.0 + beta)) / (1.0 + beta));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let f = |sig: f64| {
        let r = sig + phi;
        let y: Vec<f64> = x.iter().map(|c| c / r).collect();
        r.powf(beta) * g_sigma.link_eval(&y)
    };
    Ok(crate::numeric::integrate_1d(&f, 0.0, s, 1e-12))
}

/// Quadrature level: 1 is the working rule, 2 the refined rule used for
/// error estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Working,
    Refined,
}

/// Discrete energy on a fixed link mesh with a given target cone and densities.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    pub n: usize,
    pub sigma: ConeSpec,
    pub polar: PolarSupport,
    pub g_p: HomogeneousDensity,
    pub g_sigma: HomogeneousDensity,
    /// Dual grid nodes per axis.
    pub dual_nodes: usize,
    pub sup_h_sigma: f64,
    gl: (Vec<f64>, Vec<f64>),
}

/// Result of integrating `I` with optional per-dual-node sensitivities.
#[derive(Debug, Clone)]
pub struct IntegralI {
    pub value: f64,
    /// `dI/dv_i` per link node.
    pub grad: Option<Vec<f64>>,
    /// Largest ratio `K / (sup h_Σ (-u)^{1+β} / (1+β))` seen at quadrature points.
    pub kernel_bound_ratio: f64,
    /// `∫_Ω (-u)^β h_Σ(x/(-u))`, the mass of the unnormalized source measure.
    pub ds_mass: f64,
    /// Source mass of each node's cell, `μ(∂v(y_i) ∩ Ω)`.
    pub cell_mass: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IntegralJ {
    pub value: f64,
    pub grad: Option<Vec<f64>>,
    /// `∫_P h_P v^{-(m+1)}`.
    pub weighted_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EnergyReport,
    /// `dE/dv_i` per link node.
    pub gradient: Option<Vec<f64>>,
    pub i: IntegralI,
    pub j: IntegralJ,
    pub cells: Vec<Option<Cell>>,
}

/// Default dual-grid resolution for a link mesh with `link_nodes` per axis.
pub fn default_dual_nodes(n: usize, link_nodes: usize) -> usize {
    let f = match n {
        1 => 8,
        2 => 4,
        _ => 2,
    };
    f * (link_nodes.max(2) - 1) + 1
}

impl EnergyModel {
    pub fn new(sigma: ConeSpec, g_p: HomogeneousDensity, g_sigma: HomogeneousDensity, dual_nodes: usize) -> Result<Self> {
        let polar = PolarSupport::new(&sigma)?;
        let sup_h_sigma = g_sigma.sup_link();
        Ok(Self { n: sigma.n, sigma, polar, g_p, g_sigma, dual_nodes, sup_h_sigma, gl: gauss_legendre_unit(10) })
    }

    pub fn alpha(&self) -> f64 {
        self.g_p.degree
    }

    pub fn beta(&self) -> f64 {
        self.g_sigma.degree
    }

    /// `m = n + 1 + α`.
    pub fn m(&self) -> f64 {
        self.n as f64 + 1.0 + self.alpha()
    }

    /// `t* = (n+1+β) J^{1/m}`.
    pub fn t_star(&self, j: f64) -> f64 {
        (self.n as f64 + 1.0 + self.beta()) * j.powf(1.0 / self.m())
    }

    pub fn plan(&self, v: &DiscreteConvexFunction) -> Result<BoxGrid> {
        dual_grid_for(v, &self.polar, self.dual_nodes)
    }

    /// `(K(x, s), ∂_s K(x, s))` given `φ = φ_{Σ°}(x)`.
    #[inline]
    fn kernel_pair(&self, x: &[f64], phi: f64, s: f64) -> (f64, f64) {
        let beta = self.beta();
        if self.g_sigma.is_constant() {
            let r = s + phi;
            let rb = r.powf(beta);
            return ((r * rb - phi.powf(1.0 + beta)) / (1.0 + beta), rb);
        }
        let f = |sig: f64| {
            let r = sig + phi;
            let y: Vec<f64> = x.iter().map(|c| c / r).collect();
            r.powf(beta) * self.g_sigma.link_eval(&y)
        };
        let (xs, ws) = &self.gl;
        let k = s * compensated_sum(xs.iter().zip(ws).map(|(t, w)| w * f(s * t)));
        (k, f(s))
    }

    /// `I` integrated exactly over the Laguerre cells of the nodal data
    /// clipped to `Ω`, with a collapsed Gauss rule on each linear piece.
    pub fn functional_i(&self, v: &DiscreteConvexFunction, level: Level, want_grad: bool) -> Result<IntegralI> {
        let cells = omega_cells(v, &self.polar)?;
        self.functional_i_on(v, &cells, level, want_grad)
    }

    /// As [`EnergyModel::functional_i`] on precomputed cells.
    pub fn functional_i_on(&self, v: &DiscreteConvexFunction, cells: &[Option<Cell>], level: Level, want_grad: bool) -> Result<IntegralI> {
        let n = self.n;
        let rule = match level {
            Level::Working => QuadRule::collapsed(n, 3),
            Level::Refined => QuadRule::collapsed(n, 6),
        };
        let zs = padded_polar(&self.polar, n);
        let beta = self.beta();
        let bound_c = self.sup_h_sigma / (1.0 + beta);
        let outs: Vec<(f64, f64, f64)> = cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                let Some(cell) = cell else {
                    return (0.0, 0.0, 0.0);
                };
                let y = &v.mesh.points[i];
                let mut acc = Accumulator::new();
                let mut macc = Accumulator::new();
                let mut ratio = 0.0f64;
                for (piece, _) in polar_pieces(cell, &zs) {
                    for (x, w) in piece.quadrature(&rule) {
                        let phi = self.polar.eval(&x);
                        let mu = v.values[i] - dot(&x, y);
                        let s = (mu - phi).max(0.0);
                        if s == 0.0 {
                            continue;
                        }
                        let (k, ds) = self.kernel_pair(&x, phi, s);
                        acc.add(w * k);
                        macc.add(w * ds);
                        let bound = bound_c * mu.powf(1.0 + beta);
                        if bound > 0.0 {
                            ratio = ratio.max(k / bound);
                        }
                    }
                }
                (acc.value(), macc.value(), ratio)
            })
            .collect();
        let value = compensated_sum(outs.iter().map(|o| o.0));
        if !(value > 0.0) {
            return Err(Error::EnergyUndefined(EnergyCause::EmptyDomain));
        }
        let cell_mass: Vec<f64> = outs.iter().map(|o| o.1).collect();
        Ok(IntegralI {
            value,
            grad: want_grad.then(|| cell_mass.clone()),
            kernel_bound_ratio: outs.iter().map(|o| o.2).fold(0.0, f64::max),
            ds_mass: compensated_sum(cell_mass.iter().copied()),
            cell_mass,
        })
    }

    /// `J(v) = (1/m) ∫_P h_P v^{-m}` with boundary simplices sub-sampled.
    pub fn functional_j(&self, v: &DiscreteConvexFunction, level: Level, want_grad: bool) -> Result<IntegralJ> {
        functional_j_impl(v, &self.g_p, level, want_grad)
    }

    /// Energy, scale and (optionally) gradient at the working level.
    pub fn evaluate(&self, v: &DiscreteConvexFunction, want_grad: bool) -> Result<Evaluation> {
        let vmin = v.min_value();
        if !(vmin > 0.0) {
            return Err(Error::EnergyUndefined(EnergyCause::NonPositiveV));
        }
        if vmin < admissibility_floor(v) {
            return Err(Error::EnergyUndefined(EnergyCause::BelowFloor));
        }
        let cells = omega_cells(v, &self.polar)?;
        let iv = self.functional_i_on(v, &cells, Level::Working, want_grad)?;
        let jv = self.functional_j(v, Level::Working, want_grad)?;
        let m = self.m();
        let e = -iv.value.ln() + jv.value.powf(-1.0 / m);
        let gradient = if want_grad {
            let gi = iv.grad.as_ref().unwrap();
            let gj = jv.grad.as_ref().unwrap();
            let cj = -(1.0 / m) * jv.value.powf(-1.0 / m - 1.0);
            Some(gi.iter().zip(gj).map(|(a, b)| -a / iv.value + cj * b).collect::<Vec<f64>>())
        } else {
            None
        };
        let grad_norm = gradient.as_ref().map_or(f64::NAN, |g| relative_grad_norm(v, g));
        let report = EnergyReport {
            i: iv.value,
            j: jv.value,
            e,
            t_star: self.t_star(jv.value),
            grad_norm,
            quadrature_error_estimate: f64::NAN,
            i_error_estimate: f64::NAN,
            j_error_estimate: f64::NAN,
        };
        Ok(Evaluation { report, gradient, i: iv, j: jv, cells })
    }

    /// Full energy report: `E`, its gradient norm and the level-difference
    /// quadrature estimates.
    pub fn energy(&self, v: &DiscreteConvexFunction) -> Result<EnergyReport> {
        let ev = self.evaluate(v, true)?;
        self.refine_report(v, ev)
    }

    /// Adds the refined-level estimates to a working-level evaluation.
    pub fn refine_report(&self, v: &DiscreteConvexFunction, ev: Evaluation) -> Result<EnergyReport> {
        let mut report = ev.report;
        let i2 = self.functional_i_on(v, &ev.cells, Level::Refined, false)?.value;
        let j2 = self.functional_j(v, Level::Refined, false)?.value;
        let e2 = -i2.ln() + j2.powf(-1.0 / self.m());
        report.i_error_estimate = (i2 - report.i).abs();
        report.j_error_estimate = (j2 - report.j).abs();
        report.quadrature_error_estimate = (e2 - report.e).abs();
        Ok(report)
    }

    /// `dE(v + t d)/dt` at `t = 0`.
    pub fn first_variation(&self, v: &DiscreteConvexFunction, direction: &[f64]) -> Result<f64> {
        let ev = self.evaluate(v, true)?;
        Ok(crate::numeric::dot(ev.gradient.as_ref().unwrap(), direction))
    }

    /// `E(t v)` evaluated from the scaling laws of `I` and `J`.
    pub fn profile(&self, report: &EnergyReport, t: f64) -> f64 {
        -(self.n as f64 + 1.0 + self.beta()) * t.ln() - report.i.ln() + t * report.j.powf(-1.0 / self.m())
    }
}

/// `1e-8 diam(P)`; link functions below it are inadmissible.
pub fn admissibility_floor(v: &DiscreteConvexFunction) -> f64 {
    1e-8 * v.domain.diameter()
}

/// Gradient norm made scale-free: `v̄ ‖dE/dv / mass‖_{L²(P)} / |P|^{1/2}`.
pub fn relative_grad_norm(v: &DiscreteConvexFunction, g: &[f64]) -> f64 {
    let mass = v.mesh.nodal_mass();
    let vol: f64 = mass.iter().sum();
    let vbar = compensated_sum(mass.iter().zip(&v.values).map(|(m, x)| m * x)) / vol;
    let sq = compensated_sum(g.iter().zip(&mass).map(|(gi, m)| gi * gi / m));
    vbar * (sq / vol).sqrt()
}

/// `J(v) = (1/(n+1+α)) ∫_P h_P v^{-(n+1+α)}` for a nodal function.
pub fn functional_j(v: &DiscreteConvexFunction, h_p: &HomogeneousDensity) -> Result<f64> {
    Ok(functional_j_impl(v, h_p, Level::Working, false)?.value)
}

/// Quadrature on the link mesh for integrals against `h`: per simplex, the
/// barycentric points and weights (volume and `h` included). Each simplex
/// is first cut into pieces on which `h` is smooth.
pub struct LinkQuadrature {
    pub n: usize,
    pub ranges: Vec<std::ops::Range<usize>>,
    pub bary: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LinkQuadrature {
    pub fn new(mesh: &SimplexMesh, h: &HomogeneousDensity, level: Level) -> Self {
        let n = mesh.dim;
        let rule = match level {
            Level::Working => QuadRule::collapsed(n, 3),
            Level::Refined => QuadRule::collapsed(n, 6),
        };
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.simplices.len())
            .into_par_iter()
            .map(|s| {
                let verts: Vec<Vec<f64>> = mesh.simplices[s].iter().map(|&i| mesh.points[i].clone()).collect();
                let mut bary = vec![];
                let mut weights = vec![];
                if h.is_constant() {
                    for (b, w) in rule.bary.iter().zip(&rule.weights) {
                        bary.extend_from_slice(b);
                        weights.push(w * mesh.volumes[s]);
                    }
                } else {
                    for piece in h.smooth_pieces(&Cell::simplex(&verts)) {
                        for (x, w) in piece.quadrature(&rule) {
                            bary.extend(mesh.barycentric(s, &x));
                            weights.push(w * h.link_eval(&x));
                        }
                    }
                }
                (bary, weights)
            })
            .collect();
        let mut ranges = vec![];
        let mut bary = vec![];
        let mut weights = vec![];
        for (b, w) in parts {
            ranges.push(weights.len()..weights.len() + w.len());
            bary.extend(b);
            weights.extend(w);
        }
        Self { n, ranges, bary, weights }
    }

    #[inline]
    pub fn point(&self, q: usize) -> &[f64] {
        &self.bary[q * (self.n + 1)..(q + 1) * (self.n + 1)]
    }
}

fn functional_j_impl(v: &DiscreteConvexFunction, h_p: &HomogeneousDensity, level: Level, want_grad: bool) -> Result<IntegralJ> {
    let vmin = v.min_value();
    if !(vmin > 0.0) {
        return Err(Error::NonPositiveV(vmin));
    }
    let mesh = &v.mesh;
    let n = mesh.dim;
    let m = n as f64 + 1.0 + h_p.degree;
    let quad = LinkQuadrature::new(mesh, h_p, level);
    let outs: Vec<(f64, f64, Vec<f64>)> = (0..mesh.simplices.len())
        .into_par_iter()
        .map(|s| {
            let ids = &mesh.simplices[s];
            let mut acc = Accumulator::new();
            let mut macc = Accumulator::new();
            let mut local = vec![0.0; ids.len()];
            for q in quad.ranges[s].clone() {
                let b = quad.point(q);
                let vq: f64 = b.iter().zip(ids).map(|(l, &i)| l * v.values[i]).sum();
                let wgt = quad.weights[q];
                let p = vq.powf(-m);
                acc.add(wgt * p);
                let dp = wgt * p / vq;
                macc.add(dp);
                if want_grad {
                    for (l, lam) in local.iter_mut().zip(b) {
                        *l -= dp * lam;
                    }
                }
            }
            (acc.value(), macc.value(), local)
        })
        .collect();
    let value = compensated_sum(outs.iter().map(|o| o.0)) / m;
    let weighted_mass = compensated_sum(outs.iter().map(|o| o.1));
    let grad = want_grad.then(|| {
        let mut g = vec![Accumulator::new(); v.values.len()];
        for (s, o) in outs.iter().enumerate() {
            for (&i, l) in mesh.simplices[s].iter().zip(&o.2) {
                g[i].add(*l);
            }
        }
        g.iter().map(|a| a.value()).collect()
    });
    Ok(IntegralJ { value, grad, weighted_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_geom::Polytope;
    use crate::densities::DensityKind;
    use crate::mesh::SimplexMesh;
    use std::sync::Arc;
    use crate::convex_func::LegendrePair;

    fn square() -> Polytope {
        Polytope::cube(2, 0.5)
    }

    fn identity_v(y: &[f64]) -> f64 {
        ((1.0 + y.iter().map(|c| c * c).sum::<f64>()) / 2.0).sqrt()
    }

    fn model(nodes: usize, beta: f64) -> (EnergyModel, Arc<SimplexMesh>) {
        let mesh = Arc::new(SimplexMesh::on_polytope(&square(), nodes).unwrap());
        let m = EnergyModel::new(
            ConeSpec::compact(square()),
            HomogeneousDensity::lebesgue(square()),
            HomogeneousDensity::lebesgue(square()).with_degree(beta),
            default_dual_nodes(2, nodes),
        )
        .unwrap();
        (m, mesh)
    }

    #[test]
    fn kernel_examples() {
        let sigma = ConeSpec::compact(square());
        let leb = HomogeneousDensity::lebesgue(square());
        assert_eq!(kernel_k(&[0.1, 0.2], 0.0, &sigma, &leb).unwrap(), 0.0);
        assert!((kernel_k(&[0.1, 0.2], 0.7, &sigma, &leb).unwrap() - 0.7).abs() < 1e-15);
        // phi_{Σ°}(x) = 2|x|_inf = 1 at x = (0.5, 0)
        let b2 = leb.clone().with_degree(2.0);
        assert!((kernel_k(&[0.5, 0.0], 1.0, &sigma, &b2).unwrap() - 7.0 / 3.0).abs() < 1e-12);
        // a constant table goes through the quadrature path
        let table = crate::densities::DensityTable { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], shape: vec![2, 2], values: vec![1.0; 4] };
        let tab = HomogeneousDensity::new(2.0, DensityKind::Tabulated(table), square()).unwrap();
        let q = kernel_k(&[0.5, 0.0], 1.0, &sigma, &tab).unwrap();
        assert!((q - 7.0 / 3.0).abs() < 1e-10 * 7.0 / 3.0);
        assert!(kernel_k(&[0.0, 0.0], -1.0, &sigma, &leb).is_err());
    }

    #[test]
    fn j_of_constant_is_volume_over_dimension() {
        let (m, mesh) = model(9, 0.0);
        let v = DiscreteConvexFunction::from_fn(mesh, square(), |_| 1.0);
        let j = m.functional_j(&v, Level::Working, false).unwrap().value;
        assert!((j - 1.0 / 3.0).abs() < 1e-14);
        let bad = v.with_values(vec![0.0; v.values.len()]);
        assert!(matches!(functional_j(&bad, &m.g_p), Err(Error::NonPositiveV(_))));
    }

    #[test]
    fn j_cross_quadrature_on_identity() {
        // closed-form integrand on two independent rules
        let p = square();
        let mesh = SimplexMesh::on_polytope(&p, 33).unwrap();
        let f = |y: &[f64]| identity_v(y).powi(-3) / 3.0;
        let tri = QuadRule::high(2);
        let a = compensated_sum((0..mesh.simplices.len()).flat_map(|s| {
            let mesh = &mesh;
            tri.bary.iter().zip(&tri.weights).map(move |(b, w)| w * mesh.volumes[s] * f(&mesh.point_at(s, b)))
        }));
        let (xs, ws) = gauss_legendre_unit(20);
        let b = compensated_sum(xs.iter().zip(&ws).flat_map(|(x1, w1)| {
            xs.iter().zip(&ws).map(move |(x2, w2)| w1 * w2 * f(&[x1 - 0.5, x2 - 0.5]))
        }));
        assert!((a - b).abs() < 1e-6 * b, "{a} {b}");
    }

    #[test]
    fn i_with_beta_zero_is_integral_of_minus_w() {
        let (m, mesh) = model(9, 0.0);
        let v = DiscreteConvexFunction::from_fn(mesh, square(), identity_v);
        let grid = m.plan(&v).unwrap();
        let pair = LegendrePair::build(&v, &grid, &m.polar);
        let i = m.functional_i(&v, Level::Working, false).unwrap().value;
        // direct midpoint sum of max(-w, 0) on a fine grid
        let fine = 801;
        let h: Vec<f64> = (0..2).map(|k| (grid.hi[k] - grid.lo[k]) / fine as f64).collect();
        let mut acc = Accumulator::new();
        for a in 0..fine {
            for b in 0..fine {
                let x = [grid.lo[0] + (a as f64 + 0.5) * h[0], grid.lo[1] + (b as f64 + 0.5) * h[1]];
                acc.add((-pair.w_exact(&x, &m.polar)).max(0.0) * h[0] * h[1]);
            }
        }
        assert!((i - acc.value()).abs() < 2e-3 * i, "{i} {}", acc.value());
    }

    #[test]
    fn scaling_laws_and_t_star() {
        let (m, mesh) = model(9, 1.0);
        let v = DiscreteConvexFunction::from_fn(mesh, square(), |y| 1.0 + 0.3 * y[0] * y[0] + 0.1 * y[1]);
        let r = m.energy(&v).unwrap();
        for t in [0.5, 2.0] {
            let rt = m.energy(&v.scaled(t)).unwrap();
            assert!((rt.i - t.powf(4.0) * r.i).abs() <= 1e-10 * rt.i);
            assert!((rt.j - t.powf(-3.0) * r.j).abs() <= 1e-12 * rt.j);
        }
        let e_of = |t: f64| m.energy(&v.scaled(t)).unwrap().e;
        let tg = crate::numeric::golden_section_polished(e_of, 0.1 * r.t_star, 10.0 * r.t_star, 1e-10);
        assert!((tg - r.t_star).abs() <= 1e-8 * r.t_star.max(1.0), "{tg} {}", r.t_star);
        // profile diverges at both ends
        let best = m.profile(&r, r.t_star);
        assert!(m.profile(&r, 1e-3) > best + 5.0 && m.profile(&r, 1e3) > best + 5.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, mesh) = model(9, 1.0);
        let v = DiscreteConvexFunction::from_fn(mesh.clone(), square(), |y| 1.0 + 0.5 * y[0] * y[0] + 0.2 * y[1] * y[1] + 0.1 * y[0]);
        let g = m.evaluate(&v, true).unwrap().gradient.unwrap();
        for (a, b) in [(1.0, 0.0), (0.3, 2.0), (-1.0, 1.0)] {
            let dir: Vec<f64> = mesh.points.iter().map(|y| (a * y[0] + b * y[1] * y[1] + 0.5).cos()).collect();
            let an: f64 = crate::numeric::dot(&g, &dir);
            let eps = 1e-5;
            let plus = v.with_values(v.values.iter().zip(&dir).map(|(x, d)| x + eps * d).collect());
            let minus = v.with_values(v.values.iter().zip(&dir).map(|(x, d)| x - eps * d).collect());
            let fd = (m.evaluate(&plus, false).unwrap().report.e - m.evaluate(&minus, false).unwrap().report.e) / (2.0 * eps);
            assert!((an - fd).abs() <= 1e-6 * fd.abs().max(1e-8), "{an} {fd}");
        }
    }

    #[test]
    fn kernel_bound_holds_on_identity() {
        let (m, mesh) = model(9, 2.0);
        let v = DiscreteConvexFunction::from_fn(mesh, square(), identity_v);
        let i = m.functional_i(&v, Level::Working, false).unwrap();
        assert!(i.kernel_bound_ratio <= 1.0 + 1e-12 && i.kernel_bound_ratio > 0.0);
    }
}
