//! Projected quasi-Newton descent on the discrete energy over convex link
//! functions, for strongly oblique pairs and for split targets.

mod certify;
mod metric;
mod normalize;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use certify::{
    directional_measure, profile_objective, random_direction, roundness_check, stationarity_certificate, tangent_project, RoundnessCheck,
    StationarityCertificate,
};
pub use metric::Metric;
pub use normalize::{
    boundary_renormalize, embed_prime, normalize_translation, restrict_to_domain, translation_moments, Moments, NormalizationState,
    RenormalizeReport,
};

use crate::convex_func::{convexify, DiscreteConvexFunction, LegendrePair};
use crate::convex_geom::{check_partial_obliqueness, check_strong_obliqueness, ConeSpec, ObliquenessMode, ObliquenessReport, Polytope};
use crate::densities::{check_doubling, check_vanishing_order, HomogeneousDensity};
use crate::energy::{default_dual_nodes, relative_grad_norm, EnergyModel, EnergyReport};
use crate::error::{Error, Result};
use crate::laguerre::{domain_diameter, omega_cells, Cell};
use crate::mesh::{BoxGrid, SimplexMesh};
use crate::numeric::{compensated_sum, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strong,
    Partial,
}

/// Initial guess before the mode-specific terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `v₀ ≡ 1`.
    Constant,
    /// `v₀ = 1 + |y|²`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub mode: Mode,
    pub max_iters: usize,
    /// Stop when the relative gradient norm falls below this.
    pub tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// L-BFGS memory; 0 gives preconditioned projected gradient.
    pub memory: usize,
    /// Link mesh nodes per axis.
    pub mesh: usize,
    pub dual_nodes: Option<usize>,
    pub normalization_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Subtracts `<a, y>` from the initial guess.
    pub init_tilt: Option<Vec<f64>>,
    /// Energy below which the run aborts; defaults to the initial energy minus 100.
    pub alarm_floor: Option<f64>,
    pub stationarity_directions: usize,
    /// Defaults to `10 * tol`.
    pub stationarity_tol: Option<f64>,
    pub doubling_trials: usize,
    /// Health threshold `c` in `v(0) <= c inf_P v`.
    pub effective_bound: f64,
    /// Weight `θ` of the stiffness term in the descent metric `M + θ diam(P)² K`.
    pub metric_stiffness: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Strong,
            max_iters: 400,
            tol: 1e-5,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            memory: 8,
            mesh: 33,
            dual_nodes: None,
            normalization_tol: 1e-8,
            seed: 0,
            init: Init::Constant,
            init_tilt: None,
            alarm_floor: None,
            stationarity_directions: 20,
            stationarity_tol: None,
            doubling_trials: 200,
            effective_bound: 10.0,
            metric_stiffness: 1.0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(Error::Invalid(format!("{name} must be positive and finite, got {x}"))) };
        pos("tol", self.tol)?;
        pos("normalization_tol", self.normalization_tol)?;
        pos("effective_bound", self.effective_bound)?;
        if !(self.metric_stiffness >= 0.0 && self.metric_stiffness.is_finite()) {
            return Err(Error::Invalid(format!("metric_stiffness must be non-negative, got {}", self.metric_stiffness)));
        }
        if let Some(t) = self.stationarity_tol {
            pos("stationarity_tol", t)?;
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::Invalid(format!("armijo must lie in (0, 0.5), got {}", self.armijo)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Invalid(format!("backtrack must lie in (0, 1), got {}", self.backtrack)));
        }
        if self.mesh < 3 || self.mesh > 513 {
            return Err(Error::Invalid(format!("mesh must lie in 3..=513, got {}", self.mesh)));
        }
        if matches!(self.dual_nodes, Some(d) if d < 3) {
            return Err(Error::Invalid("dual_nodes must be >= 3".into()));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 || self.doubling_trials == 0 {
            return Err(Error::Invalid("max_iters, max_backtracks and doubling_trials must be >= 1".into()));
        }
        if matches!(&self.init_tilt, Some(a) if a.iter().any(|x| !x.is_finite())) {
            return Err(Error::Invalid("init_tilt must be finite".into()));
        }
        Ok(())
    }

    fn stationarity_tol(&self) -> f64 {
        self.stationarity_tol.unwrap_or(10.0 * self.tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lbfgs,
    Gradient,
    /// Accepted on strict decrease after the Armijo test failed.
    FdFallback,
    Stall,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub t_star: f64,
    pub grad_norm: f64,
    pub normalization_residual: Option<f64>,
    pub omega_diameter: f64,
    pub step: f64,
    pub backtracks: usize,
    pub direction: Direction,
}

impl IterationRecord {
    pub fn log_line(&self) -> String {
        format!(
            "iter={} I={:.12e} J={:.12e} E={:.12e} t_star={:.12e} grad_norm={:.6e} norm_residual={} omega_diam={:.6e} step={:.3e} backtracks={} dir={:?}",
            self.iter,
            self.i,
            self.j,
            self.e,
            self.t_star,
            self.grad_norm,
            self.normalization_residual.map_or("-".to_string(), |r| format!("{r:.3e}")),
            self.omega_diameter,
            self.step,
            self.backtracks,
            self.direction
        )
    }
}

/// Run-health indicators for split targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthReport {
    /// `inf_{Ω′} u` (negative on a healthy run).
    pub inf_u_slice: f64,
    pub slice_diameter: f64,
    /// `|inf_{Ω′} u| / diam(Ω′)`, bounded above and below on healthy runs.
    pub pinch_ratio: f64,
    /// `v(0) / inf_P v`.
    pub effective_ratio: f64,
    pub effective_bound: f64,
    pub green: bool,
}

/// Pinch ratio bracket treated as healthy.
pub const PINCH_BRACKET: (f64, f64) = (1e-3, 1e3);

#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub v: DiscreteConvexFunction,
    pub grid: BoxGrid,
    pub report: EnergyReport,
    pub gradient: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub stalls: usize,
    pub stationarity: Option<StationarityCertificate>,
    pub roundness: Option<RoundnessCheck>,
    pub normalization: Option<NormalizationState>,
    pub health: Option<HealthReport>,
    pub obliqueness: ObliquenessReport,
    pub config: SolveConfig,
}

impl SolutionBundle {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

struct Split<'a> {
    k: usize,
    h_p: &'a HomogeneousDensity,
    tol: f64,
}

#[derive(Clone)]
struct Point {
    f: f64,
    g: Vec<f64>,
    i: f64,
    j: f64,
    v: DiscreteConvexFunction,
    cells: Vec<Option<Cell>>,
    norm: Option<NormalizationState>,
}

/// Diameter of Ω from the vertices of its cells.
pub fn omega_diameter(cells: &[Option<Cell>]) -> f64 {
    domain_diameter(cells)
}

struct Solver<'a> {
    model: EnergyModel,
    cfg: &'a SolveConfig,
    mesh: Arc<SimplexMesh>,
    domain: Polytope,
    mass: Vec<f64>,
    metric: Metric,
    a: f64,
    split: Option<Split<'a>>,
}

struct Memory {
    pairs: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl Solver<'_> {
    /// `F = -ln I - (a/m) ln J` and its gradient.
    fn evaluate(&self, v: &DiscreteConvexFunction, norm: Option<NormalizationState>) -> Result<Point> {
        let ev = self.model.evaluate(v, true)?;
        let (i, j) = (ev.i.value, ev.j.value);
        let c = self.a / self.model.m();
        let gi = ev.i.grad.as_ref().unwrap();
        let gj = ev.j.grad.as_ref().unwrap();
        let g = gi.iter().zip(gj).map(|(x, y)| -x / i - c * y / j).collect();
        Ok(Point { f: -i.ln() - c * j.ln(), g, i, j, v: v.clone(), cells: ev.cells, norm })
    }

    /// Convexification and, for split targets, boundary renormalization and
    /// translation.
    fn project(&self, values: &[f64]) -> Result<(DiscreteConvexFunction, Option<NormalizationState>)> {
        let v = convexify(self.mesh.clone(), self.domain.clone(), values);
        let Some(sp) = &self.split else {
            return Ok((v, None));
        };
        let cells = omega_cells(&v, &self.model.polar)?;
        let (out, state, _) = boundary_renormalize(&v, &cells, sp.h_p, sp.k, sp.tol)?;
        Ok((out, Some(state)))
    }

    /// Moves `p` to its optimal scale; exact up to rounding by the scaling laws.
    fn rescale(&self, p: Point) -> Point {
        let t = self.model.t_star(p.j);
        let m = self.model.m();
        Point {
            f: p.f,
            g: p.g.iter().map(|x| x / t).collect(),
            i: p.i * t.powf(self.a),
            j: p.j * t.powf(-m),
            v: p.v.scaled(t),
            cells: p.cells.iter().map(|c| c.as_ref().map(|c| c.scaled(t))).collect(),
            norm: p.norm,
        }
    }

    fn energy_of(&self, p: &Point) -> f64 {
        -p.i.ln() + p.j.powf(-1.0 / self.model.m())
    }

    fn grad_norm(&self, p: &Point) -> f64 {
        relative_grad_norm(&p.v, &p.g)
    }

    fn direction(&self, p: &Point, mem: &Memory) -> (Vec<f64>, Direction) {
        let pre = self.metric.solve(&p.g);
        if mem.pairs.is_empty() {
            return (pre.iter().map(|x| -x).collect(), Direction::Gradient);
        }
        let mut q = p.g.clone();
        let mut alphas = vec![0.0; mem.pairs.len()];
        for (idx, (s, y, rho)) in mem.pairs.iter().enumerate().rev() {
            let al = rho * dot(s, &q);
            alphas[idx] = al;
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= al * yi;
            }
        }
        let (s, y, _) = mem.pairs.last().unwrap();
        let gamma = dot(s, y) / dot(y, &self.metric.solve(y));
        let mut r: Vec<f64> = self.metric.solve(&q).iter().map(|a| gamma * a).collect();
        for (idx, (s, y, rho)) in mem.pairs.iter().enumerate() {
            let b = rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += si * (alphas[idx] - b);
            }
        }
        let d: Vec<f64> = r.iter().map(|x| -x).collect();
        if dot(&d, &p.g) < 0.0 {
            (d, Direction::Lbfgs)
        } else {
            (pre.iter().map(|x| -x).collect(), Direction::Gradient)
        }
    }

    /// Backtracking along the projected path `α ↦ proj(v + α d)`.
    fn line_search(&self, p: &Point, d: &[f64], kind: Direction) -> Result<Option<(Point, f64, usize, Direction)>> {
        let v = &p.v;
        let vmin = v.min_value();
        let amp = d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        let mut alpha = match kind {
            Direction::Lbfgs => 1.0,
            // relative step of 5% of the mean value, i.e. scaled by 1/grad_norm
            _ => {
                let rms = compensated_sum(d.iter().zip(&self.mass).map(|(x, m)| m * x * x)).sqrt() / self.mass.iter().sum::<f64>().sqrt();
                let vbar = compensated_sum(v.values.iter().zip(&self.mass).map(|(x, m)| m * x)) / self.mass.iter().sum::<f64>();
                0.05 * vbar / rms.max(1e-300)
            }
        };
        // keep the trial strictly positive
        alpha = alpha.min(0.5 * vmin / amp);
        let mut best: Option<(Point, f64, usize)> = None;
        for bt in 0..self.cfg.max_backtracks {
            let raw: Vec<f64> = v.values.iter().zip(d).map(|(x, di)| x + alpha * di).collect();
            let trial = self.project(&raw).and_then(|(tv, st)| self.evaluate(&tv, st));
            match trial {
                Ok(t) => {
                    let delta: Vec<f64> = t.v.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
                    let slope = dot(&p.g, &delta);
                    if slope < 0.0 && t.f <= p.f + self.cfg.armijo * slope {
                        return Ok(Some((t, alpha, bt, kind)));
                    }
                    if t.f < p.f && best.as_ref().map_or(true, |b| t.f < b.0.f) {
                        best = Some((t, alpha, bt));
                    }
                }
                Err(Error::NonPositiveV(_) | Error::EnergyUndefined(_) | Error::EmptyDomain | Error::NewtonStall { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= self.cfg.backtrack;
        }
        Ok(best.map(|(t, a, bt)| (t, a, bt, Direction::FdFallback)))
    }

    fn record(&self, iter: usize, p: &Point, step: f64, backtracks: usize, direction: Direction) -> IterationRecord {
        IterationRecord {
            iter,
            i: p.i,
            j: p.j,
            e: self.energy_of(p),
            t_star: self.model.t_star(p.j),
            grad_norm: self.grad_norm(p),
            normalization_residual: p.norm.as_ref().map(|s| s.newton_residual),
            omega_diameter: omega_diameter(&p.cells),
            step,
            backtracks,
            direction,
        }
    }

    fn run(&self, v0: DiscreteConvexFunction, obliqueness: ObliquenessReport, p_link: &Polytope, sigma_link: &Polytope) -> Result<SolutionBundle> {
        let (v, st) = self.project(&v0.values)?;
        let mut p = self.rescale(self.evaluate(&v, st)?);
        let floor = self.cfg.alarm_floor.unwrap_or(self.energy_of(&p) - 100.0);
        let mut history = vec![self.record(0, &p, 0.0, 0, Direction::Gradient)];
        let mut mem = Memory { pairs: vec![] };
        let mut converged = self.grad_norm(&p) <= self.cfg.tol;
        let mut stalls = 0;
        let mut iter = 0;
        while !converged && iter < self.cfg.max_iters {
            iter += 1;
            let (d, kind) = self.direction(&p, &mem);
            let mut found = self.line_search(&p, &d, kind)?;
            if found.is_none() && kind == Direction::Lbfgs {
                mem.pairs.clear();
                let (d, kind) = self.direction(&p, &mem);
                found = self.line_search(&p, &d, kind)?;
            }
            let Some((next, step, bt, dir)) = found else {
                stalls += 1;
                log::warn!("line search stalled at iteration {iter} (grad norm {:.3e})", self.grad_norm(&p));
                history.push(self.record(iter, &p, 0.0, self.cfg.max_backtracks, Direction::Stall));
                break;
            };
            // curvature pair in the scale of the accepted point
            let s: Vec<f64> = next.v.values.iter().zip(&p.v.values).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.g.iter().zip(&p.g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if self.cfg.memory > 0 && sy > 1e-12 * norm(&s) * norm(&y) {
                mem.pairs.push((s, y, 1.0 / sy));
                if mem.pairs.len() > self.cfg.memory {
                    mem.pairs.remove(0);
                }
            }
            // memory follows the rescale: s -> t s, y -> y / t
            let t = self.model.t_star(next.j);
            for (s, y, _) in mem.pairs.iter_mut() {
                s.iter_mut().for_each(|x| *x *= t);
                y.iter_mut().for_each(|x| *x /= t);
            }
            p = self.rescale(next);
            let rec = self.record(iter, &p, step, bt, dir);
            if rec.e < floor {
                return Err(Error::DivergentEnergy { energy: rec.e, floor });
            }
            log::debug!("{}", rec.log_line());
            history.push(rec);
            converged = self.grad_norm(&p) <= self.cfg.tol;
        }
        self.finish(p, history, converged, stalls, obliqueness, p_link, sigma_link)
    }
}

impl Solver<'_> {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        p: Point,
        history: Vec<IterationRecord>,
        converged: bool,
        stalls: usize,
        obliqueness: ObliquenessReport,
        p_link: &Polytope,
        sigma_link: &Polytope,
    ) -> Result<SolutionBundle> {
        let report = self.model.energy(&p.v)?;
        let split = self.split.as_ref().map(|s| (s.k, s.h_p));
        let stationarity = stationarity_certificate(
            &self.model,
            &p.v,
            &p.g,
            self.cfg.stationarity_directions,
            self.cfg.seed,
            self.cfg.stationarity_tol(),
            split,
        )?;
        let roundness = match self.split {
            None => Some(roundness_check(&p.v, &p.cells, &self.model.polar, p_link, sigma_link)?),
            Some(_) => None,
        };
        let (health, normalization) = match &self.split {
            Some(sp) => {
                let (h, john) = self.health(&p, sp.k)?;
                let mut st = p.norm.clone();
                if let Some(s) = st.as_mut() {
                    s.john_translation = john;
                }
                (Some(h), st)
            }
            None => (None, None),
        };
        let grad_norm = self.grad_norm(&p);
        let grid = self.model.plan(&p.v)?;
        let bundle = SolutionBundle {
            v: p.v.clone(),
            grid,
            report,
            gradient: p.g.clone(),
            history,
            converged,
            stalls,
            stationarity: Some(stationarity),
            roundness,
            normalization,
            health,
            obliqueness,
            config: self.cfg.clone(),
        };
        if converged {
            Ok(bundle)
        } else {
            Err(Error::NoConvergence { iters: bundle.history.len().saturating_sub(1), grad_norm, best: Box::new(bundle) })
        }
    }

    /// Slice indicators and the John center of `Ω′`.
    fn health(&self, p: &Point, k: usize) -> Result<(HealthReport, Vec<f64>)> {
        let v = &p.v;
        let pair = LegendrePair::build(v, &self.model.plan(v)?, &self.model.polar);
        let fb = crate::convex_func::extract_free_boundary(&pair, &self.model.polar, Some(k))?;
        let slice = fb.omega_prime.as_ref().expect("split slice");
        let n = v.dim();
        // inf of u over Ω′ by sampling the slice rays
        let mut inf_u = f64::INFINITY;
        for (d, r) in &slice.radial {
            for q in 0..=32 {
                let x = embed_prime(k, &crate::numeric::scale(d, r * q as f64 / 32.0));
                inf_u = inf_u.min(v.conjugate_at(&x).0);
            }
        }
        let pts: Vec<Vec<f64>> = slice.radial.iter().map(|(d, r)| crate::numeric::scale(d, *r)).collect();
        let mut diam: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                diam = diam.max(crate::numeric::dist(a, b));
            }
        }
        let john = match &slice.hull {
            Some(h) => crate::convex_geom::john_translate(h).map(|(c, _, _)| c).unwrap_or_else(|_| vec![0.0; n - k]),
            None => {
                let lo = pts.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
                vec![0.5 * (lo + hi)]
            }
        };
        let v0 = v.eval(&vec![0.0; n]).unwrap_or(f64::NAN);
        let effective_ratio = v0 / v.min_value();
        let pinch_ratio = inf_u.abs() / diam;
        let green = inf_u < 0.0
            && diam.is_finite()
            && diam > 0.0
            && pinch_ratio > PINCH_BRACKET.0
            && pinch_ratio < PINCH_BRACKET.1
            && effective_ratio <= self.cfg.effective_bound;
        Ok((HealthReport { inf_u_slice: inf_u, slice_diameter: diam, pinch_ratio, effective_ratio, effective_bound: self.cfg.effective_bound, green }, john))
    }
}

fn initial_guess(mesh: &Arc<SimplexMesh>, domain: &Polytope, cfg: &SolveConfig, split_k: Option<usize>) -> Result<DiscreteConvexFunction> {
    let n = domain.dim;
    if let Some(a) = &cfg.init_tilt {
        if a.len() != n {
            return Err(Error::Invalid(format!("init_tilt has {} entries for dimension {n}", a.len())));
        }
    }
    let v = DiscreteConvexFunction::from_fn(mesh.clone(), domain.clone(), |y| {
        let mut val = match cfg.init {
            Init::Constant => 1.0,
            Init::Quadratic => 1.0 + dot(y, y),
        };
        if let Some(k) = split_k {
            // support function of the unit ball in the split directions
            val += norm(&y[k..]);
        }
        if let Some(a) = &cfg.init_tilt {
            val -= dot(a, y);
        }
        val
    });
    if !(v.min_value() > 0.0) {
        return Err(Error::Invalid("initial guess is not positive on the link; reduce init_tilt".into()));
    }
    Ok(v)
}

fn build_solver<'a>(
    p: &Polytope,
    sigma: &ConeSpec,
    g_p: &HomogeneousDensity,
    g_sigma: &HomogeneousDensity,
    cfg: &'a SolveConfig,
) -> Result<(Solver<'a>, Arc<SimplexMesh>)> {
    let mesh = Arc::new(SimplexMesh::on_polytope(p, cfg.mesh)?);
    let dual = cfg.dual_nodes.unwrap_or_else(|| default_dual_nodes(p.dim, cfg.mesh));
    let model = EnergyModel::new(sigma.clone(), g_p.clone(), g_sigma.clone(), dual)?;
    let a = p.dim as f64 + 1.0 + model.beta();
    let mass = mesh.nodal_mass();
    let metric = Metric::new(&mesh, cfg.metric_stiffness, p.diameter());
    Ok((Solver { model, cfg, mesh: mesh.clone(), domain: p.clone(), mass, metric, a, split: None }, mesh))
}

fn check_densities(p: &Polytope, sigma_link: &Polytope, g_p: &HomogeneousDensity, g_sigma: &HomogeneousDensity, cfg: &SolveConfig) -> Result<()> {
    if g_p.domain.dim != p.dim || !g_p.domain.approx_eq(p, 1e-9) {
        return Err(Error::Invalid("source density domain differs from P".into()));
    }
    if g_sigma.domain.dim != sigma_link.dim {
        return Err(Error::Invalid("target density domain differs from the target link".into()));
    }
    for (name, d, k) in [("source", g_p, p), ("target", g_sigma, sigma_link)] {
        if d.is_constant() {
            continue;
        }
        let rep = check_doubling(d, k, cfg.doubling_trials, cfg.seed)?;
        if !rep.holds {
            return Err(Error::HypothesisViolated(format!("{name} link density fails the doubling check (ratio {:.3e})", rep.worst_ratio)));
        }
    }
    Ok(())
}

/// Minimizes the energy for a strongly oblique pair of compact links.
pub fn minimize_strong(
    p: &Polytope,
    sigma: &ConeSpec,
    g_p: &HomogeneousDensity,
    g_sigma: &HomogeneousDensity,
    cfg: &SolveConfig,
) -> Result<SolutionBundle> {
    cfg.validate()?;
    if cfg.mode != Mode::Strong {
        return Err(Error::Invalid("minimize_strong needs mode = strong".into()));
    }
    if sigma.is_split() {
        return Err(Error::Invalid("split target requires partial mode".into()));
    }
    let ob = check_strong_obliqueness(p, &sigma.link)?;
    if ob.mode != ObliquenessMode::Strong {
        return Err(Error::NotOblique(ob.margin));
    }
    check_densities(p, &sigma.link, g_p, g_sigma, cfg)?;
    let (solver, mesh) = build_solver(p, sigma, g_p, g_sigma, cfg)?;
    let v0 = initial_guess(&mesh, p, cfg, None)?;
    solver.run(v0, ob, p, &sigma.link)
}

/// Minimizes the energy over translation-normalized functions for a split
/// target `Σ^k × R^{n-k}`.
pub fn minimize_partial(
    p: &Polytope,
    sigma: &ConeSpec,
    g_p: &HomogeneousDensity,
    g_sigma: &HomogeneousDensity,
    cfg: &SolveConfig,
) -> Result<SolutionBundle> {
    cfg.validate()?;
    if cfg.mode != Mode::Partial {
        return Err(Error::Invalid("minimize_partial needs mode = partial".into()));
    }
    let k = match sigma.split_k {
        Some(k) if k < p.dim => k,
        _ => return Err(Error::Invalid("partial mode needs a split target with k < n".into())),
    };
    let ob = check_partial_obliqueness(p, sigma)?;
    if ob.mode != ObliquenessMode::Partial {
        return Err(Error::NotOblique(ob.margin));
    }
    let (alpha, beta) = (g_p.degree, g_sigma.degree);
    if !(beta > alpha) {
        return Err(Error::HypothesisViolated(format!("partial mode needs beta > alpha, got alpha = {alpha}, beta = {beta}")));
    }
    let h = |y: &[f64]| g_p.link_eval(y);
    let van = check_vanishing_order(&h, p, 1.0 + alpha);
    if !van.passes {
        let worst = van.orders.iter().map(|o| o.1).fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        return Err(Error::HypothesisViolated(format!("source density vanishes to order {worst:.3} > 1 + alpha = {}", 1.0 + alpha)));
    }
    check_densities(p, &sigma.link, g_p, g_sigma, cfg)?;
    let (mut solver, mesh) = build_solver(p, sigma, g_p, g_sigma, cfg)?;
    solver.split = Some(Split { k, h_p: g_p, tol: cfg.normalization_tol });
    let v0 = initial_guess(&mesh, p, cfg, Some(k))?;
    solver.run(v0, ob, p, &sigma.link)
}

/// Dispatches on the configured mode.
pub fn minimize(p: &Polytope, sigma: &ConeSpec, g_p: &HomogeneousDensity, g_sigma: &HomogeneousDensity, cfg: &SolveConfig) -> Result<SolutionBundle> {
    match cfg.mode {
        Mode::Strong => minimize_strong(p, sigma, g_p, g_sigma, cfg),
        Mode::Partial => minimize_partial(p, sigma, g_p, g_sigma, cfg),
    }
}
