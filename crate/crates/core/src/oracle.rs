//! Reference solutions independent of the variational solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_func::DiscreteConvexFunction;
use crate::convex_geom::{check_strong_obliqueness, ConeSpec, ObliquenessMode, PolarSupport, Polytope};
use crate::densities::HomogeneousDensity;
use crate::energy::{EnergyModel, Level, LinkQuadrature};
use crate::error::{Error, Result};
use crate::laguerre::{enclosing_half_width, subdifferential_cells};
use crate::numeric::{compensated_sum, dot, norm};

/// The closed form `v(ỹ) = sqrt((1+|ỹ|²)/2)` whose lift is `|y|²/2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityReference {
    pub n: usize,
}

impl IdentityReference {
    pub fn eval(&self, y: &[f64]) -> f64 {
        ((1.0 + dot(y, y)) / 2.0).sqrt()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let v = self.eval(y);
        y.iter().map(|c| c / (2.0 * v)).collect()
    }

    /// `det D²v = 2^{-(n+1)} v^{-(n+2)}`.
    pub fn hessian_det(&self, y: &[f64]) -> f64 {
        let v = self.eval(y);
        2f64.powi(-(self.n as i32) - 1) * v.powi(-(self.n as i32) - 2)
    }

    pub fn lift(&self, y: &[f64]) -> f64 {
        0.5 * dot(y, y)
    }
}

pub fn identity_reference(p: &Polytope, sigma: &ConeSpec, g_p: &HomogeneousDensity, g_sigma: &HomogeneousDensity) -> Result<IdentityReference> {
    let mismatch = |s: &str| Err(Error::ConfigMismatch(s.into()));
    if sigma.is_split() {
        return mismatch("target cone splits off a linear factor");
    }
    if !p.approx_eq(&sigma.link, 1e-9) {
        return mismatch("source and target links differ");
    }
    if g_p.degree != g_sigma.degree {
        return mismatch("density degrees differ");
    }
    if g_p.kind != g_sigma.kind {
        return mismatch("link densities differ");
    }
    match check_strong_obliqueness(p, &sigma.link) {
        Ok(r) if r.mode == ObliquenessMode::Strong => Ok(IdentityReference { n: p.dim }),
        Ok(r) => Err(Error::ConfigMismatch(format!("pair is not strongly oblique (margin {:e})", r.margin))),
        Err(e) => Err(Error::ConfigMismatch(e.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootOptions {
    /// RK4 steps on each side of the origin.
    pub steps: usize,
    pub tol: f64,
    pub grid: usize,
    pub max_newton: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { steps: 400, tol: 1e-10, grid: 16, max_newton: 60 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingSolution1D {
    pub interval: (f64, f64),
    pub ys: Vec<f64>,
    pub vs: Vec<f64>,
    pub dvs: Vec<f64>,
    pub v0: f64,
    pub dv0: f64,
    /// `v⋆ + φ_{Σ°}(v')` at the left and right endpoints.
    pub residuals: (f64, f64),
    /// Every distinct `(v(0), v'(0))` root reached by the multistart.
    pub roots: Vec<(f64, f64)>,
    pub steps: usize,
}

impl ShootingSolution1D {
    /// Cubic Hermite interpolation of the samples.
    pub fn eval(&self, y: f64) -> f64 {
        let k = match self.ys.binary_search_by(|a| a.total_cmp(&y)) {
            Ok(k) => return self.vs[k],
            Err(k) => k.clamp(1, self.ys.len() - 1),
        };
        let (a, b) = (self.ys[k - 1], self.ys[k]);
        let h = b - a;
        let t = (y - a) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.vs[k - 1]
            + (t3 - 2.0 * t2 + t) * h * self.dvs[k - 1]
            + (-2.0 * t3 + 3.0 * t2) * self.vs[k]
            + (t3 - t2) * h * self.dvs[k]
    }
}

struct Shooter<'a> {
    lo: f64,
    hi: f64,
    alpha: f64,
    beta: f64,
    g_p: &'a HomogeneousDensity,
    g_sigma: &'a HomogeneousDensity,
    polar: PolarSupport,
    s_lo: f64,
    s_hi: f64,
    steps: usize,
}

impl Shooter<'_> {
    fn rhs(&self, y: f64, v: f64, w: f64) -> Option<f64> {
        let mstar = v - y * w;
        if !(v > 0.0 && mstar > 0.0) {
            return None;
        }
        // stages may step just outside Σ near the endpoints
        let z = (w / mstar).clamp(self.s_lo, self.s_hi);
        let hs = self.g_sigma.link_eval(&[z]);
        if !(hs > 0.0) {
            return None;
        }
        let f = self.g_p.link_eval(&[y]) / (v.powf(3.0 + self.alpha) * mstar.powf(self.beta) * hs);
        f.is_finite().then_some(f)
    }

    /// RK4 from the origin to `end`, returning every step.
    fn integrate(&self, v0: f64, w0: f64, end: f64) -> Option<Vec<(f64, f64, f64)>> {
        let h = end / self.steps as f64;
        let mut out = Vec::with_capacity(self.steps + 1);
        let (mut v, mut w) = (v0, w0);
        out.push((0.0, v, w));
        for k in 0..self.steps {
            let y = k as f64 * h;
            let a = self.rhs(y, v, w)?;
            let b = self.rhs(y + 0.5 * h, v + 0.5 * h * w, w + 0.5 * h * a)?;
            let c = self.rhs(y + 0.5 * h, v + 0.5 * h * (w + 0.5 * h * a), w + 0.5 * h * b)?;
            let d = self.rhs(y + h, v + h * (w + 0.5 * h * b), w + h * c)?;
            v += h * (w + h * (a + b + c) / 6.0);
            w += h * (a + 2.0 * b + 2.0 * c + d) / 6.0;
            if !(v.is_finite() && w.is_finite()) {
                return None;
            }
            out.push(((k + 1) as f64 * h, v, w));
        }
        Some(out)
    }

    fn boundary(&self, y: f64, v: f64, w: f64) -> f64 {
        y * w - v + self.polar.eval(&[w])
    }

    /// The boundary condition with the branch of `φ_{Σ°}` fixed so that the
    /// endpoints of `P` map to the matching endpoints of `Σ`; smooth in the
    /// shooting parameters, unlike `v⋆ + φ_{Σ°}(v')`.
    fn residual(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let l = *self.integrate(x[0], x[1], self.lo)?.last()?;
        let r = *self.integrate(x[0], x[1], self.hi)?.last()?;
        let oriented = |(y, v, w): (f64, f64, f64), s: f64| (w - s * (v - y * w)) / s.abs();
        Some([oriented(l, self.s_lo), oriented(r, self.s_hi)])
    }

    fn newton(&self, mut x: [f64; 2], tol: f64, max_iter: usize) -> Option<([f64; 2], [f64; 2])> {
        let size = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
        let mut r = self.residual(x)?;
        for _ in 0..max_iter {
            if size(&r) <= tol {
                return Some((x, r));
            }
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let e = 1e-7 * (1.0 + x[k].abs());
                let mut xp = x;
                xp[k] += e;
                let mut xm = x;
                xm[k] -= e;
                let (rp, rm) = (self.residual(xp)?, self.residual(xm)?);
                for i in 0..2 {
                    jac[i][k] = (rp[i] - rm[i]) / (2.0 * e);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det.abs() > 1e-300) {
                return None;
            }
            let dx = [(jac[1][1] * r[0] - jac[0][1] * r[1]) / det, (jac[0][0] * r[1] - jac[1][0] * r[0]) / det];
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let xn = [x[0] - lam * dx[0], x[1] - lam * dx[1]];
                if let Some(rn) = self.residual(xn) {
                    if size(&rn) < size(&r) {
                        x = xn;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (size(&r) <= tol).then_some((x, r))
    }
}

/// Solves the one-dimensional free boundary system by shooting from the origin.
///
/// The equation is normalized with unit constant; compare against other
/// solutions only after scale alignment.
pub fn shoot_1d(p: &Polytope, sigma: &Polytope, g_p: &HomogeneousDensity, g_sigma: &HomogeneousDensity, opts: &ShootOptions) -> Result<ShootingSolution1D> {
    if p.dim != 1 || sigma.dim != 1 {
        return Err(Error::UnsupportedDimension(p.dim.max(sigma.dim)));
    }
    let rep = check_strong_obliqueness(p, sigma)?;
    if rep.mode != ObliquenessMode::Strong {
        return Err(Error::NotOblique(rep.margin));
    }
    let (lo, hi) = p.bounding_box();
    let (slo, shi) = sigma.bounding_box();
    let sh = Shooter {
        s_lo: slo[0],
        s_hi: shi[0],
        lo: lo[0],
        hi: hi[0],
        alpha: g_p.degree,
        beta: g_sigma.degree,
        g_p,
        g_sigma,
        polar: PolarSupport::new(&ConeSpec::compact(sigma.clone()))?,
        steps: opts.steps.max(1),
    };
    let g = opts.grid.max(2);
    let landscape = |v_lo: f64, v_hi: f64, w_lo: f64, w_hi: f64| -> Vec<([f64; 2], f64)> {
        (0..g * g)
            .into_par_iter()
            .map(|k| {
                let x = [v_lo + (v_hi - v_lo) * (k / g) as f64 / (g - 1) as f64, w_lo + (w_hi - w_lo) * (k % g) as f64 / (g - 1) as f64];
                let r = sh.residual(x).map(|r| r[0].abs().max(r[1].abs())).unwrap_or(f64::INFINITY);
                (x, r)
            })
            .collect()
    };
    let solve_from = |starts: &[([f64; 2], f64)]| -> Vec<([f64; 2], [f64; 2])> {
        starts.par_iter().filter(|s| s.1.is_finite()).filter_map(|s| sh.newton(s.0, opts.tol, opts.max_newton)).collect()
    };
    let (v_lo, v_hi, w_lo, w_hi) = (0.1, 3.0, -2.0, 2.0);
    let coarse = landscape(v_lo, v_hi, w_lo, w_hi);
    let mut found = solve_from(&coarse);
    if found.is_empty() {
        let best = coarse.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty grid");
        let (dv, dw) = ((v_hi - v_lo) / (g - 1) as f64, (w_hi - w_lo) / (g - 1) as f64);
        let fine = landscape(best.0[0] - dv, best.0[0] + dv, best.0[1] - dw, best.0[1] + dw);
        found = solve_from(&fine);
        if found.is_empty() {
            let finite = coarse.iter().filter(|c| c.1.is_finite()).count();
            return Err(Error::NoRoot(format!(
                "best residual {:.3e} at v(0)={:.4}, v'(0)={:.4}; {finite}/{} shots reached both endpoints",
                best.1,
                best.0[0],
                best.0[1],
                coarse.len()
            )));
        }
    }
    let mut roots: Vec<([f64; 2], [f64; 2])> = vec![];
    for f in found {
        if !roots.iter().any(|r| (r.0[0] - f.0[0]).abs() + (r.0[1] - f.0[1]).abs() < 1e-6) {
            roots.push(f);
        }
    }
    roots.sort_by(|a, b| (a.1[0].abs().max(a.1[1].abs())).total_cmp(&b.1[0].abs().max(b.1[1].abs())));
    let x = roots[0].0;
    let left = sh.integrate(x[0], x[1], sh.lo).ok_or_else(|| Error::NoRoot("root does not reintegrate".into()))?;
    let right = sh.integrate(x[0], x[1], sh.hi).ok_or_else(|| Error::NoRoot("root does not reintegrate".into()))?;
    let (l, rr) = (*left.last().expect("steps"), *right.last().expect("steps"));
    let r = [sh.boundary(l.0, l.1, l.2), sh.boundary(rr.0, rr.1, rr.2)];
    let mut pts: Vec<(f64, f64, f64)> = left.into_iter().skip(1).rev().collect();
    pts.extend(right);
    Ok(ShootingSolution1D {
        interval: (sh.lo, sh.hi),
        ys: pts.iter().map(|p| p.0).collect(),
        vs: pts.iter().map(|p| p.1).collect(),
        dvs: pts.iter().map(|p| p.2).collect(),
        v0: x[0],
        dv0: x[1],
        residuals: (r[0], r[1]),
        roots: roots.iter().map(|r| (r.0[0], r.0[1])).collect(),
        steps: sh.steps,
    })
}

/// Observed order `log2(|v_N - v_2N| / |v_2N - v_4N|)` on the coarse grid.
pub fn shooting_order(p: &Polytope, sigma: &Polytope, g_p: &HomogeneousDensity, g_sigma: &HomogeneousDensity, steps: usize) -> Result<f64> {
    let solve = |k: usize| shoot_1d(p, sigma, g_p, g_sigma, &ShootOptions { steps: steps * k, tol: 1e-13, ..Default::default() });
    let (a, b, c) = (solve(1)?, solve(2)?, solve(4)?);
    let d1 = a.ys.iter().map(|&y| (a.eval(y) - b.eval(y)).abs()).fold(0.0, f64::max);
    let d2 = a.ys.iter().map(|&y| (b.eval(y) - c.eval(y)).abs()).fold(0.0, f64::max);
    Ok((d1 / d2).log2())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaMeasureReport {
    /// `|∂v(y_i)|` per node; `None` for nodes left out of the comparison.
    pub measure: Vec<Option<f64>>,
    /// Right-hand side integrated against the hat function of each node.
    pub target: Vec<f64>,
    /// `|a_i - λ r_i| / (λ r_i)` per compared node.
    pub discrepancy: Vec<Option<f64>>,
    pub scale: f64,
    /// `Σ |a_i - λ r_i| / Σ a_i`.
    pub aggregate: f64,
    pub total_measure: f64,
    pub compared: usize,
}

/// Monge–Ampère measure of the PL function against a right-hand side.
///
/// The cells of `P` are the dual cells of the mesh nodes, so `|∂v(cell)|` is
/// the volume of the subdifferential at the node. Without `clip` boundary
/// nodes (unbounded subdifferentials) are skipped; with it every
/// subdifferential is cut to `Ω̄`. `rhs(y, v(y), ∇v)` is integrated per
/// simplex. With `fit_scale` the constant `λ` is fitted, otherwise `λ = 1`.
pub fn ma_measure_check(
    v: &DiscreteConvexFunction,
    rhs: &(dyn Fn(&[f64], f64, &[f64]) -> f64 + Sync),
    clip: Option<&PolarSupport>,
    fit_scale: bool,
) -> Result<MaMeasureReport> {
    let mesh = &v.mesh;
    let l = match clip {
        Some(_) => enclosing_half_width(v)?,
        None => 2.0 * (0..mesh.simplices.len()).map(|s| norm(&v.simplex_gradient(s))).fold(0.0, f64::max) + 1.0,
    };
    let cells = subdifferential_cells(v, clip, l);
    let measure: Vec<Option<f64>> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if clip.is_none() && mesh.boundary[i] {
                None
            } else {
                Some(c.as_ref().map(|c| c.volume()).unwrap_or(0.0))
            }
        })
        .collect();
    let quad = LinkQuadrature::new(mesh, &HomogeneousDensity::lebesgue(v.domain.clone()), Level::Refined);
    let contrib: Vec<Vec<(usize, f64)>> = (0..mesh.simplices.len())
        .into_par_iter()
        .map(|s| {
            let ids = &mesh.simplices[s];
            let g = v.simplex_gradient(s);
            let mut out: Vec<(usize, f64)> = ids.iter().map(|&i| (i, 0.0)).collect();
            for q in quad.ranges[s].clone() {
                let b = quad.point(q);
                let y = mesh.point_at(s, b);
                let val: f64 = b.iter().zip(ids).map(|(l, &i)| l * v.values[i]).sum();
                let f = quad.weights[q] * rhs(&y, val, &g);
                for (o, l) in out.iter_mut().zip(b) {
                    o.1 += l * f;
                }
            }
            out
        })
        .collect();
    let mut target = vec![0.0; mesh.num_nodes()];
    for c in contrib {
        for (i, f) in c {
            target[i] += f;
        }
    }
    let pairs: Vec<(usize, f64)> = measure.iter().enumerate().filter_map(|(i, m)| m.filter(|_| target[i].is_finite()).map(|m| (i, m))).collect();
    let total_measure = compensated_sum(pairs.iter().map(|p| p.1));
    let total_target = compensated_sum(pairs.iter().map(|p| target[p.0]));
    let scale = if fit_scale { total_measure / total_target } else { 1.0 };
    let mut discrepancy = vec![None; mesh.num_nodes()];
    for &(i, m) in &pairs {
        discrepancy[i] = Some((m - scale * target[i]).abs() / (scale * target[i]));
    }
    let aggregate = compensated_sum(pairs.iter().map(|&(i, m)| (m - scale * target[i]).abs())) / total_measure;
    Ok(MaMeasureReport { measure, target, discrepancy, scale, aggregate, total_measure, compared: pairs.len() })
}

/// `h_P(y) / (v^{n+2+α} (−v⋆)^β h_Σ(∇v / −v⋆))`, the right-hand side of the
/// link equation.
pub fn equation_rhs(model: &EnergyModel) -> impl Fn(&[f64], f64, &[f64]) -> f64 + Sync + '_ {
    let n = model.n as f64;
    move |y, v, g| {
        let mstar = v - dot(y, g);
        if !(mstar > 0.0) {
            return f64::NAN;
        }
        let link: Vec<f64> = g.iter().map(|c| c / mstar).collect();
        let hs = model.g_sigma.link_eval(&link);
        model.g_p.link_eval(y) / (v.powf(n + 2.0 + model.alpha()) * mstar.powf(model.beta()) * hs)
    }
}
