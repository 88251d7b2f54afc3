//! Translation normalization in the split directions and boundary renormalization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_func::DiscreteConvexFunction;
use crate::densities::HomogeneousDensity;
use crate::error::{Error, Result};
use crate::laguerre::{domain_vertices, Cell};
use crate::energy::{Level, LinkQuadrature};
use crate::numeric::{dot, Accumulator};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationState {
    /// Translation `x₀′` in the last `n - k` coordinates.
    pub x0_prime: Vec<f64>,
    /// Largest componentwise barycenter residual, relative to `∫ |y′_j| h_P v^{-(n+2+α)}`.
    pub newton_residual: f64,
    /// Center of the John ellipsoid of `Ω′` (diagnostic; filled by the solver).
    pub john_translation: Vec<f64>,
    pub iterations: usize,
    /// Smallest eigenvalue of the Newton Jacobian over all iterates.
    pub min_jacobian_eigenvalue: f64,
}

/// `f = J(v - <x′, y′>)`, its gradient `Ψ` and Hessian, plus the scale used
/// to make `Ψ` relative.
#[derive(Debug, Clone)]
pub struct Moments {
    pub f: f64,
    pub psi: Vec<f64>,
    pub jac: DMatrix<f64>,
    pub scale: Vec<f64>,
}

impl Moments {
    pub fn residual(&self) -> f64 {
        self.psi.iter().zip(&self.scale).map(|(p, s)| p.abs() / s.max(1e-300)).fold(0.0, f64::max)
    }
}

/// Moments of `h_P (v - <x′, y′>)^{-p}` over `P`, `None` if the tilted
/// function is not positive at a quadrature point.
pub fn translation_moments(v: &DiscreteConvexFunction, h_p: &HomogeneousDensity, k: usize, x: &[f64]) -> Option<Moments> {
    let mesh = &v.mesh;
    let n = mesh.dim;
    let kp = n - k;
    let m = n as f64 + 1.0 + h_p.degree;
    let quad = LinkQuadrature::new(mesh, h_p, Level::Working);
    let parts: Vec<Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..mesh.simplices.len())
        .into_par_iter()
        .map(|s| {
            let ids = &mesh.simplices[s];
            let mut f = Accumulator::new();
            let mut psi = vec![Accumulator::new(); kp];
            let mut sc = vec![Accumulator::new(); kp];
            let mut jac = vec![Accumulator::new(); kp * kp];
            for q in quad.ranges[s].clone() {
                let b = quad.point(q);
                let y = mesh.point_at(s, b);
                let yp = &y[k..];
                let vq: f64 = b.iter().zip(ids).map(|(l, &i)| l * v.values[i]).sum::<f64>() - dot(x, yp);
                if !(vq > 0.0) {
                    return None;
                }
                let w = quad.weights[q];
                let p = vq.powf(-m);
                f.add(w * p / m);
                let p1 = w * p / vq;
                let p2 = (m + 1.0) * p1 / vq;
                for a in 0..kp {
                    psi[a].add(p1 * yp[a]);
                    sc[a].add(p1 * yp[a].abs());
                    for c in 0..kp {
                        jac[a * kp + c].add(p2 * yp[a] * yp[c]);
                    }
                }
            }
            let vals = |a: &[Accumulator]| a.iter().map(|x| x.value()).collect::<Vec<f64>>();
            Some((f.value(), vals(&psi), vals(&sc), vals(&jac)))
        })
        .collect();
    let mut f = Accumulator::new();
    let mut psi = vec![Accumulator::new(); kp];
    let mut sc = vec![Accumulator::new(); kp];
    let mut jac = vec![Accumulator::new(); kp * kp];
    for part in parts {
        let (pf, pp, ps, pj) = part?;
        f.add(pf);
        for a in 0..kp {
            psi[a].add(pp[a]);
            sc[a].add(ps[a]);
        }
        for (acc, x) in jac.iter_mut().zip(pj) {
            acc.add(x);
        }
    }
    Some(Moments {
        f: f.value(),
        psi: psi.iter().map(|a| a.value()).collect(),
        jac: DMatrix::from_fn(kp, kp, |a, c| jac[a * kp + c].value()),
        scale: sc.iter().map(|a| a.value()).collect(),
    })
}

/// Embeds a point of the last `n - k` coordinates into `R^n`.
pub fn embed_prime(k: usize, xp: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; k];
    x.extend_from_slice(xp);
    x
}

const NEWTON_MAX_ITERS: usize = 100;

/// Damped Newton on `Ψ(x′) = 0`, returning `v - <x₀′, y′>`.
pub fn normalize_translation(v: &DiscreteConvexFunction, h_p: &HomogeneousDensity, k: usize, tol: f64) -> Result<(DiscreteConvexFunction, NormalizationState)> {
    let n = v.dim();
    if k >= n {
        return Err(Error::Invalid(format!("translation normalization needs k < n, got k = {k}, n = {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid("normalization tolerance must be positive".into()));
    }
    let kp = n - k;
    let mut x = vec![0.0; kp];
    let mut mo = translation_moments(v, h_p, k, &x).ok_or(Error::NonPositiveV(v.min_value()))?;
    let mut res = mo.residual();
    let mut min_eig = f64::INFINITY;
    let mut iterations = 0;
    let mut stuck = 0;
    while res > tol {
        if iterations >= NEWTON_MAX_ITERS || stuck >= 5 {
            return Err(Error::NewtonStall {
                residual: res,
                diagnosis: format!("no progress after {iterations} Newton steps at x′ = {x:?}; J(v - <x′,·>) blows up at the boundary of Ω′, so a stall signals an empty or degenerate Ω′"),
            });
        }
        let eig = mo.jac.clone().symmetric_eigen().eigenvalues.min();
        min_eig = min_eig.min(eig);
        if !(eig > 0.0) {
            return Err(Error::NewtonStall { residual: res, diagnosis: format!("Jacobian not positive definite (min eigenvalue {eig:e})") });
        }
        let g = DVector::from_column_slice(&mo.psi);
        let dx: Vec<f64> = match mo.jac.clone().cholesky() {
            Some(ch) => (-ch.solve(&g)).iter().copied().collect(),
            None => mo.psi.iter().map(|p| -p).collect(),
        };
        let slope = dot(&mo.psi, &dx);
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
            if let Some(mt) = translation_moments(v, h_p, k, &trial) {
                let rt = mt.residual();
                if mt.f <= mo.f + 1e-4 * t * slope || rt < res {
                    next = Some((trial, mt, rt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, mn, rn)) = next else {
            return Err(Error::NewtonStall {
                residual: res,
                diagnosis: format!("line search failed at x′ = {x:?}; the iterate is pinned against the boundary of Ω′ where J diverges"),
            });
        };
        stuck = if rn < res { 0 } else { stuck + 1 };
        x = xn;
        mo = mn;
        res = rn;
        iterations += 1;
    }
    let out = v.tilted(&embed_prime(k, &x));
    let state = NormalizationState { x0_prime: x, newton_residual: res, john_translation: vec![0.0; kp], iterations, min_jacobian_eigenvalue: min_eig };
    Ok((out, state))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenormalizeReport {
    /// Nodes whose value dropped.
    pub changed_nodes: usize,
    pub max_drop: f64,
}

/// `ṽ(y) = sup_{x ∈ Ω̄} (<x, y> - u(x))` followed by the translation
/// normalization.
pub fn boundary_renormalize(
    v: &DiscreteConvexFunction,
    cells: &[Option<Cell>],
    h_p: &HomogeneousDensity,
    k: usize,
    tol: f64,
) -> Result<(DiscreteConvexFunction, NormalizationState, RenormalizeReport)> {
    let (restricted, report) = restrict_to_domain(v, cells)?;
    let (out, state) = normalize_translation(&restricted, h_p, k, tol)?;
    Ok((out, state, report))
}

/// Legendre transform of `u` restricted to the closed free-boundary domain.
/// The supremum of the concave piecewise-affine `<x, y> - u(x)` over each
/// cell is attained at a vertex.
pub fn restrict_to_domain(v: &DiscreteConvexFunction, cells: &[Option<Cell>]) -> Result<(DiscreteConvexFunction, RenormalizeReport)> {
    let verts = domain_vertices(v, cells);
    if verts.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let values: Vec<f64> = (0..v.values.len())
        .into_par_iter()
        .map(|i| {
            // nodes whose cell meets Ω̄ keep their value exactly
            if cells[i].is_some() {
                return v.values[i];
            }
            let y = &v.mesh.points[i];
            let best = verts.iter().map(|(x, u)| dot(x, y) - u).fold(f64::NEG_INFINITY, f64::max);
            // drops at rounding level are ignored so the map is idempotent
            if v.values[i] - best <= 1e-12 * v.values[i].abs() {
                v.values[i]
            } else {
                best
            }
        })
        .collect();
    let drops: Vec<f64> = values.iter().zip(&v.values).map(|(a, b)| b - a).collect();
    let report = RenormalizeReport { changed_nodes: drops.iter().filter(|d| **d > 0.0).count(), max_drop: drops.iter().copied().fold(0.0, f64::max) };
    Ok((v.with_values(values), report))
}
