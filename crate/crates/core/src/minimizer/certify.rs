//! A posteriori certificates for a converged iterate.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex_func::DiscreteConvexFunction;
use crate::convex_geom::{roundness_constants, PolarSupport, Polytope};
use crate::densities::HomogeneousDensity;
use crate::energy::{EnergyModel, Level, LinkQuadrature};
use crate::error::Result;
use crate::laguerre::{padded_polar, Cell};
use crate::numeric::{compensated_sum, dot, norm, Accumulator};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityCertificate {
    /// Scale-free directional derivatives from the analytic gradient.
    pub raw: Vec<f64>,
    /// The same from central differences of the refined-level energy.
    pub refined: Vec<f64>,
    pub tol: f64,
    pub passes: bool,
}

impl StationarityCertificate {
    pub fn raw_max(&self) -> f64 {
        self.raw.iter().copied().fold(0.0, f64::max)
    }

    pub fn refined_max(&self) -> f64 {
        self.refined.iter().copied().fold(0.0, f64::max)
    }
}

/// Smooth random direction `sum c_l cos(<ω_l, y> + θ_l)` on the mesh nodes.
pub fn random_direction(v: &DiscreteConvexFunction, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = v.dim();
    let diam = v.domain.diameter();
    let terms: Vec<(f64, Vec<f64>, f64)> = (0..3)
        .map(|_| {
            let c = rng.gen_range(-1.0..1.0);
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0) / diam).collect();
            (c, w, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    v.mesh.points.iter().map(|y| terms.iter().map(|(c, w, t)| c * (dot(w, y) + t).cos()).sum()).collect()
}

/// `v̄ |D| / (‖d‖_{L²(P)} |P|^{1/2})` for a directional derivative `D` along
/// `d`; with `D = <g, d>` it is bounded by the relative gradient norm.
pub fn directional_measure(v: &DiscreteConvexFunction, mass: &[f64], deriv: f64, d: &[f64]) -> f64 {
    let vol: f64 = mass.iter().sum();
    let vbar = compensated_sum(mass.iter().zip(&v.values).map(|(m, x)| m * x)) / vol;
    let dn = compensated_sum(mass.iter().zip(d).map(|(m, x)| m * x * x)).sqrt();
    vbar * deriv.abs() / (dn * vol.sqrt()).max(1e-300)
}

/// Removes from `d` the tilt `<a, y′>` that would move `v` off the barycenter
/// condition to first order.
pub fn tangent_project(v: &DiscreteConvexFunction, h_p: &HomogeneousDensity, k: usize, d: &[f64]) -> Vec<f64> {
    let mesh = &v.mesh;
    let n = mesh.dim;
    let kp = n - k;
    let p = n as f64 + 3.0 + h_p.degree;
    let quad = LinkQuadrature::new(mesh, h_p, Level::Working);
    let mut mat = vec![Accumulator::new(); kp * kp];
    let mut rhs = vec![Accumulator::new(); kp];
    for (s, ids) in mesh.simplices.iter().enumerate() {
        for q in quad.ranges[s].clone() {
            let b = quad.point(q);
            let y = mesh.point_at(s, b);
            let vq: f64 = b.iter().zip(ids).map(|(l, &i)| l * v.values[i]).sum();
            let dq: f64 = b.iter().zip(ids).map(|(l, &i)| l * d[i]).sum();
            let w = quad.weights[q] * vq.powf(-p);
            for a in 0..kp {
                rhs[a].add(w * y[k + a] * dq);
                for c in 0..kp {
                    mat[a * kp + c].add(w * y[k + a] * y[k + c]);
                }
            }
        }
    }
    let m = nalgebra::DMatrix::from_fn(kp, kp, |a, c| mat[a * kp + c].value());
    let r = nalgebra::DVector::from_fn(kp, |a, _| rhs[a].value());
    let Some(coef) = m.cholesky().map(|c| c.solve(&r)) else {
        return d.to_vec();
    };
    mesh.points.iter().zip(d).map(|(y, di)| di - (0..kp).map(|a| coef[a] * y[k + a]).sum::<f64>()).collect()
}

/// Scale-invariant objective `-ln I - ((n+1+β)/m) ln J` at a quadrature level.
pub fn profile_objective(model: &EnergyModel, v: &DiscreteConvexFunction, level: Level) -> Result<f64> {
    let i = model.functional_i(v, level, false)?.value;
    let j = model.functional_j(v, level, false)?.value;
    let a = model.n as f64 + 1.0 + model.beta();
    Ok(-i.ln() - a / model.m() * j.ln())
}

/// Directional derivatives along seeded random smooth directions, analytic
/// at the working level and by central differences at the refined level.
pub fn stationarity_certificate(
    model: &EnergyModel,
    v: &DiscreteConvexFunction,
    gradient: &[f64],
    directions: usize,
    seed: u64,
    tol: f64,
    split: Option<(usize, &HomogeneousDensity)>,
) -> Result<StationarityCertificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5741_7469);
    let mass = v.mesh.nodal_mass();
    let mut raw = vec![];
    let mut refined = vec![];
    for _ in 0..directions {
        let mut d = random_direction(v, &mut rng);
        if let Some((k, h)) = split {
            d = tangent_project(v, h, k, &d);
        }
        raw.push(directional_measure(v, &mass, dot(gradient, &d), &d));
        let amp = d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        let eps = 1e-6 * v.min_value() / amp;
        let plus = v.with_values(v.values.iter().zip(&d).map(|(a, b)| a + eps * b).collect());
        let minus = v.with_values(v.values.iter().zip(&d).map(|(a, b)| a - eps * b).collect());
        let fd = (profile_objective(model, &plus, Level::Refined)? - profile_objective(model, &minus, Level::Refined)?) / (2.0 * eps);
        refined.push(directional_measure(v, &mass, fd, &d));
    }
    let passes = raw.iter().chain(&refined).all(|x| *x <= tol);
    Ok(StationarityCertificate { raw, refined, tol, passes })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundnessCheck {
    /// `|w(0)|`.
    pub delta: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub inradius: f64,
    pub outradius: f64,
    /// Relative rounding allowance.
    pub slack: f64,
    pub holds: bool,
}

/// `B_{δr} ⊆ Ω ⊆ B_{δR}`. `Ω` is the intersection of the halfspaces
/// `<x, y_i + z> < v_i`, so its inradius about the origin is the smallest
/// halfspace distance and its outradius the largest cell vertex norm.
pub fn roundness_check(v: &DiscreteConvexFunction, cells: &[Option<Cell>], polar: &PolarSupport, p: &Polytope, sigma_link: &Polytope) -> Result<RoundnessCheck> {
    let (r, big_r) = roundness_constants(p, sigma_link)?;
    let zs = padded_polar(polar, v.dim());
    let delta = v.min_value();
    let mut inradius = f64::INFINITY;
    for (y, vi) in v.mesh.points.iter().zip(&v.values) {
        for z in &zs {
            let a: Vec<f64> = y.iter().zip(z).map(|(p, q)| p + q).collect();
            inradius = inradius.min(vi / norm(&a).max(1e-300));
        }
    }
    let outradius = cells.iter().flatten().flat_map(|c| c.vertices()).map(|x| norm(&x)).fold(0.0, f64::max);
    let slack = 1e-9 * delta * big_r;
    let holds = inradius >= delta * r - slack && outradius <= delta * big_r + slack;
    Ok(RoundnessCheck { delta, r, big_r, inradius, outradius, slack, holds })
}
