//! Maximum-volume inscribed ellipsoid via a log-barrier path with Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::polytope::Polytope;
use crate::error::{Error, Result};
use crate::numeric::dot;

/// Center movement tolerance between barrier stages.
pub const JOHN_CENTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JohnReport {
    pub center: Vec<f64>,
    /// Shape matrix `B` (row-major); the ellipsoid is `center + B * unit ball`.
    pub shape: Vec<f64>,
    pub log_volume: f64,
    pub stages: usize,
}

struct Problem<'a> {
    dim: usize,
    normals: Vec<&'a [f64]>,
    offsets: Vec<f64>,
}

impl Problem<'_> {
    fn nparams(&self) -> usize {
        self.dim * (self.dim + 1) / 2 + self.dim
    }

    fn unpack(&self, p: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
        let n = self.dim;
        let mut b = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                b[(i, j)] = p[idx];
                b[(j, i)] = p[idx];
                idx += 1;
            }
        }
        (b, p[idx..].to_vec())
    }

    /// Barrier objective `log det B + mu * sum log(slack_i)`; `None` outside the domain.
    fn value(&self, p: &[f64], mu: f64) -> Option<f64> {
        let (b, c) = self.unpack(p);
        let chol = b.clone().cholesky()?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mut acc = logdet;
        for (a, off) in self.normals.iter().zip(&self.offsets) {
            let ba = &b * DVector::from_column_slice(a);
            let s = off - dot(a, &c) - ba.norm();
            if s <= 0.0 {
                return None;
            }
            acc += mu * s.ln();
        }
        Some(acc)
    }

    fn gradient(&self, p: &[f64], mu: f64) -> Vec<f64> {
        let n = self.dim;
        let (b, c) = self.unpack(p);
        let binv = b.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(n, n));
        let mut g = binv;
        let mut gc = vec![0.0; n];
        for (a, off) in self.normals.iter().zip(&self.offsets) {
            let av = DVector::from_column_slice(a);
            let ba = &b * &av;
            let nrm = ba.norm().max(1e-300);
            let s = off - dot(a, &c) - nrm;
            g -= (&ba * av.transpose()) * (mu / (nrm * s));
            for k in 0..n {
                gc[k] -= mu * a[k] / s;
            }
        }
        let mut out = Vec::with_capacity(self.nparams());
        for i in 0..n {
            for j in i..n {
                out.push(if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] });
            }
        }
        out.extend(gc);
        out
    }

    /// Parameter directions as `(dB, dc)` pairs, in the order of `unpack`.
    fn basis(&self) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let n = self.dim;
        let mut out = vec![];
        for i in 0..n {
            for j in i..n {
                let mut db = DMatrix::zeros(n, n);
                db[(i, j)] = 1.0;
                db[(j, i)] = 1.0;
                out.push((db, DVector::zeros(n)));
            }
        }
        for i in 0..n {
            let mut dc = DVector::zeros(n);
            dc[i] = 1.0;
            out.push((DMatrix::zeros(n, n), dc));
        }
        out
    }

    fn hessian(&self, p: &[f64], mu: f64) -> DMatrix<f64> {
        let n = self.dim;
        let m = self.nparams();
        let (b, c) = self.unpack(p);
        let binv = b.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(n, n));
        let basis = self.basis();
        let mut h = DMatrix::zeros(m, m);
        let bd: Vec<DMatrix<f64>> = basis.iter().map(|(db, _)| &binv * db).collect();
        for k in 0..m {
            for l in 0..m {
                h[(k, l)] = -(&bd[k] * &bd[l]).trace();
            }
        }
        for (a, off) in self.normals.iter().zip(&self.offsets) {
            let av = DVector::from_column_slice(a);
            let w = &b * &av;
            let nw = w.norm().max(1e-300);
            let s = off - dot(a, &c) - nw;
            let u: Vec<DVector<f64>> = basis.iter().map(|(db, _)| db * &av).collect();
            let ds: Vec<f64> = basis.iter().zip(&u).map(|((_, dc), uk)| -av.dot(dc) - w.dot(uk) / nw).collect();
            for k in 0..m {
                for l in 0..m {
                    let d2s = -(u[k].dot(&u[l]) / nw - w.dot(&u[k]) * w.dot(&u[l]) / nw.powi(3));
                    h[(k, l)] += mu * (d2s / s - ds[k] * ds[l] / (s * s));
                }
            }
        }
        h
    }

    /// Damped Newton ascent at fixed `mu`.
    fn maximize(&self, mut p: Vec<f64>, mu: f64) -> Vec<f64> {
        let mut f = self.value(&p, mu).expect("strictly feasible start");
        for _ in 0..200 {
            let g = self.gradient(&p, mu);
            let h = self.hessian(&p, mu);
            let gv = DVector::from_vec(g.clone());
            let mut dir: Vec<f64> = match (-&h).cholesky() {
                Some(ch) => ch.solve(&gv).iter().copied().collect(),
                None => g.clone(),
            };
            if dot(&dir, &g) <= 0.0 {
                dir = g.clone();
            }
            let decrement = dot(&dir, &g);
            if decrement < 1e-22 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-14 {
                let trial: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                if let Some(ft) = self.value(&trial, mu) {
                    if ft >= f + 1e-4 * t * decrement {
                        p = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        p
    }
}

/// Translation `x0` placing the John ellipsoid of `K - x0` at the origin.
pub fn john_translate(k: &Polytope) -> Result<(Vec<f64>, Polytope, JohnReport)> {
    let n = k.dim;
    if k.volume() <= 1e-14 * k.diameter().powi(n as i32).max(1e-300) {
        return Err(Error::DegenerateBody("zero volume".into()));
    }
    let prob = Problem {
        dim: n,
        normals: k.halfspaces.iter().map(|h| h.normal.as_slice()).collect(),
        offsets: k.halfspaces.iter().map(|h| h.offset).collect(),
    };
    let c0 = k.vertex_centroid();
    let rho = k.boundary_distance(&c0);
    if rho <= 0.0 {
        return Err(Error::DegenerateBody("no interior point".into()));
    }
    let mut p = vec![];
    for i in 0..n {
        for j in i..n {
            p.push(if i == j { 0.5 * rho } else { 0.0 });
        }
    }
    p.extend(c0.iter());
    let mut mu = 1.0;
    let mut stages = 0;
    let mut prev_center = c0.clone();
    loop {
        p = prob.maximize(p, mu);
        stages += 1;
        let center = p[p.len() - n..].to_vec();
        let moved = crate::numeric::dist(&center, &prev_center);
        prev_center = center;
        if mu < 1e-14 || (mu < 1e-9 && moved < JOHN_CENTER_TOL * (1.0 + k.diameter())) {
            break;
        }
        mu *= 0.1;
    }
    let (b, center) = prob.unpack(&p);
    let log_volume = b.clone().cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()).unwrap_or(f64::NEG_INFINITY);
    let moved = k.translate(&center.iter().map(|c| -c).collect::<Vec<_>>());
    let report = JohnReport { center: center.clone(), shape: b.transpose().iter().copied().collect(), log_volume, stages };
    Ok((center, moved, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_body_has_zero_translation() {
        let (t, _, _) = john_translate(&Polytope::cube(2, 0.7)).unwrap();
        assert!(t.iter().all(|c| c.abs() < 1e-7), "{t:?}");
        let cross = Polytope::from_vertices(3, vec![
            vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0],
            vec![0.0, -2.0, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.0, -0.5],
        ]).unwrap();
        let (t, _, _) = john_translate(&cross).unwrap();
        assert!(t.iter().all(|c| c.abs() < 1e-6), "{t:?}");
    }

    #[test]
    fn interval_center_is_midpoint() {
        let (t, _, _) = john_translate(&Polytope::interval(-0.2, 1.0)).unwrap();
        assert!((t[0] - 0.4).abs() < 1e-7);
    }
}
