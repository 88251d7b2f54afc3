//! Inner product `M + θ K` on nodal functions used to precondition descent.

use crate::mesh::SimplexMesh;
use crate::numeric::dot;

/// Sparse symmetric positive definite matrix in row form.
#[derive(Debug, Clone)]
pub struct Metric {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl Metric {
    /// Consistent mass plus `theta · diam²` times the P1 stiffness matrix.
    pub fn new(mesh: &SimplexMesh, theta: f64, diam: f64) -> Self {
        let n = mesh.dim;
        let nn = mesh.num_nodes();
        let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); nn];
        let c = theta * diam * diam;
        let denom = ((n + 1) * (n + 2)) as f64;
        for (s, ids) in mesh.simplices.iter().enumerate() {
            let vol = mesh.volumes[s];
            let grads = mesh.hat_gradients(s);
            for (a, &i) in ids.iter().enumerate() {
                for (b, &j) in ids.iter().enumerate() {
                    let m = vol * if a == b { 2.0 } else { 1.0 } / denom;
                    *dense[i].entry(j).or_insert(0.0) += m + c * vol * dot(&grads[a], &grads[b]);
                }
            }
        }
        let rows: Vec<Vec<(usize, f64)>> = dense.into_iter().map(|r| r.into_iter().collect()).collect();
        let diag = rows.iter().enumerate().map(|(i, r)| r.iter().find(|e| e.0 == i).map_or(1.0, |e| e.1)).collect();
        Self { rows, diag }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    /// `B⁻¹ b` by Jacobi-preconditioned conjugate gradients.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let nn = b.len();
        let mut x = vec![0.0; nn];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let stop = 1e-24 * dot(b, b);
        for _ in 0..4 * nn {
            if dot(&r, &r) <= stop {
                break;
            }
            let ap = self.apply(&p);
            let alpha = rz / dot(&p, &ap);
            for k in 0..nn {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            z = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..nn {
                p[k] = z[k] + beta * p[k];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_geom::Polytope;

    #[test]
    fn solve_inverts_apply() {
        let mesh = SimplexMesh::on_polytope(&Polytope::cube(2, 0.5), 9).unwrap();
        let m = Metric::new(&mesh, 0.1, 1.0);
        let x: Vec<f64> = (0..mesh.num_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = m.solve(&m.apply(&x));
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
