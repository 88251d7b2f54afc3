//! Laguerre cells of nodal link data, clipped to the free-boundary domain.
//!
//! For `u(x) = max_i (<x, y_i> - v_i)` the set where node `i` attains the
//! maximum is the convex polytope `{<x, y_j - y_i> <= v_j - v_i}`, and on it
//! `w = u + φ_{Σ°}` is the maximum of the affine functions
//! `<x, y_i + z> - v_i` over the polar vertices `z`. So each cell of `Ω̄`
//! is an intersection of halfspaces and integrals over `Ω` reduce to smooth
//! integrals over simplices.

use rayon::prelude::*;

use crate::convex_func::DiscreteConvexFunction;
use crate::convex_geom::PolarSupport;
use crate::error::{Error, Result};
use crate::mesh::QuadRule;
use crate::numeric::dot;

/// A bounded convex cell in dimension 1, 2 or 3.
#[derive(Debug, Clone)]
pub enum Cell {
    Interval(f64, f64),
    /// Vertices in cyclic order.
    Polygon(Vec<[f64; 2]>),
    /// Faces as cyclic vertex loops.
    Polyhedron(Vec<Vec<[f64; 3]>>),
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn lerp<const D: usize>(p: &[f64; D], q: &[f64; D], t: f64) -> [f64; D] {
    let mut out = [0.0; D];
    for k in 0..D {
        out[k] = p[k] + t * (q[k] - p[k]);
    }
    out
}

/// One pass of Sutherland-Hodgman on a closed loop; `d` holds the snapped
/// signed distances. Crossing points are also pushed to `cut`.
fn clip_loop<const D: usize>(pts: &[[f64; D]], d: &[f64], cut: &mut Vec<[f64; D]>) -> Vec<[f64; D]> {
    let len = pts.len();
    let mut out = Vec::with_capacity(len + 2);
    for i in 0..len {
        let j = (i + 1) % len;
        if d[i] <= 0.0 {
            out.push(pts[i]);
            if d[i] == 0.0 {
                cut.push(pts[i]);
            }
        }
        if (d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0) {
            let p = lerp(&pts[i], &pts[j], d[i] / (d[i] - d[j]));
            out.push(p);
            cut.push(p);
        }
    }
    out
}

fn dedup<const D: usize>(pts: &mut Vec<[f64; D]>, tol: f64) {
    let mut out: Vec<[f64; D]> = Vec::with_capacity(pts.len());
    for p in pts.iter() {
        if !out.iter().any(|q| (0..D).all(|k| (p[k] - q[k]).abs() <= tol)) {
            out.push(*p);
        }
    }
    *pts = out;
}

/// Drops consecutive repeats (cyclically) from a loop.
fn dedup_loop<const D: usize>(pts: &mut Vec<[f64; D]>, tol: f64) {
    let mut out: Vec<[f64; D]> = Vec::with_capacity(pts.len());
    for p in pts.iter() {
        if out.last().map_or(true, |q| (0..D).any(|k| (p[k] - q[k]).abs() > tol)) {
            out.push(*p);
        }
    }
    while out.len() > 1 && (0..D).all(|k| (out[0][k] - out[out.len() - 1][k]).abs() <= tol) {
        out.pop();
    }
    *pts = out;
}

impl Cell {
    /// The box `[lo, hi]`.
    pub fn cube(lo: &[f64], hi: &[f64]) -> Self {
        match lo.len() {
            1 => Cell::Interval(lo[0], hi[0]),
            2 => Cell::Polygon(vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]),
            _ => {
                let c = |i: usize| -> [f64; 3] { [if i & 1 == 0 { lo[0] } else { hi[0] }, if i & 2 == 0 { lo[1] } else { hi[1] }, if i & 4 == 0 { lo[2] } else { hi[2] }] };
                let faces = [[0, 2, 6, 4], [1, 5, 7, 3], [0, 4, 5, 1], [2, 3, 7, 6], [0, 1, 3, 2], [4, 6, 7, 5]];
                Cell::Polyhedron(faces.iter().map(|f| f.iter().map(|&i| c(i)).collect()).collect())
            }
        }
    }

    /// The simplex with the given vertices.
    pub fn simplex(verts: &[Vec<f64>]) -> Self {
        match verts[0].len() {
            1 => Cell::Interval(verts[0][0].min(verts[1][0]), verts[0][0].max(verts[1][0])),
            2 => Cell::Polygon(verts.iter().map(|v| [v[0], v[1]]).collect()),
            _ => {
                let p: Vec<[f64; 3]> = verts.iter().map(|v| [v[0], v[1], v[2]]).collect();
                Cell::Polyhedron(vec![vec![p[0], p[1], p[2]], vec![p[0], p[1], p[3]], vec![p[0], p[2], p[3]], vec![p[1], p[2], p[3]]])
            }
        }
    }

    /// Axis-aligned bounds.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let vs = self.vertices();
        let n = self.dim();
        let lo = (0..n).map(|k| vs.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min)).collect();
        let hi = (0..n).map(|k| vs.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
        (lo, hi)
    }

    /// Both sides of the hyperplane `<a, x> = b`, dropping empty ones.
    pub fn split(&self, a: &[f64], b: f64) -> Vec<Cell> {
        let mut lo = self.clone();
        let mut hi = self.clone();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let mut out = vec![];
        if lo.clip(a, b) {
            out.push(lo);
        }
        if hi.clip(&neg, -b) {
            out.push(hi);
        }
        out
    }

    pub fn dim(&self) -> usize {
        match self {
            Cell::Interval(..) => 1,
            Cell::Polygon(_) => 2,
            Cell::Polyhedron(_) => 3,
        }
    }

    /// Distinct vertices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Cell::Interval(a, b) => vec![vec![*a], vec![*b]],
            Cell::Polygon(p) => p.iter().map(|q| q.to_vec()).collect(),
            Cell::Polyhedron(f) => {
                let mut all: Vec<[f64; 3]> = f.iter().flatten().copied().collect();
                let tol = 1e-13 * (1.0 + all.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())));
                dedup(&mut all, tol);
                all.iter().map(|q| q.to_vec()).collect()
            }
        }
    }

    fn extent(&self) -> f64 {
        match self {
            Cell::Interval(a, b) => a.abs().max(b.abs()),
            Cell::Polygon(p) => p.iter().flatten().fold(0.0, |m, x| m.max(x.abs())),
            Cell::Polyhedron(f) => f.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Intersects with `{<a, x> <= b}`; returns `false` when the result has
    /// empty interior.
    pub fn clip(&mut self, a: &[f64], b: f64) -> bool {
        let an = dot(a, a).sqrt();
        let eps = 1e-12 * (b.abs() + an * self.extent()).max(1e-300);
        let snap = |x: f64| if x.abs() <= eps { 0.0 } else { x };
        match self {
            Cell::Interval(lo, hi) => {
                if a[0].abs() <= eps {
                    return b >= -eps;
                }
                let r = b / a[0];
                if a[0] > 0.0 {
                    *hi = hi.min(r);
                } else {
                    *lo = lo.max(r);
                }
                *hi - *lo > eps / an
            }
            Cell::Polygon(p) => {
                let d: Vec<f64> = p.iter().map(|q| snap(a[0] * q[0] + a[1] * q[1] - b)).collect();
                if d.iter().all(|x| *x <= 0.0) {
                    return true;
                }
                if d.iter().all(|x| *x >= 0.0) {
                    p.clear();
                    return false;
                }
                let mut cut = vec![];
                let mut out = clip_loop(p, &d, &mut cut);
                dedup_loop(&mut out, eps / an.max(1e-300));
                *p = out;
                p.len() >= 3
            }
            Cell::Polyhedron(faces) => {
                let dist = |q: &[f64; 3]| snap(a[0] * q[0] + a[1] * q[1] + a[2] * q[2] - b);
                let mut any_out = false;
                let mut any_in = false;
                for f in faces.iter() {
                    for q in f {
                        let x = dist(q);
                        any_out |= x > 0.0;
                        any_in |= x < 0.0;
                    }
                }
                if !any_out {
                    return true;
                }
                if !any_in {
                    faces.clear();
                    return false;
                }
                let tol = eps / an.max(1e-300);
                let mut cut = vec![];
                let mut next = Vec::with_capacity(faces.len() + 1);
                for f in faces.iter() {
                    let d: Vec<f64> = f.iter().map(dist).collect();
                    if d.iter().all(|x| *x <= 0.0) {
                        for (q, x) in f.iter().zip(&d) {
                            if *x == 0.0 {
                                cut.push(*q);
                            }
                        }
                        next.push(f.clone());
                        continue;
                    }
                    let mut g = clip_loop(f, &d, &mut cut);
                    dedup_loop(&mut g, tol);
                    if g.len() >= 3 {
                        next.push(g);
                    }
                }
                dedup(&mut cut, tol);
                if cut.len() >= 3 {
                    let c = cut.iter().fold([0.0; 3], |s, q| [s[0] + q[0], s[1] + q[1], s[2] + q[2]]);
                    let c = [c[0] / cut.len() as f64, c[1] / cut.len() as f64, c[2] / cut.len() as f64];
                    let nrm = [a[0] / an, a[1] / an, a[2] / an];
                    let pick = if nrm[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                    let e1 = cross(&nrm, &pick);
                    let e2 = cross(&nrm, &e1);
                    let ang = |q: &[f64; 3]| {
                        let r = sub3(q, &c);
                        (r[0] * e2[0] + r[1] * e2[1] + r[2] * e2[2]).atan2(r[0] * e1[0] + r[1] * e1[1] + r[2] * e1[2])
                    };
                    cut.sort_by(|p, q| ang(p).total_cmp(&ang(q)));
                    next.push(cut);
                }
                *faces = next;
                faces.len() >= 4
            }
        }
    }

    /// A decomposition into simplices, each as its vertex list and volume.
    pub fn simplices(&self) -> Vec<(Vec<Vec<f64>>, f64)> {
        match self {
            Cell::Interval(a, b) => vec![(vec![vec![*a], vec![*b]], (b - a).max(0.0))],
            Cell::Polygon(p) => (1..p.len().saturating_sub(1))
                .map(|i| {
                    let (o, q, r) = (p[0], p[i], p[i + 1]);
                    let area = 0.5 * ((q[0] - o[0]) * (r[1] - o[1]) - (q[1] - o[1]) * (r[0] - o[0])).abs();
                    (vec![o.to_vec(), q.to_vec(), r.to_vec()], area)
                })
                .collect(),
            Cell::Polyhedron(faces) => {
                let Some(apex) = faces.first().and_then(|f| f.first()).copied() else {
                    return vec![];
                };
                let mut out = vec![];
                for f in faces {
                    for i in 1..f.len().saturating_sub(1) {
                        let (p, q, r) = (f[0], f[i], f[i + 1]);
                        let vol = dot(&cross(&sub3(&q, &p), &sub3(&r, &p)), &sub3(&apex, &p)).abs() / 6.0;
                        if vol > 0.0 {
                            out.push((vec![apex.to_vec(), p.to_vec(), q.to_vec(), r.to_vec()], vol));
                        }
                    }
                }
                out
            }
        }
    }

    /// The cell dilated by `t` about the origin.
    pub fn scaled(&self, t: f64) -> Self {
        match self {
            Cell::Interval(a, b) => Cell::Interval(a * t, b * t),
            Cell::Polygon(p) => Cell::Polygon(p.iter().map(|q| [q[0] * t, q[1] * t]).collect()),
            Cell::Polyhedron(f) => Cell::Polyhedron(f.iter().map(|g| g.iter().map(|q| [q[0] * t, q[1] * t, q[2] * t]).collect()).collect()),
        }
    }

    pub fn volume(&self) -> f64 {
        self.simplices().iter().map(|s| s.1).sum()
    }

    /// Quadrature points and weights of `rule` on every simplex of the cell.
    pub fn quadrature(&self, rule: &QuadRule) -> Vec<(Vec<f64>, f64)> {
        let mut out = vec![];
        for (verts, vol) in self.simplices() {
            let n = verts[0].len();
            for (b, w) in rule.bary.iter().zip(&rule.weights) {
                let x: Vec<f64> = (0..n).map(|k| b.iter().zip(&verts).map(|(l, p)| l * p[k]).sum()).collect();
                out.push((x, w * vol));
            }
        }
        out
    }
}

/// Polar vertices padded with zeros to `R^n`.
pub fn padded_polar(polar: &PolarSupport, n: usize) -> Vec<Vec<f64>> {
    polar.vertices.iter().map(|z| (0..n).map(|i| if i < z.len() { z[i] } else { 0.0 }).collect()).collect()
}

/// Half-width of a cube around the origin that contains `Ω` for any `v`
/// bounded by `max v` on `P`.
pub fn enclosing_half_width(v: &DiscreteConvexFunction) -> Result<f64> {
    // w >= u >= φ_P - max v >= ρ_P |x| - max v
    let rho = v.domain.halfspaces.iter().map(|h| h.offset).fold(f64::INFINITY, f64::min);
    if rho <= 0.0 {
        return Err(Error::OriginNotInterior);
    }
    Ok(1.01 * v.max_value().max(0.0) / rho + 1e-12)
}

/// `{x ∈ Ω̄ : node i attains the max in u(x)}` for every link node, `None`
/// when that set has empty interior.
pub fn omega_cells(v: &DiscreteConvexFunction, polar: &PolarSupport) -> Result<Vec<Option<Cell>>> {
    let l = enclosing_half_width(v)?;
    Ok(subdifferential_cells(v, Some(polar), l))
}

/// Subdifferential `∂v(y_i)` of the convex hull of the nodal data at every
/// node, intersected with `[-l, l]^n` and, if `polar` is given, with `Ω̄`.
pub fn subdifferential_cells(v: &DiscreteConvexFunction, polar: Option<&PolarSupport>, l: f64) -> Vec<Option<Cell>> {
    let n = v.dim();
    let zs = polar.map(|p| padded_polar(p, n)).unwrap_or_default();
    let pts = &v.mesh.points;
    let vals = &v.values;
    let mut adj: Vec<Vec<usize>> = vec![vec![]; pts.len()];
    for s in &v.mesh.simplices {
        for &i in s {
            for &j in s {
                if i != j && !adj[i].contains(&j) {
                    adj[i].push(j);
                }
            }
        }
    }
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let yi = &pts[i];
            let mut cell = Cell::cube(&vec![-l; n], &vec![l; n]);
            for z in &zs {
                let a: Vec<f64> = yi.iter().zip(z).map(|(y, z)| y + z).collect();
                if !cell.clip(&a, vals[i]) {
                    return None;
                }
            }
            let mut a = vec![0.0; n];
            let mut cut = |cell: &mut Cell, j: usize| {
                for k in 0..n {
                    a[k] = pts[j][k] - yi[k];
                }
                cell.clip(&a, vals[j] - vals[i])
            };
            for &j in &adj[i] {
                if !cut(&mut cell, j) {
                    return None;
                }
            }
            for j in 0..pts.len() {
                if j != i && !cut(&mut cell, j) {
                    return None;
                }
            }
            Some(cell)
        })
        .collect()
}

/// Vertices of all cells paired with the value of `u` there.
pub fn domain_vertices(v: &DiscreteConvexFunction, cells: &[Option<Cell>]) -> Vec<(Vec<f64>, f64)> {
    let mut out = vec![];
    for (i, c) in cells.iter().enumerate() {
        if let Some(c) = c {
            for x in c.vertices() {
                let u = dot(&x, &v.mesh.points[i]) - v.values[i];
                out.push((x, u));
            }
        }
    }
    out
}

/// Largest distance between two points of `Ω̄`.
pub fn domain_diameter(cells: &[Option<Cell>]) -> f64 {
    let pts: Vec<Vec<f64>> = cells.iter().flatten().flat_map(|c| c.vertices()).collect();
    pts.par_iter().map(|a| pts.iter().map(|b| crate::numeric::dist(a, b)).fold(0.0, f64::max)).reduce(|| 0.0, f64::max)
}

/// Splits a cell of node `i` into the pieces on which `φ_{Σ°}` is linear,
/// returning each piece with its active polar vertex index.
pub fn polar_pieces(cell: &Cell, zs: &[Vec<f64>]) -> Vec<(Cell, usize)> {
    if zs.len() <= 1 {
        return vec![(cell.clone(), 0)];
    }
    let n = cell.dim();
    let mut out = vec![];
    for (k, zk) in zs.iter().enumerate() {
        let mut piece = cell.clone();
        let mut alive = true;
        for (l, zl) in zs.iter().enumerate() {
            if l == k {
                continue;
            }
            let a: Vec<f64> = (0..n).map(|c| zl[c] - zk[c]).collect();
            if !piece.clip(&a, 0.0) {
                alive = false;
                break;
            }
        }
        if alive {
            out.push((piece, k));
        }
    }
    out
}
