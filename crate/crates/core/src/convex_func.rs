//! Discrete convex functions on links, Legendre transforms and the free boundary.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex_geom::{PolarSupport, Polytope};
use crate::error::{Error, Result};
use crate::mesh::{BoxGrid, SimplexMesh};
use crate::numeric::dot;

/// Nodal values on a simplicial mesh of the link `P`.
#[derive(Debug, Clone)]
pub struct DiscreteConvexFunction {
    pub mesh: Arc<SimplexMesh>,
    pub domain: Polytope,
    pub values: Vec<f64>,
}

/// Serialized form `{"nodes": [...], "values": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFile {
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl FunctionFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.values.len() {
            return Err(Error::Invalid(format!("{} nodes but {} values", self.nodes.len(), self.values.len())));
        }
        let dim = self.nodes.first().map_or(0, |n| n.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if n.len() != dim || dim == 0 {
                return Err(Error::Invalid(format!("nodes[{i}] has {} coordinates, expected {dim}", n.len())));
            }
            if n.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid(format!("nodes[{i}] is not finite")));
            }
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("values[{i}] is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub certified: bool,
    /// `max_i (v_i - env(v)_i)`; zero for convex nodal data.
    pub max_violation: f64,
}

/// Default absolute tolerance for nodal convexity, relative to the value scale.
pub const CONVEXITY_TOL: f64 = 1e-10;

impl DiscreteConvexFunction {
    pub fn new(mesh: Arc<SimplexMesh>, domain: Polytope, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Invalid(format!("{} values for {} mesh nodes", values.len(), mesh.num_nodes())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite nodal value".into()));
        }
        Ok(Self { mesh, domain, values })
    }

    pub fn from_fn(mesh: Arc<SimplexMesh>, domain: Polytope, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = mesh.points.iter().map(|y| f(y)).collect();
        Self { mesh, domain, values }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self { mesh: self.mesh.clone(), domain: self.domain.clone(), values }
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn eval(&self, y: &[f64]) -> Option<f64> {
        self.mesh.interpolate(&self.values, y)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.with_values(self.values.iter().map(|v| t * v).collect())
    }

    /// `v - <a, y>`.
    pub fn tilted(&self, a: &[f64]) -> Self {
        self.with_values(self.mesh.points.iter().zip(&self.values).map(|(y, v)| v - dot(&a[..], &y[..a.len()])).collect())
    }

    pub fn simplex_gradient(&self, s: usize) -> Vec<f64> {
        self.mesh.gradient(s, &self.values)
    }

    /// Volume-weighted average of incident simplex gradients (reporting only).
    pub fn node_subgradient(&self, i: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        let mut wsum = 0.0;
        for (s, ids) in self.mesh.simplices.iter().enumerate() {
            if ids.contains(&i) {
                let g = self.simplex_gradient(s);
                let w = self.mesh.volumes[s];
                for k in 0..self.dim() {
                    acc[k] += w * g[k];
                }
                wsum += w;
            }
        }
        acc.iter().map(|a| a / wsum).collect()
    }

    /// Exact Legendre transform of the nodal data, `max_i <x, y_i> - v_i`,
    /// together with the first maximizing node.
    pub fn conjugate_at(&self, x: &[f64]) -> (f64, usize) {
        conjugate_max(&self.mesh.points, &self.values, x)
    }

    pub fn convexity_certificate(&self, tol: f64) -> ConvexityCertificate {
        let env = lower_envelope(&self.mesh, &self.values);
        let max_violation = self.values.iter().zip(&env.values).map(|(v, e)| v - e).fold(0.0, f64::max);
        let scale = 1.0 + self.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        ConvexityCertificate { certified: max_violation <= tol * scale, max_violation }
    }

    pub fn to_file(&self) -> FunctionFile {
        FunctionFile { nodes: self.mesh.points.clone(), values: self.values.clone() }
    }

    /// Values matched to this function's mesh nodes from a file with the same node set.
    pub fn values_from_file(&self, file: &FunctionFile) -> Result<Vec<f64>> {
        file.validate()?;
        if file.nodes.len() != self.mesh.num_nodes() {
            return Err(Error::Invalid("function file node count differs from mesh".into()));
        }
        let scale = 1e-9 * (1.0 + self.domain.diameter());
        for (a, b) in file.nodes.iter().zip(&self.mesh.points) {
            if a.len() != b.len() || crate::numeric::dist(a, b) > scale {
                return Err(Error::Invalid("function file nodes differ from mesh nodes".into()));
            }
        }
        Ok(file.values.clone())
    }
}

#[inline]
pub(crate) fn conjugate_max(points: &[Vec<f64>], values: &[f64], x: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, (y, v)) in points.iter().zip(values).enumerate() {
        let c = dot(x, y) - v;
        if c > best {
            best = c;
            arg = i;
        }
    }
    (best, arg)
}

/// Lower convex envelope of a nodal cloud, with a supporting plane per node.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub values: Vec<f64>,
    /// Slope of a supporting affine minorant at each node (a subgradient).
    pub slopes: Vec<Vec<f64>>,
    pub pivots: usize,
}

/// Exact lower convex envelope of `(y_i, v_i)` at every node.
///
/// Per node this solves `min sum l_j v_j` over convex combinations of the
/// cloud representing `y_i` by the primal simplex method, warm-started from an
/// incident mesh simplex.
pub fn lower_envelope(mesh: &SimplexMesh, values: &[f64]) -> Envelope {
    let n = mesh.dim;
    let mut incident = vec![usize::MAX; mesh.num_nodes()];
    for (s, ids) in mesh.simplices.iter().enumerate() {
        for &i in ids {
            if incident[i] == usize::MAX {
                incident[i] = s;
            }
        }
    }
    let scale = 1.0 + values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = 1e-13 * scale;
    let results: Vec<(f64, Vec<f64>, usize)> = (0..mesh.num_nodes())
        .into_par_iter()
        .map(|i| {
            let start = &mesh.simplices[incident[i]];
            envelope_at(&mesh.points, values, &mesh.points[i], start, n, tol)
        })
        .collect();
    let mut out = Envelope { values: Vec::with_capacity(values.len()), slopes: vec![], pivots: 0 };
    for (i, (e, slope, piv)) in results.into_iter().enumerate() {
        out.values.push(e.min(values[i]));
        out.slopes.push(slope);
        out.pivots += piv;
    }
    out
}

fn envelope_at(points: &[Vec<f64>], values: &[f64], q: &[f64], start: &[usize], n: usize, tol: f64) -> (f64, Vec<f64>, usize) {
    let mut basis: Vec<usize> = start.to_vec();
    let lift = |j: usize| -> DVector<f64> {
        let mut c = DVector::from_element(n + 1, 1.0);
        for k in 0..n {
            c[k] = points[j][k];
        }
        c
    };
    let mut rhs = DVector::from_element(n + 1, 1.0);
    for k in 0..n {
        rhs[k] = q[k];
    }
    let max_pivots = 50 * points.len().max(10);
    let mut pivots = 0;
    let mut bland = false;
    loop {
        let m = DMatrix::from_fn(n + 1, n + 1, |r, c| lift(basis[c])[r]);
        let lu = m.clone().lu();
        let vb = DVector::from_iterator(n + 1, basis.iter().map(|&b| values[b]));
        let plane = match m.transpose().lu().solve(&vb) {
            Some(p) => p,
            None => break,
        };
        let lam = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(n + 1));
        let x: Vec<f64> = (0..n).map(|k| plane[k]).collect();
        let c = plane[n];
        let mut enter = None;
        let mut most = -tol;
        for (j, (y, v)) in points.iter().zip(values).enumerate() {
            let r = v - (dot(&x, y) + c);
            if r < most {
                enter = Some(j);
                if bland {
                    break;
                }
                most = r;
            }
        }
        let Some(j) = enter else {
            return (dot(&x, q) + c, x, pivots);
        };
        if pivots >= max_pivots {
            return (dot(&x, q) + c, x, pivots);
        }
        let d = match lu.solve(&lift(j)) {
            Some(d) => d,
            None => break,
        };
        let mut leave = None;
        let mut ratio = f64::INFINITY;
        for k in 0..=n {
            if d[k] > 1e-12 {
                let r = lam[k].max(0.0) / d[k];
                if r < ratio - 1e-15 || (bland && (r - ratio).abs() <= 1e-15 && leave.is_some_and(|l: usize| basis[k] < basis[l])) {
                    ratio = r;
                    leave = Some(k);
                }
            }
        }
        let Some(k) = leave else { break };
        if ratio == 0.0 {
            pivots += 1;
            if pivots > 20 * (n + 1) {
                bland = true;
            }
        } else {
            pivots += 1;
        }
        basis[k] = j;
    }
    // Singular basis: fall back to the node value with an averaged slope.
    let idx = points.iter().position(|p| p.as_slice() == q);
    let v = idx.map_or(f64::INFINITY, |i| values[i]);
    (v, vec![0.0; n], pivots)
}

/// Replaces nodal values by their lower convex envelope (idempotent, never increases values).
pub fn convexify(mesh: Arc<SimplexMesh>, domain: Polytope, values: &[f64]) -> DiscreteConvexFunction {
    let env = lower_envelope(&mesh, values);
    // nodes already on the envelope keep their exact value, making this idempotent
    let scale = 1.0 + values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let snapped = values.iter().zip(&env.values).map(|(v, e)| if v - e <= 1e-12 * scale { *v } else { *e }).collect();
    DiscreteConvexFunction { mesh, domain, values: snapped }
}

/// `v⋆ = <∇v, y> - v` per simplex; it is constant on each simplex and equals
/// minus the intercept of the simplex's affine piece.
pub fn star_transform(v: &DiscreteConvexFunction) -> Vec<f64> {
    (0..v.mesh.simplices.len())
        .map(|s| {
            let g = v.simplex_gradient(s);
            let i0 = v.mesh.simplices[s][0];
            dot(&g, &v.mesh.points[i0]) - v.values[i0]
        })
        .collect()
}

/// A function sampled on a box grid (the dual variable `u`).
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
    /// Maximizing link node of the Legendre transform at each grid node.
    pub argmax: Vec<usize>,
}

impl GridFunction {
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        self.grid.interpolate(&self.values, x)
    }
}

/// `u = v*` at the nodes of `grid`.
pub fn legendre(v: &DiscreteConvexFunction, grid: &BoxGrid) -> GridFunction {
    let (values, argmax): (Vec<f64>, Vec<usize>) =
        (0..grid.num_nodes()).into_par_iter().map(|f| v.conjugate_at(&grid.node(f))).unzip();
    GridFunction { grid: grid.clone(), values, argmax }
}

/// `(v, u, w)` on a common dual grid with `w = u + φ_{Σ°}`.
#[derive(Debug, Clone)]
pub struct LegendrePair {
    pub v: DiscreteConvexFunction,
    pub u: GridFunction,
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
}

impl LegendrePair {
    pub fn build(v: &DiscreteConvexFunction, grid: &BoxGrid, polar: &PolarSupport) -> Self {
        let u = legendre(v, grid);
        let phi: Vec<f64> = (0..grid.num_nodes()).into_par_iter().map(|f| polar.eval(&grid.node(f))).collect();
        let w = u.values.iter().zip(&phi).map(|(a, b)| a + b).collect();
        Self { v: v.clone(), u, phi, w }
    }

    /// Exact `w` at an arbitrary point.
    pub fn w_exact(&self, x: &[f64], polar: &PolarSupport) -> f64 {
        self.v.conjugate_at(x).0 + polar.eval(x)
    }
}

/// Grid and extent used to resolve the dual side of a link function.
pub fn dual_grid_for(v: &DiscreteConvexFunction, polar: &PolarSupport, nodes_per_axis: usize) -> Result<BoxGrid> {
    let n = v.dim();
    let vmin = v.min_value();
    if vmin <= 0.0 {
        return Err(Error::EmptyInterior(-vmin));
    }
    // w >= u >= phi_P - max v >= rho_P |x| - max v
    let rho = v.domain.halfspaces.iter().map(|h| h.offset).fold(f64::INFINITY, f64::min);
    if rho <= 0.0 {
        return Err(Error::OriginNotInterior);
    }
    let l = 1.01 * v.max_value() / rho;
    let coarse_n = if n >= 3 { 17 } else { 33 };
    let coarse = BoxGrid::new(vec![-l; n], vec![l; n], vec![coarse_n; n]);
    let h = coarse.spacing();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let neg: Vec<Vec<f64>> = (0..coarse.num_nodes())
        .into_par_iter()
        .filter_map(|f| {
            let x = coarse.node(f);
            (v.conjugate_at(&x).0 + polar.eval(&x) < 0.0).then_some(x)
        })
        .collect();
    for x in neg.iter().chain(std::iter::once(&vec![0.0; n])) {
        for i in 0..n {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    for i in 0..n {
        lo[i] = (lo[i] - 2.0 * h[i]).max(-l);
        hi[i] = (hi[i] + 2.0 * h[i]).min(l);
    }
    Ok(BoxGrid::new(lo, hi, vec![nodes_per_axis.max(3); n]))
}

/// Extracted free boundary `Ω = {w < 0}` and, for split targets, the slice `Ω′`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub w0: f64,
    /// Contour pieces from marching simplices: points (1-D), segments (2-D)
    /// or triangles (3-D).
    pub contour: Vec<Vec<Vec<f64>>>,
    /// Boundary points along sampled rays from the origin.
    pub radial: Vec<(Vec<f64>, f64)>,
    /// Convex hull of the radial boundary points (dimension <= 2).
    pub hull: Option<Polytope>,
    pub omega_prime: Option<SliceBoundary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceBoundary {
    /// Leading coordinates fixed at zero; rays run in the remaining ones.
    pub k: usize,
    pub radial: Vec<(Vec<f64>, f64)>,
    pub hull: Option<Polytope>,
}

impl FreeBoundary {
    pub fn inradius(&self) -> f64 {
        self.radial.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)
    }

    pub fn outradius(&self) -> f64 {
        self.radial.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let pts: Vec<Vec<f64>> = self.radial.iter().map(|(d, r)| crate::numeric::scale(d, *r)).collect();
        let mut best: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                best = best.max(crate::numeric::dist(a, b));
            }
        }
        best
    }
}

/// Directions used for radial sampling of Ω.
pub fn ray_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let ga = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = ga * i as f64;
                    let mut d = vec![r * t.cos(), r * t.sin(), z];
                    d.resize(dim, 0.0);
                    d
                })
                .collect()
        }
    }
}

/// Distance from the origin to `{f = 0}` along `dir`, for convex `f` with `f(0) < 0`.
pub fn ray_root(f: &dyn Fn(&[f64]) -> f64, dir: &[f64], scale: f64) -> f64 {
    let at = |t: f64| f(&crate::numeric::scale(dir, t));
    let mut hi = scale.max(1e-12);
    let mut guard = 0;
    while at(hi) < 0.0 && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn hull_of(dim: usize, radial: &[(Vec<f64>, f64)]) -> Option<Polytope> {
    if dim > 2 {
        return None;
    }
    let pts = radial.iter().map(|(d, r)| crate::numeric::scale(d, *r)).collect();
    Polytope::from_vertices(dim, pts).ok()
}

/// Ray samples per dimension for free-boundary extraction.
pub const RAY_SAMPLES_2D: usize = 256;
pub const RAY_SAMPLES_3D: usize = 400;

/// Extracts `Ω = {w < 0}` from a Legendre pair. Contours come from marching
/// simplices on the dual grid; radial samples use the exact `w`.
pub fn extract_free_boundary(pair: &LegendrePair, polar: &PolarSupport, split_k: Option<usize>) -> Result<FreeBoundary> {
    let n = pair.v.dim();
    let w0 = pair.w_exact(&vec![0.0; n], polar);
    if w0 >= -1e-300 {
        return Err(Error::EmptyInterior(w0));
    }
    let grid = &pair.u.grid;
    let mut contour = vec![];
    let nodes = grid.nodes();
    for s in grid.simplices() {
        let neg = s.iter().filter(|&&i| pair.w[i] < 0.0).count();
        if neg == 0 || neg == s.len() {
            continue;
        }
        let point = |a: usize, b: usize| -> Vec<f64> {
            let (wa, wb) = (pair.w[a], pair.w[b]);
            let t = wa / (wa - wb);
            (0..n).map(|k| nodes[a][k] + t * (nodes[b][k] - nodes[a][k])).collect()
        };
        let (inside, outside): (Vec<usize>, Vec<usize>) = s.iter().partition(|&&i| pair.w[i] < 0.0);
        if inside.len() == 2 && outside.len() == 2 {
            // quadrilateral section of a tetrahedron, cycled through shared nodes
            let (a, b, c, d) = (inside[0], inside[1], outside[0], outside[1]);
            let q = [point(a, c), point(a, d), point(b, d), point(b, c)];
            contour.push(vec![q[0].clone(), q[1].clone(), q[2].clone()]);
            contour.push(vec![q[0].clone(), q[2].clone(), q[3].clone()]);
        } else {
            let cut: Vec<Vec<f64>> = inside.iter().flat_map(|&a| outside.iter().map(move |&b| (a, b))).map(|(a, b)| point(a, b)).collect();
            if n == 1 {
                contour.extend(cut.into_iter().map(|p| vec![p]));
            } else {
                contour.push(cut);
            }
        }
    }
    let wf = |x: &[f64]| pair.w_exact(x, polar);
    let scale = (0..n).map(|i| grid.hi[i] - grid.lo[i]).fold(0.0, f64::max) * 0.25;
    let count = if n == 2 { RAY_SAMPLES_2D } else { RAY_SAMPLES_3D };
    let radial: Vec<(Vec<f64>, f64)> =
        ray_directions(n, count).into_par_iter().map(|d| { let r = ray_root(&wf, &d, scale); (d, r) }).collect();
    let hull = hull_of(n, &radial);
    let omega_prime = match split_k {
        Some(k) if k < n => {
            // Ω′ lives in the last n - k coordinates
            let kp = n - k;
            let dirs: Vec<Vec<f64>> = ray_directions(kp, if kp == 2 { RAY_SAMPLES_2D } else { RAY_SAMPLES_3D })
                .into_iter()
                .map(|d| {
                    let mut full = vec![0.0; k];
                    full.extend(d);
                    full
                })
                .collect();
            let rad: Vec<(Vec<f64>, f64)> = dirs
                .into_par_iter()
                .map(|d| {
                    let r = ray_root(&wf, &d, scale);
                    (d[k..].to_vec(), r)
                })
                .collect();
            let hull = hull_of(kp, &rad);
            Some(SliceBoundary { k, radial: rad, hull })
        }
        _ => None,
    };
    Ok(FreeBoundary { w0, contour, radial, hull, omega_prime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_geom::ConeSpec;

    fn square_fn(n: usize, f: impl Fn(&[f64]) -> f64) -> DiscreteConvexFunction {
        let p = Polytope::cube(2, 0.5);
        let mesh = Arc::new(SimplexMesh::on_polytope(&p, n).unwrap());
        DiscreteConvexFunction::from_fn(mesh, p, f)
    }

    fn identity_v(y: &[f64]) -> f64 {
        ((1.0 + y[0] * y[0] + y[1] * y[1]) / 2.0).sqrt()
    }

    #[test]
    fn convex_input_is_unchanged() {
        let v = square_fn(9, identity_v);
        let c = convexify(v.mesh.clone(), v.domain.clone(), &v.values);
        for (a, b) in c.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(v.convexity_certificate(CONVEXITY_TOL).certified);
    }

    #[test]
    fn anisotropic_convex_data_is_certified() {
        // mixed second differences of both signs; not PL-convex on the mesh
        let v = square_fn(9, |y| 1.0 + (y[0] + y[1]).powi(2) + 0.1 * (y[0] - y[1]).powi(2));
        assert!(v.convexity_certificate(CONVEXITY_TOL).certified);
        let w = square_fn(9, |y| 1.0 + (y[0] - y[1]).powi(2));
        assert!(w.convexity_certificate(CONVEXITY_TOL).certified);
    }

    #[test]
    fn concave_bump_becomes_affine_interpolant() {
        let v = square_fn(7, |y| 1.0 + (0.25 - y[0] * y[0]) * (0.25 - y[1] * y[1]) + 0.3 * y[0]);
        assert!(!v.convexity_certificate(CONVEXITY_TOL).certified);
        let c = convexify(v.mesh.clone(), v.domain.clone(), &v.values);
        for (y, e) in c.mesh.points.iter().zip(&c.values) {
            assert!((e - (1.0 + 0.3 * y[0])).abs() < 1e-12, "{y:?} {e}");
        }
        let again = convexify(c.mesh.clone(), c.domain.clone(), &c.values);
        assert_eq!(again.values, c.values);
    }

    #[test]
    fn constant_and_quadratic_legendre() {
        let v = square_fn(9, |_| 0.7);
        let g = BoxGrid::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![9, 9]);
        let u = legendre(&v, &g);
        for (x, val) in g.nodes().iter().zip(&u.values) {
            let phi = 0.5 * (x[0].abs() + x[1].abs());
            assert!((val - (phi - 0.7)).abs() < 1e-12);
        }
        let p = Polytope::cube(2, 2.0);
        let mesh = Arc::new(SimplexMesh::on_polytope(&p, 41).unwrap());
        let q = DiscreteConvexFunction::from_fn(mesh, p, |y| 0.5 * (y[0] * y[0] + y[1] * y[1]));
        let h = 0.1;
        for x in [[0.3, -0.2], [0.0, 0.0], [-1.0, 0.55]] {
            let (u, _) = q.conjugate_at(&x);
            let exact = 0.5 * (x[0] * x[0] + x[1] * x[1]);
            assert!((u - exact).abs() <= h * h, "{u} {exact}");
        }
    }

    #[test]
    fn identity_legendre_matches_multistart_sup() {
        let v = square_fn(33, identity_v);
        for x in [[0.2, 0.1], [-0.3, 0.25], [0.05, -0.4]] {
            let (u, _) = v.conjugate_at(&x);
            // continuous sup over P by dense sampling plus local refinement
            let mut best = f64::NEG_INFINITY;
            for i in 0..=400 {
                for j in 0..=400 {
                    let y = [-0.5 + i as f64 / 400.0, -0.5 + j as f64 / 400.0];
                    best = best.max(x[0] * y[0] + x[1] * y[1] - identity_v(&y));
                }
            }
            assert!((u - best).abs() < 1e-3, "{u} {best}");
            assert!(u <= best + 1e-12);
        }
    }

    #[test]
    fn star_transform_examples() {
        let c = square_fn(5, |_| 2.0);
        assert!(star_transform(&c).iter().all(|s| (s + 2.0).abs() < 1e-12));
        let l = square_fn(5, |y| 3.0 + y[0] - 2.0 * y[1]);
        assert!(star_transform(&l).iter().all(|s| (s + 3.0).abs() < 1e-12));
        let v = square_fn(33, identity_v);
        let st = star_transform(&v);
        for (s, val) in st.iter().enumerate() {
            let c = v.mesh.centroid(s);
            assert!((val + 1.0 / (2.0 * identity_v(&c))).abs() < 5e-3);
        }
    }

    #[test]
    fn free_boundary_of_identity_solution() {
        let v = square_fn(17, identity_v);
        let sigma = ConeSpec::compact(Polytope::cube(2, 0.5));
        let polar = PolarSupport::new(&sigma).unwrap();
        let grid = dual_grid_for(&v, &polar, 65).unwrap();
        let pair = LegendrePair::build(&v, &grid, &polar);
        let fb = extract_free_boundary(&pair, &polar, None).unwrap();
        // Omega = grad v(P); on the ray through d it ends at y/(2v(y)) with y on the square
        for (d, r) in &fb.radial {
            let s = 0.5 / d[0].abs().max(d[1].abs());
            let exact = s / (2.0 * identity_v(&[s * d[0], s * d[1]]));
            assert!((r - exact).abs() < 0.02, "{d:?} {r} {exact}");
        }
        assert!(!fb.contour.is_empty());
        let shifted = v.with_values(v.values.iter().map(|x| x - v.min_value()).collect());
        let pair = LegendrePair::build(&shifted, &grid, &polar);
        assert!(matches!(extract_free_boundary(&pair, &polar, None), Err(Error::EmptyInterior(_))));
    }

    #[test]
    fn function_file_validation() {
        assert!(FunctionFile::parse(r#"{"nodes": [[0,0],[1,0]], "values": [1, 2]}"#).is_ok());
        assert!(FunctionFile::parse(r#"{"nodes": [[0,0],[1]], "values": [1, 2]}"#).is_err());
        assert!(FunctionFile::parse(r#"{"nodes": [[0,0]], "values": [1, 2]}"#).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn convexify_is_idempotent_and_decreasing(noise in proptest::collection::vec(-0.05f64..0.05, 81)) {
            let base = square_fn(9, identity_v);
            let vals: Vec<f64> = base.values.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let c = convexify(base.mesh.clone(), base.domain.clone(), &vals);
            for ((e, v), b) in c.values.iter().zip(&vals).zip(&base.values) {
                proptest::prop_assert!(e <= v);
                proptest::prop_assert!((e - b).abs() <= 0.05 + 1e-12);
            }
            proptest::prop_assert!(c.convexity_certificate(CONVEXITY_TOL).certified);
            let again = convexify(c.mesh.clone(), c.domain.clone(), &c.values);
            for (a, b) in again.values.iter().zip(&c.values) {
                proptest::prop_assert!((a - b).abs() <= 1e-13);
            }
        }

        #[test]
        fn fenchel_young_on_node_pairs(i in 0usize..81, j in 0usize..81) {
            let v = square_fn(9, identity_v);
            let g = BoxGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![9, 9]);
            let u = legendre(&v, &g);
            let x = g.node(j);
            proptest::prop_assert!(u.values[j] + v.values[i] >= dot(&x, &v.mesh.points[i]) - 1e-14);
        }
    }
}
