//! Simplicial meshes, Kuhn refinement and simplex quadrature rules.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::convex_geom::Polytope;
use crate::error::{Error, Result};

/// Barycentric quadrature rule on the reference simplex; weights sum to one.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub bary: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn symmetric_orbit(dim: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
    // points with one coordinate `a` and the rest `b`
    (0..=dim).map(|j| (0..=dim).map(|i| if i == j { a } else { b }).collect()).collect()
}

impl QuadRule {
    /// Degree-2 interior rule (no points on the simplex boundary).
    pub fn degree2(dim: usize) -> Self {
        match dim {
            1 => {
                let d = 0.5 / 3f64.sqrt();
                Self { bary: vec![vec![0.5 + d, 0.5 - d], vec![0.5 - d, 0.5 + d]], weights: vec![0.5, 0.5] }
            }
            2 => Self { bary: symmetric_orbit(2, 2.0 / 3.0, 1.0 / 6.0), weights: vec![1.0 / 3.0; 3] },
            _ => {
                let a = 0.585_410_196_624_968_5;
                let b = 0.138_196_601_125_010_5;
                Self { bary: symmetric_orbit(3, a, b), weights: vec![0.25; 4] }
            }
        }
    }

    /// Higher-order rule: 4-point Gauss in 1-D, the 6-point degree-4 rule in
    /// 2-D, and the degree-2 rule on a 2x Kuhn refinement in 3-D.
    pub fn high(dim: usize) -> Self {
        match dim {
            1 => {
                let (xs, ws) = crate::numeric::gauss_legendre_unit(4);
                Self { bary: xs.iter().map(|x| vec![1.0 - x, *x]).collect(), weights: ws }
            }
            2 => {
                let a1 = 0.445_948_490_915_965;
                let a2 = 0.091_576_213_509_771;
                let mut bary = symmetric_orbit(2, 1.0 - 2.0 * a1, a1);
                bary.extend(symmetric_orbit(2, 1.0 - 2.0 * a2, a2));
                let w1 = 0.223_381_589_678_011;
                let w2 = 0.109_951_743_655_322;
                Self { bary, weights: vec![w1, w1, w1, w2, w2, w2] }
            }
            _ => Self::degree2(dim).refined(dim, 2),
        }
    }

    /// Collapsed-coordinate Gauss rule with `order` points per axis.
    pub fn collapsed(dim: usize, order: usize) -> Self {
        let (xs, ws) = crate::numeric::gauss_legendre_unit(order);
        let mut bary = vec![];
        let mut weights = vec![];
        match dim {
            1 => {
                for (x, w) in xs.iter().zip(&ws) {
                    bary.push(vec![1.0 - x, *x]);
                    weights.push(*w);
                }
            }
            2 => {
                for (u, wu) in xs.iter().zip(&ws) {
                    for (v, wv) in xs.iter().zip(&ws) {
                        let (a, b) = (*u, v * (1.0 - u));
                        bary.push(vec![1.0 - a - b, a, b]);
                        weights.push(2.0 * wu * wv * (1.0 - u));
                    }
                }
            }
            _ => {
                for (u, wu) in xs.iter().zip(&ws) {
                    for (v, wv) in xs.iter().zip(&ws) {
                        for (t, wt) in xs.iter().zip(&ws) {
                            let (a, b, c) = (*u, v * (1.0 - u), t * (1.0 - u) * (1.0 - v));
                            bary.push(vec![1.0 - a - b - c, a, b, c]);
                            weights.push(6.0 * wu * wv * wt * (1.0 - u) * (1.0 - u) * (1.0 - v));
                        }
                    }
                }
            }
        }
        Self { bary, weights }
    }

    /// The same rule applied on each sub-simplex of a `k`-fold Kuhn refinement.
    pub fn refined(&self, dim: usize, k: usize) -> Self {
        let subs = kuhn_subsimplices(dim, k);
        let w = 1.0 / subs.len() as f64;
        let mut bary = vec![];
        let mut weights = vec![];
        for s in &subs {
            for (b, wq) in self.bary.iter().zip(&self.weights) {
                let mut p = vec![0.0; dim + 1];
                for (j, lam) in b.iter().enumerate() {
                    for i in 0..=dim {
                        p[i] += lam * s[j][i];
                    }
                }
                bary.push(p);
                weights.push(wq * w);
            }
        }
        Self { bary, weights }
    }
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Sub-simplices of the `k`-fold Kuhn refinement of a simplex, each given by
/// the barycentric coordinates (w.r.t. the parent) of its `dim + 1` vertices.
/// All sub-simplices have equal volume.
pub fn kuhn_subsimplices(dim: usize, k: usize) -> Vec<Vec<Vec<f64>>> {
    let perms = permutations(dim);
    let kf = k as f64;
    let to_bary = |x: &[usize]| -> Vec<f64> {
        let mut b = Vec::with_capacity(dim + 1);
        b.push(1.0 - x[0] as f64 / kf);
        for j in 0..dim {
            let next = if j + 1 < dim { x[j + 1] } else { 0 };
            b.push((x[j] - next) as f64 / kf);
        }
        b
    };
    let ordered = |x: &[usize]| x[0] <= k && x.windows(2).all(|w| w[0] >= w[1]);
    let mut out = vec![];
    let mut base = vec![0usize; dim];
    loop {
        for p in &perms {
            let mut verts = vec![base.clone()];
            let mut cur = base.clone();
            for &axis in p {
                cur[axis] += 1;
                verts.push(cur.clone());
            }
            if verts.iter().all(|v| ordered(v)) {
                out.push(verts.iter().map(|v| to_bary(v)).collect());
            }
        }
        let mut i = 0;
        while i < dim {
            base[i] += 1;
            if base[i] < k {
                break;
            }
            base[i] = 0;
            i += 1;
        }
        if i == dim {
            return out;
        }
    }
}

/// Unstructured simplicial mesh with per-simplex affine data.
#[derive(Debug, Clone)]
pub struct SimplexMesh {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
    pub volumes: Vec<f64>,
    /// Inverse edge matrices `E^{-1}` (row-major, `dim x dim`), `E = [p_j - p_0]`.
    inv_edges: Vec<Vec<f64>>,
    /// Nodes lying on the boundary of the meshed polytope.
    pub boundary: Vec<bool>,
    locator: Locator,
}

#[derive(Debug, Clone)]
struct Locator {
    lo: Vec<f64>,
    cell: Vec<f64>,
    counts: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl SimplexMesh {
    /// Builds a mesh from explicit points and simplices.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, simplices: Vec<Vec<usize>>, boundary: Vec<bool>) -> Result<Self> {
        let mut volumes = Vec::with_capacity(simplices.len());
        let mut inv_edges = Vec::with_capacity(simplices.len());
        for s in &simplices {
            let p0 = &points[s[0]];
            let e = DMatrix::from_fn(dim, dim, |i, j| points[s[j + 1]][i] - p0[i]);
            let det = e.determinant();
            if det.abs() <= 1e-300 {
                return Err(Error::DegenerateBody("zero-volume mesh simplex".into()));
            }
            volumes.push(det.abs() / factorial(dim));
            let inv = e.try_inverse().ok_or_else(|| Error::DegenerateBody("singular simplex".into()))?;
            inv_edges.push((0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect());
        }
        let locator = Locator::build(dim, &points, &simplices);
        Ok(Self { dim, points, simplices, volumes, inv_edges, boundary, locator })
    }

    /// Mesh of a polytope with roughly `nodes_per_axis` nodes across its extent.
    /// Axis boxes get the regular Kuhn grid; other bodies a refined fan from the
    /// vertex centroid.
    pub fn on_polytope(p: &Polytope, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < 2 {
            return Err(Error::Invalid("mesh needs at least 2 nodes per axis".into()));
        }
        let dim = p.dim;
        let coarse: Vec<Vec<Vec<f64>>>;
        let k;
        if let Some((lo, hi)) = p.as_axis_box() {
            coarse = permutations(dim)
                .into_iter()
                .map(|perm| {
                    let mut cur = lo.clone();
                    let mut vs = vec![cur.clone()];
                    for axis in perm {
                        cur[axis] = hi[axis];
                        vs.push(cur.clone());
                    }
                    vs
                })
                .collect();
            k = nodes_per_axis - 1;
        } else {
            if dim == 1 {
                unreachable!("intervals are axis boxes");
            }
            let c = p.vertex_centroid();
            let mut cs = vec![];
            for h in &p.halfspaces {
                let face = p.facet_vertices_ordered(h);
                if dim == 2 {
                    cs.push(vec![c.clone(), face[0].clone(), face[1].clone()]);
                } else {
                    for j in 1..face.len() - 1 {
                        cs.push(vec![c.clone(), face[0].clone(), face[j].clone(), face[j + 1].clone()]);
                    }
                }
            }
            let (lo, hi) = p.bounding_box();
            let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            let longest = cs
                .iter()
                .flat_map(|s| {
                    let s = s.clone();
                    (0..s.len()).flat_map(move |i| {
                        let s = s.clone();
                        (i + 1..s.len()).map(move |j| crate::numeric::dist(&s[i], &s[j]))
                    })
                })
                .fold(0.0, f64::max);
            k = (((nodes_per_axis - 1) as f64 * longest / extent).ceil() as usize).max(1);
            coarse = cs;
        }
        let pc = p.clone();
        Self::from_coarse(dim, &coarse, k, move |y| pc.boundary_distance(y).abs() < 1e-9 * (1.0 + pc.diameter()))
    }

    /// Kuhn-refines every coarse simplex `k` times and merges coincident nodes.
    pub fn from_coarse(dim: usize, coarse: &[Vec<Vec<f64>>], k: usize, on_boundary: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let subs = kuhn_subsimplices(dim, k);
        let mut scale: f64 = 0.0;
        for s in coarse {
            for v in s {
                for c in v {
                    scale = scale.max(c.abs());
                }
            }
        }
        let q = 1e-9 * scale.max(1e-300);
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut points: Vec<Vec<f64>> = vec![];
        let mut simplices = vec![];
        for s in coarse {
            for sub in &subs {
                let mut ids = Vec::with_capacity(dim + 1);
                for b in sub {
                    let mut y = vec![0.0; dim];
                    for (lam, v) in b.iter().zip(s) {
                        for i in 0..dim {
                            y[i] += lam * v[i];
                        }
                    }
                    let key: Vec<i64> = y.iter().map(|c| (c / q).round() as i64).collect();
                    let id = *index.entry(key).or_insert_with(|| {
                        points.push(y.clone());
                        points.len() - 1
                    });
                    ids.push(id);
                }
                simplices.push(ids);
            }
        }
        let boundary = points.iter().map(|y| on_boundary(y)).collect();
        Self::new(dim, points, simplices, boundary)
    }

    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn total_volume(&self) -> f64 {
        crate::numeric::compensated_sum(self.volumes.iter().copied())
    }

    /// Lumped mass `sum over incident simplices of vol / (dim + 1)`.
    pub fn nodal_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.points.len()];
        for (s, vol) in self.simplices.iter().zip(&self.volumes) {
            for &i in s {
                m[i] += vol / (self.dim + 1) as f64;
            }
        }
        m
    }

    /// Point at barycentric coordinates `b` in simplex `s`.
    pub fn point_at(&self, s: usize, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (lam, &i) in b.iter().zip(&self.simplices[s]) {
            for k in 0..self.dim {
                y[k] += lam * self.points[i][k];
            }
        }
        y
    }

    pub fn barycentric(&self, s: usize, y: &[f64]) -> Vec<f64> {
        let p0 = &self.points[self.simplices[s][0]];
        let inv = &self.inv_edges[s];
        let d = self.dim;
        let mut b = vec![0.0; d + 1];
        let mut sum = 0.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += inv[i * d + j] * (y[j] - p0[j]);
            }
            b[i + 1] = acc;
            sum += acc;
        }
        b[0] = 1.0 - sum;
        b
    }

    /// Constant gradient of the PL interpolant of `values` on simplex `s`.
    pub fn gradient(&self, s: usize, values: &[f64]) -> Vec<f64> {
        let ids = &self.simplices[s];
        let d = self.dim;
        let inv = &self.inv_edges[s];
        let df: Vec<f64> = (0..d).map(|j| values[ids[j + 1]] - values[ids[0]]).collect();
        // grad = E^{-T} df
        (0..d).map(|i| (0..d).map(|j| inv[j * d + i] * df[j]).sum()).collect()
    }

    /// Gradients of the barycentric (hat) functions on simplex `s`.
    pub fn hat_gradients(&self, s: usize) -> Vec<Vec<f64>> {
        let d = self.dim;
        let inv = &self.inv_edges[s];
        let mut out = vec![vec![0.0; d]; d + 1];
        for j in 0..d {
            for i in 0..d {
                out[j + 1][i] = inv[j * d + i];
                out[0][i] -= inv[j * d + i];
            }
        }
        out
    }

    pub fn centroid(&self, s: usize) -> Vec<f64> {
        let b = vec![1.0 / (self.dim + 1) as f64; self.dim + 1];
        self.point_at(s, &b)
    }

    /// Simplex containing `y` (within a small tolerance) with barycentric coordinates.
    pub fn locate(&self, y: &[f64]) -> Option<(usize, Vec<f64>)> {
        let cell = self.locator.cell_of(y)?;
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for &s in &self.locator.buckets[cell] {
            let b = self.barycentric(s, y);
            let m = b.iter().copied().fold(f64::INFINITY, f64::min);
            if m >= 0.0 {
                return Some((s, b));
            }
            if best.as_ref().is_none_or(|(_, _, bm)| m > *bm) {
                best = Some((s, b, m));
            }
        }
        best.filter(|(_, _, m)| *m > -1e-9).map(|(s, b, _)| (s, b))
    }

    /// PL interpolation of nodal `values` at `y`; `None` outside the mesh.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> Option<f64> {
        let (s, b) = self.locate(y)?;
        Some(b.iter().zip(&self.simplices[s]).map(|(l, &i)| l * values[i]).sum())
    }

    /// Whether simplex `s` has a node on the boundary.
    pub fn touches_boundary(&self, s: usize) -> bool {
        self.simplices[s].iter().any(|&i| self.boundary[i])
    }

    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for s in &self.simplices {
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    h = h.max(crate::numeric::dist(&self.points[s[i]], &self.points[s[j]]));
                }
            }
        }
        h
    }
}

impl Locator {
    fn build(dim: usize, points: &[Vec<f64>], simplices: &[Vec<usize>]) -> Self {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let per_axis = ((simplices.len() as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let counts = vec![per_axis; dim];
        let cell: Vec<f64> = (0..dim).map(|i| ((hi[i] - lo[i]) / per_axis as f64).max(1e-300)).collect();
        let total: usize = counts.iter().product();
        let mut buckets = vec![vec![]; total];
        let tol = 1e-9;
        for (s, ids) in simplices.iter().enumerate() {
            let mut a = vec![usize::MAX; dim];
            let mut b = vec![0usize; dim];
            for &id in ids {
                for i in 0..dim {
                    let lo_c = (((points[id][i] - lo[i]) / cell[i] - tol).floor().max(0.0) as usize).min(per_axis - 1);
                    let hi_c = (((points[id][i] - lo[i]) / cell[i] + tol).floor().max(0.0) as usize).min(per_axis - 1);
                    a[i] = a[i].min(lo_c);
                    b[i] = b[i].max(hi_c);
                }
            }
            let mut idx = a.clone();
            loop {
                let mut flat = 0;
                for i in (0..dim).rev() {
                    flat = flat * per_axis + idx[i];
                }
                buckets[flat].push(s);
                let mut i = 0;
                while i < dim {
                    idx[i] += 1;
                    if idx[i] <= b[i] {
                        break;
                    }
                    idx[i] = a[i];
                    i += 1;
                }
                if i == dim {
                    break;
                }
            }
        }
        Self { lo, cell, counts, buckets }
    }

    fn cell_of(&self, y: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for i in (0..self.lo.len()).rev() {
            let t = (y[i] - self.lo[i]) / self.cell[i];
            let n = self.counts[i];
            if t < -1e-6 || t > n as f64 + 1e-6 {
                return None;
            }
            let c = (t.floor().max(0.0) as usize).min(n - 1);
            flat = flat * n + c;
        }
        Some(flat)
    }
}

/// Regular grid on an axis box with implicit Kuhn triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BoxGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Self {
        assert!(counts.iter().all(|&c| c >= 2));
        Self { lo, hi, counts }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.hi[i] - self.lo[i]) / (self.counts[i] - 1) as f64).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Flat index, first axis fastest.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for i in (0..self.dim()).rev() {
            f = f * self.counts[i] + idx[i];
        }
        f
    }

    pub fn unflat(&self, mut f: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in 0..self.dim() {
            idx[i] = f % self.counts[i];
            f /= self.counts[i];
        }
        idx
    }

    pub fn node(&self, f: usize) -> Vec<f64> {
        let idx = self.unflat(f);
        let h = self.spacing();
        (0..self.dim()).map(|i| self.lo[i] + h[i] * idx[i] as f64).collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.num_nodes()).map(|f| self.node(f)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Kuhn simplices as node index lists; all have volume `cell_volume / dim!`.
    pub fn simplices(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        let perms = permutations(d);
        let cells: Vec<usize> = self.counts.iter().map(|c| c - 1).collect();
        let ncells: usize = cells.iter().product();
        let mut out = Vec::with_capacity(ncells * perms.len());
        for c in 0..ncells {
            let mut base = vec![0; d];
            let mut r = c;
            for i in 0..d {
                base[i] = r % cells[i];
                r /= cells[i];
            }
            for p in &perms {
                let mut cur = base.clone();
                let mut s = vec![self.flat(&cur)];
                for &axis in p {
                    cur[axis] += 1;
                    s.push(self.flat(&cur));
                }
                out.push(s);
            }
        }
        out
    }

    /// PL interpolation (Kuhn) of nodal values; `None` outside the box.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let d = self.dim();
        let h = self.spacing();
        let mut base = vec![0; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let t = (x[i] - self.lo[i]) / h[i];
            if t < -1e-9 || t > (self.counts[i] - 1) as f64 + 1e-9 {
                return None;
            }
            let b = (t.floor().max(0.0) as usize).min(self.counts[i] - 2);
            base[i] = b;
            frac[i] = (t - b as f64).clamp(0.0, 1.0);
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|a, b| frac[*b].partial_cmp(&frac[*a]).unwrap());
        let mut cur = base.clone();
        let mut acc = (1.0 - frac[order[0]]) * values[self.flat(&cur)];
        for (k, &axis) in order.iter().enumerate() {
            cur[axis] += 1;
            let next = if k + 1 < d { frac[order[k + 1]] } else { 0.0 };
            acc += (frac[axis] - next) * values[self.flat(&cur)];
        }
        Some(acc)
    }

    pub fn to_mesh(&self) -> Result<SimplexMesh> {
        let pts = self.nodes();
        let boundary = (0..self.num_nodes())
            .map(|f| self.unflat(f).iter().zip(&self.counts).any(|(i, c)| *i == 0 || *i == c - 1))
            .collect();
        SimplexMesh::new(self.dim(), pts, self.simplices(), boundary)
    }
}
