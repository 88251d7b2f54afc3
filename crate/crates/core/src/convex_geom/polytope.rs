//! Bounded convex polytopes in R^1..R^3 with both vertex and halfspace
//! representations kept in sync.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

/// Dedup tolerance for vertices and hull planes.
pub const VERTEX_TOL: f64 = 1e-10;

/// Closed halfspace `<normal, y> <= offset`, with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        let len = norm(&normal);
        if len > 0.0 {
            Self { normal: normal.iter().map(|a| a / len).collect(), offset: offset / len }
        } else {
            Self { normal, offset }
        }
    }

    #[inline]
    pub fn slack(&self, y: &[f64]) -> f64 {
        self.offset - dot(&self.normal, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polytope {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub halfspaces: Vec<Halfspace>,
}

/// Wire form: only vertices are required; halfspaces are rederived on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSpec {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<Halfspace>>,
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = PolytopeSpec::deserialize(d)?;
        Polytope::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

impl Polytope {
    pub fn from_spec(spec: &PolytopeSpec) -> Result<Self> {
        for (i, v) in spec.vertices.iter().enumerate() {
            if v.len() != spec.dim {
                return Err(Error::Invalid(format!(
                    "vertices[{i}] has {} coordinates, expected dim = {}",
                    v.len(),
                    spec.dim
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid(format!("vertices[{i}] has a non-finite coordinate")));
            }
        }
        Self::from_vertices(spec.dim, spec.vertices.clone())
    }

    pub fn to_spec(&self) -> PolytopeSpec {
        PolytopeSpec { dim: self.dim, vertices: self.vertices.clone(), halfspaces: Some(self.halfspaces.clone()) }
    }

    /// Convex hull of a point cloud.
    pub fn from_vertices(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points.iter().any(|p| p.len() != dim || p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Invalid("point with wrong dimension or non-finite coordinate".into()));
        }
        let pts = dedup_points(points);
        if pts.len() < dim + 1 {
            return Err(Error::DegenerateBody(format!("{} distinct points in R^{dim}", pts.len())));
        }
        let (vertices, halfspaces) = match dim {
            1 => hull_1d(&pts),
            2 => hull_2d(&pts)?,
            _ => hull_3d(&pts)?,
        };
        Ok(Self { dim, vertices, halfspaces })
    }

    /// Intersection of halfspaces `<a, y> <= b`. Fails when the region is
    /// unbounded or lower dimensional.
    pub fn from_halfspaces(dim: usize, hs: &[Halfspace]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let hs: Vec<Halfspace> = hs
            .iter()
            .filter(|h| norm(&h.normal) > 0.0)
            .map(|h| Halfspace::new(h.normal.clone(), h.offset))
            .collect();
        let verts = enumerate_vertices(dim, &hs);
        let poly = Self::from_vertices(dim, verts).map_err(|e| match e {
            Error::DegenerateBody(_) => Error::DegenerateBody("halfspace intersection has empty interior".into()),
            e => e,
        })?;
        // An unbounded region shows up as a hull facet that none of the input
        // constraints supports.
        for f in &poly.halfspaces {
            let supported = hs.iter().any(|h| {
                norm(&crate::numeric::sub(&h.normal, &f.normal)) < 1e-7 && (h.offset - f.offset).abs() < 1e-7
            });
            if !supported {
                return Err(Error::Unbounded);
            }
        }
        Ok(poly)
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        Self::axis_box(&vec![-half; dim], &vec![half; dim])
    }

    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut pts = vec![];
        for mask in 0..(1usize << dim) {
            pts.push((0..dim).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect());
        }
        Self::from_vertices(dim, pts).expect("box with positive widths")
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::axis_box(&[a], &[b])
    }

    /// `Some((lo, hi))` when the polytope is an axis-aligned box.
    pub fn as_axis_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.bounding_box();
        let is_box = self.halfspaces.len() == 2 * self.dim
            && self.halfspaces.iter().all(|h| h.normal.iter().filter(|a| a.abs() > 1e-12).count() == 1);
        is_box.then_some((lo, hi))
    }

    /// Support function `max_{v in K} <x, v>`.
    pub fn support(&self, x: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(y) >= -tol)
    }

    /// Signed distance to the boundary: positive inside, exact for polytopes inside.
    pub fn boundary_distance(&self, y: &[f64]) -> f64 {
        self.halfspaces.iter().map(|h| h.slack(y)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains_origin_interior(&self) -> bool {
        self.halfspaces.iter().all(|h| h.offset > VERTEX_TOL)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(crate::numeric::dist(a, b));
            }
        }
        d
    }

    pub fn vertex_centroid(&self) -> Vec<f64> {
        let k = self.vertices.len() as f64;
        (0..self.dim).map(|i| self.vertices.iter().map(|v| v[i]).sum::<f64>() / k).collect()
    }

    pub fn max_vertex_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        match self.dim {
            1 => self.vertices[1][0] - self.vertices[0][0],
            2 => {
                let n = self.vertices.len();
                let mut a = 0.0;
                for i in 0..n {
                    let p = &self.vertices[i];
                    let q = &self.vertices[(i + 1) % n];
                    a += p[0] * q[1] - p[1] * q[0];
                }
                0.5 * a.abs()
            }
            _ => {
                let c = self.vertex_centroid();
                let mut vol = 0.0;
                for h in &self.halfspaces {
                    let face = self.facet_vertices_ordered(h);
                    let height = h.offset - dot(&h.normal, &c);
                    let area = polygon_area_3d(&face, &h.normal);
                    vol += area * height / 3.0;
                }
                vol
            }
        }
    }

    /// Vertices on a facet, ordered counter-clockwise around its outward normal.
    pub fn facet_vertices_ordered(&self, h: &Halfspace) -> Vec<Vec<f64>> {
        let mut face: Vec<Vec<f64>> =
            self.vertices.iter().filter(|v| h.slack(v).abs() < 1e-8).cloned().collect();
        if self.dim == 3 && face.len() > 2 {
            let k = face.len() as f64;
            let c: Vec<f64> = (0..3).map(|i| face.iter().map(|v| v[i]).sum::<f64>() / k).collect();
            let e1 = crate::numeric::sub(&face[0], &c);
            let e1 = crate::numeric::scale(&e1, 1.0 / norm(&e1));
            let e2 = cross(&h.normal, &e1);
            face.sort_by(|a, b| {
                let da = crate::numeric::sub(a, &c);
                let db = crate::numeric::sub(b, &c);
                let ta = dot(&da, &e2).atan2(dot(&da, &e1));
                let tb = dot(&db, &e2).atan2(dot(&db, &e1));
                ta.partial_cmp(&tb).unwrap()
            });
        }
        face
    }

    pub fn translate(&self, a: &[f64]) -> Self {
        Self {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| crate::numeric::add(v, a)).collect(),
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset + dot(&h.normal, a) })
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s > 0.0);
        Self {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| crate::numeric::scale(v, s)).collect(),
            halfspaces: self.halfspaces.iter().map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset * s }).collect(),
        }
    }

    pub fn reflect(&self) -> Self {
        self.scale_signed(-1.0)
    }

    fn scale_signed(&self, s: f64) -> Self {
        Self::from_vertices(self.dim, self.vertices.iter().map(|v| crate::numeric::scale(v, s)).collect())
            .expect("nondegenerate image")
    }

    /// Equal up to vertex permutation within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.vertices.len() == other.vertices.len()
            && self
                .vertices
                .iter()
                .all(|v| other.vertices.iter().any(|w| crate::numeric::dist(v, w) <= tol))
    }
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn polygon_area_3d(face: &[Vec<f64>], normal: &[f64]) -> f64 {
    let mut acc = vec![0.0; 3];
    for i in 0..face.len() {
        let c = cross(&face[i], &face[(i + 1) % face.len()]);
        for k in 0..3 {
            acc[k] += c[k];
        }
    }
    0.5 * dot(&acc, normal).abs()
}

fn dedup_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| crate::numeric::dist(&p, q) <= VERTEX_TOL) {
            out.push(p);
        }
    }
    out
}

fn hull_1d(pts: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Halfspace>) {
    let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    (vec![vec![lo], vec![hi]], vec![Halfspace::new(vec![-1.0], -lo), Halfspace::new(vec![1.0], hi)])
}

/// Andrew's monotone chain; vertices come out counter-clockwise.
fn hull_2d(pts: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Halfspace>)> {
    let mut p: Vec<&Vec<f64>> = pts.iter().collect();
    p.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    let turn = |o: &[f64], a: &[f64], b: &[f64]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let scale = p.iter().map(|q| norm(q)).fold(1.0, f64::max);
    let eps = VERTEX_TOL * scale * scale;
    let mut lower: Vec<&Vec<f64>> = vec![];
    for q in &p {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], q) <= eps {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<&Vec<f64>> = vec![];
    for q in p.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], q) <= eps {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    let verts: Vec<Vec<f64>> = lower.into_iter().chain(upper).cloned().collect();
    if verts.len() < 3 {
        return Err(Error::DegenerateBody("collinear points".into()));
    }
    let n = verts.len();
    let mut hs = Vec::with_capacity(n);
    for i in 0..n {
        let a = &verts[i];
        let b = &verts[(i + 1) % n];
        let normal = vec![b[1] - a[1], a[0] - b[0]];
        let offset = dot(&normal, a);
        hs.push(Halfspace::new(normal, offset));
    }
    Ok((verts, hs))
}

/// Brute-force facet enumeration; fine for the small vertex counts used here.
fn hull_3d(pts: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Halfspace>)> {
    let n = pts.len();
    let scale = pts.iter().map(|q| norm(q)).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut hs: Vec<Halfspace> = vec![];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let e1 = crate::numeric::sub(&pts[j], &pts[i]);
                let e2 = crate::numeric::sub(&pts[k], &pts[i]);
                let c = cross(&e1, &e2);
                if norm(&c) <= 1e-12 * scale * scale {
                    continue;
                }
                let mut h = Halfspace::new(c, 0.0);
                h.offset = dot(&h.normal, &pts[i]);
                let (mut above, mut below) = (false, false);
                for p in pts {
                    let s = h.slack(p);
                    if s < -tol {
                        above = true;
                    } else if s > tol {
                        below = true;
                    }
                }
                if above && below {
                    continue;
                }
                if above {
                    h.normal.iter_mut().for_each(|a| *a = -*a);
                    h.offset = -h.offset;
                }
                if !below && !above {
                    return Err(Error::DegenerateBody("coplanar points".into()));
                }
                if !hs.iter().any(|g| norm(&crate::numeric::sub(&g.normal, &h.normal)) < 1e-9 && (g.offset - h.offset).abs() < tol)
                {
                    hs.push(h);
                }
            }
        }
    }
    if hs.len() < 4 {
        return Err(Error::DegenerateBody("fewer than four facets".into()));
    }
    let verts: Vec<Vec<f64>> = pts
        .iter()
        .filter(|p| {
            let active: Vec<&Halfspace> = hs.iter().filter(|h| h.slack(p).abs() <= tol).collect();
            active.len() >= 3 && rank(&active.iter().map(|h| h.normal.clone()).collect::<Vec<_>>()) == 3
        })
        .cloned()
        .collect();
    Ok((verts, hs))
}

fn rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    m.rank(1e-9)
}

/// Vertex enumeration: every `dim`-subset of constraints whose solution is feasible.
fn enumerate_vertices(dim: usize, hs: &[Halfspace]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![];
    let m = hs.len();
    let mut idx: Vec<usize> = (0..dim).collect();
    if m < dim {
        return out;
    }
    loop {
        let a = DMatrix::from_fn(dim, dim, |i, j| hs[idx[i]].normal[j]);
        let b = DVector::from_fn(dim, |i, _| hs[idx[i]].offset);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            let scale = 1.0 + norm(&x);
            if x.iter().all(|c| c.is_finite()) && hs.iter().all(|h| h.slack(&x) >= -1e-9 * scale) {
                out.push(x);
            }
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - dim + i {
                idx[i] += 1;
                for j in i + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
