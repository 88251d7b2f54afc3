//! `compare`: differences between two runs, or between a run and a reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cone_ot::convex_func::{DiscreteConvexFunction, FreeBoundary};
use cone_ot::mesh::SimplexMesh;
use cone_ot::numeric::{dist, scale};
use cone_ot::oracle::{identity_reference, shoot_1d, ShootOptions};
use cone_ot::Error;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_table, RunManifest, SOLUTION_V};
use crate::config::Problem;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: String,
    pub b: String,
    /// Factor `λ` applied to `b` before differencing (least squares on the
    /// common samples), since solutions are only defined up to scale.
    pub scale: f64,
    pub samples: usize,
    pub sup_abs: f64,
    /// `sup |a - λb| / sup |a|`.
    pub sup_rel: f64,
    /// Mass-weighted on the nodes of `a`, relative to the norm of `a`.
    pub l2_rel: f64,
    /// Hausdorff distance between the radial samples of the free boundaries.
    pub omega_hausdorff: Option<f64>,
    /// `b - a` for every metric both runs report.
    pub residual_deltas: BTreeMap<String, f64>,
}

/// A run directory read back from disk.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub problem: Problem,
    pub v: DiscreteConvexFunction,
}

fn incompatible(msg: impl Into<String>) -> CliError {
    CliError::Core { stage: "compare", source: Error::IncompatibleRuns(msg.into()) }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let manifest = RunManifest::read(dir)?;
    let problem = manifest.config.resolve(Path::new(&manifest.config_dir))?;
    let (cols, rows) = read_table(&dir.join(SOLUTION_V))?;
    let n = problem.n();
    if cols.len() != n + 1 {
        return Err(incompatible(format!("{} has {} columns, expected {}", dir.display(), cols.len(), n + 1)));
    }
    let mesh = SimplexMesh::on_polytope(&problem.p, manifest.mesh).map_err(|e| CliError::Core { stage: "compare", source: e })?;
    if mesh.num_nodes() != rows.len() || mesh.points.iter().zip(&rows).any(|(y, r)| dist(y, &r[..n]) > 1e-9) {
        return Err(incompatible(format!("{} does not match the mesh in its manifest", dir.display())));
    }
    let values = rows.iter().map(|r| r[n]).collect();
    let v = DiscreteConvexFunction::new(Arc::new(mesh), problem.p.clone(), values).map_err(|e| CliError::Core { stage: "compare", source: e })?;
    Ok(LoadedRun { dir: dir.to_path_buf(), manifest, problem, v })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()
}

fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one = |p: &[Vec<f64>], q: &[Vec<f64>]| p.iter().map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

fn radial_points(dir: &Path) -> Option<Vec<Vec<f64>>> {
    let fb: FreeBoundary = read_json(&dir.join("residuals/free_boundary.json"))?;
    Some(fb.radial.iter().map(|(d, r)| scale(d, *r)).collect())
}

/// Scale-aligned differences of `a` and `b` at the given points; `weights`
/// are used for the L² norm on the first `weights.len()` points.
fn differences(points: &[Vec<f64>], weights: &[f64], a: &dyn Fn(&[f64]) -> Option<f64>, b: &dyn Fn(&[f64]) -> Option<f64>) -> Result<(f64, usize, f64, f64, f64), CliError> {
    let pairs: Vec<(usize, f64, f64)> = points.iter().enumerate().filter_map(|(i, y)| Some((i, a(y)?, b(y)?))).collect();
    if pairs.is_empty() {
        return Err(incompatible("no common sample points"));
    }
    let ab: f64 = pairs.iter().map(|p| p.1 * p.2).sum();
    let bb: f64 = pairs.iter().map(|p| p.2 * p.2).sum();
    let lambda = if bb > 0.0 { ab / bb } else { 1.0 };
    let sup_abs = pairs.iter().map(|p| (p.1 - lambda * p.2).abs()).fold(0.0, f64::max);
    let sup_a = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, x, y) in pairs.iter().filter(|p| p.0 < weights.len()) {
        num += weights[i] * (x - lambda * y).powi(2);
        den += weights[i] * x * x;
    }
    let l2 = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok((lambda, pairs.len(), sup_abs, if sup_a > 0.0 { sup_abs / sup_a } else { sup_abs }, l2))
}

/// Compares two runs on the same geometry and densities.
pub fn compare_runs(a: &Path, b: &Path) -> Result<ComparisonReport, CliError> {
    let ra = load_run(a)?;
    let rb = load_run(b)?;
    let (ca, cb) = (&ra.manifest.config, &rb.manifest.config);
    if ca.source != cb.source || ca.target != cb.target || ca.split_k != cb.split_k {
        return Err(incompatible("geometry differs"));
    }
    if ca.source_density != cb.source_density || ca.target_density != cb.target_density {
        return Err(incompatible("densities differ"));
    }
    if ca.solver.mode != cb.solver.mode {
        return Err(incompatible("modes differ"));
    }
    let mut points = ra.v.mesh.points.clone();
    points.extend(rb.v.mesh.points.iter().cloned());
    let weights = ra.v.mesh.nodal_mass();
    let (scale, samples, sup_abs, sup_rel, l2_rel) = differences(&points, &weights, &|y| ra.v.eval(y), &|y| rb.v.eval(y))?;
    let omega_hausdorff = match (radial_points(a), radial_points(b)) {
        (Some(p), Some(q)) => Some(hausdorff(&p, &q)),
        _ => None,
    };
    let ma: BTreeMap<String, f64> = read_json(&a.join("residuals/metrics.json")).unwrap_or_default();
    let mb: BTreeMap<String, f64> = read_json(&b.join("residuals/metrics.json")).unwrap_or_default();
    let residual_deltas = ma.iter().filter_map(|(k, x)| mb.get(k).map(|y| (k.clone(), y - x))).collect();
    Ok(ComparisonReport { a: a.display().to_string(), b: b.display().to_string(), scale, samples, sup_abs, sup_rel, l2_rel, omega_hausdorff, residual_deltas })
}

/// Compares a run with the closed-form identity solution or, for `n = 1`,
/// with the shooting solution.
pub fn compare_oracle(a: &Path) -> Result<ComparisonReport, CliError> {
    let ra = load_run(a)?;
    let pr = &ra.problem;
    let weights = ra.v.mesh.nodal_mass();
    let points = ra.v.mesh.points.clone();
    let run = |y: &[f64]| ra.v.eval(y);
    let (name, d) = match identity_reference(&pr.p, &pr.sigma, &pr.g_p, &pr.g_sigma) {
        Ok(r) => ("identity", differences(&points, &weights, &run, &|y| Some(r.eval(y)))?),
        Err(Error::ConfigMismatch(why)) if pr.n() != 1 || pr.sigma.is_split() => return Err(incompatible(format!("no reference solution: {why}"))),
        Err(Error::ConfigMismatch(_)) => {
            let s = shoot_1d(&pr.p, &pr.sigma.link, &pr.g_p, &pr.g_sigma, &ShootOptions::default()).map_err(|e| CliError::Core { stage: "oracle", source: e })?;
            ("shooting", differences(&points, &weights, &run, &|y| Some(s.eval(y[0])))?)
        }
        Err(e) => return Err(CliError::Core { stage: "oracle", source: e }),
    };
    let (scale, samples, sup_abs, sup_rel, l2_rel) = d;
    Ok(ComparisonReport {
        a: a.display().to_string(),
        b: name.to_string(),
        scale,
        samples,
        sup_abs,
        sup_rel,
        l2_rel,
        omega_hausdorff: None,
        residual_deltas: BTreeMap::new(),
    })
}
