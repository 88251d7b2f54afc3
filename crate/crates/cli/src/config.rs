//! Run configuration: JSON text with a fixed schema and echoed defaults.

use std::path::{Path, PathBuf};

use cone_ot::convex_geom::{ConeSpec, Polytope, PolytopeSpec};
use cone_ot::densities::{DensitySpec, HomogeneousDensity};
use cone_ot::homogenization::TransportOptions;
use cone_ot::minimizer::{Mode, SolveConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Source link `P`.
    pub source: PolytopeSpec,
    /// Target link `Σ`, or its compact factor when `split_k` is set.
    pub target: PolytopeSpec,
    /// Target cone is `C(Σ^k) × R^{n-k}`.
    #[serde(default)]
    pub split_k: Option<usize>,
    pub source_density: DensitySpec,
    pub target_density: DensitySpec,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub transport: TransportOptions,
    pub pushforward_bins: usize,
    /// Nodes per axis of the dual grid behind `solution/u` and the plot
    /// fields; defaults to 65 for `n <= 2` and 17 for `n = 3`.
    pub plot_nodes: Option<usize>,
    pub thresholds: Thresholds,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { transport: TransportOptions::default(), pushforward_bins: 8, plot_nodes: None, thresholds: Thresholds::default() }
    }
}

/// Limits reported as pass/fail in `residuals/summary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub interior_p95: f64,
    pub boundary_p95: f64,
    pub pushforward_tv: f64,
    pub ma_aggregate: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { interior_p95: 1e-2, boundary_p95: 2e-2, pushforward_tv: 2e-2, ma_aggregate: 2e-2 }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub mesh: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.solver;
        if let Some(m) = self.mode {
            s.mode = m;
        }
        if let Some(m) = self.mesh {
            s.mesh = m;
        }
        if let Some(m) = self.max_iters {
            s.max_iters = m;
        }
        if let Some(t) = self.tol {
            s.tol = t;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
            cfg.verify.transport.seed = seed;
        }
    }
}

/// Geometry and densities resolved from a config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub p: Polytope,
    pub sigma: ConeSpec,
    pub g_p: HomogeneousDensity,
    pub g_sigma: HomogeneousDensity,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.p.dim
    }
}

/// Parses config text, reporting the line, column and field path of the
/// first schema violation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError { field: (path != ".").then_some(path), line: Some(inner.line()), column: Some(inner.column()), message: inner.to_string() }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    /// Checks cross-field constraints and resolves the geometry. Density
    /// tables are read relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<Problem, ConfigError> {
        self.solver.validate().map_err(field("solver"))?;
        let v = &self.verify;
        if v.pushforward_bins == 0 || v.pushforward_bins > 256 {
            return Err(ConfigError::at("verify.pushforward_bins", format!("must lie in 1..=256, got {}", v.pushforward_bins)));
        }
        if matches!(v.plot_nodes, Some(k) if !(3..=513).contains(&k)) {
            return Err(ConfigError::at("verify.plot_nodes", "must lie in 3..=513"));
        }
        let t = &v.transport;
        if t.interior_samples == 0 || !(t.smoothing_cells > 0.0 && t.smoothing_cells.is_finite()) || !(t.fd_fraction > 0.0 && t.fd_fraction < 1.0) {
            return Err(ConfigError::at("verify.transport", "needs interior_samples >= 1, smoothing_cells > 0 and fd_fraction in (0, 1)"));
        }
        let th = &v.thresholds;
        for (name, x) in [("interior_p95", th.interior_p95), ("boundary_p95", th.boundary_p95), ("pushforward_tv", th.pushforward_tv), ("ma_aggregate", th.ma_aggregate)] {
            if !(x > 0.0) {
                return Err(ConfigError::at(&format!("verify.thresholds.{name}"), format!("must be positive, got {x}")));
            }
        }
        let p = Polytope::from_spec(&self.source).map_err(field("source"))?;
        let target = Polytope::from_spec(&self.target).map_err(field("target"))?;
        let sigma = match self.split_k {
            None => {
                if target.dim != p.dim {
                    return Err(ConfigError::at("target.dim", format!("expected {}, got {}", p.dim, target.dim)));
                }
                ConeSpec::compact(target.clone())
            }
            Some(k) => {
                if k != target.dim {
                    return Err(ConfigError::at("split_k", format!("must equal target.dim = {}", target.dim)));
                }
                ConeSpec::split(target.clone(), p.dim).map_err(field("split_k"))?
            }
        };
        let g_p = self.source_density.resolve(base, p.clone()).map_err(field("source_density"))?;
        let g_sigma = self.target_density.resolve(base, target).map_err(field("target_density"))?;
        Ok(Problem { p, sigma, g_p, g_sigma })
    }

    pub fn plot_nodes(&self) -> usize {
        self.verify.plot_nodes.unwrap_or(if self.source.dim >= 3 { 17 } else { 65 })
    }

    /// Canonical serialization: the effective config with every default filled in.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Directory that relative table paths in a config refer to.
pub fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| PathBuf::from("."))
}

fn field(name: &'static str) -> impl Fn(cone_ot::Error) -> ConfigError {
    move |e| ConfigError::at(name, e.to_string())
}
