//! Configuration-driven runner: reads a run config, executes the
//! checks → solve → lift → verify pipeline and writes an artifact directory
//! described by a manifest.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use compare::{compare_oracle, compare_runs, ComparisonReport};
pub use config::{parse_config, Overrides, RunConfig};
pub use error::{CliError, ConfigError};
pub use run::{run, RunOutcome};

use cone_ot::convex_geom::{Polytope, PolytopeSpec};
use cone_ot::densities::{DensityKindSpec, DensitySpec};

/// Identity configuration on `[-1/2, 1/2]^n` with every default spelled out.
pub fn template(n: usize) -> RunConfig {
    let square = Polytope::cube(n, 0.5).to_spec();
    let leb = DensitySpec { degree: 0.0, kind: DensityKindSpec::Lebesgue };
    RunConfig {
        source: PolytopeSpec { halfspaces: None, ..square.clone() },
        target: PolytopeSpec { halfspaces: None, ..square },
        split_k: None,
        source_density: leb.clone(),
        target_density: leb,
        solver: Default::default(),
        verify: Default::default(),
    }
}
