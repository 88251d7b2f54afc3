//! `run`: checks, solve, lift, verification and artifact emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cone_ot::convex_func::{dual_grid_for, extract_free_boundary, DiscreteConvexFunction, LegendrePair};
use cone_ot::convex_geom::{check_partial_obliqueness, check_strong_obliqueness, roundness_report, ObliquenessMode, PolarSupport};
use cone_ot::energy::{default_dual_nodes, EnergyModel};
use cone_ot::homogenization::{lift, pushforward_check, verify_transport, Quantiles};
use cone_ot::mesh::BoxGrid;
use cone_ot::minimizer::{minimize, SolutionBundle};
use cone_ot::oracle::{equation_rhs, ma_measure_check};
use cone_ot::Error;
use serde::Serialize;

use crate::artifacts::{coord_columns, versions, ArtifactWriter, Outcome, RunLock, RunManifest, Status, LOG, MANIFEST_FORMAT, SOLUTION_U, SOLUTION_V};
use crate::config::{config_base, load_config, Overrides, Problem, RunConfig};
use crate::error::{error_kind, exit_code, CliError, EXIT_NO_CONVERGENCE, EXIT_OK};

const DL: &str = "dimensionless";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Executes a run into `out`. Config problems are returned as errors before
/// the directory is touched; failures after that are recorded in the
/// manifest and reflected in the exit code.
pub fn run(config_path: &Path, overrides: &Overrides, out: &Path) -> Result<RunOutcome, CliError> {
    let started = timestamp();
    let mut cfg = load_config(config_path)?;
    overrides.apply(&mut cfg);
    let base = config_base(config_path);
    let problem = cfg.resolve(&base)?;
    let _lock = RunLock::acquire(out)?;
    let mut ctx = Context { cfg: &cfg, problem: &problem, w: ArtifactWriter::new(out), log: Vec::new(), metrics: BTreeMap::new(), checks: Vec::new() };
    ctx.log.push(format!("config_hash={}", cfg.hash()));
    ctx.log.push(format!("mode={:?} mesh={} n={}", cfg.solver.mode, cfg.solver.mesh, problem.n()));
    let outcome = match ctx.pipeline() {
        Ok(o) => o,
        Err(Failure::Io(e)) => return Err(e),
        Err(Failure::Core { stage, err, iterations }) => {
            ctx.log.push(format!("stage={stage} error={err}"));
            Outcome {
                status: Status::Failed,
                exit_code: exit_code(&err),
                stage: Some(stage.to_string()),
                error_kind: Some(error_kind(&err).to_string()),
                message: Some(err.to_string()),
                iterations,
                energy: None,
                grad_norm: None,
                thresholds_passed: None,
            }
        }
    };
    ctx.log.push(format!("exit_code={}", outcome.exit_code));
    let mut log = ctx.log.join("\n");
    log.push('\n');
    ctx.w.write(LOG, log.as_bytes())?;
    let manifest = RunManifest {
        format: MANIFEST_FORMAT,
        config_hash: cfg.hash(),
        config_path: config_path.display().to_string(),
        config_dir: base.display().to_string(),
        mode: cfg.solver.mode,
        mesh: cfg.solver.mesh,
        config: cfg.clone(),
        versions: versions(),
        started,
        finished: timestamp(),
        outcome,
        files: ctx.w.entries(),
    };
    ctx.w.write_manifest(&manifest)?;
    Ok(RunOutcome { exit_code: manifest.outcome.exit_code, dir: out.to_path_buf(), manifest })
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

enum Failure {
    Core { stage: &'static str, err: Error, iterations: Option<usize> },
    Io(CliError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Io(e)
    }
}

fn at<T>(stage: &'static str, r: cone_ot::Result<T>) -> Result<T, Failure> {
    r.map_err(|err| Failure::Core { stage, err, iterations: None })
}

struct Context<'a> {
    cfg: &'a RunConfig,
    problem: &'a Problem,
    w: ArtifactWriter,
    log: Vec<String>,
    metrics: BTreeMap<String, f64>,
    /// `(name, value, limit)`; passes when `value <= limit`.
    checks: Vec<(String, f64, f64)>,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    converged: bool,
    iterations: usize,
    stalls: usize,
    report: &'a cone_ot::energy::EnergyReport,
    stationarity: &'a Option<cone_ot::minimizer::StationarityCertificate>,
    roundness: &'a Option<cone_ot::minimizer::RoundnessCheck>,
    normalization: &'a Option<cone_ot::minimizer::NormalizationState>,
    health: &'a Option<cone_ot::minimizer::HealthReport>,
}

#[derive(Serialize)]
struct TransportSummary {
    gamma: f64,
    smoothing_radius: f64,
    equation_scale: f64,
    interior: Quantiles,
    boundary: Quantiles,
    boundary_link: Quantiles,
    containment: Quantiles,
    containment_violations: usize,
    coverage_gap: f64,
    vertices_covered: bool,
    active_fraction: f64,
}

#[derive(Serialize)]
struct PushforwardSummary {
    tv: f64,
    bins_per_axis: usize,
    mu_mass: f64,
    nu_mass: f64,
}

impl Context<'_> {
    fn pipeline(&mut self) -> Result<Outcome, Failure> {
        let pr = self.problem;
        let ob = if pr.sigma.is_split() { check_partial_obliqueness(&pr.p, &pr.sigma) } else { check_strong_obliqueness(&pr.p, &pr.sigma.link) };
        let ob = at("checks", ob)?;
        self.log.push(format!("obliqueness mode={:?} margin={:.6e}", ob.mode, ob.margin));
        if ob.mode == ObliquenessMode::Strong {
            let rb = at("checks", roundness_report(&pr.p, &pr.sigma.link))?;
            self.w.write_json("residuals/roundness_constants.json", &rb)?;
        }
        self.w.write_json("residuals/obliqueness.json", &ob)?;

        let (bundle, converged) = match minimize(&pr.p, &pr.sigma, &pr.g_p, &pr.g_sigma, &self.cfg.solver) {
            Ok(b) => {
                let c = b.converged;
                (b, c)
            }
            Err(Error::NoConvergence { best, iters, grad_norm }) => {
                self.log.push(format!("no convergence after {iters} iterations (grad norm {grad_norm:.3e})"));
                (*best, false)
            }
            Err(err) => return Err(Failure::Core { stage: "solve", err, iterations: Some(0) }),
        };
        for rec in &bundle.history {
            self.log.push(rec.log_line());
        }
        let v = &bundle.v;
        self.write_solution(&bundle)?;
        let rep = &bundle.report;
        for (k, x) in [("E", rep.e), ("I", rep.i), ("J", rep.j), ("t_star", rep.t_star), ("grad_norm", rep.grad_norm), ("iterations", bundle.iterations() as f64)] {
            self.metrics.insert(k.to_string(), x);
        }
        let iterations = Some(bundle.iterations());
        let with_iters = |r: Result<(), Failure>| {
            r.map_err(|f| match f {
                Failure::Core { stage, err, .. } => Failure::Core { stage, err, iterations },
                f => f,
            })
        };
        with_iters(self.write_dual(v))?;

        let mut outcome = Outcome {
            status: if converged { Status::Converged } else { Status::NotConverged },
            exit_code: if converged { EXIT_OK } else { EXIT_NO_CONVERGENCE },
            stage: None,
            error_kind: None,
            message: None,
            iterations,
            energy: Some(rep.e),
            grad_norm: Some(rep.grad_norm),
            thresholds_passed: None,
        };
        if !converged {
            outcome.stage = Some("solve".into());
            outcome.error_kind = Some("no_convergence".into());
            outcome.message = Some(format!("gradient norm {:.3e} above tolerance {:.3e}", rep.grad_norm, self.cfg.solver.tol));
            self.write_metrics()?;
            return Ok(outcome);
        }
        with_iters(self.verify(v))?;
        self.write_metrics()?;
        let passed = self.checks.iter().all(|(_, x, lim)| x <= lim);
        self.log.push(format!("thresholds_passed={passed}"));
        outcome.thresholds_passed = Some(passed);
        Ok(outcome)
    }

    fn write_solution(&mut self, b: &SolutionBundle) -> Result<(), Failure> {
        let v = &b.v;
        let n = v.dim();
        let mut cols = coord_columns("y", n, DL);
        cols.push(("v".into(), DL));
        let rows = v.mesh.points.iter().zip(&v.values).map(|(y, x)| y.iter().copied().chain([*x]).collect::<Vec<f64>>());
        self.w.write_table(SOLUTION_V, &cols, rows)?;
        let summary = SolveSummary {
            converged: b.converged,
            iterations: b.iterations(),
            stalls: b.stalls,
            report: &b.report,
            stationarity: &b.stationarity,
            roundness: &b.roundness,
            normalization: &b.normalization,
            health: &b.health,
        };
        self.w.write_json("residuals/solve.json", &summary)?;

        let k = self.cfg.plot_nodes();
        let (lo, hi) = v.domain.bounding_box();
        let grid = BoxGrid::new(lo, hi, vec![k; n]);
        let rows = (0..grid.num_nodes()).filter_map(|f| {
            let y = grid.node(f);
            v.eval(&y).map(|x| y.into_iter().chain([x]).collect::<Vec<f64>>())
        });
        self.w.write_table("plots/v_grid.csv", &cols, rows)?;
        Ok(())
    }

    fn write_dual(&mut self, v: &DiscreteConvexFunction) -> Result<(), Failure> {
        let pr = self.problem;
        let n = v.dim();
        let polar = at("dual", PolarSupport::new(&pr.sigma))?;
        let grid = at("dual", dual_grid_for(v, &polar, self.cfg.plot_nodes()))?;
        let pair = LegendrePair::build(v, &grid, &polar);
        let xs = coord_columns("x", n, DL);
        let mut cols = xs.clone();
        cols.push(("u".into(), DL));
        let rows = (0..grid.num_nodes()).map(|f| grid.node(f).into_iter().chain([pair.u.values[f]]).collect::<Vec<f64>>());
        self.w.write_table(SOLUTION_U, &cols, rows)?;
        let mut cols = xs.clone();
        cols.push(("w".into(), DL));
        let rows = (0..grid.num_nodes()).map(|f| grid.node(f).into_iter().chain([pair.w[f]]).collect::<Vec<f64>>());
        self.w.write_table("plots/w_grid.csv", &cols, rows)?;

        let fb = at("dual", extract_free_boundary(&pair, &polar, pr.sigma.split_k.filter(|_| pr.sigma.is_split())))?;
        self.w.write_json("residuals/free_boundary.json", &fb)?;
        let mut cols = vec![("piece".to_string(), "index")];
        cols.extend(xs);
        let rows = fb.contour.iter().enumerate().flat_map(|(i, piece)| piece.iter().map(move |x| std::iter::once(i as f64).chain(x.iter().copied()).collect::<Vec<f64>>()));
        self.w.write_table("plots/omega_contour.csv", &cols, rows)?;
        self.metrics.insert("omega_w0".into(), fb.w0);
        self.metrics.insert("omega_inradius".into(), fb.inradius());
        self.metrics.insert("omega_outradius".into(), fb.outradius());
        Ok(())
    }

    fn verify(&mut self, v: &DiscreteConvexFunction) -> Result<(), Failure> {
        let pr = self.problem;
        let vc = &self.cfg.verify;
        let sol = at("lift", lift(v, pr.g_p.degree, pr.g_sigma.degree))?;
        let tr = at("verify_transport", verify_transport(&sol, &pr.sigma, &pr.g_p, &pr.g_sigma, &vc.transport))?;
        for line in tr.lines() {
            self.log.push(line);
        }
        let summary = TransportSummary {
            gamma: tr.gamma,
            smoothing_radius: tr.smoothing_radius,
            equation_scale: tr.equation_scale,
            interior: tr.interior,
            boundary: tr.boundary,
            boundary_link: tr.boundary_link,
            containment: tr.containment,
            containment_violations: tr.containment_violations,
            coverage_gap: tr.coverage_gap,
            vertices_covered: tr.vertices_covered,
            active_fraction: tr.active_fraction,
        };
        self.w.write_json("residuals/transport.json", &summary)?;
        for (name, field) in [("plots/residual_interior.csv", &tr.interior_field), ("plots/residual_boundary.csv", &tr.boundary_field)] {
            let d = field.first().map_or(pr.n() + 1, |f| f.0.len());
            let mut cols = coord_columns("y", d, DL);
            cols.push(("residual".into(), DL));
            self.w.write_table(name, &cols, field.iter().map(|(y, r)| y.iter().copied().chain([*r]).collect::<Vec<f64>>()))?;
        }
        self.metrics.insert("interior_p95".into(), tr.interior.p95);
        self.metrics.insert("interior_max".into(), tr.interior.max);
        self.metrics.insert("boundary_p95".into(), tr.boundary.p95);
        self.metrics.insert("boundary_max".into(), tr.boundary.max);
        self.metrics.insert("equation_scale".into(), tr.equation_scale);
        self.metrics.insert("containment_violations".into(), tr.containment_violations as f64);
        self.checks.push(("interior_p95".into(), tr.interior.p95, vc.thresholds.interior_p95));
        self.checks.push(("boundary_p95".into(), tr.boundary.p95, vc.thresholds.boundary_p95));

        let dual = self.cfg.solver.dual_nodes.unwrap_or_else(|| default_dual_nodes(pr.n(), self.cfg.solver.mesh));
        let model = at("pushforward", EnergyModel::new(pr.sigma.clone(), pr.g_p.clone(), pr.g_sigma.clone(), dual))?;
        let pf = at("pushforward", pushforward_check(&model, v, vc.pushforward_bins))?;
        self.log.push(format!("pushforward tv={:.6e} bins={}", pf.tv, pf.bins_per_axis));
        self.w.write_json("residuals/pushforward.json", &PushforwardSummary { tv: pf.tv, bins_per_axis: pf.bins_per_axis, mu_mass: pf.mu_mass, nu_mass: pf.nu_mass })?;
        let cols = [("bin".to_string(), "index"), ("mu".to_string(), "probability"), ("nu".to_string(), "probability")];
        self.w.write_table("plots/pushforward_bins.csv", &cols, pf.mu_bins.iter().zip(&pf.nu_bins).enumerate().map(|(i, (a, b))| vec![i as f64, *a, *b]))?;
        self.metrics.insert("pushforward_tv".into(), pf.tv);
        self.checks.push(("pushforward_tv".into(), pf.tv, vc.thresholds.pushforward_tv));

        let rhs = equation_rhs(&model);
        let ma = at("ma_measure", ma_measure_check(v, &rhs, Some(&model.polar), true))?;
        self.log.push(format!("ma_measure aggregate={:.6e} scale={:.6e} compared={}", ma.aggregate, ma.scale, ma.compared));
        let n = v.dim();
        let mut cols = vec![("node".to_string(), "index")];
        cols.extend(coord_columns("y", n, DL));
        cols.extend([("measure".to_string(), DL), ("target".to_string(), DL), ("discrepancy".to_string(), DL)]);
        let rows = (0..v.mesh.num_nodes()).map(|i| {
            let mut r = vec![i as f64];
            r.extend(&v.mesh.points[i]);
            r.extend([ma.measure[i].unwrap_or(f64::NAN), ma.target[i], ma.discrepancy[i].unwrap_or(f64::NAN)]);
            r
        });
        self.w.write_table("residuals/ma_measure.csv", &cols, rows)?;
        self.metrics.insert("ma_aggregate".into(), ma.aggregate);
        self.metrics.insert("ma_scale".into(), ma.scale);
        self.checks.push(("ma_aggregate".into(), ma.aggregate, vc.thresholds.ma_aggregate));
        Ok(())
    }

    fn write_metrics(&mut self) -> Result<(), Failure> {
        self.w.write_json("residuals/metrics.json", &self.metrics)?;
        if !self.checks.is_empty() {
            let mut text = String::new();
            for (name, x, lim) in &self.checks {
                let verdict = if x <= lim { "PASS" } else { "FAIL" };
                text.push_str(&format!("{verdict} {name} = {x:.6e} (limit {lim:.3e})\n"));
            }
            self.w.write("residuals/summary.txt", text.as_bytes())?;
        }
        Ok(())
    }
}
