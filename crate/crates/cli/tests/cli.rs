use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cone_ot_cli::artifacts::{RunManifest, Status, LOCK};
use cone_ot_cli::{parse_config, template};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cone-ot"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cone_ot(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cone_ot(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_config_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"source\": {\"dim\": 2\n  \"target\": 1\n}\n").unwrap();
    let o = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&template(2).canonical_json()).unwrap();
    cfg["solver"]["mesh_size"] = 9.into();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let o = run_config(&path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("solver") && err.contains("mesh_size"), "{err}");
}

#[test]
fn invalid_values_are_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = template(2);
    cfg.verify.thresholds.pushforward_tv = -1.0;
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.canonical_json()).unwrap();
    let o = run_config(&path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("verify.thresholds.pushforward_tv"));
}

#[test]
fn template_parses_back() {
    let o = cone_ot(&["template", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = parse_config(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, template(3));
    assert_eq!(cone_ot(&["template", "--dim", "4"]).status.code(), Some(2));
}

#[test]
fn non_oblique_pair_exits_with_hypothesis_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_config(&configs().join("non_oblique.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.outcome.status, Status::Failed);
    assert_eq!(m.outcome.exit_code, 3);
}

#[test]
fn partial_mode_needs_beta_above_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("partial_slab.json")).unwrap();
    let mut cfg = parse_config(&text).unwrap();
    cfg.target_density.degree = cfg.source_density.degree;
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.canonical_json()).unwrap();
    let o = run_config(&path, &dir.path().join("out"), &["--mesh", "9"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
}

#[test]
fn iteration_cap_exits_with_no_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_config(&configs().join("identity.json"), &out, &["--mesh", "9", "--max-iters", "2"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.outcome.status, Status::NotConverged);
    assert!(out.join("solution/v.csv").exists());
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(LOCK), "1\n").unwrap();
    let o = run_config(&configs().join("identity.json"), &out, &["--mesh", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("locked"));
    assert!(out.join(LOCK).exists());
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn runs_are_deterministic_and_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = configs().join("identity.json");
    for out in [&a, &b] {
        let o = run_config(&cfg, out, &["--mesh", "9", "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (ma, mb) = (RunManifest::read(&a).unwrap(), RunManifest::read(&b).unwrap());
    assert_eq!(ma.mesh, 9);
    assert_eq!(ma.config.verify.transport.seed, 7);
    assert_eq!(ma.without_timestamps(), mb.without_timestamps());
    assert!(!ma.files.is_empty());
    for f in &ma.files {
        assert_eq!(std::fs::read(a.join(&f.path)).unwrap(), std::fs::read(b.join(&f.path)).unwrap(), "{}", f.path);
    }

    let o = cone_ot(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["sup_abs"].as_f64(), Some(0.0));
    assert_eq!(rep["scale"].as_f64(), Some(1.0));

    let o = cone_ot(&["compare", a.to_str().unwrap(), "--oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["sup_rel"].as_f64().unwrap() < 2e-2, "{rep}");
}

#[test]
fn runs_with_different_geometry_do_not_compare() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_config(&configs().join("identity.json"), &a, &["--mesh", "9"]).status.code(), Some(0));
    assert_eq!(run_config(&configs().join("interval_beta1.json"), &b, &["--mesh", "17"]).status.code(), Some(0));
    let o = cone_ot(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
