use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cone_ot::minimizer::Mode;
use cone_ot_cli::{compare_oracle, compare_runs, run, template, CliError, Overrides};

#[derive(Parser)]
#[command(name = "cone-ot", version, about = "Homogeneous optimal transport between convex cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strong,
    Partial,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, lift and verify one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        mesh: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two run directories, or one run with the reference solution.
    Compare {
        a: PathBuf,
        b: Option<PathBuf>,
        /// Compare `a` with the closed-form or shooting reference.
        #[arg(long, conflicts_with = "b")]
        oracle: bool,
    },
    /// Print the identity configuration with all defaults.
    Template {
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

/// Prints to stdout, ignoring a closed pipe.
fn print_out(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, mode, mesh, max_iters, tol, seed } => {
            let mode = mode.map(|m| match m {
                ModeArg::Strong => Mode::Strong,
                ModeArg::Partial => Mode::Partial,
            });
            let ov = Overrides { mode, mesh, max_iters, tol, seed };
            match run(&config, &ov, &out) {
                Ok(o) => {
                    let oc = &o.manifest.outcome;
                    match &oc.message {
                        Some(m) => eprintln!("{:?}: {m}", oc.status),
                        None => eprintln!("{:?} after {} iterations; thresholds passed: {:?}", oc.status, oc.iterations.unwrap_or(0), oc.thresholds_passed),
                    }
                    print_out(&o.dir.display().to_string());
                    ExitCode::from(o.exit_code)
                }
                Err(e) => fail(e),
            }
        }
        Command::Compare { a, b, oracle } => {
            let rep = match (b, oracle) {
                (Some(b), false) => compare_runs(&a, &b),
                (None, true) => compare_oracle(&a),
                _ => {
                    eprintln!("error: give a second run or --oracle");
                    return ExitCode::from(2);
                }
            };
            match rep {
                Ok(r) => {
                    print_out(&serde_json::to_string_pretty(&r).expect("report serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Template { dim } => {
            if !(1..=3).contains(&dim) {
                eprintln!("error: dim must lie in 1..=3");
                return ExitCode::from(2);
            }
            print_out(&template(dim).canonical_json());
            ExitCode::SUCCESS
        }
    }
}
