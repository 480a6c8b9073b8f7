//! Command dispatch for the `doublephase` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::coeff_expr::CoefficientField;
use crate::config::{load_config, Config};
use crate::fibering::{
    eta, eta_tilde, fiber_roots, fiber_terms, psi_derivatives, t_tilde_circ, FiberError,
    FiberRoots, FiberTerms, TildeCirc,
};
use crate::model::Model;
use crate::problem::{validate_hypotheses, SamplePoints};
use crate::props::run_properties;
use crate::solver::{solve_two, SolveResult};
use crate::space::{norm_1p, norm_circ, norm_custom, norm_star, DiscreteFunction};
use crate::sweep::run_sweep;

// stdout writes that tolerate a closed pipe
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "doublephase",
    version,
    about = "Nehari-manifold solver for singular double phase Neumann problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file
    #[arg(short, long)]
    config: PathBuf,
    /// Directory for CSV/JSON outputs
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the hypotheses on the parameters and coefficients
    Validate(Common),
    /// Print the four norms of a function given as an expression in x, y
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value = "1")]
        function: String,
    },
    /// Write the fiber maps of a direction to fiber.csv
    Fiber {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value = "1")]
        function: String,
    },
    /// Compute both solutions and write solution CSVs plus a JSON report
    Solve(Common),
    /// Estimate the lambda thresholds and the Sobolev constant
    Sweep(Common),
    /// Run the built-in property suites
    Props {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value_t = 200)]
        samples: usize,
    },
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("{msg}");
            EXIT_FAILURE
        }
    }
}

fn setup(common: &Common) -> Result<(Config, Model), Failure> {
    let config = load_config(&common.config)?;
    let model = config.build_model()?;
    let report = validate_hypotheses(model.data(), &SamplePoints::from_mesh(model.mesh()));
    if !report.ok {
        out!("{}", to_json(&report));
        return Err(Failure::Failed("hypotheses violated".into()));
    }
    Ok((config, model))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn interpolate(model: &Model, function: &str) -> Result<DiscreteFunction, Failure> {
    let f = CoefficientField::parse(function)
        .map_err(|e| Failure::Usage(format!("--function: {e}")))?;
    let mut values = Vec::with_capacity(model.node_count());
    for &[x, y] in model.mesh().nodes() {
        values.push(
            f.eval(x, y)
                .map_err(|e| Failure::Usage(format!("--function at ({x}, {y}): {e}")))?,
        );
    }
    Ok(DiscreteFunction::new(values))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(common) => {
            let config = load_config(&common.config)?;
            let mesh = config.build_mesh()?;
            let report = validate_hypotheses(&config.problem, &SamplePoints::from_mesh(&mesh));
            out!("{}", to_json(&report));
            if report.ok {
                Ok(())
            } else {
                Err(Failure::Failed(format!(
                    "{} violation(s)",
                    report.violations.len()
                )))
            }
        }
        Command::Norms { common, function } => {
            let (_, model) = setup(&common)?;
            let u = interpolate(&model, &function)?;
            #[derive(Serialize)]
            struct Norms {
                norm_custom: f64,
                norm_1p: f64,
                norm_circ: f64,
                norm_star: f64,
            }
            let norms = Norms {
                norm_custom: norm_custom(&model, &u)?,
                norm_1p: norm_1p(&model, &u),
                norm_circ: norm_circ(&model, &u)?,
                norm_star: norm_star(&model, &u)?,
            };
            out!("{}", to_json(&norms));
            Ok(())
        }
        Command::Fiber { common, function } => {
            let (config, model) = setup(&common)?;
            let u = interpolate(&model, &function)?;
            let lambda = model.data().lambda;
            let ft = fiber_terms(&model, &u);
            write_file(
                &common.out,
                "fiber.csv",
                &fiber_csv(&ft, lambda, &config.fiber.values())?,
            )?;
            #[derive(Serialize)]
            struct FiberSummary {
                terms: FiberTerms,
                lambda: f64,
                roots: Option<FiberRoots>,
                tilde: Option<TildeCirc>,
            }
            let summary = FiberSummary {
                terms: ft,
                lambda,
                roots: fiber_roots(&ft, lambda).ok(),
                tilde: t_tilde_circ(&ft).ok(),
            };
            out!("{}", to_json(&summary));
            Ok(())
        }
        Command::Solve(common) => {
            let (config, model) = setup(&common)?;
            let two = solve_two(&model, &config.solver);
            for report in [&two.plus, &two.minus] {
                if let Some(best) = &report.best {
                    write_file(
                        &common.out,
                        &format!("solution_{}.csv", report.branch),
                        &solution_csv(&model, best),
                    )?;
                }
            }
            write_file(&common.out, "solve_report.json", &(to_json(&two) + "\n"))?;
            for report in [&two.plus, &two.minus] {
                match &report.best {
                    Some(b) => out!(
                        "{}: energy {} residual {:e} min {} converged {}",
                        report.branch,
                        b.energy,
                        b.residual.residual_norm,
                        b.min_value,
                        b.converged
                    ),
                    None => out!("{}: no result", report.branch),
                }
            }
            if two.sign_pattern_ok && two.positive {
                Ok(())
            } else {
                Err(Failure::Failed(
                    "solve did not produce two converged solutions with energies (-, +)".into(),
                ))
            }
        }
        Command::Sweep(common) => {
            let (config, model) = setup(&common)?;
            let report = run_sweep(&model, &config.sweep, &config.solver)?;
            write_file(&common.out, "sweep_report.json", &(to_json(&report) + "\n"))?;
            let mut csv = String::from("index,a,b,c,d,e,tilde_ratio,tangency_lambda\n");
            for s in &report.per_sample {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    s.index,
                    s.a,
                    s.b,
                    s.c,
                    s.d,
                    s.e,
                    opt(s.tilde_ratio),
                    opt(s.tangency_lambda)
                );
            }
            write_file(&common.out, "sweep_samples.csv", &csv)?;
            out!(
                "lambda_tilde_est {} lambda_star_est {} sobolev_S_est {}",
                report.lambda_tilde_est,
                report
                    .lambda_star_est
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "undetermined".into()),
                report.sobolev_s_est
            );
            Ok(())
        }
        Command::Props { common, samples } => {
            let (config, model) = setup(&common)?;
            let outcomes = run_properties(&model, config.solver.seed, samples);
            let mut failed = 0;
            for o in &outcomes {
                let status = if o.passed() { "PASS" } else { "FAIL" };
                out!(
                    "{status} {} checks={} failures={}",
                    o.name,
                    o.checks,
                    o.failures
                );
                if let Some(f) = &o.first_failure {
                    out!("    first failure: {f}");
                }
                if !o.passed() {
                    failed += 1;
                }
            }
            out!(
                "{} of {} suites passed",
                outcomes.len() - failed,
                outcomes.len()
            );
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Failed(format!(
                    "{failed} property suite(s) failed"
                )))
            }
        }
    }
}

/// `t,psi,dpsi,ddpsi,eta,eta_tilde` over the grid.
pub fn fiber_csv(ft: &FiberTerms, lambda: f64, grid: &[f64]) -> Result<String, FiberError> {
    let mut out = String::from("t,psi,dpsi,ddpsi,eta,eta_tilde\n");
    for &t in grid {
        let (psi, d1, d2) = psi_derivatives(ft, lambda, t)?;
        let _ = writeln!(
            out,
            "{t},{psi},{d1},{d2},{},{}",
            eta(ft, t)?,
            eta_tilde(ft, t)?
        );
    }
    Ok(out)
}

/// `node,x,y,value` for every mesh node.
pub fn solution_csv(model: &Model, result: &SolveResult) -> String {
    let mut out = String::from("node,x,y,value\n");
    for (i, (&[x, y], v)) in model
        .mesh()
        .nodes()
        .iter()
        .zip(result.u.values())
        .enumerate()
    {
        let _ = writeln!(out, "{i},{x},{y},{v}");
    }
    out
}
