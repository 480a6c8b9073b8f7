//! Run configuration: a TOML file with the problem parameters at the top
//! level and optional `mesh`, `solver`, `sweep` and `fiber` sections.
//!
//! ```toml
//! p = 1.5
//! q = 1.8
//! kappa = 0.5
//! q1 = 4
//! lambda = 0.1
//! mu = "x"
//!
//! [mesh]
//! nx = 16
//! ny = 16
//! ```
//!
//! Dotted keys (`mesh.nx = 16`) work as well. Unknown keys are errors.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::coeff_expr::{CoefficientField, ParseError};
use crate::mesh::{build_rect_mesh, Mesh, MeshError};
use crate::model::Model;
use crate::problem::{ProblemData, ProblemError};
use crate::solver::SolveOptions;
use crate::sweep::SweepOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(String),
    #[error("coefficient `{key}`: {source}")]
    Expression {
        key: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: &'static str, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn default_dimension() -> usize {
    2
}

fn zero() -> String {
    "0".into()
}

fn one() -> String {
    "1".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    p: f64,
    q: f64,
    kappa: f64,
    q1: f64,
    lambda: f64,
    #[serde(default = "default_dimension")]
    dimension: usize,
    #[serde(default = "zero")]
    mu: String,
    #[serde(default = "one")]
    alpha: String,
    #[serde(default = "one")]
    beta: String,
    #[serde(default = "one")]
    zeta: String,
    #[serde(default)]
    mesh: MeshConfig,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    fiber: FiberGrid,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, y0, x1, y1]`
    pub rect: [f64; 4],
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            nx: 16,
            ny: 16,
            rect: [0.0, 0.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    energy_tol: f64,
    stall: usize,
    max_iter: usize,
    residual_tol: f64,
    floor: f64,
    seed: u64,
    newton_max_iter: usize,
}

impl Default for RawSolver {
    fn default() -> Self {
        let d = SolveOptions::default();
        RawSolver {
            energy_tol: d.energy_tol,
            stall: d.stall,
            max_iter: d.max_iter,
            residual_tol: d.residual_tol,
            floor: d.floor,
            seed: d.seed,
            newton_max_iter: d.newton_max_iter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    samples: usize,
    lambda_grid: Vec<f64>,
    polish_iters: usize,
}

impl Default for RawSweep {
    fn default() -> Self {
        let d = SweepOptions::default();
        RawSweep {
            samples: d.samples,
            lambda_grid: d.lambda_grid,
            polish_iters: d.polish_iters,
        }
    }
}

/// Log-spaced grid for the `fiber` command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for FiberGrid {
    fn default() -> Self {
        FiberGrid {
            t_min: 1e-2,
            t_max: 1e2,
            points: 201,
        }
    }
}

impl FiberGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.t_min];
        }
        let (lo, hi) = (self.t_min.ln(), self.t_max.ln());
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| match k {
                0 => self.t_min,
                k if k + 1 == self.points => self.t_max,
                k => (lo + (hi - lo) * k as f64 / n).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub problem: ProblemData,
    pub mesh: MeshConfig,
    pub solver: SolveOptions,
    pub sweep: SweepOptions,
    pub fiber: FiberGrid,
}

fn field(key: &'static str, src: &str) -> Result<CoefficientField, ConfigError> {
    CoefficientField::parse(src).map_err(|source| ConfigError::Expression { key, source })
}

fn check(cond: bool, key: &'static str, message: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Value {
            key,
            message: message.to_string(),
        })
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
        let problem = ProblemData::new(
            raw.p,
            raw.q,
            raw.dimension,
            raw.kappa,
            raw.q1,
            raw.lambda,
            field("mu", &raw.mu)?,
            field("alpha", &raw.alpha)?,
            field("beta", &raw.beta)?,
            field("zeta", &raw.zeta)?,
        );
        let s = raw.solver;
        check(s.stall > 0, "solver.stall", "must be positive")?;
        check(s.floor >= 0.0, "solver.floor", "must be nonnegative")?;
        check(
            s.residual_tol > 0.0,
            "solver.residual_tol",
            "must be positive",
        )?;
        let w = raw.sweep;
        check(w.samples > 0, "sweep.samples", "must be positive")?;
        let f = raw.fiber;
        check(
            f.t_min > 0.0 && f.t_max >= f.t_min && f.points > 0,
            "fiber",
            "need 0 < t_min <= t_max and points > 0",
        )?;
        Ok(Config {
            problem,
            mesh: raw.mesh,
            solver: SolveOptions {
                energy_tol: s.energy_tol,
                stall: s.stall,
                max_iter: s.max_iter,
                residual_tol: s.residual_tol,
                floor: s.floor,
                seed: s.seed,
                newton_max_iter: s.newton_max_iter,
            },
            sweep: SweepOptions {
                samples: w.samples,
                lambda_grid: w.lambda_grid,
                polish_iters: w.polish_iters,
            },
            fiber: f,
        })
    }

    pub fn build_mesh(&self) -> Result<Mesh, ConfigError> {
        Ok(build_rect_mesh(self.mesh.nx, self.mesh.ny, self.mesh.rect)?)
    }

    pub fn build_model(&self) -> Result<Model, ConfigError> {
        Ok(Model::new(self.build_mesh()?, self.problem.clone())?)
    }
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Config::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRESET: &str = r#"
# reference problem
p = 1.5
q = 1.8
kappa = 0.5
q1 = 4
lambda = 0.1
mu = "x"
alpha = "1"
beta = "1"
zeta = "1"
"#;

    #[test]
    fn preset_round_trip() {
        let c = Config::parse(PRESET).unwrap();
        let d = ProblemData::preset(0.1);
        assert_eq!(
            (c.problem.p, c.problem.q, c.problem.kappa, c.problem.q1),
            (d.p, d.q, d.kappa, d.q1)
        );
        assert_eq!(c.problem.mu.source(), "x");
        assert_eq!((c.problem.p_star, c.problem.p_lower_star), (6.0, 3.0));
        assert_eq!(c.mesh, MeshConfig::default());
        assert_eq!(c.solver, SolveOptions::default());
    }

    #[test]
    fn sections_and_dotted_keys() {
        let c = Config::parse(&format!("{PRESET}mesh.nx = 4\n[solver]\nseed = 7\n")).unwrap();
        assert_eq!(c.mesh.nx, 4);
        assert_eq!(c.mesh.ny, 16);
        assert_eq!(c.solver.seed, 7);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = PRESET.replace("q1 = 4", "q1 = 4\nqq1 = 4");
        let err = Config::parse(&text).unwrap_err().to_string();
        assert!(err.contains("qq1"), "{err}");
        let err = Config::parse(&format!("{PRESET}[mesh]\nnz = 3\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("nz"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let err = Config::parse(&PRESET.replace("lambda = 0.1", ""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn expression_error_has_offset() {
        match Config::parse(&PRESET.replace("mu = \"x\"", "mu = \"x +\"")) {
            Err(ConfigError::Expression { key: "mu", source }) => assert_eq!(source.offset(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fiber_grid_endpoints() {
        let g = FiberGrid::default().values();
        assert_eq!(g.len(), 201);
        assert_eq!((g[0], g[200]), (1e-2, 1e2));
        assert!((g[100] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
