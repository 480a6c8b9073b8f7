//! Discretization and Nehari-manifold solver for a singular double phase
//! Neumann problem with critical boundary growth.
//!
//! The modules build on each other: [`coeff_expr`] parses coefficient
//! fields, [`problem`] holds parameters and checks the hypotheses, [`mesh`]
//! triangulates the rectangle, [`space`] evaluates modulars and norms,
//! [`energy`] the functional and its weak residual, [`fibering`] the scalar
//! fiber maps, and [`solver`] / [`sweep`] run the computations.

pub mod cli;
pub mod coeff_expr;
pub mod config;
pub mod energy;
pub mod fibering;
pub mod mesh;
pub mod model;
pub mod problem;
pub mod props;
pub mod roots;
pub mod solver;
pub mod space;
pub mod sweep;

pub use coeff_expr::CoefficientField;
pub use config::{load_config, Config};
pub use mesh::{build_rect_mesh, Mesh};
pub use model::Model;
pub use problem::ProblemData;
pub use solver::{solve_two, Branch, SolveOptions, SolveResult};
pub use space::DiscreteFunction;
