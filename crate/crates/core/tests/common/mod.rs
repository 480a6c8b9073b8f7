#![allow(dead_code)]

use std::sync::OnceLock;

use doublephase::{build_rect_mesh, DiscreteFunction, Model, ProblemData};

pub fn preset_model(n: usize, lambda: f64) -> Model {
    Model::new(
        build_rect_mesh(n, n, [0.0, 0.0, 1.0, 1.0]).unwrap(),
        ProblemData::preset(lambda),
    )
    .unwrap()
}

pub fn coarse() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| preset_model(4, 0.1))
}

pub fn fine() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| preset_model(16, 0.1))
}

/// `values` cycled or truncated to the node count.
pub fn fit(model: &Model, values: &[f64]) -> DiscreteFunction {
    let n = model.node_count();
    DiscreteFunction::new(values.iter().copied().cycle().take(n).collect())
}

pub const PRESET_TOML: &str = r#"p = 1.5
q = 1.8
kappa = 0.5
q1 = 4
lambda = 0.1
mu = "x"
alpha = "1"
beta = "1"
zeta = "1"
"#;
