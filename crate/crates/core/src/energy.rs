//! The energy functional Θ_λ, the operator A and the weak-form residual.

use serde::Serialize;
use thiserror::Error;

use crate::mesh::triangle_gradient;
use crate::model::Model;
use crate::space::{modular_breakdown, DiscreteFunction, ModularBreakdown};

/// Default floor for the singular term in [`energy_gradient`].
pub const DEFAULT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("u must be strictly positive at every node, found u[{node}] = {value}")]
    NonPositive { node: usize, value: f64 },
}

/// The five signed terms of Θ_λ.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyParts {
    /// (1/p)‖u‖_{1,p}^p
    pub kinetic_p: f64,
    /// (1/q)‖∇u‖_{q,μ}^q
    pub kinetic_q_mu: f64,
    /// (1/p_*)‖u‖_{p_*,β,∂Ω}^{p_*}
    pub boundary: f64,
    /// −(1/(1−κ))∫ζ|u|^{1−κ}
    pub singular: f64,
    /// −(λ/q1)‖u‖_{q1}^{q1}
    pub superlinear: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue {
    pub total: f64,
    pub parts: EnergyParts,
}

/// Θ_λ from precomputed integrals.
pub fn energy_from_breakdown(model: &Model, b: &ModularBreakdown, lambda: f64) -> EnergyValue {
    let e = model.exponents();
    let parts = EnergyParts {
        kinetic_p: (b.grad_p + b.mass_p_alpha) / e.p,
        kinetic_q_mu: b.grad_q_mu / e.q,
        boundary: b.bdry_pstar_beta / e.p_lower_star,
        singular: -b.zeta_sing / (1.0 - e.kappa),
        superlinear: -lambda * b.mass_q1 / e.q1,
    };
    let total =
        parts.kinetic_p + parts.kinetic_q_mu + parts.boundary + parts.singular + parts.superlinear;
    EnergyValue { total, parts }
}

pub fn energy(model: &Model, u: &DiscreteFunction, lambda: f64) -> EnergyValue {
    energy_from_breakdown(model, &modular_breakdown(model, u), lambda)
}

/// `⟨A(u), e_i⟩` for every hat function `e_i`.
pub fn operator_a_vector(model: &Model, u: &DiscreteFunction) -> Vec<f64> {
    let e = model.exponents();
    let mesh = model.mesh();
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for (t, &mu) in mesh.triangles().iter().zip(model.mu_on_triangles()) {
        let g = triangle_gradient(t, v);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if norm == 0.0 {
            continue;
        }
        let w = t.area * (norm.powf(e.p - 2.0) + mu * norm.powf(e.q - 2.0));
        for (k, &node) in t.vertices.iter().enumerate() {
            let bg = t.basis_gradients[k];
            out[node] += w * (g[0] * bg[0] + g[1] * bg[1]);
        }
    }
    let m = mesh.node_weights();
    let s = mesh.boundary_weights();
    for (i, &ui) in v.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        let a = ui.abs();
        out[i] += m[i] * model.alpha()[i] * a.powf(e.p - 2.0) * ui;
        if s[i] > 0.0 {
            out[i] += s[i] * model.beta()[i] * a.powf(e.p_lower_star - 2.0) * ui;
        }
    }
    out
}

/// `⟨A(u), h⟩`.
pub fn apply_operator_a(model: &Model, u: &DiscreteFunction, h: &DiscreteFunction) -> f64 {
    operator_a_vector(model, u)
        .iter()
        .zip(h.values())
        .map(|(a, b)| a * b)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyGradient {
    pub values: Vec<f64>,
    /// Nodes where `|u_i| ≤ floor` and the singular derivative was clipped.
    pub floored: Vec<usize>,
}

impl EnergyGradient {
    pub fn floor_active(&self) -> bool {
        !self.floored.is_empty()
    }
}

/// Nodal partial derivatives of the discrete Θ_λ. The singular derivative
/// uses `max(|u_i|, floor)^{−κ}`.
pub fn energy_gradient(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    floor: f64,
) -> EnergyGradient {
    let e = model.exponents();
    let m = model.mesh().node_weights();
    let mut values = operator_a_vector(model, u);
    let mut floored = Vec::new();
    for (i, &ui) in u.values().iter().enumerate() {
        let a = ui.abs();
        let sign = if ui < 0.0 { -1.0 } else { 1.0 };
        let base = if a <= floor {
            floored.push(i);
            floor
        } else {
            a
        };
        values[i] -= m[i] * model.zeta()[i] * sign * base.powf(-e.kappa);
        if a > 0.0 {
            values[i] -= lambda * m[i] * a.powf(e.q1 - 2.0) * ui;
        }
    }
    EnergyGradient { values, floored }
}

/// Per-term split of the weak-form defect at one hat function.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DefectTerms {
    /// ⟨A(u), e_i⟩
    pub operator: f64,
    /// ∫ζ u^{−κ} e_i
    pub singular: f64,
    /// λ∫u^{q1−1} e_i
    pub superlinear: f64,
}

impl DefectTerms {
    pub fn defect(&self) -> f64 {
        self.operator - self.singular - self.superlinear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `max_i |defect_i| / ‖e_i‖_{1,p}`
    pub residual_norm: f64,
    pub worst_node: usize,
    pub worst_terms: DefectTerms,
    /// Normalized defect at every node.
    #[serde(skip)]
    pub normalized_defects: Vec<f64>,
}

fn defect_terms(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
) -> Result<Vec<DefectTerms>, EnergyError> {
    if let Some((node, &value)) = u.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(EnergyError::NonPositive { node, value });
    }
    let e = model.exponents();
    let m = model.mesh().node_weights();
    let ops = operator_a_vector(model, u);
    Ok(u.values()
        .iter()
        .enumerate()
        .map(|(i, &ui)| DefectTerms {
            operator: ops[i],
            singular: m[i] * model.zeta()[i] * ui.powf(-e.kappa),
            superlinear: lambda * m[i] * ui.powf(e.q1 - 1.0),
        })
        .collect())
}

/// `⟨A(u), h⟩ − ∫ζ u^{−κ} h − λ∫u^{q1−1} h` for a single test function.
pub fn weak_defect(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    h: &DiscreteFunction,
) -> Result<f64, EnergyError> {
    Ok(defect_terms(model, u, lambda)?
        .iter()
        .zip(h.values())
        .map(|(t, hi)| t.defect() * hi)
        .sum())
}

/// Worst normalized defect of the weak formulation over all hat functions.
pub fn weak_residual(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
) -> Result<ResidualReport, EnergyError> {
    let terms = defect_terms(model, u, lambda)?;
    let normalized_defects: Vec<f64> = terms
        .iter()
        .zip(model.hat_norms())
        .map(|(t, n)| t.defect().abs() / n)
        .collect();
    let (worst_node, residual_norm) =
        normalized_defects
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, 0.0),
                |best, (i, d)| if d > best.1 { (i, d) } else { best },
            );
    Ok(ResidualReport {
        residual_norm,
        worst_node,
        worst_terms: terms[worst_node],
        normalized_defects,
    })
}

/// Lower bound for Θ_λ on the Nehari set: substituting the Nehari identity
/// for `λ‖u‖_{q1}^{q1}` gives Θ_λ(u) ≥ c1 ρ(u) − c2 ∫ζ|u|^{1−κ} with
/// `c1 = min{1/p, 1/q, 1/p_*} − 1/q1`, `c2 = 1/(1−κ) − 1/q1`.
pub fn nehari_energy_lower_bound(model: &Model, b: &ModularBreakdown) -> f64 {
    let e = model.exponents();
    let c1 = (1.0 / e.p).min(1.0 / e.q).min(1.0 / e.p_lower_star) - 1.0 / e.q1;
    let c2 = 1.0 / (1.0 - e.kappa) - 1.0 / e.q1;
    c1 * b.rho() - c2 * b.zeta_sing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::problem::ProblemData;

    fn model(n: usize, lambda: f64) -> Model {
        Model::new(
            build_rect_mesh(n, n, [0.0, 0.0, 1.0, 1.0]).unwrap(),
            ProblemData::preset(lambda),
        )
        .unwrap()
    }

    fn bumpy(m: &Model) -> DiscreteFunction {
        DiscreteFunction::from_fn(m.mesh(), |x, y| {
            0.3 + x * x + 0.5 * (4.0 * y + x).sin().abs()
        })
    }

    #[test]
    fn constant_one() {
        let m = model(4, 1.0);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        let v = energy(&m, &one, 1.0);
        assert!((v.total + 0.25).abs() < 1e-13, "{}", v.total);
        let s = v.parts;
        let sum = s.kinetic_p + s.kinetic_q_mu + s.boundary + s.singular + s.superlinear;
        assert_eq!(sum, v.total);
        assert_eq!(
            energy(&m, &DiscreteFunction::zeros(m.mesh()), 1.0).total,
            0.0
        );
    }

    #[test]
    fn operator_on_constants() {
        let m = model(4, 1.0);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        assert!((apply_operator_a(&m, &one, &one) - 5.0).abs() < 1e-12);
        let z = DiscreteFunction::zeros(m.mesh());
        assert_eq!(apply_operator_a(&m, &z, &bumpy(&m)), 0.0);
    }

    #[test]
    fn gradient_unfolds_definition_at_one() {
        let m = model(4, 4.0);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        let g = energy_gradient(&m, &one, 4.0, DEFAULT_FLOOR);
        let a = operator_a_vector(&m, &one);
        for i in 0..m.node_count() {
            let w = m.mesh().node_weights()[i];
            let expect = a[i] - w - 4.0 * w;
            assert!((g.values[i] - expect).abs() <= 1e-12);
        }
        assert!(!g.floor_active());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(3, 2.0);
        let u = bumpy(&m);
        let g = energy_gradient(&m, &u, 2.0, DEFAULT_FLOOR);
        let h = 1e-6;
        for i in 0..m.node_count() {
            let mut up = u.clone();
            up.values_mut()[i] += h;
            let mut dn = u.clone();
            dn.values_mut()[i] -= h;
            let fd = (energy(&m, &up, 2.0).total - energy(&m, &dn, 2.0).total) / (2.0 * h);
            let scale = g.values[i].abs().max(1e-3);
            assert!(
                (fd - g.values[i]).abs() <= 1e-6 * scale,
                "node {i}: {fd} vs {}",
                g.values[i]
            );
        }
    }

    #[test]
    fn floor_flags_zero_node() {
        let m = model(3, 1.0);
        let mut u = bumpy(&m);
        u.values_mut()[5] = 0.0;
        let g = energy_gradient(&m, &u, 1.0, DEFAULT_FLOOR);
        assert!(g.values.iter().all(|v| v.is_finite()));
        assert_eq!(g.floored, vec![5]);
    }

    #[test]
    fn residual_at_one() {
        let m = model(4, 4.0);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        // defect against h ≡ 1 is ψ'(1) = 4 − λ
        assert!(weak_defect(&m, &one, 4.0, &one).unwrap().abs() < 1e-12);
        let r = weak_residual(&m, &one, 4.0).unwrap();
        assert!(r.residual_norm > 0.0);
        assert!(
            (r.worst_terms.defect().abs() / m.hat_norms()[r.worst_node] - r.residual_norm).abs()
                < 1e-15
        );
        let mut u = one.clone();
        u.values_mut()[3] = 0.0;
        assert_eq!(
            weak_residual(&m, &u, 4.0),
            Err(EnergyError::NonPositive {
                node: 3,
                value: 0.0
            })
        );
    }
}
