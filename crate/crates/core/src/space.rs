//! Function-space layer: discrete functions, the modulars of the double
//! phase Sobolev space and the Luxemburg-type norms built from them.

use serde::Serialize;
use thiserror::Error;

use crate::coeff_expr::CoefficientField;
use crate::mesh::{triangle_gradient, Mesh};
use crate::model::Model;
use crate::roots::{expand_bracket, hybrid_root, RootError};

/// Residual tolerance on `ρ(u/τ) = 1` for every Luxemburg norm.
pub const LUXEMBURG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("Luxemburg norm root search failed: {0}")]
    Root(#[from] RootError),
    #[error("invalid seminorm weights: {0}")]
    Seminorm(String),
}

/// Nodal values of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DiscreteFunction {
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(values: Vec<f64>) -> Self {
        DiscreteFunction { values }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        DiscreteFunction::new(vec![c; mesh.node_count()])
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        DiscreteFunction::constant(mesh, 0.0)
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        DiscreteFunction::new(mesh.nodes().iter().map(|p| f(p[0], p[1])).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        DiscreteFunction::new(self.values.iter().map(|v| v * s).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for DiscreteFunction {
    fn from(values: Vec<f64>) -> Self {
        DiscreteFunction::new(values)
    }
}

/// The six discrete integrals out of which ρ, Θ_λ and the fiber maps are built.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ModularBreakdown {
    /// ∫ |∇u|^p
    pub grad_p: f64,
    /// ∫ μ |∇u|^q
    pub grad_q_mu: f64,
    /// ∫ α |u|^p
    pub mass_p_alpha: f64,
    /// ∫_∂Ω β |u|^{p_*}
    pub bdry_pstar_beta: f64,
    /// ∫ ζ |u|^{1-κ}
    pub zeta_sing: f64,
    /// ∫ |u|^{q1}
    pub mass_q1: f64,
}

impl ModularBreakdown {
    /// ρ(u), the modular of the norm ‖·‖.
    pub fn rho(&self) -> f64 {
        self.grad_p + self.grad_q_mu + self.mass_p_alpha + self.bdry_pstar_beta
    }
}

pub fn modular_breakdown(model: &Model, u: &DiscreteFunction) -> ModularBreakdown {
    let e = model.exponents();
    let mesh = model.mesh();
    let v = u.values();
    let mut out = ModularBreakdown::default();
    for (t, &mu) in mesh.triangles().iter().zip(model.mu_on_triangles()) {
        let [gx, gy] = triangle_gradient(t, v);
        let g = (gx * gx + gy * gy).sqrt();
        if g > 0.0 {
            out.grad_p += t.area * g.powf(e.p);
            out.grad_q_mu += t.area * mu * g.powf(e.q);
        }
    }
    let m = mesh.node_weights();
    let s = mesh.boundary_weights();
    for i in 0..v.len() {
        let a = v[i].abs();
        if a == 0.0 {
            continue;
        }
        out.mass_p_alpha += m[i] * model.alpha()[i] * a.powf(e.p);
        if s[i] > 0.0 {
            out.bdry_pstar_beta += s[i] * model.beta()[i] * a.powf(e.p_lower_star);
        }
        out.zeta_sing += m[i] * model.zeta()[i] * a.powf(1.0 - e.kappa);
        out.mass_q1 += m[i] * a.powf(e.q1);
    }
    out
}

/// Σ_k w_k (|f_k|^p + μ_k |f_k|^q), the discrete form of ρ_H.
pub fn modular_h(weights: &[f64], magnitudes: &[f64], mu: &[f64], p: f64, q: f64) -> f64 {
    weights
        .iter()
        .zip(magnitudes)
        .zip(mu)
        .map(|((w, f), m)| {
            let a = f.abs();
            if a == 0.0 {
                0.0
            } else {
                w * (a.powf(p) + m * a.powf(q))
            }
        })
        .sum()
}

/// ρ_H(|∇u|): one-point centroid rule per triangle.
pub fn gradient_modular_h(model: &Model, u: &DiscreteFunction) -> f64 {
    let mesh = model.mesh();
    let weights: Vec<f64> = mesh.triangles().iter().map(|t| t.area).collect();
    let mags: Vec<f64> = mesh
        .gradients(u.values())
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
        .collect();
    modular_h(
        &weights,
        &mags,
        model.mu_on_triangles(),
        model.data().p,
        model.data().q,
    )
}

/// ρ_H(u): lumped nodal rule.
pub fn nodal_modular_h(model: &Model, u: &DiscreteFunction) -> f64 {
    modular_h(
        model.mesh().node_weights(),
        u.values(),
        model.mu_on_nodes(),
        model.data().p,
        model.data().q,
    )
}

/// `τ ↦ Σ c_k τ^{-r_k}`: every modular here is a sum of homogeneous terms,
/// so `ρ(u/τ)` is known in closed form once the integrals of `u` are.
#[derive(Debug, Clone, Default)]
pub struct PowerSum {
    terms: Vec<(f64, f64)>,
}

impl PowerSum {
    pub fn new() -> Self {
        PowerSum::default()
    }

    pub fn term(mut self, coefficient: f64, exponent: f64) -> Self {
        self.terms.push((coefficient, exponent));
        self
    }

    pub fn at_scale(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|&(c, r)| c * tau.powf(-r))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }
}

/// Luxemburg norm `inf{τ > 0 : ρ(u/τ) ≤ 1}` for a strictly decreasing map
/// `τ ↦ ρ(u/τ)`. Returns 0 when the modular vanishes identically.
pub fn luxemburg_norm<F: Fn(f64) -> f64>(modular_at: F) -> Result<f64, SpaceError> {
    if modular_at(1.0) == 0.0 {
        return Ok(0.0);
    }
    let g = |tau: f64| modular_at(tau) - 1.0;
    let upward = g(1.0) > 0.0;
    let (lo, hi) = expand_bracket(g, 1.0, upward)?;
    if lo == hi {
        return Ok(lo);
    }
    Ok(hybrid_root(g, lo, hi, LUXEMBURG_TOL)?)
}

fn luxemburg_of(sum: &PowerSum) -> Result<f64, SpaceError> {
    if sum.is_zero() {
        return Ok(0.0);
    }
    luxemburg_norm(|tau| sum.at_scale(tau))
}

/// ‖u‖, the Luxemburg norm with modular ρ.
pub fn norm_custom(model: &Model, u: &DiscreteFunction) -> Result<f64, SpaceError> {
    let e = model.exponents();
    let b = modular_breakdown(model, u);
    luxemburg_of(
        &PowerSum::new()
            .term(b.grad_p, e.p)
            .term(b.grad_q_mu, e.q)
            .term(b.mass_p_alpha, e.p)
            .term(b.bdry_pstar_beta, e.p_lower_star),
    )
}

/// ‖u‖_{1,p} = (‖∇u‖_p^p + ∫ α |u|^p)^{1/p}.
pub fn norm_1p(model: &Model, u: &DiscreteFunction) -> f64 {
    let b = modular_breakdown(model, u);
    (b.grad_p + b.mass_p_alpha).powf(1.0 / model.data().p)
}

/// Weights and exponents `(r1, θ1, r2, θ2)` of the two lower-order seminorms
/// in the equivalent norms ‖·‖° and ‖·‖*.
#[derive(Debug, Clone)]
pub struct SeminormSpec {
    pub r1: f64,
    /// θ1 at the nodes.
    pub theta1: Vec<f64>,
    pub r2: f64,
    /// θ2 at the nodes, zero off the boundary.
    pub theta2: Vec<f64>,
}

impl SeminormSpec {
    /// `(r1, θ1, r2, θ2) = (p, α, p_*, β)`, the choice that makes ‖·‖* = ‖·‖.
    pub fn standard(model: &Model) -> Self {
        SeminormSpec {
            r1: model.data().p,
            theta1: model.alpha().to_vec(),
            r2: model.data().p_lower_star,
            theta2: model.beta().to_vec(),
        }
    }

    /// Samples the weights on the mesh and checks the admissibility
    /// conditions `1 ≤ r1 ≤ p*`, `1 ≤ r2 ≤ p_*`, `θ ≥ 0`, one of them nonzero.
    pub fn new(
        model: &Model,
        r1: f64,
        theta1: &CoefficientField,
        r2: f64,
        theta2: &CoefficientField,
    ) -> Result<Self, SpaceError> {
        let data = model.data();
        if !(1.0..=data.p_star).contains(&r1) {
            return Err(SpaceError::Seminorm(format!(
                "need 1 <= r1 <= p* = {}, got {r1}",
                data.p_star
            )));
        }
        if !(1.0..=data.p_lower_star).contains(&r2) {
            return Err(SpaceError::Seminorm(format!(
                "need 1 <= r2 <= p_* = {}, got {r2}",
                data.p_lower_star
            )));
        }
        let mesh = model.mesh();
        let eval = |f: &CoefficientField, i: usize| {
            let [x, y] = mesh.nodes()[i];
            f.eval(x, y)
                .map_err(|e| SpaceError::Seminorm(e.to_string()))
        };
        let theta1 = (0..mesh.node_count())
            .map(|i| eval(theta1, i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut t2 = vec![0.0; mesh.node_count()];
        for &b in mesh.boundary_nodes() {
            t2[b] = eval(theta2, b)?;
        }
        if theta1.iter().chain(&t2).any(|&v| v < 0.0) {
            return Err(SpaceError::Seminorm("weights must be nonnegative".into()));
        }
        if theta1.iter().chain(&t2).all(|&v| v == 0.0) {
            return Err(SpaceError::Seminorm("theta1 and theta2 both vanish".into()));
        }
        Ok(SeminormSpec {
            r1,
            theta1,
            r2,
            theta2: t2,
        })
    }

    /// `(∫ θ1 |u|^{r1}, ∫_∂Ω θ2 |u|^{r2})`
    fn integrals(&self, mesh: &Mesh, u: &[f64]) -> (f64, f64) {
        let m = mesh.node_weights();
        let s = mesh.boundary_weights();
        let mut interior = 0.0;
        let mut boundary = 0.0;
        for (i, &v) in u.iter().enumerate() {
            let a = v.abs();
            if a == 0.0 {
                continue;
            }
            if self.theta1[i] != 0.0 {
                interior += m[i] * self.theta1[i] * a.powf(self.r1);
            }
            if s[i] > 0.0 && self.theta2[i] != 0.0 {
                boundary += s[i] * self.theta2[i] * a.powf(self.r2);
            }
        }
        (interior, boundary)
    }
}

/// ‖u‖° = ‖∇u‖_H + ‖u‖_{r1,θ1} + ‖u‖_{r2,θ2,∂Ω}.
pub fn norm_circ_with(
    model: &Model,
    spec: &SeminormSpec,
    u: &DiscreteFunction,
) -> Result<f64, SpaceError> {
    let e = model.exponents();
    let b = modular_breakdown(model, u);
    let grad = luxemburg_of(&PowerSum::new().term(b.grad_p, e.p).term(b.grad_q_mu, e.q))?;
    let (interior, boundary) = spec.integrals(model.mesh(), u.values());
    Ok(grad + interior.powf(1.0 / spec.r1) + boundary.powf(1.0 / spec.r2))
}

/// ‖u‖*, the Luxemburg norm of the joint modular.
pub fn norm_star_with(
    model: &Model,
    spec: &SeminormSpec,
    u: &DiscreteFunction,
) -> Result<f64, SpaceError> {
    let e = model.exponents();
    let b = modular_breakdown(model, u);
    let (interior, boundary) = spec.integrals(model.mesh(), u.values());
    luxemburg_of(
        &PowerSum::new()
            .term(b.grad_p, e.p)
            .term(b.grad_q_mu, e.q)
            .term(interior, spec.r1)
            .term(boundary, spec.r2),
    )
}

pub fn norm_circ(model: &Model, u: &DiscreteFunction) -> Result<f64, SpaceError> {
    norm_circ_with(model, &SeminormSpec::standard(model), u)
}

pub fn norm_star(model: &Model, u: &DiscreteFunction) -> Result<f64, SpaceError> {
    norm_star_with(model, &SeminormSpec::standard(model), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::problem::ProblemData;

    fn model(n: usize) -> Model {
        Model::new(
            build_rect_mesh(n, n, [0.0, 0.0, 1.0, 1.0]).unwrap(),
            ProblemData::preset(1.0),
        )
        .unwrap()
    }

    #[test]
    fn nodal_modular_of_one() {
        let m = model(8);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        assert!((nodal_modular_h(&m, &one) - 1.5).abs() < 1e-10);
        assert_eq!(nodal_modular_h(&m, &DiscreteFunction::zeros(m.mesh())), 0.0);
        assert_eq!(gradient_modular_h(&m, &one), 0.0);
    }

    #[test]
    fn luxemburg_of_one() {
        // bisection/brentq oracle on τ^{-1.5} + 4τ^{-3} = 1
        let m = model(4);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        let n = norm_custom(&m, &one).unwrap();
        assert!((n - 1.8721280180071873).abs() < 1e-12, "{n}");
        assert!((norm_star(&m, &one).unwrap() - n).abs() < 1e-12);
    }

    #[test]
    fn zero_function_norms() {
        let m = model(3);
        let z = DiscreteFunction::zeros(m.mesh());
        assert_eq!(norm_custom(&m, &z).unwrap(), 0.0);
        assert_eq!(norm_circ(&m, &z).unwrap(), 0.0);
        assert_eq!(norm_star(&m, &z).unwrap(), 0.0);
        assert_eq!(norm_1p(&m, &z), 0.0);
    }

    #[test]
    fn closed_forms_for_constants() {
        let m = model(4);
        let c = DiscreteFunction::constant(m.mesh(), 2.5);
        assert!((norm_1p(&m, &c) - 2.5).abs() < 1e-13);
        let one = DiscreteFunction::constant(m.mesh(), 1.0);
        let circ = norm_circ(&m, &one).unwrap();
        assert!(
            (circ - (1.0 + 4f64.powf(1.0 / 3.0))).abs() < 1e-12,
            "{circ}"
        );

        let mut data = ProblemData::preset(1.0);
        data.alpha = CoefficientField::constant(0.5);
        let half = Model::new(m.mesh().clone(), data).unwrap();
        assert!((norm_1p(&half, &one) - 0.5f64.powf(1.0 / 1.5)).abs() < 1e-13);
    }

    #[test]
    fn rescaled_function_has_unit_norm() {
        let m = model(6);
        let u = DiscreteFunction::from_fn(m.mesh(), |x, y| 0.2 + x * x + (3.0 * y).sin().abs());
        let n = norm_custom(&m, &u).unwrap();
        let v = u.scaled(1.0 / n);
        assert!((modular_breakdown(&m, &v).rho() - 1.0).abs() < 1e-12);
        assert!((norm_custom(&m, &v).unwrap() - 1.0).abs() < 1e-10);
        assert!((norm_custom(&m, &u.scaled(-2.5)).unwrap() - 2.5 * n).abs() < 1e-10 * n);
    }

    #[test]
    fn seminorm_spec_checks() {
        let m = model(2);
        let one = CoefficientField::constant(1.0);
        let zero = CoefficientField::constant(0.0);
        assert!(SeminormSpec::new(&m, 6.0, &one, 3.0, &zero).is_ok());
        assert!(SeminormSpec::new(&m, 7.0, &one, 3.0, &zero).is_err());
        assert!(SeminormSpec::new(&m, 2.0, &one, 3.5, &zero).is_err());
        assert!(SeminormSpec::new(&m, 2.0, &zero, 2.0, &zero).is_err());
        // θ ≡ 0 on one side contributes nothing
        let spec = SeminormSpec::new(&m, 2.0, &zero, 2.0, &one).unwrap();
        let u = DiscreteFunction::constant(m.mesh(), 1.0);
        assert!((norm_circ_with(&m, &spec, &u).unwrap() - 2.0).abs() < 1e-13);
    }
}
