//! Model parameters, critical exponents and hypothesis checks.

use serde::Serialize;
use thiserror::Error;

use crate::coeff_expr::{CoefficientField, EvalError};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("critical exponents need 1 < p < N, got p = {p}, N = {dim}")]
    ExponentRange { p: f64, dim: usize },
    #[error("coefficient `{name}` could not be evaluated: {source}")]
    Coefficient {
        name: &'static str,
        #[source]
        source: EvalError,
    },
}

/// Returns `(p*, p_*) = (Np/(N-p), (N-1)p/(N-p))`.
pub fn critical_exponents(p: f64, dim: usize) -> Result<(f64, f64), ProblemError> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(ProblemError::ExponentRange { p, dim });
    }
    Ok((n * p / (n - p), (n - 1.0) * p / (n - p)))
}

/// The exponents that enter every power-law term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    /// Boundary critical exponent p_*.
    pub p_lower_star: f64,
    pub q1: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemData {
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub kappa: f64,
    pub q1: f64,
    pub lambda: f64,
    pub mu: CoefficientField,
    pub alpha: CoefficientField,
    pub beta: CoefficientField,
    pub zeta: CoefficientField,
    pub p_star: f64,
    pub p_lower_star: f64,
}

impl ProblemData {
    /// Builds the parameter set. The critical exponents are derived here;
    /// when `p` is outside `(1, N)` they are set to NaN and validation
    /// reports the violation.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        q: f64,
        dim: usize,
        kappa: f64,
        q1: f64,
        lambda: f64,
        mu: CoefficientField,
        alpha: CoefficientField,
        beta: CoefficientField,
        zeta: CoefficientField,
    ) -> Self {
        let (p_star, p_lower_star) = critical_exponents(p, dim).unwrap_or((f64::NAN, f64::NAN));
        ProblemData {
            p,
            q,
            dim,
            kappa,
            q1,
            lambda,
            mu,
            alpha,
            beta,
            zeta,
            p_star,
            p_lower_star,
        }
    }

    /// The reference configuration used throughout the tests:
    /// `(p, q, κ, q1) = (1.5, 1.8, 0.5, 4)`, `μ = x`, `α = β = ζ = 1`, N = 2.
    pub fn preset(lambda: f64) -> Self {
        ProblemData::new(
            1.5,
            1.8,
            2,
            0.5,
            4.0,
            lambda,
            CoefficientField::parse("x").expect("literal"),
            CoefficientField::constant(1.0),
            CoefficientField::constant(1.0),
            CoefficientField::constant(1.0),
        )
    }

    pub fn exponents(&self) -> Exponents {
        Exponents {
            p: self.p,
            q: self.q,
            p_lower_star: self.p_lower_star,
            q1: self.q1,
            kappa: self.kappa,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemData {
            lambda,
            ..self.clone()
        }
    }
}

/// Which clause of the hypotheses a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    #[serde(rename = "H(i)")]
    I,
    #[serde(rename = "H(ii)")]
    II,
    #[serde(rename = "H(iii)")]
    III,
    #[serde(rename = "H(iv)")]
    IV,
    #[serde(rename = "H(v)")]
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub clause: Hypothesis,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, clause: Hypothesis) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

/// Points on which the pointwise sign conditions are checked.
#[derive(Debug, Clone, Default)]
pub struct SamplePoints {
    pub interior: Vec<[f64; 2]>,
    pub boundary: Vec<[f64; 2]>,
}

impl SamplePoints {
    /// Mesh nodes and triangle centroids inside, boundary nodes on ∂Ω.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut interior = mesh.nodes().to_vec();
        interior.extend_from_slice(mesh.centroids());
        let boundary = mesh
            .boundary_nodes()
            .iter()
            .map(|&i| mesh.nodes()[i])
            .collect();
        SamplePoints { interior, boundary }
    }

    /// A regular `n × n` grid on the rectangle plus `4n` perimeter points.
    pub fn grid(rect: [f64; 4], n: usize) -> Self {
        let [x0, y0, x1, y1] = rect;
        let n = n.max(1);
        let mut interior = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let t = j as f64 / n as f64;
                interior.push([x0 + s * (x1 - x0), y0 + t * (y1 - y0)]);
            }
        }
        let mut boundary = Vec::with_capacity(4 * n);
        for k in 0..n {
            let s = k as f64 / n as f64;
            boundary.push([x0 + s * (x1 - x0), y0]);
            boundary.push([x1, y0 + s * (y1 - y0)]);
            boundary.push([x1 - s * (x1 - x0), y1]);
            boundary.push([x0, y1 - s * (y1 - y0)]);
        }
        SamplePoints { interior, boundary }
    }
}

/// Checks the exponent inequalities exactly and the sign conditions on the
/// coefficient fields at the sample points. Fields that fail to evaluate
/// are reported as violations of their clause.
pub fn validate_hypotheses(data: &ProblemData, samples: &SamplePoints) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |clause, message: String| violations.push(Violation { clause, message });

    let dim = data.dim as f64;
    if data.dim < 2 {
        push(
            Hypothesis::I,
            format!("dimension N = {} must be at least 2", data.dim),
        );
    }
    if !(data.p > 1.0 && data.p < dim) {
        push(
            Hypothesis::I,
            format!("need 1 < p < N, got p = {}, N = {}", data.p, data.dim),
        );
    }
    let exponents_defined = data.p_star.is_finite() && data.p_lower_star.is_finite();
    if exponents_defined {
        if !(data.p < data.q && data.q < data.p_star) {
            push(
                Hypothesis::I,
                format!(
                    "need p < q < p* = {}, got p = {}, q = {}",
                    data.p_star, data.p, data.q
                ),
            );
        }
    } else if !(data.p < data.q) {
        push(
            Hypothesis::I,
            format!("need p < q, got p = {}, q = {}", data.p, data.q),
        );
    }
    if !(data.kappa > 0.0 && data.kappa < 1.0) {
        push(
            Hypothesis::II,
            format!("need 0 < kappa < 1, got {}", data.kappa),
        );
    }
    if exponents_defined {
        let lower = data.q.max(data.p_lower_star);
        if !(data.q1 > lower && data.q1 < data.p_star) {
            push(
                Hypothesis::II,
                format!(
                    "need max(q, p_*) = {lower} < q1 < p* = {}, got q1 = {}",
                    data.p_star, data.q1
                ),
            );
        }
    } else {
        push(
            Hypothesis::II,
            "critical exponents undefined, q1 cannot be checked".to_string(),
        );
    }
    if !(data.lambda > 0.0) {
        push(
            Hypothesis::II,
            format!("need lambda > 0, got {}", data.lambda),
        );
    }

    check_field(
        &data.mu,
        "mu",
        &samples.interior,
        Hypothesis::I,
        |v| v >= 0.0,
        "mu >= 0",
        &mut push,
    );
    check_field(
        &data.alpha,
        "alpha",
        &samples.interior,
        Hypothesis::III,
        |v| v >= 0.0,
        "alpha >= 0",
        &mut push,
    );
    check_field(
        &data.beta,
        "beta",
        &samples.boundary,
        Hypothesis::IV,
        |v| v >= 0.0,
        "beta >= 0",
        &mut push,
    );
    check_field(
        &data.zeta,
        "zeta",
        &samples.interior,
        Hypothesis::V,
        |v| v > 0.0,
        "zeta > 0",
        &mut push,
    );

    let alpha_nonzero = samples
        .interior
        .iter()
        .any(|pt| matches!(data.alpha.eval(pt[0], pt[1]), Ok(v) if v != 0.0));
    if !alpha_nonzero {
        push(
            Hypothesis::III,
            "alpha vanishes at every sample point".to_string(),
        );
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn check_field(
    field: &CoefficientField,
    name: &str,
    points: &[[f64; 2]],
    clause: Hypothesis,
    accept: impl Fn(f64) -> bool,
    rule: &str,
    push: &mut impl FnMut(Hypothesis, String),
) {
    for pt in points {
        match field.eval(pt[0], pt[1]) {
            Ok(v) if accept(v) => {}
            Ok(v) => {
                push(
                    clause,
                    format!("{rule} violated: {name}({}, {}) = {v}", pt[0], pt[1]),
                );
                return;
            }
            Err(e) => {
                push(clause, format!("{name} cannot be evaluated: {e}"));
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SamplePoints {
        SamplePoints::grid([0.0, 0.0, 1.0, 1.0], 8)
    }

    #[test]
    fn critical_exponent_values() {
        assert_eq!(critical_exponents(1.5, 2).unwrap(), (6.0, 3.0));
        assert_eq!(critical_exponents(2.0, 4).unwrap(), (4.0, 3.0));
        assert!(critical_exponents(2.0, 2).is_err());
        assert!(critical_exponents(1.0, 3).is_err());
    }

    #[test]
    fn critical_exponents_increase_with_p() {
        let mut prev = critical_exponents(1.01, 3).unwrap();
        for k in 2..200 {
            let p = 1.0 + 0.01 * k as f64;
            let cur = critical_exponents(p, 3).unwrap();
            assert!(cur.0 > prev.0 && cur.1 > prev.1);
            prev = cur;
        }
    }

    #[test]
    fn preset_is_valid() {
        let report = validate_hypotheses(&ProblemData::preset(0.1), &unit());
        assert!(report.ok, "{report:?}");
        assert!(report.violations.is_empty());
    }

    #[test]
    fn single_clause_violations() {
        let mut data = ProblemData::preset(0.1);
        data.q1 = 2.5;
        let r = validate_hypotheses(&data, &unit());
        assert!(!r.ok && r.has(Hypothesis::II));

        let mut data = ProblemData::preset(0.1);
        data.zeta = CoefficientField::parse("0").unwrap();
        let r = validate_hypotheses(&data, &unit());
        assert!(!r.ok && r.has(Hypothesis::V));
        assert_eq!(r.violations.len(), 1);

        let p2 = ProblemData::new(
            2.0,
            2.5,
            2,
            0.5,
            4.0,
            0.1,
            CoefficientField::parse("x").unwrap(),
            CoefficientField::constant(1.0),
            CoefficientField::constant(1.0),
            CoefficientField::constant(1.0),
        );
        let r = validate_hypotheses(&p2, &unit());
        assert!(!r.ok && r.has(Hypothesis::I));
    }

    #[test]
    fn alpha_identically_zero_and_negative_mu() {
        let mut data = ProblemData::preset(0.1);
        data.alpha = CoefficientField::parse("0").unwrap();
        assert!(validate_hypotheses(&data, &unit()).has(Hypothesis::III));

        let mut data = ProblemData::preset(0.1);
        data.mu = CoefficientField::parse("x - 0.5").unwrap();
        assert!(validate_hypotheses(&data, &unit()).has(Hypothesis::I));

        let mut data = ProblemData::preset(0.1);
        data.beta = CoefficientField::parse("1/x").unwrap();
        assert!(validate_hypotheses(&data, &unit()).has(Hypothesis::IV));
    }

    #[test]
    fn exponent_orderings_hold_for_valid_data() {
        for &(p, q, kappa, q1) in &[
            (1.5, 1.8, 0.5, 4.0),
            (1.2, 1.5, 0.1, 2.5),
            (1.9, 3.0, 0.9, 20.0),
        ] {
            let data = ProblemData::new(
                p,
                q,
                2,
                kappa,
                q1,
                1.0,
                CoefficientField::constant(0.0),
                CoefficientField::constant(1.0),
                CoefficientField::constant(1.0),
                CoefficientField::constant(1.0),
            );
            assert!(validate_hypotheses(&data, &unit()).ok);
            assert!(q1 + kappa - 1.0 > q1 - p && q1 - p > q1 - q && q1 - q > 0.0);
            assert!(q1 - data.p_lower_star > 0.0);
        }
    }
}
