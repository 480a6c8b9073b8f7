//! Fiber maps `t ↦ Θ_λ(tu)` of a fixed function and the scalar quantities
//! that locate and classify the Nehari points on each ray.

use serde::Serialize;
use thiserror::Error;

use crate::model::Model;
use crate::problem::Exponents;
use crate::roots::{expand_bracket, hybrid_root, RootError};
use crate::space::{modular_breakdown, DiscreteFunction, ModularBreakdown};

/// Relative tolerance on `|η(tⁱ) − λe|` for the two fiber roots.
pub const ROOT_TOL: f64 = 1e-12;
/// Relative tolerance under which `η(t°) = λe` is declared a tangency.
pub const TANGENT_TOL: f64 = 1e-10;
/// Default relative tolerance of [`classify_nehari`].
pub const NEHARI_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiberError {
    #[error("fiber maps are only defined for t > 0, got t = {0}")]
    NonPositiveT(f64),
    #[error("degenerate fiber terms: {0}")]
    Degenerate(&'static str),
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("root search failed: {0}")]
    Root(#[from] RootError),
}

/// `(a, b, c, d, e)`: the five integrals that determine the whole fiber of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberTerms {
    /// ‖u‖_{1,p}^p
    pub a: f64,
    /// ‖∇u‖_{q,μ}^q
    pub b: f64,
    /// ‖u‖_{p_*,β,∂Ω}^{p_*}
    pub c: f64,
    /// ∫ζ|u|^{1−κ}
    pub d: f64,
    /// ‖u‖_{q1}^{q1}
    pub e: f64,
    pub exponents: Exponents,
}

impl FiberTerms {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, exponents: Exponents) -> Self {
        FiberTerms {
            a,
            b,
            c,
            d,
            e,
            exponents,
        }
    }

    pub fn from_breakdown(b: &ModularBreakdown, exponents: Exponents) -> Self {
        FiberTerms {
            a: b.grad_p + b.mass_p_alpha,
            b: b.grad_q_mu,
            c: b.bdry_pstar_beta,
            d: b.zeta_sing,
            e: b.mass_q1,
            exponents,
        }
    }

    /// Terms of `s·u`, each integral being homogeneous in `u`.
    pub fn scaled(&self, s: f64) -> Self {
        let x = self.exponents;
        let s = s.abs();
        FiberTerms {
            a: self.a * s.powf(x.p),
            b: self.b * s.powf(x.q),
            c: self.c * s.powf(x.p_lower_star),
            d: self.d * s.powf(1.0 - x.kappa),
            e: self.e * s.powf(x.q1),
            exponents: x,
        }
    }

    fn magnitude(&self, lambda: f64) -> f64 {
        self.a + self.b + self.c + self.d + lambda * self.e
    }
}

pub fn fiber_terms(model: &Model, u: &DiscreteFunction) -> FiberTerms {
    FiberTerms::from_breakdown(&modular_breakdown(model, u), model.exponents())
}

fn check_t(t: f64) -> Result<(), FiberError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(FiberError::NonPositiveT(t))
    }
}

/// ψ(t) = Θ_λ(tu); ψ(0) = 0.
pub fn psi(ft: &FiberTerms, lambda: f64, t: f64) -> Result<f64, FiberError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(psi_derivatives(ft, lambda, t)?.0)
}

/// `(ψ(t), ψ′(t), ψ″(t))`.
pub fn psi_derivatives(
    ft: &FiberTerms,
    lambda: f64,
    t: f64,
) -> Result<(f64, f64, f64), FiberError> {
    check_t(t)?;
    let x = ft.exponents;
    let s = 1.0 - x.kappa;
    // (coefficient, exponent) of each term of ψ
    let terms = [
        (ft.a / x.p, x.p),
        (ft.b / x.q, x.q),
        (ft.c / x.p_lower_star, x.p_lower_star),
        (-ft.d / s, s),
        (-lambda * ft.e / x.q1, x.q1),
    ];
    let mut out = (0.0, 0.0, 0.0);
    for (k, r) in terms {
        if k == 0.0 {
            continue;
        }
        let tr = t.powf(r);
        out.0 += k * tr;
        out.1 += k * r * tr / t;
        out.2 += k * r * (r - 1.0) * tr / (t * t);
    }
    Ok(out)
}

fn eta_unchecked(ft: &FiberTerms, t: f64) -> f64 {
    let x = ft.exponents;
    ft.a * t.powf(x.p - x.q1) + ft.b * t.powf(x.q - x.q1) + ft.c * t.powf(x.p_lower_star - x.q1)
        - ft.d * t.powf(1.0 - x.q1 - x.kappa)
}

fn xi_unchecked(ft: &FiberTerms, t: f64) -> f64 {
    let x = ft.exponents;
    let k1 = x.kappa - 1.0;
    (x.q1 - x.p) * ft.a * t.powf(x.p + k1)
        + (x.q1 - x.q) * ft.b * t.powf(x.q + k1)
        + (x.q1 - x.p_lower_star) * ft.c * t.powf(x.p_lower_star + k1)
}

/// η(t) = a t^{p−q1} + b t^{q−q1} + c t^{p_*−q1} − d t^{1−q1−κ}.
pub fn eta(ft: &FiberTerms, t: f64) -> Result<f64, FiberError> {
    check_t(t)?;
    Ok(eta_unchecked(ft, t))
}

/// η̃(t) = a t^{p−q1} − d t^{1−q1−κ}.
pub fn eta_tilde(ft: &FiberTerms, t: f64) -> Result<f64, FiberError> {
    check_t(t)?;
    let x = ft.exponents;
    Ok(ft.a * t.powf(x.p - x.q1) - ft.d * t.powf(1.0 - x.q1 - x.kappa))
}

/// ξ(t) = (q1−p)a t^{p+κ−1} + (q1−q)b t^{q+κ−1} + (q1−p_*)c t^{p_*+κ−1}.
pub fn xi(ft: &FiberTerms, t: f64) -> Result<f64, FiberError> {
    check_t(t)?;
    Ok(xi_unchecked(ft, t))
}

/// η′(t) = t^{−q1−κ}((q1+κ−1)d − ξ(t)).
pub fn eta_prime(ft: &FiberTerms, t: f64) -> Result<f64, FiberError> {
    check_t(t)?;
    let x = ft.exponents;
    Ok(t.powf(-x.q1 - x.kappa) * ((x.q1 + x.kappa - 1.0) * ft.d - xi_unchecked(ft, t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TildeCirc {
    /// Maximizer of η̃.
    pub t: f64,
    /// η̃(t̃°) evaluated directly.
    pub eta_max: f64,
    /// The same maximum from its closed-form expression in `a` and `d`.
    pub eta_max_closed: f64,
}

/// Closed-form maximizer and maximum of η̃.
pub fn t_tilde_circ(ft: &FiberTerms) -> Result<TildeCirc, FiberError> {
    if !(ft.a > 0.0) {
        return Err(FiberError::Degenerate("a = 0"));
    }
    if !(ft.d > 0.0) {
        return Err(FiberError::Degenerate("d = 0"));
    }
    let x = ft.exponents;
    let lo = x.p + x.kappa - 1.0;
    let hi = x.q1 + x.kappa - 1.0;
    let up = x.q1 - x.p;
    let t = (hi * ft.d / (up * ft.a)).powf(1.0 / lo);
    let eta_max = eta_unchecked(
        &FiberTerms {
            b: 0.0,
            c: 0.0,
            ..*ft
        },
        t,
    );
    let eta_max_closed =
        lo / up * (up / hi).powf(hi / lo) * ft.a.powf(hi / lo) / ft.d.powf(up / lo);
    Ok(TildeCirc {
        t,
        eta_max,
        eta_max_closed,
    })
}

/// The unique maximizer t° of η, i.e. the root of ξ(t) = (q1+κ−1)d.
pub fn t_circ(ft: &FiberTerms) -> Result<f64, FiberError> {
    if !(ft.d > 0.0) {
        return Err(FiberError::Degenerate("d = 0"));
    }
    if !(ft.a > 0.0 || ft.b > 0.0 || ft.c > 0.0) {
        return Err(FiberError::Degenerate("a = b = c = 0"));
    }
    let x = ft.exponents;
    let target = (x.q1 + x.kappa - 1.0) * ft.d;
    let f = |t: f64| xi_unchecked(ft, t) - target;
    let upward = f(1.0) < 0.0;
    let (lo, hi) = expand_bracket(f, 1.0, upward)?;
    if lo == hi {
        return Ok(lo);
    }
    Ok(hybrid_root(f, lo, hi, ROOT_TOL * target)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiberRoots {
    /// t¹ < t° < t² with η(tⁱ) = λe.
    Two { t1: f64, t_circ: f64, t2: f64 },
    /// η(t°) = λe within [`TANGENT_TOL`].
    Tangent { t_circ: f64 },
    /// η(t°) < λe: the ray misses the Nehari set.
    None { t_circ: f64 },
}

impl FiberRoots {
    pub fn t_circ(&self) -> f64 {
        match *self {
            FiberRoots::Two { t_circ, .. }
            | FiberRoots::Tangent { t_circ }
            | FiberRoots::None { t_circ } => t_circ,
        }
    }
}

/// Locates the points where the ray through `u` meets the Nehari set.
pub fn fiber_roots(ft: &FiberTerms, lambda: f64) -> Result<FiberRoots, FiberError> {
    if !(lambda > 0.0) {
        return Err(FiberError::Lambda(lambda));
    }
    if !(ft.e > 0.0) {
        return Err(FiberError::Degenerate("e = 0"));
    }
    let t_circ = t_circ(ft)?;
    let level = lambda * ft.e;
    let peak = eta_unchecked(ft, t_circ);
    if (peak - level).abs() <= TANGENT_TOL * level {
        return Ok(FiberRoots::Tangent { t_circ });
    }
    if peak < level {
        return Ok(FiberRoots::None { t_circ });
    }
    let f = |t: f64| eta_unchecked(ft, t) - level;
    let tol = ROOT_TOL * level;
    let root = |upward: bool| -> Result<f64, FiberError> {
        let (lo, hi) = expand_bracket(f, t_circ, upward)?;
        Ok(hybrid_root(f, lo, hi, tol)?)
    };
    Ok(FiberRoots::Two {
        t1: root(false)?,
        t_circ,
        t2: root(true)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NehariKind {
    NotOnNehari,
    Nplus,
    Nzero,
    Nminus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NehariClass {
    pub kind: NehariKind,
    pub dpsi1: f64,
    pub ddpsi1: f64,
    pub tol: f64,
}

/// Classifies `u` from ψ′(1) and ψ″(1), both measured relative to
/// `a + b + c + d + λe`.
pub fn classify_terms(ft: &FiberTerms, lambda: f64, tol: f64) -> Result<NehariClass, FiberError> {
    let scale = ft.magnitude(lambda);
    if !(scale > 0.0) {
        return Err(FiberError::Degenerate("u = 0"));
    }
    let (_, dpsi1, ddpsi1) = psi_derivatives(ft, lambda, 1.0)?;
    let kind = if dpsi1.abs() > tol * scale {
        NehariKind::NotOnNehari
    } else if ddpsi1.abs() <= tol * scale {
        NehariKind::Nzero
    } else if ddpsi1 > 0.0 {
        NehariKind::Nplus
    } else {
        NehariKind::Nminus
    };
    Ok(NehariClass {
        kind,
        dpsi1,
        ddpsi1,
        tol,
    })
}

pub fn classify_nehari(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    tol: f64,
) -> Result<NehariClass, FiberError> {
    if u.is_zero() {
        return Err(FiberError::Degenerate("u = 0"));
    }
    classify_terms(&fiber_terms(model, u), lambda, tol)
}
