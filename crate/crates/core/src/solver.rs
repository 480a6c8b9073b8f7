//! Minimization of Θ_λ over the two Nehari branches.
//!
//! Each run alternates a preconditioned gradient step with a projection back
//! onto the requested branch along the ray through the new point, then
//! finishes with a few damped Newton steps on `∇Θ_λ = 0` to drive the weak
//! residual down to round-off.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{
    energy, energy_gradient, weak_residual, EnergyError, ResidualReport, DEFAULT_FLOOR,
};
use crate::fibering::{
    classify_nehari, fiber_roots, fiber_terms, FiberError, FiberRoots, NehariClass, NehariKind,
    NEHARI_TOL,
};
use crate::mesh::triangle_gradient;
use crate::model::Model;
use crate::space::{modular_breakdown, DiscreteFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn kind(self) -> NehariKind {
        match self {
            Branch::Plus => NehariKind::Nplus,
            Branch::Minus => NehariKind::Nminus,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("the ray through u does not meet the {branch} branch at lambda = {lambda}")]
    NoRoot { branch: Branch, lambda: f64 },
    #[error("initial function must be nonnegative and nonzero")]
    BadInit,
    #[error("projected point is classified {found:?}, expected {expected:?}")]
    WrongBranch {
        expected: NehariKind,
        found: NehariKind,
    },
    #[error(transparent)]
    Fiber(#[from] FiberError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Relative energy decrease over `stall` iterations that ends the descent.
    pub energy_tol: f64,
    pub stall: usize,
    pub max_iter: usize,
    /// Target for the normalized weak residual.
    pub residual_tol: f64,
    /// Singular-term floor of the energy gradient.
    pub floor: f64,
    pub seed: u64,
    pub newton_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            energy_tol: 1e-10,
            stall: 25,
            max_iter: 20000,
            residual_tol: 1e-9,
            floor: DEFAULT_FLOOR,
            seed: 0,
            newton_max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub u: DiscreteFunction,
    pub branch: Branch,
    pub start: String,
    pub energy: f64,
    pub nehari: NehariClass,
    pub residual: ResidualReport,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub floor_activations: usize,
    pub min_value: f64,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;

/// Scales `u` onto the requested branch: `t¹u` for Plus, `t²u` for Minus.
pub fn project_to_nehari(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    branch: Branch,
) -> Result<DiscreteFunction, SolverError> {
    if u.is_zero() || u.values().iter().any(|&v| v < 0.0) {
        return Err(SolverError::BadInit);
    }
    let v = project_unchecked(model, u, lambda, branch)?;
    let class = classify_nehari(model, &v, lambda, NEHARI_TOL)?;
    if class.kind != branch.kind() {
        return Err(SolverError::WrongBranch {
            expected: branch.kind(),
            found: class.kind,
        });
    }
    Ok(v)
}

fn project_unchecked(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    branch: Branch,
) -> Result<DiscreteFunction, SolverError> {
    match fiber_roots(&fiber_terms(model, u), lambda)? {
        FiberRoots::Two { t1, t2, .. } => {
            Ok(u.scaled(if branch == Branch::Plus { t1 } else { t2 }))
        }
        _ => Err(SolverError::NoRoot { branch, lambda }),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Θ_λ restricted to the branch, as a function of the (clamped) direction.
fn reduced(
    model: &Model,
    w: &[f64],
    lambda: f64,
    branch: Branch,
) -> Option<(DiscreteFunction, f64)> {
    let w = DiscreteFunction::new(w.iter().map(|&v| v.max(0.0)).collect());
    if w.is_zero() {
        return None;
    }
    let u = project_unchecked(model, &w, lambda, branch).ok()?;
    let j = energy(model, &u, lambda).total;
    j.is_finite().then_some((u, j))
}

struct Descent {
    u: DiscreteFunction,
    iterations: usize,
    floor_activations: usize,
}

fn descend(
    model: &Model,
    init: DiscreteFunction,
    lambda: f64,
    branch: Branch,
    opts: &SolveOptions,
) -> Result<Descent, SolverError> {
    let m = model.mesh().node_weights();
    let mut u = project_unchecked(model, &init, lambda, branch)?;
    let mut j = energy(model, &u, lambda).total;
    let mut history = vec![j];
    let mut floor_activations = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = f64::NAN;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = energy_gradient(model, &u, lambda, opts.floor);
        if grad.floor_active() {
            floor_activations += 1;
        }
        let g = grad.values;
        let d: Vec<f64> = g.iter().zip(m).map(|(gi, mi)| -gi / mi).collect();
        let slope = dot(&g, &d);
        if !(slope < 0.0) {
            break;
        }

        // Barzilai-Borwein step in the lumped-mass metric
        if let Some((du, dg)) = &prev {
            let s_m: f64 = du.iter().zip(m).map(|(x, mi)| x * x * mi).sum();
            let s_y = dot(du, dg);
            if s_y > 0.0 && s_m > 0.0 {
                step = s_m / s_y;
            }
        }
        if !step.is_finite() || step <= 0.0 {
            let un: f64 = u.values().iter().zip(m).map(|(x, mi)| x * x * mi).sum();
            let dn: f64 = d.iter().zip(m).map(|(x, mi)| x * x * mi).sum();
            step = 1e-2 * (un / dn).sqrt();
        }

        let mut accepted = None;
        let mut s = step;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u
                .values()
                .iter()
                .zip(&d)
                .map(|(ui, di)| ui + s * di)
                .collect();
            if let Some((v, jv)) = reduced(model, &trial, lambda, branch) {
                let moved: Vec<f64> = v
                    .values()
                    .iter()
                    .zip(u.values())
                    .map(|(a, b)| a - b)
                    .collect();
                let decrease = dot(&g, &moved);
                if jv <= j + ARMIJO * decrease.min(0.0) && jv < j {
                    accepted = Some((v, jv, moved));
                    break;
                }
            }
            s *= BACKTRACK;
        }
        let Some((v, jv, moved)) = accepted else {
            break;
        };
        let gv = energy_gradient(model, &v, lambda, opts.floor).values;
        let dg: Vec<f64> = gv.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((moved, dg));
        step = s;
        u = v;
        j = jv;
        history.push(j);

        if history.len() > opts.stall {
            let old = history[history.len() - 1 - opts.stall];
            let rel = (old - j) / j.abs().max(f64::MIN_POSITIVE);
            if rel < opts.energy_tol {
                let ft = fiber_terms(model, &u);
                let defect = (ft.a + ft.b + ft.c - ft.d - lambda * ft.e).abs()
                    / (ft.a + ft.b + ft.c + ft.d + lambda * ft.e);
                if defect < 1e-9 {
                    break;
                }
            }
        }
    }
    Ok(Descent {
        u,
        iterations,
        floor_activations,
    })
}

/// Hessian of the discrete Θ_λ at a strictly positive `u`.
fn hessian(model: &Model, u: &[f64], lambda: f64) -> DMatrix<f64> {
    let n = u.len();
    let e = model.exponents();
    let mesh = model.mesh();
    let mut h = DMatrix::zeros(n, n);
    let mut gmax: f64 = 0.0;
    let grads: Vec<[f64; 2]> = mesh
        .triangles()
        .iter()
        .map(|t| triangle_gradient(t, u))
        .collect();
    for g in &grads {
        gmax = gmax.max(g[0].hypot(g[1]));
    }
    // keeps |g|^{p-2} finite on triangles where u is (nearly) flat
    let rmin = 1e-12 * gmax.max(1e-300);
    for ((t, g), &mu) in mesh
        .triangles()
        .iter()
        .zip(&grads)
        .zip(model.mu_on_triangles())
    {
        let r = g[0].hypot(g[1]).max(rmin);
        let gh = [g[0] / r, g[1] / r];
        let mut k = [[0.0; 2]; 2];
        for (w, s) in [(1.0, e.p), (mu, e.q)] {
            if w == 0.0 {
                continue;
            }
            let c = w * r.powf(s - 2.0);
            for (a, row) in k.iter_mut().enumerate() {
                for (b, kab) in row.iter_mut().enumerate() {
                    let id = if a == b { 1.0 } else { 0.0 };
                    *kab += c * (id + (s - 2.0) * gh[a] * gh[b]);
                }
            }
        }
        for (i, &vi) in t.vertices.iter().enumerate() {
            let bi = t.basis_gradients[i];
            let kb = [
                k[0][0] * bi[0] + k[0][1] * bi[1],
                k[1][0] * bi[0] + k[1][1] * bi[1],
            ];
            for (j, &vj) in t.vertices.iter().enumerate() {
                let bj = t.basis_gradients[j];
                h[(vi, vj)] += t.area * (kb[0] * bj[0] + kb[1] * bj[1]);
            }
        }
    }
    let m = mesh.node_weights();
    let s = mesh.boundary_weights();
    for i in 0..n {
        let x = u[i];
        let mut d = m[i] * model.alpha()[i] * (e.p - 1.0) * x.powf(e.p - 2.0)
            + m[i] * model.zeta()[i] * e.kappa * x.powf(-e.kappa - 1.0)
            - lambda * m[i] * (e.q1 - 1.0) * x.powf(e.q1 - 2.0);
        if s[i] > 0.0 {
            d += s[i] * model.beta()[i] * (e.p_lower_star - 1.0) * x.powf(e.p_lower_star - 2.0);
        }
        h[(i, i)] += d;
    }
    h
}

fn scaled_residual(
    model: &Model,
    u: &DiscreteFunction,
    lambda: f64,
    floor: f64,
) -> (Vec<f64>, f64) {
    let g = energy_gradient(model, u, lambda, floor).values;
    let r = g
        .iter()
        .zip(model.hat_norms())
        .map(|(gi, n)| (gi / n).abs())
        .fold(0.0, f64::max);
    (g, r)
}

/// Damped Newton on `∇Θ_λ(u) = 0`, keeping every node positive.
fn newton_polish(
    model: &Model,
    u: DiscreteFunction,
    lambda: f64,
    opts: &SolveOptions,
) -> (DiscreteFunction, usize) {
    let mut u = u;
    if u.min() <= 0.0 {
        return (u, 0);
    }
    let (mut g, mut res) = scaled_residual(model, &u, lambda, opts.floor);
    let mut iters = 0;
    while iters < opts.newton_max_iter && res > 0.01 * opts.residual_tol {
        let h = hessian(model, u.values(), lambda);
        let Some(delta) = h
            .lu()
            .solve(&DVector::from_iterator(g.len(), g.iter().map(|v| -v)))
        else {
            break;
        };
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let trial = DiscreteFunction::new(
                u.values()
                    .iter()
                    .zip(delta.iter())
                    .map(|(a, d)| a + alpha * d)
                    .collect(),
            );
            if trial.min() > 0.0 && trial.is_finite() {
                let (gt, rt) = scaled_residual(model, &trial, lambda, opts.floor);
                if rt < (1.0 - 1e-4 * alpha) * res {
                    next = Some((trial, gt, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, gt, rt)) = next else {
            break;
        };
        iters += 1;
        u = trial;
        g = gt;
        res = rt;
    }
    (u, iters)
}

fn finish(
    model: &Model,
    u: DiscreteFunction,
    lambda: f64,
    branch: Branch,
    start: &str,
    opts: &SolveOptions,
    iterations: usize,
    newton_iterations: usize,
    floor_activations: usize,
) -> Result<SolveResult, SolverError> {
    let nehari = classify_nehari(model, &u, lambda, NEHARI_TOL)?;
    let min_value = u.min();
    let residual = if min_value > 0.0 {
        weak_residual(model, &u, lambda)?
    } else {
        ResidualReport {
            residual_norm: f64::INFINITY,
            worst_node: u.values().iter().position(|&v| v <= 0.0).unwrap_or(0),
            worst_terms: Default::default(),
            normalized_defects: Vec::new(),
        }
    };
    let floor_active = energy_gradient(model, &u, lambda, opts.floor).floor_active();
    let converged = residual.residual_norm <= opts.residual_tol
        && nehari.kind == branch.kind()
        && min_value > 0.0
        && !floor_active;
    Ok(SolveResult {
        energy: energy(model, &u, lambda).total,
        u,
        branch,
        start: start.to_string(),
        nehari,
        residual,
        iterations,
        newton_iterations,
        floor_activations,
        min_value,
        converged,
    })
}

/// Minimizes Θ_λ over one Nehari branch starting from the ray through `init`.
pub fn minimize_on_branch(
    model: &Model,
    lambda: f64,
    branch: Branch,
    init: &DiscreteFunction,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    minimize_labeled(model, lambda, branch, init, opts, "custom")
}

fn minimize_labeled(
    model: &Model,
    lambda: f64,
    branch: Branch,
    init: &DiscreteFunction,
    opts: &SolveOptions,
    start: &str,
) -> Result<SolveResult, SolverError> {
    model
        .mesh()
        .check_len(init.len())
        .map_err(|_| SolverError::BadInit)?;
    if init.is_zero() || init.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(SolverError::BadInit);
    }
    let d = descend(model, init.clone(), lambda, branch, opts)?;
    let (polished, newton_iterations) = newton_polish(model, d.u.clone(), lambda, opts);
    let result = finish(
        model,
        polished,
        lambda,
        branch,
        start,
        opts,
        d.iterations,
        newton_iterations,
        d.floor_activations,
    )?;
    if result.nehari.kind == branch.kind() {
        return Ok(result);
    }
    // Newton left the branch: report the descent iterate instead
    finish(
        model,
        d.u,
        lambda,
        branch,
        start,
        opts,
        d.iterations,
        0,
        d.floor_activations,
    )
}

/// The deterministic start set: all-ones, an x-ramp and a radial bump, then
/// each of them perturbed nodewise by up to ±10%.
pub fn multistart_inits(model: &Model, seed: u64) -> Vec<(String, DiscreteFunction)> {
    let mesh = model.mesh();
    let [x0, y0, x1, y1] = mesh.rect();
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let diam2 = (x1 - x0).powi(2) + (y1 - y0).powi(2);
    let base = vec![
        ("ones".to_string(), DiscreteFunction::constant(mesh, 1.0)),
        (
            "ramp".to_string(),
            DiscreteFunction::from_fn(mesh, |x, _| 1.0 + (x - x0) / (x1 - x0)),
        ),
        (
            "bump".to_string(),
            DiscreteFunction::from_fn(mesh, |x, y| {
                (-8.0 * ((x - cx).powi(2) + (y - cy).powi(2)) / diam2).exp()
            }),
        ),
    ];
    let mut out = base.clone();
    for (k, (name, f)) in base.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let values = f
            .values()
            .iter()
            .map(|v| v * (1.0 + rng.gen_range(-0.1..=0.1)))
            .collect();
        out.push((format!("{name}-perturbed"), DiscreteFunction::new(values)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub start: String,
    pub energy: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub branch: Branch,
    /// Lowest-energy converged run, or the lowest-energy run if none converged.
    pub best: Option<SolveResult>,
    pub attempts: Vec<Attempt>,
}

impl BranchReport {
    pub fn converged(&self) -> bool {
        self.best.as_ref().is_some_and(|b| b.converged)
    }
}

/// Runs every start on one branch in parallel and keeps the best result,
/// ordered by (converged first, energy, start index).
pub fn multistart(model: &Model, lambda: f64, branch: Branch, opts: &SolveOptions) -> BranchReport {
    let inits = multistart_inits(model, opts.seed);
    let runs: Vec<Result<SolveResult, SolverError>> = inits
        .par_iter()
        .map(|(name, init)| minimize_labeled(model, lambda, branch, init, opts, name))
        .collect();
    let attempts = inits
        .iter()
        .zip(&runs)
        .map(|((name, _), r)| match r {
            Ok(s) => Attempt {
                start: name.clone(),
                energy: Some(s.energy),
                converged: s.converged,
                error: None,
            },
            Err(e) => Attempt {
                start: name.clone(),
                energy: None,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let best = runs
        .into_iter()
        .flatten()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            b.converged
                .cmp(&a.converged)
                .then(a.energy.total_cmp(&b.energy))
                .then(i.cmp(j))
        })
        .map(|(_, r)| r);
    BranchReport {
        branch,
        best,
        attempts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSolutions {
    pub lambda: f64,
    pub plus: BranchReport,
    pub minus: BranchReport,
    /// Θ(u_λ) < 0 < Θ(v_λ) with both branches converged.
    pub sign_pattern_ok: bool,
    /// Both solutions strictly positive at every node.
    pub positive: bool,
}

/// Both solutions at the model's λ: the best Plus and best Minus results over
/// the multi-start set.
pub fn solve_two(model: &Model, opts: &SolveOptions) -> TwoSolutions {
    let lambda = model.data().lambda;
    let (plus, minus) = rayon::join(
        || multistart(model, lambda, Branch::Plus, opts),
        || multistart(model, lambda, Branch::Minus, opts),
    );
    let sign_pattern_ok = plus.converged()
        && minus.converged()
        && plus.best.as_ref().is_some_and(|b| b.energy < 0.0)
        && minus.best.as_ref().is_some_and(|b| b.energy > 0.0);
    let positive = [&plus, &minus]
        .iter()
        .all(|r| r.best.as_ref().is_some_and(|b| b.min_value > 0.0));
    TwoSolutions {
        lambda,
        plus,
        minus,
        sign_pattern_ok,
        positive,
    }
}

/// ‖u‖_{q1} / ‖u‖_{1,p}, the quantity whose supremum is the embedding constant.
pub fn embedding_ratio(model: &Model, u: &DiscreteFunction) -> f64 {
    let b = modular_breakdown(model, u);
    let e = model.exponents();
    b.mass_q1.powf(1.0 / e.q1) / (b.grad_p + b.mass_p_alpha).powf(1.0 / e.p)
}

/// Lower bound `[(p+κ−1)/(λ Ĉ^p (q1+κ−1))]^{1/(q1−p)}` for ‖v‖_{q1} on N⁻.
pub fn minus_norm_floor(model: &Model, lambda: f64, c_hat: f64) -> f64 {
    let e = model.exponents();
    ((e.p + e.kappa - 1.0) / (lambda * c_hat.powf(e.p) * (e.q1 + e.kappa - 1.0)))
        .powf(1.0 / (e.q1 - e.p))
}
