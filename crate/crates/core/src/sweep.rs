//! Sampled estimates of the λ thresholds and of the Sobolev constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fibering::{eta, fiber_roots, fiber_terms, t_tilde_circ, FiberRoots, FiberTerms};
use crate::model::Model;
use crate::solver::{multistart, multistart_inits, Branch, SolveOptions};
use crate::space::{modular_breakdown, norm_custom, DiscreteFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("no sampled direction has a > 0 and d > 0")]
    NoAdmittedSamples,
    #[error("lambda grid must be nonempty")]
    EmptyGrid,
    #[error("lambda grid must be positive and strictly ascending")]
    BadGrid,
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
}

/// `n` nonnegative directions with U(0,1) nodal values, each normalized to
/// unit norm. Sample `i` draws from its own stream so results do not depend
/// on evaluation order.
pub fn sample_directions(model: &Model, n: usize, seed: u64) -> Vec<DiscreteFunction> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let u =
                DiscreteFunction::new((0..model.node_count()).map(|_| rng.gen::<f64>()).collect());
            match norm_custom(model, &u) {
                Ok(nrm) if nrm > 0.0 => u.scaled(1.0 / nrm),
                _ => u,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaTildeEstimate {
    /// min over admitted samples of η̃(t̃°)/e.
    pub value: f64,
    pub admitted: usize,
    pub skipped: usize,
}

fn tilde_ratio(ft: &FiberTerms) -> Option<f64> {
    if !(ft.e > 0.0) {
        return None;
    }
    t_tilde_circ(ft).ok().map(|tc| tc.eta_max / ft.e)
}

pub fn lambda_tilde_from(
    model: &Model,
    directions: &[DiscreteFunction],
) -> Result<LambdaTildeEstimate, SweepError> {
    if directions.is_empty() {
        return Err(SweepError::NoSamples);
    }
    let ratios: Vec<Option<f64>> = directions
        .par_iter()
        .map(|u| tilde_ratio(&fiber_terms(model, u)))
        .collect();
    let admitted: Vec<f64> = ratios.iter().flatten().copied().collect();
    if admitted.is_empty() {
        return Err(SweepError::NoAdmittedSamples);
    }
    Ok(LambdaTildeEstimate {
        value: admitted.iter().copied().fold(f64::INFINITY, f64::min),
        admitted: admitted.len(),
        skipped: ratios.len() - admitted.len(),
    })
}

pub fn estimate_lambda_tilde(
    model: &Model,
    n_samples: usize,
    seed: u64,
) -> Result<LambdaTildeEstimate, SweepError> {
    lambda_tilde_from(model, &sample_directions(model, n_samples, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NzeroStatus {
    /// Some direction has two fiber roots and none is tangent.
    NoTangency,
    /// At least one direction touches N° at this λ.
    TangencyFound,
    /// No direction reaches the Nehari set twice, so the test is vacuous.
    NoTwoRootDirections,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NzeroEvidence {
    pub lambda: f64,
    pub samples: usize,
    pub two_root: usize,
    pub no_root: usize,
    /// Indices of directions whose fiber is tangent at this λ.
    pub tangent: Vec<usize>,
    pub status: NzeroStatus,
}

impl NzeroEvidence {
    pub fn tangency_found(&self) -> bool {
        !self.tangent.is_empty()
    }
}

pub fn check_nzero_directions(
    model: &Model,
    lambda: f64,
    directions: &[DiscreteFunction],
) -> Result<NzeroEvidence, SweepError> {
    if !(lambda > 0.0) {
        return Err(SweepError::Lambda(lambda));
    }
    let outcomes: Vec<Option<FiberRoots>> = directions
        .par_iter()
        .map(|u| fiber_roots(&fiber_terms(model, u), lambda).ok())
        .collect();
    let mut ev = NzeroEvidence {
        lambda,
        samples: directions.len(),
        two_root: 0,
        no_root: 0,
        tangent: Vec::new(),
        status: NzeroStatus::NoTangency,
    };
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Some(FiberRoots::Two { .. }) => ev.two_root += 1,
            Some(FiberRoots::Tangent { .. }) => ev.tangent.push(i),
            _ => ev.no_root += 1,
        }
    }
    ev.status = if !ev.tangent.is_empty() {
        NzeroStatus::TangencyFound
    } else if ev.two_root == 0 {
        NzeroStatus::NoTwoRootDirections
    } else {
        NzeroStatus::NoTangency
    };
    Ok(ev)
}

pub fn check_nzero_empty(
    model: &Model,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NzeroEvidence, SweepError> {
    check_nzero_directions(model, lambda, &sample_directions(model, n_samples, seed))
}

/// `η(t°)/e` of one direction: the λ at which its fiber becomes tangent.
pub fn tangency_lambda(model: &Model, u: &DiscreteFunction) -> Option<f64> {
    let ft = fiber_terms(model, u);
    let t = crate::fibering::t_circ(&ft).ok()?;
    Some(eta(&ft, t).ok()? / ft.e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinusEvaluation {
    pub lambda: f64,
    pub energy: Option<f64>,
    pub converged: bool,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaStarEstimate {
    /// Largest λ found with a converged, positive-energy Minus solution;
    /// `None` when even the first grid point fails.
    pub value: Option<f64>,
    pub evaluations: Vec<MinusEvaluation>,
}

fn evaluate_minus(model: &Model, lambda: f64, opts: &SolveOptions) -> MinusEvaluation {
    let report = multistart(&model.with_lambda(lambda), lambda, Branch::Minus, opts);
    let best = report.best.as_ref();
    let converged = report.converged();
    let energy = best.map(|b| b.energy);
    MinusEvaluation {
        lambda,
        energy,
        converged,
        positive: converged && energy.is_some_and(|e| e > 0.0),
    }
}

pub const LAMBDA_STAR_REFINEMENTS: usize = 3;

/// Walks the ascending grid until the Minus branch stops producing a
/// converged positive-energy solution, then bisects the last gap.
pub fn estimate_lambda_star(
    model: &Model,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<LambdaStarEstimate, SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if grid.iter().any(|&l| !(l > 0.0)) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SweepError::BadGrid);
    }
    let mut evaluations = Vec::new();
    let mut last_good = None;
    let mut first_bad = None;
    for &lambda in grid {
        let ev = evaluate_minus(model, lambda, opts);
        let ok = ev.positive;
        evaluations.push(ev);
        if ok {
            last_good = Some(lambda);
        } else {
            first_bad = Some(lambda);
            break;
        }
    }
    if let (Some(mut lo), Some(mut hi)) = (last_good, first_bad) {
        for _ in 0..LAMBDA_STAR_REFINEMENTS {
            let mid = 0.5 * (lo + hi);
            let ev = evaluate_minus(model, mid, opts);
            if ev.positive {
                lo = mid;
            } else {
                hi = mid;
            }
            evaluations.push(ev);
        }
        last_good = Some(lo);
    }
    Ok(LambdaStarEstimate {
        value: last_good,
        evaluations,
    })
}

/// `‖u‖_{1,p}^p / ‖u‖_{p*}^p`.
pub fn sobolev_quotient(model: &Model, u: &DiscreteFunction) -> f64 {
    let (q, _) = quotient_and_gradient(model, u, false);
    q
}

fn quotient_and_gradient(
    model: &Model,
    u: &DiscreteFunction,
    with_gradient: bool,
) -> (f64, Vec<f64>) {
    let data = model.data();
    let (p, ps) = (data.p, data.p_star);
    let b = modular_breakdown(model, u);
    let a = b.grad_p + b.mass_p_alpha;
    let m = model.mesh().node_weights();
    let s: f64 = u
        .values()
        .iter()
        .zip(m)
        .map(|(v, w)| w * v.abs().powf(ps))
        .sum();
    let denom = s.powf(p / ps);
    let q = a / denom;
    if !with_gradient {
        return (q, Vec::new());
    }
    let grad_a = p_part_gradient(model, u);
    let g = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d_denom = p * s.powf(p / ps - 1.0) * m[i] * v.abs().powf(ps - 2.0) * v;
            (grad_a[i] * denom - a * d_denom) / (denom * denom)
        })
        .collect();
    (q, g)
}

/// Gradient of `‖u‖_{1,p}^p` with respect to the nodal values.
fn p_part_gradient(model: &Model, u: &DiscreteFunction) -> Vec<f64> {
    let p = model.data().p;
    let mesh = model.mesh();
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for t in mesh.triangles() {
        let g = crate::mesh::triangle_gradient(t, v);
        let r = g[0].hypot(g[1]);
        if r == 0.0 {
            continue;
        }
        let w = p * t.area * r.powf(p - 2.0);
        for (k, &node) in t.vertices.iter().enumerate() {
            let bg = t.basis_gradients[k];
            out[node] += w * (g[0] * bg[0] + g[1] * bg[1]);
        }
    }
    for (i, &x) in v.iter().enumerate() {
        if x != 0.0 {
            out[i] += p * mesh.node_weights()[i] * model.alpha()[i] * x.abs().powf(p - 2.0) * x;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevEstimate {
    /// Smallest quotient seen; an upper bound for the discrete constant.
    pub value: f64,
    /// Best quotient among the raw samples, before polishing.
    pub sampled: f64,
    pub polish_iterations: usize,
}

/// Gradient descent on the quotient from `u`; returns the smallest value
/// seen and the number of accepted steps.
fn polish_quotient(model: &Model, mut u: DiscreteFunction, iters: usize) -> (f64, usize) {
    let m = model.mesh().node_weights();
    let mut best = sobolev_quotient(model, &u);
    let mut step = f64::NAN;
    let mut done = 0;
    for _ in 0..iters {
        let (q, g) = quotient_and_gradient(model, &u, true);
        let d: Vec<f64> = g.iter().zip(m).map(|(gi, mi)| -gi / mi).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            break;
        }
        if !step.is_finite() {
            let un: f64 = u.values().iter().zip(m).map(|(x, w)| x * x * w).sum();
            let dn: f64 = d.iter().zip(m).map(|(x, w)| x * x * w).sum();
            step = 1e-2 * (un / dn).sqrt();
        }
        let mut s = step * 2.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = DiscreteFunction::new(
                u.values()
                    .iter()
                    .zip(&d)
                    .map(|(a, b)| (a + s * b).max(0.0))
                    .collect(),
            );
            if !trial.is_zero() {
                let qt = sobolev_quotient(model, &trial);
                if qt <= q + 1e-4 * s * slope {
                    accepted = Some((trial, qt));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((trial, qt)) = accepted else {
            break;
        };
        step = s;
        done += 1;
        // the quotient is scale invariant; keep max(u) fixed
        let scale = u.max() / trial.max();
        u = trial.scaled(scale);
        best = best.min(qt);
    }
    (best, done)
}

/// Minimum of `‖u‖_{1,p}^p / ‖u‖_{p*}^p` over multi-starts and random
/// samples, followed by gradient descent on the quotient from every
/// multi-start and from the best random sample.
pub fn estimate_sobolev_constant(
    model: &Model,
    n_samples: usize,
    seed: u64,
    polish_iters: usize,
) -> SobolevEstimate {
    let mut starts: Vec<DiscreteFunction> = multistart_inits(model, seed)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let randoms = sample_directions(model, n_samples, seed);
    let random_q: Vec<f64> = randoms
        .par_iter()
        .map(|u| sobolev_quotient(model, u))
        .collect();
    let sampled = starts
        .iter()
        .map(|u| sobolev_quotient(model, u))
        .chain(random_q.iter().copied())
        .filter(|q| q.is_finite())
        .fold(f64::INFINITY, f64::min);
    if let Some((i, _)) = random_q
        .iter()
        .enumerate()
        .filter(|(_, q)| q.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        starts.push(randoms[i].clone());
    }
    let polished: Vec<(f64, usize)> = starts
        .into_par_iter()
        .map(|u| polish_quotient(model, u, polish_iters))
        .collect();
    SobolevEstimate {
        value: polished.iter().map(|p| p.0).fold(sampled, f64::min),
        sampled,
        polish_iterations: polished.iter().map(|p| p.1).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions {
    pub samples: usize,
    pub lambda_grid: Vec<f64>,
    pub polish_iters: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            samples: 200,
            lambda_grid: vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2],
            polish_iters: 200,
        }
    }
}

/// One line of the per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleDiagnostic {
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// η̃(t̃°)/e
    pub tilde_ratio: Option<f64>,
    /// η(t°)/e
    pub tangency_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaHatEvidence {
    pub lambda: f64,
    pub tangency_found: bool,
    pub status: NzeroStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// Sampled minimum of η̃(t̃°)/e; an upper bound for the uniform threshold
    /// over the sample set only.
    pub lambda_tilde_est: f64,
    /// The same minimum over the smooth multi-start directions.
    pub lambda_tilde_multistart: f64,
    pub lambda_tilde_admitted: usize,
    pub lambda_tilde_skipped: usize,
    /// N° emptiness checks; no numerical value is claimed for this threshold.
    pub lambda_hat_evidence: Vec<LambdaHatEvidence>,
    pub lambda_star_est: Option<f64>,
    pub lambda_star_evaluations: Vec<MinusEvaluation>,
    #[serde(rename = "sobolev_S_est")]
    pub sobolev_s_est: f64,
    pub samples: usize,
    pub seed: u64,
    /// `lambda_star_est ≤ lambda_tilde_est`; `None` when λ* is undetermined.
    pub ordering_ok: Option<bool>,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub per_sample: Vec<SampleDiagnostic>,
}

pub fn run_sweep(
    model: &Model,
    sweep: &SweepOptions,
    opts: &SolveOptions,
) -> Result<SweepReport, SweepError> {
    if sweep.samples == 0 {
        return Err(SweepError::NoSamples);
    }
    let seed = opts.seed;
    let dirs = sample_directions(model, sweep.samples, seed);
    let per_sample: Vec<SampleDiagnostic> = dirs
        .par_iter()
        .enumerate()
        .map(|(index, u)| {
            let ft = fiber_terms(model, u);
            SampleDiagnostic {
                index,
                a: ft.a,
                b: ft.b,
                c: ft.c,
                d: ft.d,
                e: ft.e,
                tilde_ratio: tilde_ratio(&ft),
                tangency_lambda: tangency_lambda(model, u),
            }
        })
        .collect();
    let tilde = lambda_tilde_from(model, &dirs)?;
    let smooth: Vec<DiscreteFunction> = multistart_inits(model, seed)
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let tilde_smooth = lambda_tilde_from(model, &smooth)?;

    let mut hat_lambdas = vec![0.1 * tilde.value];
    hat_lambdas.extend(sweep.lambda_grid.iter().copied());
    let mut lambda_hat_evidence = Vec::new();
    for lambda in hat_lambdas {
        let ev = check_nzero_directions(model, lambda, &dirs)?;
        lambda_hat_evidence.push(LambdaHatEvidence {
            lambda,
            tangency_found: ev.tangency_found(),
            status: ev.status,
        });
    }

    let star = estimate_lambda_star(model, &sweep.lambda_grid, opts)?;
    let sobolev = estimate_sobolev_constant(model, sweep.samples, seed, sweep.polish_iters);

    let mut diagnostics = Vec::new();
    let ordering_ok = star.value.map(|s| s <= tilde.value);
    match (star.value, ordering_ok) {
        (None, _) => diagnostics.push(
            "lambda_star undetermined: first grid point has no positive Minus solution".into(),
        ),
        (Some(s), Some(false)) => diagnostics.push(format!(
            "sampled ordering violated: lambda_star_est = {s} exceeds lambda_tilde_est = {}",
            tilde.value
        )),
        _ => {}
    }
    if let Some(s) = star.value.filter(|&s| s > tilde_smooth.value) {
        diagnostics.push(format!(
            "lambda_star_est = {s} exceeds lambda_tilde_multistart = {}; the smooth-direction threshold is only sufficient",
            tilde_smooth.value
        ));
    }
    if star.value == sweep.lambda_grid.last().copied() {
        diagnostics.push(
            "lambda_star_est is the top of the grid; the true threshold may be larger".into(),
        );
    }

    Ok(SweepReport {
        lambda_tilde_est: tilde.value,
        lambda_tilde_multistart: tilde_smooth.value,
        lambda_tilde_admitted: tilde.admitted,
        lambda_tilde_skipped: tilde.skipped,
        lambda_hat_evidence,
        lambda_star_est: star.value,
        lambda_star_evaluations: star.evaluations,
        sobolev_s_est: sobolev.value,
        samples: sweep.samples,
        seed,
        ordering_ok,
        diagnostics,
        per_sample,
    })
}
