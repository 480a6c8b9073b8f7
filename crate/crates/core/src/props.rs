//! Self-checks run by the `props` command against whatever problem the
//! configuration describes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{
    apply_operator_a, energy, energy_gradient, nehari_energy_lower_bound, DEFAULT_FLOOR,
};
use crate::fibering::{eta, fiber_roots, fiber_terms, psi_derivatives, FiberRoots, FiberTerms};
use crate::model::Model;
use crate::solver::{project_to_nehari, Branch};
use crate::space::{modular_breakdown, norm_circ, norm_custom, norm_star, DiscreteFunction};
use crate::sweep::tangency_lambda;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropOutcome {
    pub name: &'static str,
    pub checks: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

struct Tally {
    name: &'static str,
    checks: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checks: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn done(self) -> PropOutcome {
        PropOutcome {
            name: self.name,
            checks: self.checks,
            failures: self.failures,
            first_failure: self.first_failure,
        }
    }
}

/// Random function with values in `scale·[lo, 1)`.
fn random_fn(model: &Model, rng: &mut ChaCha8Rng, lo: f64, scale: f64) -> DiscreteFunction {
    DiscreteFunction::new(
        (0..model.node_count())
            .map(|_| scale * rng.gen_range(lo..1.0))
            .collect(),
    )
}

fn log_scale(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.gen_range(-2.0..2.0))
}

fn modular_norm(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("modular_norm_relations");
    let d = model.data();
    // exponents present in rho: p, q and the boundary power
    let lo_exp = d.p.min(d.p_lower_star);
    let hi_exp = d.q.max(d.p_lower_star);
    let slack = 1e-12;
    for _ in 0..n {
        let s = log_scale(rng);
        let u = random_fn(model, rng, -1.0, s);
        let Ok(nrm) = norm_custom(model, &u) else {
            t.check(false, || "norm failed".into());
            continue;
        };
        let rho = modular_breakdown(model, &u).rho();
        let (lo, hi) = if nrm < 1.0 {
            (nrm.powf(hi_exp), nrm.powf(lo_exp))
        } else {
            (nrm.powf(lo_exp), nrm.powf(hi_exp))
        };
        t.check(
            lo <= rho * (1.0 + slack) && rho <= hi * (1.0 + slack),
            || format!("norm {nrm}, rho {rho} outside [{lo}, {hi}]"),
        );
        t.check(
            (nrm < 1.0) == (rho < 1.0) || (rho - 1.0).abs() < 1e-10,
            || format!("norm {nrm} and rho {rho} on different sides of 1"),
        );
        let unit = modular_breakdown(model, &u.scaled(1.0 / nrm)).rho();
        t.check((unit - 1.0).abs() <= 1e-10, || {
            format!("rho(u/|u|) = {unit}")
        });
    }
    t.done()
}

fn norm_sandwich(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("equivalent_norms");
    for _ in 0..n {
        let s = log_scale(rng);
        let u = random_fn(model, rng, -1.0, s);
        match (
            norm_circ(model, &u),
            norm_star(model, &u),
            norm_custom(model, &u),
        ) {
            (Ok(c), Ok(st), Ok(cu)) => {
                t.check(
                    c / 3.0 <= st * (1.0 + 1e-12) && st <= 3.0 * c * (1.0 + 1e-12),
                    || format!("circ {c}, star {st}"),
                );
                t.check((cu - st).abs() <= 1e-12 * st, || {
                    format!("custom {cu} vs star {st}")
                });
            }
            _ => t.check(false, || "norm evaluation failed".into()),
        }
    }
    t.done()
}

fn monotonicity(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("operator_monotone");
    for _ in 0..n {
        let u = random_fn(model, rng, -1.0, 1.0);
        let v = random_fn(model, rng, -1.0, 1.0);
        let diff = DiscreteFunction::new(
            u.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a - b)
                .collect(),
        );
        let val = apply_operator_a(model, &u, &diff) - apply_operator_a(model, &v, &diff);
        t.check(val > 0.0, || format!("<A(u)-A(v), u-v> = {val}"));
    }
    t.done()
}

fn gradient_fd(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("energy_gradient_fd");
    let lambda = model.data().lambda;
    let h = 1e-6;
    for _ in 0..n {
        let u = DiscreteFunction::new(
            (0..model.node_count())
                .map(|_| rng.gen_range(0.1..1.0))
                .collect(),
        );
        let g = energy_gradient(model, &u, lambda, DEFAULT_FLOOR).values;
        let i = rng.gen_range(0..model.node_count());
        let mut up = u.clone();
        up.values_mut()[i] += h;
        let mut dn = u.clone();
        dn.values_mut()[i] -= h;
        let fd = (energy(model, &up, lambda).total - energy(model, &dn, lambda).total) / (2.0 * h);
        t.check((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), || {
            format!("node {i}: fd {fd} vs {}", g[i])
        });
    }
    t.done()
}

fn random_terms(model: &Model, rng: &mut ChaCha8Rng) -> FiberTerms {
    let mut r = || 10f64.powf(rng.gen_range(-2.0..1.0));
    FiberTerms::new(r(), r(), r(), r(), r(), model.exponents())
}

fn fiber_identity(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("fiber_identity");
    let q1 = model.data().q1;
    for _ in 0..n {
        let ft = random_terms(model, rng);
        let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
        let x = 10f64.powf(rng.gen_range(-1.0..1.0));
        let (_, d1, _) = psi_derivatives(&ft, lambda, x).expect("t > 0");
        let rhs = x.powf(q1 - 1.0) * (eta(&ft, x).expect("t > 0") - lambda * ft.e);
        let xp = model.exponents();
        let magnitude = ft.a * x.powf(xp.p - q1)
            + ft.b * x.powf(xp.q - q1)
            + ft.c * x.powf(xp.p_lower_star - q1)
            + ft.d * x.powf(1.0 - q1 - xp.kappa)
            + lambda * ft.e;
        let scale = x.powf(q1 - 1.0) * magnitude;
        t.check((d1 - rhs).abs() <= 1e-12 * scale, || {
            format!("psi' {d1} vs {rhs}")
        });
    }
    t.done()
}

fn root_structure(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("fiber_root_structure");
    for _ in 0..n {
        let u = random_fn(model, rng, 0.0, 1.0);
        let Some(threshold) = tangency_lambda(model, &u) else {
            t.check(false, || "degenerate direction".into());
            continue;
        };
        let lambda = 0.5 * threshold;
        let ft = fiber_terms(model, &u);
        match fiber_roots(&ft, lambda) {
            Ok(FiberRoots::Two { t1, t_circ, t2 }) => {
                let d1 = psi_derivatives(&ft, lambda, t1).unwrap().2;
                let d2 = psi_derivatives(&ft, lambda, t2).unwrap().2;
                t.check(t1 < t_circ && t_circ < t2 && d1 > 0.0 && d2 < 0.0, || {
                    format!("t1 {t1}, t0 {t_circ}, t2 {t2}, psi'' {d1} / {d2}")
                });
            }
            other => t.check(false, || format!("expected two roots, got {other:?}")),
        }
    }
    t.done()
}

fn lambda_monotone(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("energy_decreasing_in_lambda");
    for _ in 0..n {
        let s = log_scale(rng);
        let u = random_fn(model, rng, -1.0, s);
        let l1 = rng.gen_range(0.0..2.0);
        let l2 = l1 + rng.gen_range(1e-3..2.0);
        let (e1, e2) = (energy(model, &u, l1).total, energy(model, &u, l2).total);
        t.check(e1 > e2, || {
            format!("theta({l1}) = {e1}, theta({l2}) = {e2}")
        });
        let flipped = energy(model, &u.scaled(-1.0), l1).total;
        t.check(flipped == e1, || format!("theta(-u) = {flipped} vs {e1}"));
    }
    t.done()
}

fn nehari_coercivity(model: &Model, rng: &mut ChaCha8Rng, n: usize) -> PropOutcome {
    let mut t = Tally::new("nehari_lower_bound");
    let lambda = model.data().lambda;
    for _ in 0..n {
        let u = random_fn(model, rng, 0.0, 1.0);
        for branch in [Branch::Plus, Branch::Minus] {
            let Ok(v) = project_to_nehari(model, &u, lambda, branch) else {
                continue;
            };
            let b = modular_breakdown(model, &v);
            let theta = energy(model, &v, lambda).total;
            let bound = nehari_energy_lower_bound(model, &b);
            t.check(theta >= bound - 1e-9 * theta.abs().max(1.0), || {
                format!("theta {theta} below bound {bound}")
            });
        }
    }
    t.done()
}

/// Runs every suite with `n` samples each (fewer for the costly ones).
pub fn run_properties(model: &Model, seed: u64, n: usize) -> Vec<PropOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        modular_norm(model, &mut rng, n),
        norm_sandwich(model, &mut rng, n),
        monotonicity(model, &mut rng, n),
        gradient_fd(model, &mut rng, n.min(50)),
        fiber_identity(model, &mut rng, n),
        root_structure(model, &mut rng, n),
        lambda_monotone(model, &mut rng, n),
        nehari_coercivity(model, &mut rng, n.min(50)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::problem::ProblemData;

    #[test]
    fn all_pass_on_preset() {
        let m = Model::new(
            build_rect_mesh(4, 4, [0.0, 0.0, 1.0, 1.0]).unwrap(),
            ProblemData::preset(0.1),
        )
        .unwrap();
        for o in run_properties(&m, 11, 40) {
            assert!(o.passed(), "{o:?}");
        }
    }
}
