mod common;

use common::{coarse, fit};
use doublephase::space::{
    luxemburg_norm, modular_breakdown, norm_1p, norm_circ, norm_custom, norm_star, PowerSum,
};
use doublephase::DiscreteFunction;
use proptest::prelude::*;

fn scaled(values: &[f64], log10: f64) -> DiscreteFunction {
    fit(coarse(), values).scaled(10f64.powf(log10))
}

fn nonzero() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 25)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn norm_of_one_matches_scalar_equation() {
    let m = coarse();
    let tau = bisect(|t| t.powf(-1.5) + 4.0 * t.powi(-3) - 1.0, 1.0, 3.0);
    let u = DiscreteFunction::constant(m.mesh(), 1.0);
    assert!((norm_custom(m, &u).unwrap() - tau).abs() < 1e-10);
    assert!((norm_star(m, &u).unwrap() - tau).abs() < 1e-10);
    assert_eq!(
        norm_custom(m, &DiscreteFunction::zeros(m.mesh())).unwrap(),
        0.0
    );
}

#[test]
fn norm_1p_closed_forms() {
    let m = coarse();
    let u = DiscreteFunction::constant(m.mesh(), 3.0);
    assert!((norm_1p(m, &u) - 3.0).abs() < 1e-12);
    assert!(
        (norm_circ(m, &DiscreteFunction::constant(m.mesh(), 1.0)).unwrap() - (1.0 + 4f64.cbrt()))
            .abs()
            < 1e-12
    );
}

#[test]
fn luxemburg_of_power_sum() {
    let s = PowerSum::new().term(2.0, 1.5).term(0.5, 3.0);
    let tau = luxemburg_norm(|t| s.at_scale(t)).unwrap();
    assert!((s.at_scale(tau) - 1.0).abs() <= 1e-12);
}

#[test]
fn monotone_sequences_drive_norm_and_modular_together() {
    let m = coarse();
    let u = fit(m, &[0.3, -0.7, 0.9, 0.1, -0.2]);
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for n in 1..=6 {
        let v = u.scaled(10f64.powi(-n));
        let cur = (norm_custom(m, &v).unwrap(), modular_breakdown(m, &v).rho());
        assert!(cur.0 < prev.0 && cur.1 < prev.1);
        prev = cur;
    }
    assert!(prev.0 < 1e-5 && prev.1 < 1e-7);
    let mut prev = (0.0, 0.0);
    for n in 1..=6 {
        let v = u.scaled(10f64.powi(n));
        let cur = (norm_custom(m, &v).unwrap(), modular_breakdown(m, &v).rho());
        assert!(cur.0 > prev.0 && cur.1 > prev.1);
        prev = cur;
    }
    assert!(prev.0 > 1e5 && prev.1 > 1e7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn modular_norm_relations(v in nonzero(), s in -2.0f64..2.0) {
        let m = coarse();
        let d = m.data();
        let u = scaled(&v, s);
        let nrm = norm_custom(m, &u).unwrap();
        let rho = modular_breakdown(m, &u).rho();
        let unit = modular_breakdown(m, &u.scaled(1.0 / nrm)).rho();
        prop_assert!((unit - 1.0).abs() <= 1e-10);
        prop_assert_eq!(nrm < 1.0, rho < 1.0);
        // the boundary power sits outside [p, q] for the preset
        let (lo_e, hi_e) = (d.p.min(d.p_lower_star), d.q.max(d.p_lower_star));
        let (lo, hi) = if nrm < 1.0 { (nrm.powf(hi_e), nrm.powf(lo_e)) } else { (nrm.powf(lo_e), nrm.powf(hi_e)) };
        prop_assert!(lo <= rho * (1.0 + 1e-12) && rho <= hi * (1.0 + 1e-12), "{} {} {} {}", nrm, rho, lo, hi);
    }

    #[test]
    fn equivalent_norm_sandwich(v in nonzero(), s in -2.0f64..2.0) {
        let m = coarse();
        let u = scaled(&v, s);
        let c = norm_circ(m, &u).unwrap();
        let st = norm_star(m, &u).unwrap();
        prop_assert!(c / 3.0 <= st * (1.0 + 1e-12) && st <= 3.0 * c * (1.0 + 1e-12));
        prop_assert!((norm_custom(m, &u).unwrap() - st).abs() <= 1e-12 * st);
    }

    #[test]
    fn norm_circ_is_a_norm(a in nonzero(), b in nonzero(), c in -5.0f64..5.0) {
        let m = coarse();
        let (u, v) = (fit(m, &a), fit(m, &b));
        let nu = norm_circ(m, &u).unwrap();
        prop_assert!((norm_circ(m, &u.scaled(c)).unwrap() - c.abs() * nu).abs() <= 1e-10 * nu.max(1.0));
        let w = DiscreteFunction::new(u.values().iter().zip(v.values()).map(|(x, y)| x + y).collect());
        prop_assert!(norm_circ(m, &w).unwrap() <= nu + norm_circ(m, &v).unwrap() + 1e-10);
    }

    #[test]
    fn luxemburg_homogeneity(v in nonzero()) {
        let m = coarse();
        let u = fit(m, &v);
        let n1 = norm_custom(m, &u).unwrap();
        let n2 = norm_custom(m, &u.scaled(2.5)).unwrap();
        prop_assert!((n2 - 2.5 * n1).abs() <= 1e-10 * n2);
    }
}
