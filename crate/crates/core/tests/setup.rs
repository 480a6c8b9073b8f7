use doublephase::coeff_expr::{eval_expr, parse_expr};
use doublephase::problem::{critical_exponents, validate_hypotheses, SamplePoints};
use doublephase::{build_rect_mesh, CoefficientField, ProblemData};
use proptest::prelude::*;

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (0.0f64..10.0).prop_map(|c| format!("{c}")),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (
                inner.clone(),
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*", "/", "^"])
            )
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (
                inner,
                prop::sample::select(vec!["abs", "exp", "sin", "cos", "sqrt"])
            )
                .prop_map(|(a, f)| format!("{f}({a})")),
        ]
    })
}

fn data(p: f64, q: f64, kappa: f64, q1: f64) -> ProblemData {
    let one = CoefficientField::constant(1.0);
    ProblemData::new(
        p,
        q,
        2,
        kappa,
        q1,
        0.1,
        CoefficientField::parse("x").unwrap(),
        one.clone(),
        one.clone(),
        one,
    )
}

proptest! {
    #[test]
    fn print_parse_round_trip(src in expr()) {
        let ast = parse_expr(&src).unwrap();
        let again = parse_expr(&ast.to_string()).unwrap();
        prop_assert_eq!(&ast, &again);
        for pt in [(0.0, 0.0), (0.3, 0.7), (1.0, 1.0)] {
            let (a, b) = (eval_expr(&ast, pt), eval_expr(&again, pt));
            prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
            if let Ok(v) = a {
                prop_assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn critical_exponents_increase_with_p(p in 1.01f64..1.9, dp in 0.001f64..0.09) {
        let (a, b) = critical_exponents(p, 2).unwrap();
        let (c, d) = critical_exponents(p + dp, 2).unwrap();
        prop_assert!(c > a && d > b);
    }

    #[test]
    fn valid_data_orders_exponents(p in 1.05f64..1.95, dq in 0.0f64..1.0, kappa in 0.01f64..0.99, dq1 in 0.0f64..1.0) {
        let (ps, pls) = critical_exponents(p, 2).unwrap();
        let q = p + 0.999 * dq * (2.0 - p);
        let floor = pls.max(q);
        let q1 = floor + (0.001 + 0.998 * dq1) * (ps - floor);
        let d = data(p, q, kappa, q1);
        let mesh = build_rect_mesh(4, 4, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let report = validate_hypotheses(&d, &SamplePoints::from_mesh(&mesh));
        if report.ok {
            prop_assert!(q1 + kappa - 1.0 > q1 - p);
            prop_assert!(q1 - p > q1 - q);
            prop_assert!(q1 - q > 0.0);
            prop_assert!(q1 - d.p_lower_star > 0.0);
        }
    }

    #[test]
    fn gradients_reproduce_affine_functions(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, nx in 1usize..8, ny in 1usize..8) {
        let mesh = build_rect_mesh(nx, ny, [-1.0, 0.5, 2.0, 3.0]).unwrap();
        let vals: Vec<f64> = mesh.nodes().iter().map(|&[x, y]| a + b * x + c * y).collect();
        for g in mesh.gradients(&vals) {
            prop_assert!((g[0] - b).abs() <= 1e-13 * (1.0 + b.abs()) * 10.0);
            prop_assert!((g[1] - c).abs() <= 1e-13 * (1.0 + c.abs()) * 10.0);
        }
        let area: f64 = mesh.node_weights().iter().sum();
        let perimeter: f64 = mesh.boundary_weights().iter().sum();
        prop_assert!((area - 7.5).abs() < 1e-12);
        prop_assert!((perimeter - 11.0).abs() < 1e-12);
    }
}
