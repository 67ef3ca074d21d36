use proptest::prelude::*;

use thinhom::expr::{parse, BinOp, Bindings, Expr, Func, Var};
use thinhom::fem::{solve_tridiagonal, CsrMatrix};
use thinhom::geometry::{build_partition, Bounds, ProfileSpec};
use thinhom::homogenize::{EffectiveRow, EffectiveTable};
use thinhom::unfolding::{unfold, FnField, ThinDomain, UnfoldGrid};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-5.0..5.0f64).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
        Just(Expr::Pi),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Y)),
    ]
}

fn any_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (
                prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Abs),
                    Just(Func::Sqrt)
                ],
                inner.clone()
            )
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn smooth_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 20, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos)], inner.clone())
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)],
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

proptest! {
    #[test]
    fn printed_expressions_reparse_to_the_same_function(e in any_expr(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let printed = e.to_string();
        let back = parse(&printed, &[Var::X, Var::Y]).unwrap();
        let at = Bindings::xy(x, y);
        match (e.eval(&at), back.eval(&at)) {
            (Ok(a), Ok(b)) => prop_assert!(same(a, b), "{printed}: {a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{printed}: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn derivatives_match_central_differences(e in smooth_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let h = 1e-6;
        for (var, dx, dy) in [(Var::X, h, 0.0), (Var::Y, 0.0, h)] {
            let d = e.diff(var).unwrap().eval(&Bindings::xy(x, y)).unwrap();
            let plus = e.eval(&Bindings::xy(x + dx, y + dy)).unwrap();
            let minus = e.eval(&Bindings::xy(x - dx, y - dy)).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let scale = 1.0 + d.abs() + plus.abs();
            prop_assert!((d - fd).abs() <= 1e-5 * scale, "{e}: d{} = {d}, fd = {fd}", var.name());
        }
    }

    #[test]
    fn partitions_satisfy_invariants(eps in 1e-3..0.25f64, quadratic in any::<bool>()) {
        let (g, l, bounds) = if quadratic {
            ("2", "1+0.5*x*(1-x)", Bounds::new(1.0, 3.0, 1.0, 1.25).unwrap())
        } else {
            ("2", "1+0.3*sin(2*pi*x)", Bounds::new(1.0, 3.0, 0.6, 1.4).unwrap())
        };
        let spec = ProfileSpec::parse(g, l, bounds).unwrap();
        let p = build_partition(&spec, eps).unwrap();
        let violations = p.invariant_violations(&spec, 1e-9);
        prop_assert!(violations.is_empty(), "{violations:?}");
    }

    #[test]
    fn tridiagonal_solve_has_small_residual(
        values in prop::collection::vec((0.1..1.0f64, -1.0..1.0f64), 2..40)
    ) {
        let n = values.len();
        let lower: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { -values[i].0 * 0.45 }).collect();
        let diag = vec![1.0; n];
        let rhs: Vec<f64> = values.iter().map(|v| v.1).collect();
        let u = solve_tridiagonal(&lower, &diag, &rhs).unwrap();
        for i in 0..n {
            let mut r = diag[i] * u[i] - rhs[i];
            if i > 0 {
                r += lower[i] * u[i - 1];
            }
            if i + 1 < n {
                r += lower[i + 1] * u[i + 1];
            }
            prop_assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn csr_matches_dense(triplets in prop::collection::vec((0..6usize, 0..6usize, -3.0..3.0f64), 0..40)) {
        let a = CsrMatrix::from_triplets(6, &triplets);
        let mut dense = [[0.0; 6]; 6];
        for &(i, j, v) in &triplets {
            dense[i][j] += v;
        }
        let x: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let y = a.mul_vec(&x);
        for i in 0..6 {
            let expected: f64 = (0..6).map(|j| dense[i][j] * x[j]).sum();
            prop_assert!((y[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn table_interpolation_stays_between_rows(rs in prop::collection::vec(0.1..5.0f64, 8), x in 0.0..1.0f64) {
        let rows = rs
            .iter()
            .enumerate()
            .map(|(j, &r)| EffectiveRow { x: (j as f64 + 0.5) / 8.0, r, p: 2.0, l: 1.0, f0: 0.0 })
            .collect();
        let table = EffectiveTable::new(rows);
        let r = table.eval(x).r;
        let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().copied().fold(0.0, f64::max);
        prop_assert!(r >= lo && r <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unfolding_is_linear_and_multiplicative(a in -3.0..3.0f64, b in -3.0..3.0f64, k in 3u32..12) {
        let spec = ProfileSpec::parse(
            "2 + cos(2*pi*y/(1+0.5*x*(1-x)))",
            "1+0.5*x*(1-x)",
            Bounds::new(1.0, 3.0, 1.0, 1.25).unwrap(),
        )
        .unwrap();
        let eps = 1.0 / f64::from(k);
        let eps = eps.min(0.25);
        let p = build_partition(&spec, eps).unwrap();
        let grid = UnfoldGrid::new(&spec, 32, 8, 8).unwrap();
        let domain = ThinDomain::new(spec, eps);
        let phi = |x: f64, y: f64| (3.0 * x).sin() + y;
        let psi = |x: f64, y: f64| x * x - 2.0 * y;
        let tp = unfold(&FnField::new(domain.clone(), phi), &p, &grid).unwrap();
        let ts = unfold(&FnField::new(domain.clone(), psi), &p, &grid).unwrap();
        let lin = unfold(&FnField::new(domain.clone(), move |x, y| a * phi(x, y) + b * psi(x, y)), &p, &grid).unwrap();
        let prod = unfold(&FnField::new(domain, move |x, y| phi(x, y) * psi(x, y)), &p, &grid).unwrap();
        for i in 0..grid.len() {
            prop_assert_eq!(lin.values[i], a * tp.values[i] + b * ts.values[i]);
            prop_assert_eq!(prod.values[i], tp.values[i] * ts.values[i]);
        }
    }
}
