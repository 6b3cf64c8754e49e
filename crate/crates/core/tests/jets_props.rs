use gauge_forge::verifier::{finite_difference_oracle, AD_CORPUS};
use gauge_forge::{FieldExpr, Jet, Order, SpacetimePoint, C64};
use proptest::prelude::*;

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    (*a - *b).max_abs() <= tol * (1.0 + a.max_abs() + b.max_abs())
}

fn point() -> impl Strategy<Value = SpacetimePoint> {
    prop::array::uniform4(-1.0f64..1.0).prop_map(SpacetimePoint)
}

fn coeff() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| C64::new(r, i))
}

fn expr() -> impl Strategy<Value = FieldExpr> {
    let leaf = prop_oneof![
        coeff().prop_map(FieldExpr::Literal),
        (0u8..4).prop_map(FieldExpr::Coord),
        Just(FieldExpr::ImagUnit),
        Just(FieldExpr::Pi),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| FieldExpr::Neg(Box::new(e))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FieldExpr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FieldExpr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FieldExpr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), 0i32..4).prop_map(|(a, n)| FieldExpr::Pow(Box::new(a), n)),
            inner
                .clone()
                .prop_map(|e| FieldExpr::Call(gauge_forge::fieldexpr::Func::Sin, Box::new(e))),
            inner
                .clone()
                .prop_map(|e| FieldExpr::Call(gauge_forge::fieldexpr::Func::Conj, Box::new(e))),
        ]
    })
}

fn jet(p: &SpacetimePoint, c: [C64; 3]) -> Jet {
    let x = |mu| Jet::seed_coordinate(mu, p, Order::Two);
    (x(0) * x(1)).scale(c[0]) + x(2).sin().scale(c[1]) + (x(3) * x(3) * x(0)).scale(c[2])
}

proptest! {
    #[test]
    fn product_is_associative_and_distributive(p in point(), c in prop::array::uniform3(coeff()), d in prop::array::uniform3(coeff()), e in prop::array::uniform3(coeff())) {
        let (a, b, c) = (jet(&p, c), jet(&p, d), jet(&p, e));
        prop_assert!(close(&((a * b) * c), &(a * (b * c)), 1e-13));
        prop_assert!(close(&(a * (b + c)), &(a * b + a * c), 1e-13));
    }

    #[test]
    fn leibniz_rule(p in point(), c in prop::array::uniform3(coeff()), d in prop::array::uniform3(coeff()), mu in 0usize..4) {
        let (a, b) = (jet(&p, c), jet(&p, d));
        let lhs = (a * b).partial(mu).unwrap();
        let rhs = a.partial(mu).unwrap() * b + a * b.partial(mu).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-13));
    }

    #[test]
    fn conj_is_involutive_and_multiplicative(p in point(), c in prop::array::uniform3(coeff()), d in prop::array::uniform3(coeff())) {
        let (a, b) = (jet(&p, c), jet(&p, d));
        prop_assert_eq!(a.conj().conj(), a);
        prop_assert!(close(&(a * b).conj(), &(a.conj() * b.conj()), 1e-14));
    }

    #[test]
    fn trig_and_exp_identities(p in point(), c in prop::array::uniform3(coeff()), d in prop::array::uniform3(coeff())) {
        let (a, b) = (jet(&p, c), jet(&p, d));
        let s = a.sin();
        let co = a.cos();
        prop_assert!(close(&(s * s + co * co), &Jet::one(Order::Two), 1e-12));
        prop_assert!(close(&(a + b).exp(), &(a.exp() * b.exp()), 1e-12));
    }

    #[test]
    fn division_inverts_multiplication(p in point(), c in prop::array::uniform3(coeff())) {
        let a = jet(&p, c);
        let b = Jet::real(2.0, Order::Two) + Jet::seed_coordinate(1, &p, Order::Two).sin();
        let back = (a * b).try_div(&b).unwrap();
        prop_assert!(close(&back, &a, 1e-13));
    }

    #[test]
    fn print_then_parse_is_identity(e in expr()) {
        let printed = e.print();
        let back = FieldExpr::parse(&printed).unwrap();
        prop_assert_eq!(back.print(), printed);
    }

    #[test]
    fn printed_expression_evaluates_identically(e in expr(), p in point()) {
        let back = FieldExpr::parse(&e.print()).unwrap();
        let (x, y) = (e.eval(&p, Order::Two), back.eval(&p, Order::Two));
        if let (Ok(x), Ok(y)) = (x, y) {
            prop_assert!(close(&x, &y, 1e-13));
        }
    }
}

#[test]
fn corpus_matches_central_differences() {
    let exprs: Vec<FieldExpr> = AD_CORPUS
        .iter()
        .map(|s| FieldExpr::parse(s).unwrap())
        .collect();
    let points = [
        SpacetimePoint([0.1, -0.3, 0.7, 0.2]),
        SpacetimePoint([-0.8, 0.5, -0.1, 0.9]),
        SpacetimePoint([0.4, 0.4, -0.6, -0.5]),
    ];
    let err = finite_difference_oracle(&exprs, &points, 1e-4).unwrap();
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn truncation_follows_lower_order() {
    let p = SpacetimePoint([0.3, 0.1, -0.2, 0.5]);
    let a = Jet::seed_coordinate(0, &p, Order::Two);
    let b = Jet::seed_coordinate(1, &p, Order::One);
    assert_eq!((a * b).order(), Order::One);
    assert_eq!(a.partial(0).unwrap().order(), Order::One);
    assert!(Jet::real(1.0, Order::Zero).partial(0).is_err());
}
