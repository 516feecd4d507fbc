use proptest::prelude::*;
use wgfh_core::expr::{parse, parse_bytes, BinOp, Bindings, EvalError, Expr, Func, ParseError, Var};

fn at(src: &str, pairs: &[(&str, f64)]) -> Result<f64, EvalError> {
    let e = parse(src).unwrap();
    e.eval(&Bindings::from_pairs(pairs).unwrap())
}

#[test]
fn test_parse_mobility_formula() {
    let v = at("2 + sin(2*pi*y)", &[("y", 0.25)]).unwrap();
    assert!((v - 3.0).abs() < 1e-15);
}

#[test]
fn test_parse_precedence() {
    assert_eq!(at("-2^2", &[]).unwrap(), -4.0);
    assert_eq!(at("2^3^2", &[]).unwrap(), 512.0);
    assert_eq!(at("2^-1", &[]).unwrap(), 0.5);
    assert_eq!(at("1 - 2 - 3", &[]).unwrap(), -4.0);
    assert_eq!(at("8 / 4 / 2", &[]).unwrap(), 1.0);
    assert_eq!(at("1 + 2 * 3", &[]).unwrap(), 7.0);
    assert_eq!(at("-x * 3", &[("x", 2.0)]).unwrap(), -6.0);
    assert_eq!(at("min(3, max(1, 2))", &[]).unwrap(), 2.0);
    assert_eq!(at("1.5e2 + .5", &[]).unwrap(), 150.5);
}

#[test]
fn test_parse_unclosed_call_offset() {
    match parse("sin(") {
        Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn test_parse_unknown_identifier_lists_names() {
    let err = parse("2 + foo(y)").unwrap_err();
    match &err {
        ParseError::UnknownIdentifier { name, offset } => {
            assert_eq!(name, "foo");
            assert_eq!(*offset, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
    let msg = err.to_string();
    for name in ["x1", "y2", "sqrt", "pi", "max"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn test_parse_trailing_garbage() {
    assert!(matches!(parse("1 2"), Err(ParseError::Syntax { offset: 2, .. })));
    assert!(matches!(parse("(1"), Err(ParseError::Syntax { offset: 2, .. })));
    assert!(matches!(parse(""), Err(ParseError::Syntax { offset: 0, .. })));
    assert!(matches!(parse("1.2.3"), Err(ParseError::InvalidNumber { offset: 0, .. })));
    assert!(matches!(parse("max(1)"), Err(ParseError::Syntax { offset: 5, .. })));
}

#[test]
fn test_parse_deep_nesting_is_an_error() {
    let src = "(".repeat(100_000);
    assert!(matches!(parse(&src), Err(ParseError::TooDeep { .. })));
    let src = "-".repeat(100_000) + "1";
    assert!(matches!(parse(&src), Err(ParseError::TooDeep { .. })));
}

#[test]
fn test_parse_bad_utf8() {
    assert!(matches!(parse_bytes(&[b'1', 0xff]), Err(ParseError::Encoding { offset: 1 })));
}

#[test]
fn test_eval_errors() {
    assert!(matches!(at("log(-1)", &[]), Err(EvalError::Domain { op: "log", .. })));
    assert!(matches!(at("log(0)", &[]), Err(EvalError::Domain { op: "log", .. })));
    assert!(matches!(at("sqrt(-0.5)", &[]), Err(EvalError::Domain { op: "sqrt", .. })));
    assert_eq!(at("1/0", &[]), Err(EvalError::DivisionByZero));
    assert_eq!(at("x + 1", &[]), Err(EvalError::Unbound("x")));
    assert!(matches!(at("exp(1000)", &[]), Err(EvalError::NonFinite { .. })));
    assert!(matches!(at("(-2)^0.5", &[]), Err(EvalError::Domain { op: "^", .. })));
    assert!(Bindings::from_pairs(&[("z", 1.0)]).is_err());
}

#[test]
fn test_dependency_queries() {
    let e = parse("x1 + sin(y2)").unwrap();
    assert!(e.depends_on_slow() && e.depends_on_fast());
    assert!(!parse("2 + cos(2*pi*y)").unwrap().depends_on_slow());
    assert!(e.uses(Var::Y2) && !e.uses(Var::Y1));
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-1e3f64..1e3).prop_map(Expr::Num),
        (0u32..20).prop_map(|k| Expr::Num(k as f64 * 0.25)),
        Just(Expr::Pi),
        prop::sample::select(Var::ALL.to_vec()).prop_map(Expr::Var),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (
                prop::sample::select(vec![
                    Func::Sin,
                    Func::Cos,
                    Func::Exp,
                    Func::Log,
                    Func::Sqrt,
                    Func::Abs
                ]),
                inner.clone()
            )
                .prop_map(|(f, a)| Expr::call(f, a)),
            (
                prop::sample::select(vec![
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Mul,
                    BinOp::Div,
                    BinOp::Pow,
                    BinOp::Min,
                    BinOp::Max
                ]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
        ]
    })
}

fn all_bound(v: f64) -> Bindings {
    let mut b = Bindings::new();
    for (k, var) in Var::ALL.iter().enumerate() {
        b.set(*var, v + 0.1 * k as f64);
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prop_print_parse_round_trip(e in tree(), v in -2.0f64..2.0) {
        let src = e.to_source();
        let back = parse(&src).unwrap();
        prop_assert_eq!(back.to_source(), src.clone());
        let b = all_bound(v);
        match (e.eval(&b), back.eval(&b)) {
            (Ok(a), Ok(c)) => prop_assert_eq!(a.to_bits(), c.to_bits()),
            (Err(a), Err(c)) => prop_assert_eq!(a, c),
            (a, c) => prop_assert!(false, "{src}: {a:?} vs {c:?}"),
        }
    }

    #[test]
    fn prop_parse_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = parse_bytes(&bytes);
    }

    #[test]
    fn prop_parse_never_panics_on_token_soup(
        parts in prop::collection::vec(
            prop::sample::select(vec!["(", ")", "-", "+", "*", "/", "^", ",", "sin", "min", "x", "1", "2.5e-3", "pi", " ", "y2", "."]),
            0..40,
        )
    ) {
        let src: String = parts.concat();
        if let Ok(e) = parse(&src) {
            let _ = e.eval(&all_bound(0.3));
        }
    }
}
