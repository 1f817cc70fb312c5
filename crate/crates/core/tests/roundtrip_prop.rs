//! Property: pretty-printing then reparsing is the identity on ASTs.

use proptest::prelude::*;

use stipula_core::ast::*;
use stipula_core::fixed::Fixed4;
use stipula_core::parser::parse_contract;
use stipula_core::pretty::pretty;
use stipula_core::span::Span;

fn nm(options: &'static [&'static str]) -> impl Strategy<Value = String> {
    proptest::sample::select(options).prop_map(|s| s.to_string())
}

fn assets() -> impl Strategy<Value = String> {
    nm(&["h1", "h2"])
}

fn fields() -> impl Strategy<Value = String> {
    nm(&["x1", "x2"])
}

fn parties() -> impl Strategy<Value = String> {
    nm(&["P1", "P2"])
}

fn states() -> impl Strategy<Value = String> {
    nm(&["Q0", "Q1", "Q2"])
}

fn real_literal() -> impl Strategy<Value = Fixed4> {
    (0i128..2_000_000).prop_map(Fixed4::from_raw)
}

fn string_literal() -> impl Strategy<Value = String> {
    proptest::sample::select(&["", "hi", "a b_c", "q\"uote", "back\\slash"][..])
        .prop_map(|s| s.to_string())
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(ExprKind::Now),
        real_literal().prop_map(ExprKind::Real),
        string_literal().prop_map(ExprKind::Str),
        any::<bool>().prop_map(ExprKind::Bool),
        prop_oneof![assets(), fields(), parties()].prop_map(ExprKind::Name),
        (
            prop_oneof![Just(IntrinsicKind::Uses), Just(IntrinsicKind::UseOnce)],
            assets(),
            proptest::option::of(parties())
        )
            .prop_map(|(k, a, p)| ExprKind::Intrinsic(k, a, p)),
    ]
    .prop_map(|kind| Expr {
        kind,
        span: Span::default(),
    });
    leaf.prop_recursive(3, 24, 2, |inner| {
        let bin = (inner.clone(), inner.clone());
        prop_oneof![
            (
                bin.clone(),
                prop_oneof![
                    Just(ArithOp::Add),
                    Just(ArithOp::Sub),
                    Just(ArithOp::Mul),
                    Just(ArithOp::Div)
                ]
            )
                .prop_map(|((a, b), op)| ExprKind::Arith(op, Box::new(a), Box::new(b))),
            (
                bin.clone(),
                prop_oneof![
                    Just(RelOp::Eq),
                    Just(RelOp::Ne),
                    Just(RelOp::Ge),
                    Just(RelOp::Le),
                    Just(RelOp::Gt),
                    Just(RelOp::Lt)
                ]
            )
                .prop_map(|((a, b), op)| ExprKind::Rel(op, Box::new(a), Box::new(b))),
            (bin.clone(), prop_oneof![Just(BoolOp::And), Just(BoolOp::Or)])
                .prop_map(|((a, b), op)| ExprKind::BoolOp(op, Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| ExprKind::Not(Box::new(a))),
            bin.prop_map(|(a, b)| ExprKind::Pair(Box::new(a), Box::new(b))),
        ]
        .prop_map(|kind| Expr {
            kind,
            span: Span::default(),
        })
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        (expr(), prop_oneof![fields(), parties()])
            .prop_map(|(value, dest)| StmtKind::Send { value, dest }),
        (expr(), assets(), prop_oneof![assets(), parties()]).prop_map(
            |(value, source, dest)| StmtKind::AssetTransfer {
                value,
                source,
                dest
            }
        ),
        (assets(), prop_oneof![assets(), parties()]).prop_map(|(source, dest)| {
            // abbreviated form: the whole cell moves
            StmtKind::AssetTransfer {
                value: Expr {
                    kind: ExprKind::Name(source.clone()),
                    span: Span::default(),
                },
                source,
                dest,
            }
        }),
    ]
    .prop_map(|kind| Stmt {
        kind,
        span: Span::default(),
    });
    leaf.prop_recursive(2, 12, 3, |inner| {
        (expr(), proptest::collection::vec(inner, 0..3))
            .prop_map(|(cond, body)| Stmt {
                kind: StmtKind::If { cond, body },
                span: Span::default(),
            })
    })
}

fn event() -> impl Strategy<Value = EventDecl> {
    (
        expr(),
        states(),
        proptest::collection::vec(stmt(), 0..3),
        states(),
    )
        .prop_map(|(guard_expr, guard_state, handler, next_state)| EventDecl {
            guard_expr,
            guard_state,
            handler,
            next_state,
            span: Span::default(),
        })
}

fn function(idx: usize) -> impl Strategy<Value = FunctionDecl> {
    (
        states(),
        parties(),
        proptest::bool::ANY, // value param?
        proptest::bool::ANY, // asset param?
        proptest::option::of(expr()),
        proptest::collection::vec(stmt(), 0..4),
        proptest::collection::vec(event(), 0..2),
        states(),
    )
        .prop_map(move |(guard, caller, vp, ap, pre, body, events, next)| FunctionDecl {
            guard_state: guard,
            caller,
            name: format!("f{idx}"),
            value_params: if vp { vec!["z1".into()] } else { vec![] },
            asset_params: if ap { vec!["y1".into()] } else { vec![] },
            precondition: pre,
            body,
            events,
            next_state: next,
            span: Span::default(),
        })
}

fn contract() -> impl Strategy<Value = ContractDecl> {
    (
        function(0),
        proptest::option::of(function(1)),
        proptest::bool::ANY,
    )
        .prop_map(|(f0, f1, two_groups)| {
            let mut functions = vec![f0];
            functions.extend(f1);
            let groups = if two_groups {
                vec![
                    AgreementGroup {
                        parties: vec!["P1".into()],
                        fields: vec!["x1".into()],
                        span: Span::default(),
                    },
                    AgreementGroup {
                        parties: vec!["P2".into()],
                        fields: vec!["x2".into()],
                        span: Span::default(),
                    },
                ]
            } else {
                vec![AgreementGroup {
                    parties: vec!["P1".into(), "P2".into()],
                    fields: vec!["x1".into(), "x2".into()],
                    span: Span::default(),
                }]
            };
            ContractDecl {
                name: "Gen".into(),
                assets: vec!["h1".into(), "h2".into()],
                fields: vec!["x1".into(), "x2".into()],
                agreement: AgreementDecl {
                    parties: vec!["P1".into(), "P2".into()],
                    init_fields: vec!["x1".into(), "x2".into()],
                    groups,
                    initial_state: "Q0".into(),
                    span: Span::default(),
                },
                functions,
                span: Span::default(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pretty_then_parse_is_identity(decl in contract()) {
        let printed = pretty(&decl);
        let reparsed = match parse_contract(&printed) {
            Ok(d) => d.normalized(),
            Err(e) => {
                return Err(TestCaseError::fail(format!("reparse failed: {e}\n{printed}")));
            }
        };
        prop_assert_eq!(decl.normalized(), reparsed, "printed:\n{}", printed);
    }
}
