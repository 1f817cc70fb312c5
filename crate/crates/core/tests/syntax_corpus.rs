//! Corpus-level syntax tests: shape assertions from the worked listings,
//! pretty-print round trips, grammar coverage, and one mutation per
//! well-formedness invariant.

mod common;

use common::*;
use stipula_core::ast::*;
use stipula_core::check::{check_wellformed, is_clean, lint_asset_drain};
use stipula_core::parser::parse_contract;
use stipula_core::pretty::pretty;
use stipula_core::span::Severity;

const CORPUS: [&str; 9] = [
    "bike_rental.stipula",
    "free_rent.stipula",
    "licence.stipula",
    "alea.stipula",
    "unordered_fg.stipula",
    "sequenced_fg.stipula",
    "hello_event.stipula",
    "bike_rental_renamed.stipula",
    "boolean_demo.stipula",
];

#[test]
fn corpus_parses_checks_clean_and_lints_quiet() {
    for name in CORPUS {
        let decl = load_contract(name); // asserts zero errors
        let warnings: Vec<_> = check_wellformed(&decl)
            .into_iter()
            .filter(|d| d.severity == Severity::Warning)
            .collect();
        assert!(warnings.is_empty(), "{name}: {warnings:?}");
        let drain = lint_asset_drain(&decl);
        assert!(drain.is_empty(), "{name}: {drain:?}");
    }
}

#[test]
fn bike_rental_shape() {
    let decl = load_contract("bike_rental.stipula");
    assert_eq!(decl.assets.len(), 1);
    assert_eq!(decl.fields.len(), 3);
    assert_eq!(decl.functions.len(), 3);
    assert_eq!(decl.agreement.parties, vec!["Lender", "Borrower"]);
    assert_eq!(decl.agreement.initial_state, "Inactive");
}

#[test]
fn licence_shape() {
    let decl = load_contract("licence.stipula");
    assert_eq!(decl.agreement.parties.len(), 3);
    let names: Vec<&str> = decl.functions.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(
        names,
        vec![
            "offerLicence",
            "activateLicence",
            "buy",
            "compensateLicensor",
            "compensateLicensee"
        ]
    );
}

#[test]
fn corpus_round_trips_through_the_pretty_printer() {
    for name in CORPUS {
        let decl = load_contract(name).normalized();
        let printed = pretty(&decl);
        let reparsed = parse_contract(&printed)
            .unwrap_or_else(|e| panic!("{name} reparse: {e}\n{printed}"))
            .normalized();
        assert_eq!(decl, reparsed, "{name}");
    }
}

/// Every production of the surface grammar is reachable from the corpus.
#[test]
fn grammar_coverage() {
    #[derive(Default, Debug)]
    struct Seen {
        empty_body: bool,
        field_or_value_send: bool,
        asset_move: bool,
        asset_send_shape: bool, // transfer with a second name (full form)
        conditional: bool,
        event: bool,
        empty_events: bool,
        now: bool,
        real: bool,
        string: bool,
        bool_lit: bool,
        name: bool,
        pair: bool,
        arith: bool,
        rel: bool,
        and: bool,
        or: bool,
        not: bool,
        uses: bool,
        uses_with_party: bool,
        use_once: bool,
        precondition: bool,
        value_params: bool,
        asset_params: bool,
    }

    fn walk_expr(e: &Expr, seen: &mut Seen) {
        match &e.kind {
            ExprKind::Now => seen.now = true,
            ExprKind::Real(_) => seen.real = true,
            ExprKind::Str(_) => seen.string = true,
            ExprKind::Bool(_) => seen.bool_lit = true,
            ExprKind::Name(_) => seen.name = true,
            ExprKind::Pair(a, b) => {
                seen.pair = true;
                walk_expr(a, seen);
                walk_expr(b, seen);
            }
            ExprKind::Arith(_, a, b) => {
                seen.arith = true;
                walk_expr(a, seen);
                walk_expr(b, seen);
            }
            ExprKind::Rel(_, a, b) => {
                seen.rel = true;
                walk_expr(a, seen);
                walk_expr(b, seen);
            }
            ExprKind::BoolOp(op, a, b) => {
                match op {
                    BoolOp::And => seen.and = true,
                    BoolOp::Or => seen.or = true,
                }
                walk_expr(a, seen);
                walk_expr(b, seen);
            }
            ExprKind::Not(a) => {
                seen.not = true;
                walk_expr(a, seen);
            }
            ExprKind::Intrinsic(kind, _, party) => {
                match kind {
                    IntrinsicKind::Uses => {
                        seen.uses = true;
                        if party.is_some() {
                            seen.uses_with_party = true;
                        }
                    }
                    IntrinsicKind::UseOnce => seen.use_once = true,
                }
            }
        }
    }

    fn walk_stmt(s: &Stmt, seen: &mut Seen) {
        match &s.kind {
            StmtKind::Send { value, .. } => {
                seen.field_or_value_send = true;
                walk_expr(value, seen);
            }
            StmtKind::AssetTransfer { value, source, .. } => {
                seen.asset_move = true;
                if !matches!(&value.kind, ExprKind::Name(n) if n == source) {
                    seen.asset_send_shape = true;
                }
                walk_expr(value, seen);
            }
            StmtKind::If { cond, body } => {
                seen.conditional = true;
                walk_expr(cond, seen);
                for inner in body {
                    walk_stmt(inner, seen);
                }
            }
        }
    }

    let mut seen = Seen::default();
    for name in CORPUS {
        let decl = load_contract(name);
        for f in &decl.functions {
            if f.body.is_empty() && f.events.is_empty() {
                seen.empty_body = true;
            }
            if f.events.is_empty() {
                seen.empty_events = true;
            }
            if f.precondition.is_some() {
                seen.precondition = true;
            }
            if !f.value_params.is_empty() {
                seen.value_params = true;
            }
            if !f.asset_params.is_empty() {
                seen.asset_params = true;
            }
            if let Some(p) = &f.precondition {
                walk_expr(p, &mut seen);
            }
            for s in &f.body {
                walk_stmt(s, &mut seen);
            }
            for w in &f.events {
                seen.event = true;
                walk_expr(&w.guard_expr, &mut seen);
                for s in &w.handler {
                    walk_stmt(s, &mut seen);
                }
            }
        }
    }

    let report = format!("{seen:?}");
    macro_rules! covered {
        ($($f:ident),+) => { $(assert!(seen.$f, concat!(stringify!($f), " not covered: {}"), report);)+ };
    }
    covered!(
        empty_body,
        field_or_value_send,
        asset_move,
        asset_send_shape,
        conditional,
        event,
        empty_events,
        now,
        real,
        string,
        bool_lit,
        name,
        pair,
        arith,
        rel,
        and,
        or,
        not,
        uses,
        uses_with_party,
        use_once,
        precondition,
        value_params,
        asset_params
    );
}

/// One mutation per invariant; each mutation must be rejected.
#[test]
fn mutations_are_rejected_per_invariant() {
    let mutations: Vec<(&str, &str)> = vec![
        (
            "overlapping field groups",
            "stipula M { fields cost agreement (A, B)(cost) { A : cost B : cost } => @Q }",
        ),
        (
            "field initialized by no group",
            "stipula M { fields cost, t agreement (A)(cost, t) { A : cost } => @Q }",
        ),
        (
            "group with undeclared party",
            "stipula M { fields cost agreement (A)(cost) { Ghost : cost } => @Q }",
        ),
        (
            "agreement initializes a non-field",
            "stipula M { fields x agreement (A)(ghost) { A : ghost } => @Q }",
        ),
        (
            "duplicate names across namespaces",
            "stipula M { assets x fields x agreement (A)() { } => @Q }",
        ),
        (
            "parameter clashes with a field",
            "stipula M { fields z agreement (A)(z) { A : z } => @Q @Q A : f (z) { } => @Q }",
        ),
        (
            "parameter escapes into an event",
            "stipula M { assets h agreement (A)() { } => @Q \
             @Q A : f [y] { y -o h now >> @Q { y -o h } => @Q } => @Q }",
        ),
        (
            "caller is not a party",
            "stipula M { agreement (A)() { } => @Q @Q Ghost : f { } => @Q }",
        ),
        (
            "value arrow into an asset",
            "stipula M { assets h agreement (A)() { } => @Q @Q A : f { 1 -> h } => @Q }",
        ),
        (
            "asset arrow out of a field",
            "stipula M { fields x agreement (A)(x) { A : x } => @Q @Q A : f { x -o A } => @Q }",
        ),
        (
            "pair outside a value send",
            "stipula M { fields x agreement (A)(x) { A : x } => @Q \
             @Q A : f ((1, 2) == x) { } => @Q }",
        ),
        (
            "unknown name in a body",
            "stipula M { agreement (A)() { } => @Q @Q A : f { ghost -> A } => @Q }",
        ),
        (
            "duplicate function in the same state",
            "stipula M { agreement (A)() { } => @Q @Q A : f { } => @Q @Q A : f { } => @Q }",
        ),
        (
            "intrinsic over a non-asset",
            "stipula M { fields x agreement (A)(x) { A : x } => @Q \
             @Q A : f { uses(x) -> A } => @Q }",
        ),
    ];
    for (what, src) in mutations {
        let decl = parse_contract(src).unwrap_or_else(|e| panic!("{what}: parse failed: {e}"));
        let diags = check_wellformed(&decl);
        assert!(!is_clean(&diags), "{what} was accepted");
    }
}

#[test]
fn diagnostics_render_with_positions() {
    let src = "stipula M { fields cost\n  agreement (A, B)(cost) {\n    A : cost\n    B : cost\n  } => @Q\n}";
    let decl = parse_contract(src).unwrap();
    let diags = check_wellformed(&decl);
    let rendered: Vec<String> = diags.iter().map(|d| d.render("m.stipula")).collect();
    assert!(
        rendered.iter().any(|r| r.starts_with("m.stipula 4:") || r.starts_with("m.stipula:4:")),
        "{rendered:?}"
    );
}
