//! Well-formedness checks and lints over parsed contracts.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::span::{Diagnostic, Severity, Span};

/// Name classes a contract declares. States are implicit (the set of names
/// used) and tracked separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameClass {
    Asset,
    Field,
    Party,
    ValueParam,
    AssetParam,
}

impl NameClass {
    fn describe(self) -> &'static str {
        match self {
            NameClass::Asset => "asset",
            NameClass::Field => "field",
            NameClass::Party => "party",
            NameClass::ValueParam => "value parameter",
            NameClass::AssetParam => "asset parameter",
        }
    }
}

/// Check every invariant of the contract; returns an empty list iff the
/// contract is well-formed. Diagnostics carry severity and position.
pub fn check_wellformed(decl: &ContractDecl) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let scope = check_declarations(decl, &mut diags);
    check_agreement(decl, &mut diags);
    for f in &decl.functions {
        check_function(decl, f, &scope, &mut diags);
    }
    check_duplicate_functions(decl, &mut diags);
    check_state_reachability(decl, &mut diags);
    diags
}

/// True when no diagnostic is an error (warnings allowed).
pub fn is_clean(diags: &[Diagnostic]) -> bool {
    diags.iter().all(|d| d.severity != Severity::Error)
}

fn check_declarations(
    decl: &ContractDecl,
    diags: &mut Vec<Diagnostic>,
) -> BTreeMap<String, NameClass> {
    let mut scope = BTreeMap::new();
    let mut declare = |name: &String, class: NameClass, span: Span, diags: &mut Vec<Diagnostic>| {
        if let Some(prev) = scope.insert(name.clone(), class) {
            diags.push(Diagnostic::error(
                span,
                format!(
                    "`{name}` declared twice ({} and {})",
                    prev.describe(),
                    class.describe()
                ),
            ));
        }
    };
    for a in &decl.assets {
        declare(a, NameClass::Asset, decl.span, diags);
    }
    for x in &decl.fields {
        declare(x, NameClass::Field, decl.span, diags);
    }
    for p in &decl.agreement.parties {
        declare(p, NameClass::Party, decl.agreement.span, diags);
    }
    scope
}

fn check_agreement(decl: &ContractDecl, diags: &mut Vec<Diagnostic>) {
    let a = &decl.agreement;
    let fields: BTreeSet<_> = decl.fields.iter().collect();
    let parties: BTreeSet<_> = a.parties.iter().collect();

    let mut init_seen = BTreeSet::new();
    for x in &a.init_fields {
        if !fields.contains(x) {
            diags.push(Diagnostic::error(
                a.span,
                format!("agreement initializes `{x}`, which is not a declared field"),
            ));
        }
        if !init_seen.insert(x.clone()) {
            diags.push(Diagnostic::error(
                a.span,
                format!("agreement lists field `{x}` twice"),
            ));
        }
    }

    // the group field-subsets must partition the init fields
    let mut covered = BTreeSet::new();
    for g in &a.groups {
        for x in &g.fields {
            if !init_seen.contains(x) {
                diags.push(Diagnostic::error(
                    g.span,
                    format!("group assigns `{x}`, which is not in the agreement field list"),
                ));
            }
            if !covered.insert(x.clone()) {
                diags.push(Diagnostic::error(
                    g.span,
                    format!("fields not partitioned: `{x}` appears in more than one group"),
                ));
            }
        }
        let mut group_parties = BTreeSet::new();
        for p in &g.parties {
            if !parties.contains(p) {
                diags.push(Diagnostic::error(
                    g.span,
                    format!("group names `{p}`, which is not a contract party"),
                ));
            }
            if !group_parties.insert(p.clone()) {
                diags.push(Diagnostic::error(
                    g.span,
                    format!("group lists party `{p}` twice"),
                ));
            }
        }
    }
    for x in &a.init_fields {
        if !covered.contains(x) {
            diags.push(Diagnostic::error(
                a.span,
                format!("fields not partitioned: no group assigns `{x}`"),
            ));
        }
    }
}

fn check_function(
    decl: &ContractDecl,
    f: &FunctionDecl,
    outer: &BTreeMap<String, NameClass>,
    diags: &mut Vec<Diagnostic>,
) {
    let mut scope = outer.clone();
    let mut bind = |name: &String, class: NameClass, diags: &mut Vec<Diagnostic>| {
        if let Some(prev) = scope.insert(name.clone(), class) {
            diags.push(Diagnostic::error(
                f.span,
                format!(
                    "parameter `{name}` of `{}` clashes with a {}",
                    f.name,
                    prev.describe()
                ),
            ));
        }
    };
    for z in &f.value_params {
        bind(z, NameClass::ValueParam, diags);
    }
    for y in &f.asset_params {
        bind(y, NameClass::AssetParam, diags);
    }

    if !matches!(outer.get(&f.caller), Some(NameClass::Party)) {
        diags.push(Diagnostic::error(
            f.span,
            format!("caller `{}` of `{}` is not a contract party", f.caller, f.name),
        ));
    }

    if let Some(pre) = &f.precondition {
        check_expr(pre, &scope, false, diags);
    }
    for s in &f.body {
        check_stmt(s, &scope, diags);
    }

    // events run outside the call, so parameters must not leak into them
    let params: BTreeSet<_> = f
        .value_params
        .iter()
        .chain(f.asset_params.iter())
        .cloned()
        .collect();
    for w in &f.events {
        let mut used = w.guard_expr.free_names();
        for s in &w.handler {
            used.extend(s.free_names());
        }
        for leaked in used.intersection(&params) {
            diags.push(Diagnostic::error(
                w.span,
                format!("parameter `{leaked}` escapes into an event of `{}`", f.name),
            ));
        }
        check_expr(&w.guard_expr, &scope, false, diags);
        for s in &w.handler {
            check_stmt(s, &scope, diags);
        }
    }
    let _ = decl;
}

fn check_stmt(s: &Stmt, scope: &BTreeMap<String, NameClass>, diags: &mut Vec<Diagnostic>) {
    match &s.kind {
        StmtKind::Send { value, dest } => {
            check_expr(value, scope, true, diags);
            match scope.get(dest) {
                Some(NameClass::Field) => {}
                Some(NameClass::Party) => {}
                Some(NameClass::Asset) | Some(NameClass::AssetParam) => {
                    diags.push(Diagnostic::error(
                        s.span,
                        format!("`->` cannot target asset `{dest}`; use `-o`"),
                    ));
                }
                Some(NameClass::ValueParam) => {
                    diags.push(Diagnostic::error(
                        s.span,
                        format!("cannot assign to parameter `{dest}`"),
                    ));
                }
                None => {
                    diags.push(Diagnostic::error(
                        s.span,
                        format!("`{dest}` is not a field or party"),
                    ));
                }
            }
            // pairs may only be sent to parties
            if matches!(value.kind, ExprKind::Pair(..))
                && !matches!(scope.get(dest), Some(NameClass::Party))
            {
                diags.push(Diagnostic::error(
                    s.span,
                    "pair expressions may only be sent to a party".to_string(),
                ));
            }
        }
        StmtKind::AssetTransfer {
            value,
            source,
            dest,
        } => {
            check_expr(value, scope, false, diags);
            match scope.get(source) {
                Some(NameClass::Asset) | Some(NameClass::AssetParam) => {}
                _ => diags.push(Diagnostic::error(
                    s.span,
                    format!("`-o` source `{source}` is not an asset"),
                )),
            }
            match scope.get(dest) {
                Some(NameClass::Asset) | Some(NameClass::AssetParam) | Some(NameClass::Party) => {}
                _ => diags.push(Diagnostic::error(
                    s.span,
                    format!("`-o` destination `{dest}` is not an asset or party"),
                )),
            }
        }
        StmtKind::If { cond, body } => {
            check_expr(cond, scope, false, diags);
            for inner in body {
                check_stmt(inner, scope, diags);
            }
        }
    }
}

fn check_expr(
    e: &Expr,
    scope: &BTreeMap<String, NameClass>,
    pair_ok: bool,
    diags: &mut Vec<Diagnostic>,
) {
    match &e.kind {
        ExprKind::Now | ExprKind::Real(_) | ExprKind::Str(_) | ExprKind::Bool(_) => {}
        ExprKind::Name(n) => {
            if !scope.contains_key(n) {
                diags.push(Diagnostic::error(e.span, format!("unknown name `{n}`")));
            }
        }
        ExprKind::Pair(a, b) => {
            if !pair_ok {
                diags.push(Diagnostic::error(
                    e.span,
                    "pair expression outside a value send".to_string(),
                ));
            }
            check_expr(a, scope, pair_ok, diags);
            check_expr(b, scope, pair_ok, diags);
        }
        ExprKind::Arith(_, a, b) | ExprKind::Rel(_, a, b) | ExprKind::BoolOp(_, a, b) => {
            check_expr(a, scope, false, diags);
            check_expr(b, scope, false, diags);
        }
        ExprKind::Not(a) => check_expr(a, scope, false, diags),
        ExprKind::Intrinsic(_, asset, party) => {
            match scope.get(asset) {
                Some(NameClass::Asset) | Some(NameClass::AssetParam) => {}
                _ => diags.push(Diagnostic::error(
                    e.span,
                    format!("usage-code operand `{asset}` is not an asset"),
                )),
            }
            if let Some(p) = party {
                if !matches!(scope.get(p), Some(NameClass::Party)) {
                    diags.push(Diagnostic::error(
                        e.span,
                        format!("usage-code party `{p}` is not a contract party"),
                    ));
                }
            }
        }
    }
}

fn check_duplicate_functions(decl: &ContractDecl, diags: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    for f in &decl.functions {
        let key = (f.guard_state.clone(), f.name.clone(), f.caller.clone());
        if !seen.insert(key) {
            diags.push(Diagnostic::error(
                f.span,
                format!(
                    "duplicate function `{}` for caller `{}` in state @{}",
                    f.name, f.caller, f.guard_state
                ),
            ));
        }
    }
}

fn check_state_reachability(decl: &ContractDecl, diags: &mut Vec<Diagnostic>) {
    let mut reachable: BTreeSet<String> = BTreeSet::new();
    reachable.insert(decl.agreement.initial_state.clone());
    let edges = decl.state_edges();
    loop {
        let before = reachable.len();
        for (from, to, _) in &edges {
            if reachable.contains(from) {
                reachable.insert(to.clone());
            }
        }
        if reachable.len() == before {
            break;
        }
    }
    for f in &decl.functions {
        if !reachable.contains(&f.guard_state) {
            diags.push(Diagnostic::warning(
                f.span,
                format!(
                    "state @{} guarding `{}` is unreachable from @{}",
                    f.guard_state, f.name, decl.agreement.initial_state
                ),
            ));
        }
        for w in &f.events {
            if !reachable.contains(&w.guard_state) {
                diags.push(Diagnostic::warning(
                    w.span,
                    format!(
                        "event guard state @{} is unreachable from @{}",
                        w.guard_state, decl.agreement.initial_state
                    ),
                ));
            }
        }
    }
}

/// Warn for each asset parameter that some syntactic path through the body
/// fails to drain. Conservative: a transfer out of the parameter anywhere on
/// the path counts as a drain, whatever the amount.
pub fn lint_asset_drain(decl: &ContractDecl) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for f in &decl.functions {
        for y in &f.asset_params {
            if !drains_on_all_paths(&f.body, y) {
                out.push(Diagnostic::warning(
                    f.span,
                    format!(
                        "asset parameter `{y}` of `{}` is not drained on every path",
                        f.name
                    ),
                ));
            }
        }
    }
    out
}

fn drains_on_all_paths(stmts: &[Stmt], y: &str) -> bool {
    match stmts.split_first() {
        None => false,
        Some((head, rest)) => match &head.kind {
            StmtKind::AssetTransfer { source, .. } if source == y => true,
            StmtKind::If { body, .. } => {
                let mut taken: Vec<Stmt> = body.clone();
                taken.extend_from_slice(rest);
                drains_on_all_paths(&taken, y) && drains_on_all_paths(rest, y)
            }
            _ => drains_on_all_paths(rest, y),
        },
    }
}
