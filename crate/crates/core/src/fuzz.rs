//! Seeded random script generation for the fuzz harness.
//!
//! Scripts aim for meaningful depth: the agreement always comes first and
//! asset amounts are frequently drawn from the agreed field values so that
//! `y == cost`-style preconditions have a real chance to pass. Rejected
//! calls are harmless; the conservation checker only needs variety.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::ast::{ContractDecl, Expr, ExprKind, FunctionDecl};
use crate::fixed::Fixed4;
use crate::runtime::{AgreeGroup, AgreeLabel, AssetArg, CallLabel};
use crate::script::{ScriptAction, ScriptEntry, TraceScript};
use crate::value::Value;

pub struct FuzzConfig {
    /// Upper bound on scripted calls.
    pub max_calls: usize,
    /// Largest timestamp jump between consecutive transactions.
    pub max_step: u64,
}

impl Default for FuzzConfig {
    fn default() -> FuzzConfig {
        FuzzConfig {
            max_calls: 12,
            max_step: 8,
        }
    }
}

/// Generate a random script for the contract, reproducible from the seed.
pub fn random_script(decl: &ContractDecl, seed: u64) -> TraceScript {
    random_script_with(decl, seed, &FuzzConfig::default())
}

pub fn random_script_with(decl: &ContractDecl, seed: u64, fc: &FuzzConfig) -> TraceScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();

    let agree = random_agree(decl, &mut rng);
    let mut real_pool: Vec<Fixed4> = vec![
        Fixed4::from_int(1),
        Fixed4::from_int(2),
        Fixed4::from_int(5),
        Fixed4::from_int(100),
        "0.5".parse().unwrap(),
    ];
    for g in &agree.groups {
        for v in &g.values {
            if let Value::Real(x) = v {
                real_pool.push(*x);
            }
        }
    }
    entries.push(ScriptEntry {
        at: 0,
        contract: None,
        action: ScriptAction::Agree(agree),
    });

    let mut at = 0u64;
    let mut token_counter = 0u32;
    let n_calls = rng.gen_range(1..=fc.max_calls);
    for _ in 0..n_calls {
        at += rng.gen_range(0..=fc.max_step);
        if decl.functions.is_empty() {
            break;
        }
        let f = &decl.functions[rng.gen_range(0..decl.functions.len())];
        let party = pick_party(decl, f, &mut rng);
        let args = f
            .value_params
            .iter()
            .map(|_| random_value(&real_pool, &mut rng))
            .collect();
        let assets = f
            .asset_params
            .iter()
            .map(|name| {
                if looks_like_token(decl, f, name) || rng.gen_bool(0.1) {
                    token_counter += 1;
                    AssetArg::Token {
                        id: format!("tok{token_counter}"),
                    }
                } else {
                    AssetArg::Fungible(real_pool[rng.gen_range(0..real_pool.len())])
                }
            })
            .collect();
        entries.push(ScriptEntry {
            at,
            contract: None,
            action: ScriptAction::Call(CallLabel {
                party,
                fn_name: f.name.clone(),
                args,
                assets,
            }),
        });
    }

    TraceScript { entries }
}

/// The agreement the fuzzer signs: actual party names are the parameter
/// names, field values are plausible small reals, strings, and booleans.
pub fn random_agree(decl: &ContractDecl, rng: &mut ChaCha8Rng) -> AgreeLabel {
    let parties: Vec<String> = decl.agreement.parties.clone();
    let groups = decl
        .agreement
        .groups
        .iter()
        .map(|g| AgreeGroup {
            parties: g.parties.clone(),
            values: g.fields.iter().map(|f| random_field_value(f, rng)).collect(),
        })
        .collect();
    AgreeLabel { parties, groups }
}

fn random_field_value(field: &str, rng: &mut ChaCha8Rng) -> Value {
    // time-ish names get small second counts so events land inside fuzz runs
    let lower = field.to_ascii_lowercase();
    if lower.starts_with("t_") || lower.contains("time") || lower.contains("limit") {
        return Value::Real(Fixed4::from_int(rng.gen_range(2..30)));
    }
    match rng.gen_range(0..10) {
        0 => Value::Str(format!("s{}", rng.gen_range(0..3))),
        1 => Value::Bool(rng.gen_bool(0.5)),
        _ => Value::Real(Fixed4::from_int(rng.gen_range(0..20))),
    }
}

fn random_value(pool: &[Fixed4], rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..8) {
        0 => Value::Str(format!("s{}", rng.gen_range(0..3))),
        1 => Value::Bool(rng.gen_bool(0.5)),
        _ => Value::Real(pool[rng.gen_range(0..pool.len())]),
    }
}

fn pick_party(decl: &ContractDecl, f: &FunctionDecl, rng: &mut ChaCha8Rng) -> String {
    // mostly the declared caller; sometimes a wrong one to exercise rejection
    if rng.gen_bool(0.85) || decl.agreement.parties.is_empty() {
        f.caller.clone()
    } else {
        decl.agreement.parties[rng.gen_range(0..decl.agreement.parties.len())].clone()
    }
}

/// Heuristic: an asset parameter that only ever moves into a cell that
/// `uses`/`use_once` reads is a token handle.
fn looks_like_token(decl: &ContractDecl, f: &FunctionDecl, param: &str) -> bool {
    let mut token_cells = std::collections::BTreeSet::new();
    for g in &decl.functions {
        collect_intrinsic_assets(g, &mut token_cells);
    }
    f.body.iter().any(|s| {
        matches!(
            &s.kind,
            crate::ast::StmtKind::AssetTransfer { source, dest, .. }
                if source == param && token_cells.contains(dest)
        )
    })
}

fn collect_intrinsic_assets(f: &FunctionDecl, out: &mut std::collections::BTreeSet<String>) {
    fn walk_expr(e: &Expr, out: &mut std::collections::BTreeSet<String>) {
        match &e.kind {
            ExprKind::Intrinsic(_, asset, _) => {
                out.insert(asset.clone());
            }
            ExprKind::Pair(a, b)
            | ExprKind::Arith(_, a, b)
            | ExprKind::Rel(_, a, b)
            | ExprKind::BoolOp(_, a, b) => {
                walk_expr(a, out);
                walk_expr(b, out);
            }
            ExprKind::Not(a) => walk_expr(a, out),
            _ => {}
        }
    }
    fn walk_stmts(stmts: &[crate::ast::Stmt], out: &mut std::collections::BTreeSet<String>) {
        for s in stmts {
            match &s.kind {
                crate::ast::StmtKind::Send { value, .. } => walk_expr(value, out),
                crate::ast::StmtKind::AssetTransfer { value, .. } => walk_expr(value, out),
                crate::ast::StmtKind::If { cond, body } => {
                    walk_expr(cond, out);
                    walk_stmts(body, out);
                }
            }
        }
    }
    if let Some(p) = &f.precondition {
        walk_expr(p, out);
    }
    walk_stmts(&f.body, out);
    for w in &f.events {
        walk_expr(&w.guard_expr, out);
        walk_stmts(&w.handler, out);
    }
}
