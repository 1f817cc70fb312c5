//! Bijective renamings of states, assets, fields and the contract name.
//! Renamed contracts have identical observable behavior; the checker's
//! refactoring property tests are built on this.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::ast::*;

#[derive(Debug, Clone, Default)]
pub struct Renaming {
    pub contract: Option<String>,
    pub states: BTreeMap<String, String>,
    pub assets: BTreeMap<String, String>,
    pub fields: BTreeMap<String, String>,
}

impl Renaming {
    fn state(&self, s: &str) -> String {
        self.states.get(s).cloned().unwrap_or_else(|| s.to_string())
    }

    /// Assets and fields live in the same name position in expressions and
    /// statements, so lookups fall through.
    fn name(&self, n: &str) -> String {
        self.assets
            .get(n)
            .or_else(|| self.fields.get(n))
            .cloned()
            .unwrap_or_else(|| n.to_string())
    }
}

/// Apply a renaming; party parameters, function names and parameters stay.
pub fn apply_renaming(decl: &ContractDecl, r: &Renaming) -> ContractDecl {
    let mut out = decl.clone();
    if let Some(name) = &r.contract {
        out.name = name.clone();
    }
    out.assets = decl.assets.iter().map(|a| r.name(a)).collect();
    out.fields = decl.fields.iter().map(|f| r.name(f)).collect();
    out.agreement.init_fields = decl
        .agreement
        .init_fields
        .iter()
        .map(|f| r.name(f))
        .collect();
    for g in &mut out.agreement.groups {
        g.fields = g.fields.iter().map(|f| r.name(f)).collect();
    }
    out.agreement.initial_state = r.state(&decl.agreement.initial_state);
    for f in &mut out.functions {
        f.guard_state = r.state(&f.guard_state);
        f.next_state = r.state(&f.next_state);
        if let Some(pre) = &mut f.precondition {
            rename_expr(pre, r);
        }
        for s in &mut f.body {
            rename_stmt(s, r);
        }
        for w in &mut f.events {
            w.guard_state = r.state(&w.guard_state);
            w.next_state = r.state(&w.next_state);
            rename_expr(&mut w.guard_expr, r);
            for s in &mut w.handler {
                rename_stmt(s, r);
            }
        }
    }
    out
}

fn rename_stmt(s: &mut Stmt, r: &Renaming) {
    match &mut s.kind {
        StmtKind::Send { value, dest } => {
            rename_expr(value, r);
            *dest = r.name(dest);
        }
        StmtKind::AssetTransfer {
            value,
            source,
            dest,
        } => {
            rename_expr(value, r);
            *source = r.name(source);
            *dest = r.name(dest);
        }
        StmtKind::If { cond, body } => {
            rename_expr(cond, r);
            for inner in body {
                rename_stmt(inner, r);
            }
        }
    }
}

fn rename_expr(e: &mut Expr, r: &Renaming) {
    match &mut e.kind {
        ExprKind::Name(n) => *n = r.name(n),
        ExprKind::Pair(a, b)
        | ExprKind::Arith(_, a, b)
        | ExprKind::Rel(_, a, b)
        | ExprKind::BoolOp(_, a, b) => {
            rename_expr(a, r);
            rename_expr(b, r);
        }
        ExprKind::Not(a) => rename_expr(a, r),
        ExprKind::Intrinsic(_, asset, _) => *asset = r.name(asset),
        _ => {}
    }
}

/// A random bijective renaming of every state, asset, field and the
/// contract name, reproducible from the seed.
pub fn random_renaming(decl: &ContractDecl, seed: u64) -> Renaming {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh = |prefix: &str, i: usize, rng: &mut ChaCha8Rng| {
        format!("{prefix}{}_{}", rng.gen_range(100..1000), i)
    };
    let mut r = Renaming {
        contract: Some(fresh("K", 0, &mut rng)),
        ..Default::default()
    };
    for (i, s) in decl.states().iter().enumerate() {
        let newname = fresh("S", i, &mut rng);
        r.states.insert(s.clone(), newname);
    }
    for (i, a) in decl.assets.iter().enumerate() {
        let newname = fresh("a", i, &mut rng);
        r.assets.insert(a.clone(), newname);
    }
    for (i, f) in decl.fields.iter().enumerate() {
        let newname = fresh("x", i, &mut rng);
        r.fields.insert(f.clone(), newname);
    }
    r
}
