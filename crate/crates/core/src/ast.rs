//! Abstract syntax of Stipula contracts.
//!
//! The AST keeps destinations as plain names; whether `E -> n` updates a
//! field or sends a value to a party is type-free and resolved against the
//! declarations by the checker and, at run time, by the memory.

use std::collections::BTreeSet;

use crate::fixed::Fixed4;
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractDecl {
    pub name: String,
    pub assets: Vec<String>,
    pub fields: Vec<String>,
    pub agreement: AgreementDecl,
    pub functions: Vec<FunctionDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgreementDecl {
    /// Party parameters of the contract (the vector A).
    pub parties: Vec<String>,
    /// Fields initialized by the agreement (the vector x').
    pub init_fields: Vec<String>,
    /// The `A_i : x_i` rows.
    pub groups: Vec<AgreementGroup>,
    pub initial_state: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgreementGroup {
    pub parties: Vec<String>,
    pub fields: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionDecl {
    pub guard_state: String,
    pub caller: String,
    pub name: String,
    pub value_params: Vec<String>,
    pub asset_params: Vec<String>,
    /// Precondition; `None` means unconstrained.
    pub precondition: Option<Expr>,
    pub body: Vec<Stmt>,
    pub events: Vec<EventDecl>,
    pub next_state: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventDecl {
    pub guard_expr: Expr,
    pub guard_state: String,
    pub handler: Vec<Stmt>,
    pub next_state: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StmtKind {
    /// `E -> n` — field update when `n` is a field, value send when `n` is a
    /// party (parameter).
    Send { value: Expr, dest: String },
    /// `E -o h,n` — asset move when `n` is an asset, asset send when `n` is a
    /// party. The abbreviated `h -o n` normalizes to `source = h`,
    /// `value = Name(h)`.
    AssetTransfer {
        value: Expr,
        source: String,
        dest: String,
    },
    /// `(B) { S }`
    If { cond: Expr, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntrinsicKind {
    Uses,
    UseOnce,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExprKind {
    Now,
    Real(Fixed4),
    Str(String),
    Bool(bool),
    Name(String),
    Pair(Box<Expr>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Rel(RelOp, Box<Expr>, Box<Expr>),
    BoolOp(BoolOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `uses(h)` / `uses(h, A)` / `use_once(h)` — usage-code generators over
    /// a token asset, optionally bound to a party.
    Intrinsic(IntrinsicKind, String, Option<String>),
}

impl Expr {
    pub fn name(n: impl Into<String>) -> Expr {
        Expr {
            kind: ExprKind::Name(n.into()),
            span: Span::default(),
        }
    }

    pub fn real(v: Fixed4) -> Expr {
        Expr {
            kind: ExprKind::Real(v),
            span: Span::default(),
        }
    }

    /// Free names: fields, assets, parameters and parties referenced by the
    /// expression. `now` and literals are not names.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            ExprKind::Now | ExprKind::Real(_) | ExprKind::Str(_) | ExprKind::Bool(_) => {}
            ExprKind::Name(n) => {
                out.insert(n.clone());
            }
            ExprKind::Pair(a, b)
            | ExprKind::Arith(_, a, b)
            | ExprKind::Rel(_, a, b)
            | ExprKind::BoolOp(_, a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            ExprKind::Not(a) => a.collect_names(out),
            ExprKind::Intrinsic(_, asset, party) => {
                out.insert(asset.clone());
                if let Some(p) = party {
                    out.insert(p.clone());
                }
            }
        }
    }
}

impl Stmt {
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            StmtKind::Send { value, dest } => {
                value.collect_names(out);
                out.insert(dest.clone());
            }
            StmtKind::AssetTransfer {
                value,
                source,
                dest,
            } => {
                value.collect_names(out);
                out.insert(source.clone());
                out.insert(dest.clone());
            }
            StmtKind::If { cond, body } => {
                cond.collect_names(out);
                for s in body {
                    s.collect_names(out);
                }
            }
        }
    }
}

impl ContractDecl {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// All state names used anywhere in the contract, in first-use order.
    pub fn states(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |s: &String| {
            if seen.insert(s.clone()) {
                out.push(s.clone());
            }
        };
        push(&self.agreement.initial_state);
        for f in &self.functions {
            push(&f.guard_state);
            push(&f.next_state);
            for w in &f.events {
                push(&w.guard_state);
                push(&w.next_state);
            }
        }
        out
    }

    /// Edges of the state graph `(from, to, via)` induced by functions and
    /// the events they schedule.
    pub fn state_edges(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for f in &self.functions {
            out.push((f.guard_state.clone(), f.next_state.clone(), f.name.clone()));
            for w in &f.events {
                out.push((
                    w.guard_state.clone(),
                    w.next_state.clone(),
                    format!("event in {}", f.name),
                ));
            }
        }
        out
    }

    /// Clone with all spans reset, for structural comparisons.
    pub fn normalized(&self) -> ContractDecl {
        let mut c = self.clone();
        c.span = Span::default();
        c.agreement.span = Span::default();
        for g in &mut c.agreement.groups {
            g.span = Span::default();
        }
        for f in &mut c.functions {
            f.span = Span::default();
            if let Some(p) = &mut f.precondition {
                normalize_expr(p);
            }
            for s in &mut f.body {
                normalize_stmt(s);
            }
            for w in &mut f.events {
                w.span = Span::default();
                normalize_expr(&mut w.guard_expr);
                for s in &mut w.handler {
                    normalize_stmt(s);
                }
            }
        }
        c
    }
}

fn normalize_stmt(s: &mut Stmt) {
    s.span = Span::default();
    match &mut s.kind {
        StmtKind::Send { value, .. } => normalize_expr(value),
        StmtKind::AssetTransfer { value, .. } => normalize_expr(value),
        StmtKind::If { cond, body } => {
            normalize_expr(cond);
            for s in body {
                normalize_stmt(s);
            }
        }
    }
}

fn normalize_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Pair(a, b)
        | ExprKind::Arith(_, a, b)
        | ExprKind::Rel(_, a, b)
        | ExprKind::BoolOp(_, a, b) => {
            normalize_expr(a);
            normalize_expr(b);
        }
        ExprKind::Not(a) => normalize_expr(a),
        _ => {}
    }
}
