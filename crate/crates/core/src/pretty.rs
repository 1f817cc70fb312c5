//! Canonical ASCII rendering of contracts. `parse(pretty(ast))` is the
//! identity on span-normalized ASTs.

use std::fmt::Write;

use crate::ast::*;

pub fn pretty(contract: &ContractDecl) -> String {
    let mut out = String::new();
    let c = contract;
    let _ = writeln!(out, "stipula {} {{", c.name);
    if !c.assets.is_empty() {
        let _ = writeln!(out, "  assets {}", c.assets.join(", "));
    }
    if !c.fields.is_empty() {
        let _ = writeln!(out, "  fields {}", c.fields.join(", "));
    }
    let _ = writeln!(out);
    let a = &c.agreement;
    let _ = writeln!(
        out,
        "  agreement ({})({}) {{",
        a.parties.join(", "),
        a.init_fields.join(", ")
    );
    for g in &a.groups {
        let _ = writeln!(out, "    {} : {}", g.parties.join(", "), g.fields.join(", "));
    }
    let _ = writeln!(out, "  }} => @{}", a.initial_state);
    for f in &c.functions {
        let _ = writeln!(out);
        write_function(&mut out, f);
    }
    let _ = writeln!(out, "}}");
    out
}

fn write_function(out: &mut String, f: &FunctionDecl) {
    let mut header = format!("  @{} {} : {}", f.guard_state, f.caller, f.name);
    if !f.value_params.is_empty() {
        let _ = write!(header, "({})", f.value_params.join(", "));
    }
    if !f.asset_params.is_empty() {
        let _ = write!(header, " [{}]", f.asset_params.join(", "));
    }
    if let Some(pre) = &f.precondition {
        // a paramless function needs explicit `()` so the precondition is
        // not read back as a parameter list
        if f.value_params.is_empty() && f.asset_params.is_empty() {
            let _ = write!(header, " ()");
        }
        let _ = write!(header, " ({})", expr_str(pre, 0));
    }
    let _ = writeln!(out, "{header} {{");
    for s in &f.body {
        write_stmt(out, s, 2);
    }
    for w in &f.events {
        write_event(out, w, 2);
    }
    let _ = writeln!(out, "  }} => @{}", f.next_state);
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Send { value, dest } => {
            let _ = writeln!(out, "{} -> {}", expr_str(value, 0), dest);
        }
        StmtKind::AssetTransfer {
            value,
            source,
            dest,
        } => {
            if matches!(&value.kind, ExprKind::Name(n) if n == source) {
                let _ = writeln!(out, "{source} -o {dest}");
            } else {
                let _ = writeln!(out, "{} -o {},{}", expr_str(value, 0), source, dest);
            }
        }
        StmtKind::If { cond, body } => {
            let _ = writeln!(out, "({}) {{", expr_str(cond, 0));
            for inner in body {
                write_stmt(out, inner, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

fn write_event(out: &mut String, w: &EventDecl, depth: usize) {
    indent(out, depth);
    let _ = writeln!(out, "{} >> @{} {{", expr_str(&w.guard_expr, 0), w.guard_state);
    for s in &w.handler {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    let _ = writeln!(out, "}} => @{}", w.next_state);
}

// precedence levels: || = 1, && = 2, ! = 3, rel = 4, +- = 5, */ = 6, atoms = 7
fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::BoolOp(BoolOp::Or, ..) => 1,
        ExprKind::BoolOp(BoolOp::And, ..) => 2,
        ExprKind::Not(_) => 3,
        ExprKind::Rel(..) => 4,
        ExprKind::Arith(ArithOp::Add | ArithOp::Sub, ..) => 5,
        ExprKind::Arith(ArithOp::Mul | ArithOp::Div, ..) => 6,
        _ => 7,
    }
}

pub fn expr_str(e: &Expr, min_prec: u8) -> String {
    let p = prec(e);
    let body = match &e.kind {
        ExprKind::Now => "now".to_string(),
        ExprKind::Real(v) => v.to_string(),
        ExprKind::Str(s) => format!("{:?}", s),
        ExprKind::Bool(true) => "true".to_string(),
        ExprKind::Bool(false) => "false".to_string(),
        ExprKind::Name(n) => n.clone(),
        ExprKind::Pair(a, b) => format!("({}, {})", expr_str(a, 0), expr_str(b, 0)),
        ExprKind::Arith(op, a, b) => {
            let sym = match op {
                ArithOp::Add => "+",
                ArithOp::Sub => "-",
                ArithOp::Mul => "*",
                ArithOp::Div => "/",
            };
            format!("{} {} {}", expr_str(a, p), sym, expr_str(b, p + 1))
        }
        ExprKind::Rel(op, a, b) => {
            let sym = match op {
                RelOp::Eq => "==",
                RelOp::Ne => "!=",
                RelOp::Ge => ">=",
                RelOp::Le => "<=",
                RelOp::Gt => ">",
                RelOp::Lt => "<",
            };
            format!("{} {} {}", expr_str(a, 5), sym, expr_str(b, 5))
        }
        ExprKind::BoolOp(op, a, b) => {
            let sym = match op {
                BoolOp::And => "&&",
                BoolOp::Or => "||",
            };
            format!("{} {} {}", expr_str(a, p), sym, expr_str(b, p + 1))
        }
        ExprKind::Not(a) => format!("!{}", expr_str(a, 3)),
        ExprKind::Intrinsic(kind, asset, party) => {
            let fn_name = match kind {
                IntrinsicKind::Uses => "uses",
                IntrinsicKind::UseOnce => "use_once",
            };
            match party {
                Some(p) => format!("{fn_name}({asset}, {p})"),
                None => format!("{fn_name}({asset})"),
            }
        }
    };
    if p < min_prec {
        format!("({body})")
    } else {
        body
    }
}
