//! Expression evaluation over a contract memory.

use thiserror::Error;

use crate::ast::{ArithOp, BoolOp, Expr, ExprKind, IntrinsicKind, RelOp};
use crate::fixed::FixedError;
use crate::value::{AssetValue, Memory, Slot, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("negative time")]
    NegativeTime,
    #[error("{0}")]
    Arithmetic(#[from] FixedError),
    #[error("token in `{0}` is not held by the contract")]
    TokenNotHeld(String),
    #[error("`{0}` does not hold a token")]
    NotAToken(String),
}

/// Evaluation context: the memory, the clock value `now` reads, and the
/// per-contract usage-code counter that intrinsics advance.
pub struct EvalCtx<'a> {
    pub mem: &'a Memory,
    pub now: u64,
    pub code_seq: &'a mut u64,
}

pub fn eval(expr: &Expr, ctx: &mut EvalCtx<'_>) -> Result<Value, EvalError> {
    match &expr.kind {
        ExprKind::Now => Ok(Value::Time(ctx.now)),
        ExprKind::Real(v) => Ok(Value::Real(*v)),
        ExprKind::Str(s) => Ok(Value::Str(s.clone())),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Name(n) => match ctx.mem.get(n) {
            None => Err(EvalError::Unbound(n.clone())),
            Some(Slot::Val(v)) => Ok(v.clone()),
            // a fungible cell read in value position is its amount
            Some(Slot::Asset(AssetValue::Fungible(a))) => Ok(Value::Real(*a)),
            Some(Slot::Asset(AssetValue::Token { .. })) => Err(EvalError::TypeMismatch(format!(
                "token asset `{n}` used as a value"
            ))),
        },
        ExprKind::Pair(a, b) => {
            let va = eval(a, ctx)?;
            let vb = eval(b, ctx)?;
            Ok(Value::Pair(Box::new(va), Box::new(vb)))
        }
        ExprKind::Arith(op, a, b) => {
            let va = eval(a, ctx)?;
            let vb = eval(b, ctx)?;
            arith(*op, va, vb)
        }
        ExprKind::Rel(op, a, b) => {
            let va = eval(a, ctx)?;
            let vb = eval(b, ctx)?;
            rel(*op, va, vb)
        }
        ExprKind::BoolOp(op, a, b) => {
            let va = as_bool(eval(a, ctx)?)?;
            match (op, va) {
                (BoolOp::And, false) => Ok(Value::Bool(false)),
                (BoolOp::Or, true) => Ok(Value::Bool(true)),
                _ => Ok(Value::Bool(as_bool(eval(b, ctx)?)?)),
            }
        }
        ExprKind::Not(a) => Ok(Value::Bool(!as_bool(eval(a, ctx)?)?)),
        ExprKind::Intrinsic(kind, asset, party) => {
            let id = match ctx.mem.get(asset) {
                None => return Err(EvalError::Unbound(asset.clone())),
                Some(Slot::Asset(AssetValue::Token { id, held: true })) => id.clone(),
                Some(Slot::Asset(AssetValue::Token { held: false, .. })) => {
                    return Err(EvalError::TokenNotHeld(asset.clone()))
                }
                Some(_) => return Err(EvalError::NotAToken(asset.clone())),
            };
            let party_part = match party {
                None => String::new(),
                Some(p) => match ctx.mem.get(p) {
                    Some(Slot::Val(Value::Party(actual))) => format!(":{actual}"),
                    _ => return Err(EvalError::Unbound(p.clone())),
                },
            };
            let prefix = match kind {
                IntrinsicKind::Uses => "use",
                IntrinsicKind::UseOnce => "once",
            };
            let seq = *ctx.code_seq;
            *ctx.code_seq += 1;
            Ok(Value::Code(format!("{prefix}:{id}{party_part}#{seq}")))
        }
    }
}

fn as_bool(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch(format!(
            "expected bool, got {}",
            other.type_name()
        ))),
    }
}

fn arith(op: ArithOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use Value::*;
    match (op, a, b) {
        (ArithOp::Add, Real(x), Real(y)) => Ok(Real(x.checked_add(y)?)),
        (ArithOp::Sub, Real(x), Real(y)) => Ok(Real(x.checked_sub(y)?)),
        (ArithOp::Mul, Real(x), Real(y)) => Ok(Real(x.checked_mul(y)?)),
        (ArithOp::Div, Real(x), Real(y)) => Ok(Real(x.checked_div(y)?)),
        // t + n sums n seconds onto the time value t
        (ArithOp::Add, Time(t), other) | (ArithOp::Add, other, Time(t)) => {
            let n = other.as_time().ok_or(EvalError::NegativeTime)?;
            t.checked_add(n).map(Time).ok_or(FixedError::Overflow.into())
        }
        (ArithOp::Sub, Time(t), other) => {
            let n = other.as_time().ok_or(EvalError::NegativeTime)?;
            t.checked_sub(n).map(Time).ok_or(EvalError::NegativeTime)
        }
        (op, a, b) => Err(EvalError::TypeMismatch(format!(
            "{:?} on {} and {}",
            op,
            a.type_name(),
            b.type_name()
        ))),
    }
}

fn rel(op: RelOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use std::cmp::Ordering;
    let ord = match (&a, &b) {
        (Value::Real(x), Value::Real(y)) => x.cmp(y),
        (Value::Time(x), Value::Time(y)) => x.cmp(y),
        // equality-only comparisons
        (Value::Str(x), Value::Str(y)) => {
            return eq_only(op, x == y, "string");
        }
        (Value::Bool(x), Value::Bool(y)) => {
            return eq_only(op, x == y, "bool");
        }
        (Value::Party(x), Value::Party(y)) => {
            return eq_only(op, x == y, "party");
        }
        (Value::Code(x), Value::Code(y)) => {
            return eq_only(op, x == y, "code");
        }
        _ => {
            return Err(EvalError::TypeMismatch(format!(
                "comparison between {} and {}",
                a.type_name(),
                b.type_name()
            )))
        }
    };
    let result = match op {
        RelOp::Eq => ord == Ordering::Equal,
        RelOp::Ne => ord != Ordering::Equal,
        RelOp::Ge => ord != Ordering::Less,
        RelOp::Le => ord != Ordering::Greater,
        RelOp::Gt => ord == Ordering::Greater,
        RelOp::Lt => ord == Ordering::Less,
    };
    Ok(Value::Bool(result))
}

fn eq_only(op: RelOp, eq: bool, ty: &str) -> Result<Value, EvalError> {
    match op {
        RelOp::Eq => Ok(Value::Bool(eq)),
        RelOp::Ne => Ok(Value::Bool(!eq)),
        _ => Err(EvalError::TypeMismatch(format!(
            "ordering comparison on {ty} values"
        ))),
    }
}
