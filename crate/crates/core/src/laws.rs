//! The ten non-interference laws: swapping two adjacent sends/updates/moves
//! is unobservable, under freshness side-conditions. Each law is checked by
//! instantiating a context with both statement orders and running the
//! bisimulation game; a valid instantiation must come out related.

use thiserror::Error;

use crate::ast::{ContractDecl, Expr, Stmt, StmtKind};
use crate::bisim::{bisimilar, BisimVerdict};
use crate::check::{check_wellformed, is_clean};
use crate::lts::ExplosionError;
use crate::span::Span;
use crate::universe::Universe;

/// Which visible shape each statement of a law has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// `E -> name` (field update or value send, by name class)
    Send,
    /// `E -o h,name`
    Move,
}

/// name-slot layout per law, in the order the law writes them
fn law_shape(law: u8) -> Option<(Shape, Shape, usize)> {
    Some(match law {
        1 => (Shape::Send, Shape::Send, 2),  // [A, A']
        2 => (Shape::Send, Shape::Send, 2),  // [x, A]
        3 => (Shape::Send, Shape::Send, 2),  // [x, x']
        4 => (Shape::Move, Shape::Send, 3),  // [h, A, A']
        5 => (Shape::Move, Shape::Send, 3),  // [h, A, x']
        6 => (Shape::Move, Shape::Send, 3),  // [h, h', A]
        7 => (Shape::Move, Shape::Send, 3),  // [h, h', x']
        8 => (Shape::Move, Shape::Move, 4),  // [h, A, h'', A']
        9 => (Shape::Move, Shape::Move, 4),  // [h, A, h'', h''']
        10 => (Shape::Move, Shape::Move, 4), // [h, h', h'', h''']
        _ => return None,
    })
}

/// One concrete instantiation of a law: the two expressions and the name
/// slots in the law's order.
#[derive(Debug, Clone)]
pub struct LawInstance {
    pub e1: Expr,
    pub e2: Expr,
    pub names: Vec<String>,
}

/// A contract with a two-statement hole inside one function body.
#[derive(Debug, Clone)]
pub struct LawContext {
    pub template: ContractDecl,
    pub fn_index: usize,
    pub stmt_index: usize,
}

impl LawContext {
    pub fn instantiate(&self, first: Stmt, second: Stmt) -> ContractDecl {
        let mut decl = self.template.clone();
        let body = &mut decl.functions[self.fn_index].body;
        body.insert(self.stmt_index, second);
        body.insert(self.stmt_index, first);
        decl
    }
}

#[derive(Debug, Error)]
pub enum LawError {
    #[error("no law {0}; laws are numbered 1..=10")]
    BadLawId(u8),
    #[error("law {law} takes {expected} names, got {got}")]
    Arity { law: u8, expected: usize, got: usize },
    #[error("side condition violated: {0}")]
    SideConditionViolated(String),
    #[error("context is not well-formed with the instantiated statements: {0}")]
    BadContext(String),
    #[error(transparent)]
    Explosion(#[from] ExplosionError),
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt {
        kind,
        span: Span::default(),
    }
}

/// The two statements of the law, in the paper's left-hand order.
pub fn law_statements(law: u8, inst: &LawInstance) -> Result<(Stmt, Stmt), LawError> {
    let (s1, s2, arity) = law_shape(law).ok_or(LawError::BadLawId(law))?;
    if inst.names.len() != arity {
        return Err(LawError::Arity {
            law,
            expected: arity,
            got: inst.names.len(),
        });
    }
    let n = &inst.names;
    let first = match s1 {
        Shape::Move => stmt(StmtKind::AssetTransfer {
            value: inst.e1.clone(),
            source: n[0].clone(),
            dest: n[1].clone(),
        }),
        Shape::Send => stmt(StmtKind::Send {
            value: inst.e1.clone(),
            dest: n[0].clone(),
        }),
    };
    let second = match s2 {
        Shape::Move => stmt(StmtKind::AssetTransfer {
            value: inst.e2.clone(),
            source: n[2].clone(),
            dest: n[3].clone(),
        }),
        Shape::Send => stmt(StmtKind::Send {
            value: inst.e2.clone(),
            dest: if law <= 3 { n[1].clone() } else { n[2].clone() },
        }),
    };
    Ok((first, second))
}

/// The freshness (and aliasing) side-conditions of the law.
pub fn check_side_conditions(law: u8, inst: &LawInstance) -> Result<(), LawError> {
    let (_, _, arity) = law_shape(law).ok_or(LawError::BadLawId(law))?;
    if inst.names.len() != arity {
        return Err(LawError::Arity {
            law,
            expected: arity,
            got: inst.names.len(),
        });
    }
    let fv1 = inst.e1.free_names();
    let fv2 = inst.e2.free_names();
    let n = &inst.names;
    let fresh = |name: &str, fv: &std::collections::BTreeSet<String>, which: &str| {
        if fv.contains(name) {
            Err(LawError::SideConditionViolated(format!(
                "`{name}` occurs free in {which}"
            )))
        } else {
            Ok(())
        }
    };
    let distinct = |a: &str, b: &str| {
        if a == b {
            Err(LawError::SideConditionViolated(format!(
                "`{a}` and `{b}` must be distinct"
            )))
        } else {
            Ok(())
        }
    };
    match law {
        1 => {}
        2 => {
            fresh(&n[0], &fv2, "E'")?;
        }
        3 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[1], &fv1, "E")?;
            distinct(&n[0], &n[1])?;
        }
        4 => {
            fresh(&n[0], &fv2, "E'")?;
        }
        5 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[2], &fv1, "E")?;
        }
        6 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[1], &fv2, "E'")?;
        }
        7 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[1], &fv2, "E'")?;
            fresh(&n[2], &fv1, "E")?;
        }
        8 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[2], &fv1, "E")?;
            distinct(&n[0], &n[2])?;
        }
        9 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[2], &fv1, "E")?;
            fresh(&n[3], &fv1, "E")?;
            distinct(&n[0], &n[2])?;
            distinct(&n[0], &n[3])?;
        }
        10 => {
            fresh(&n[0], &fv2, "E'")?;
            fresh(&n[1], &fv2, "E'")?;
            fresh(&n[2], &fv1, "E")?;
            fresh(&n[3], &fv1, "E")?;
            for a in [&n[0], &n[1]] {
                for b in [&n[2], &n[3]] {
                    distinct(a, b)?;
                }
            }
        }
        _ => return Err(LawError::BadLawId(law)),
    }
    Ok(())
}

/// Build both statement orders into the context and play the game. A valid
/// instantiation is expected to come out related; a not-related verdict on
/// one is a bug in the runtime or the checker.
pub fn check_law(
    law: u8,
    inst: &LawInstance,
    ctx: &LawContext,
    u: &Universe,
) -> Result<BisimVerdict, LawError> {
    check_side_conditions(law, inst)?;
    let (first, second) = law_statements(law, inst)?;
    let c1 = ctx.instantiate(first.clone(), second.clone());
    let c2 = ctx.instantiate(second, first);
    for (tag, c) in [("left", &c1), ("right", &c2)] {
        let diags = check_wellformed(c);
        if !is_clean(&diags) {
            return Err(LawError::BadContext(format!(
                "{tag}: {}",
                diags
                    .iter()
                    .map(|d| d.message.clone())
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }
    }
    Ok(bisimilar(&c1, &c2, u)?)
}

/// Ready-made funded contexts and instantiations for randomized law
/// checking: a contract whose first function pours generous amounts into
/// every asset, with the hole in a second function.
pub mod testkit {
    use super::*;
    use crate::ast::{ArithOp, ExprKind};
    use crate::fixed::Fixed4;
    use crate::parser::parse_contract;
    use crate::runtime::{AgreeGroup, AgreeLabel, AssetArg, CallLabel};
    use crate::value::Value;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub const ASSETS: [&str; 4] = ["h1", "h2", "h3", "h4"];
    pub const FIELDS: [&str; 4] = ["x1", "x2", "x3", "x4"];
    pub const PARTIES: [&str; 2] = ["P1", "P2"];

    /// A context whose assets are funded with 1000 each before the hole
    /// runs; `filler` statements surround the hole.
    pub fn funded_context(prefix: Vec<Stmt>, suffix: Vec<Stmt>) -> LawContext {
        let src = "stipula LawCtx { \
                   assets h1, h2, h3, h4 \
                   fields x1, x2, x3, x4 \
                   agreement (P1, P2)(x1, x2, x3, x4) { P1, P2 : x1, x2, x3, x4 } => @Init \
                   @Init P1 : fund [w1, w2, w3, w4] { \
                     w1 -o h1  w2 -o h2  w3 -o h3  w4 -o h4 } => @Armed \
                   @Armed P2 : act { } => @Done \
                   @Done P1 : drain { h1 -o P1  h2 -o P1  h3 -o P2  h4 -o P2 } => @End }";
        let mut template = parse_contract(src).unwrap();
        let stmt_index = prefix.len();
        let act = &mut template.functions[1];
        let mut body = prefix;
        body.extend(suffix);
        act.body = body;
        LawContext {
            template,
            fn_index: 1,
            stmt_index,
        }
    }

    /// The universe that drives a funded context: agree, fund, act, drain.
    pub fn context_universe(horizon: u64) -> Universe {
        let agree = AgreeLabel {
            parties: vec!["P1".into(), "P2".into()],
            groups: vec![AgreeGroup {
                parties: vec!["P1".into(), "P2".into()],
                values: vec![
                    Value::Real(Fixed4::from_int(1)),
                    Value::Real(Fixed4::from_int(2)),
                    Value::Real(Fixed4::from_int(3)),
                    Value::Real(Fixed4::from_int(4)),
                ],
            }],
        };
        let fund = CallLabel {
            party: "P1".into(),
            fn_name: "fund".into(),
            args: vec![],
            assets: vec![
                AssetArg::Fungible(Fixed4::from_int(1000)),
                AssetArg::Fungible(Fixed4::from_int(1000)),
                AssetArg::Fungible(Fixed4::from_int(1000)),
                AssetArg::Fungible(Fixed4::from_int(1000)),
            ],
        };
        let act = CallLabel {
            party: "P2".into(),
            fn_name: "act".into(),
            args: vec![],
            assets: vec![],
        };
        let drain = CallLabel {
            party: "P1".into(),
            fn_name: "drain".into(),
            args: vec![],
            assets: vec![],
        };
        let mut u = Universe::new(horizon, vec![agree], vec![fund, act, drain]);
        u.max_block = 10;
        u
    }

    fn literal(rng: &mut ChaCha8Rng) -> Expr {
        Expr::real(Fixed4::from_int(rng.gen_range(0..4)))
    }

    /// A small expression over literals and the allowed names.
    fn expr_over(names: &[String], rng: &mut ChaCha8Rng, depth: u8) -> Expr {
        if depth == 0 || rng.gen_bool(0.4) || names.is_empty() {
            return literal(rng);
        }
        match rng.gen_range(0..3) {
            0 => Expr::name(names[rng.gen_range(0..names.len())].clone()),
            1 => Expr {
                kind: ExprKind::Arith(
                    ArithOp::Add,
                    Box::new(expr_over(names, rng, depth - 1)),
                    Box::new(expr_over(names, rng, depth - 1)),
                ),
                span: Span::default(),
            },
            _ => Expr {
                kind: ExprKind::Arith(
                    ArithOp::Mul,
                    Box::new(expr_over(names, rng, depth - 1)),
                    Box::new(literal(rng)),
                ),
                span: Span::default(),
            },
        }
    }

    /// A valid random instantiation: name slots drawn without aliasing and
    /// expressions over names the side conditions leave free.
    pub fn random_instance(law: u8, seed: u64) -> LawInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(law) << 32);
        let mut assets: Vec<String> = ASSETS.iter().map(|s| s.to_string()).collect();
        let fields: Vec<String> = FIELDS.iter().map(|s| s.to_string()).collect();
        let parties: Vec<String> = PARTIES.iter().map(|s| s.to_string()).collect();
        let mut take_asset = |rng: &mut ChaCha8Rng| {
            let i = rng.gen_range(0..assets.len());
            assets.remove(i)
        };
        let party = |rng: &mut ChaCha8Rng| parties[rng.gen_range(0..parties.len())].clone();
        let field = |rng: &mut ChaCha8Rng| fields[rng.gen_range(0..fields.len())].clone();

        let names: Vec<String> = match law {
            1 => vec![party(&mut rng), party(&mut rng)],
            2 => vec![field(&mut rng), party(&mut rng)],
            3 => {
                let x1 = "x1".to_string();
                let x2 = "x2".to_string();
                vec![x1, x2]
            }
            4 => vec![take_asset(&mut rng), party(&mut rng), party(&mut rng)],
            5 => vec![take_asset(&mut rng), party(&mut rng), field(&mut rng)],
            6 => vec![take_asset(&mut rng), take_asset(&mut rng), party(&mut rng)],
            7 => vec![take_asset(&mut rng), take_asset(&mut rng), field(&mut rng)],
            8 => vec![
                take_asset(&mut rng),
                party(&mut rng),
                take_asset(&mut rng),
                party(&mut rng),
            ],
            9 => vec![
                take_asset(&mut rng),
                party(&mut rng),
                take_asset(&mut rng),
                take_asset(&mut rng),
            ],
            10 => vec![
                take_asset(&mut rng),
                take_asset(&mut rng),
                take_asset(&mut rng),
                take_asset(&mut rng),
            ],
            _ => panic!("law {law} out of range"),
        };

        // expressions avoid every slot name, which satisfies all freshness
        // conditions at once; x3/x4 remain fair game
        let safe: Vec<String> = FIELDS
            .iter()
            .map(|s| s.to_string())
            .filter(|f| !names.contains(f))
            .collect();
        let e1 = expr_over(&safe, &mut rng, 2);
        let e2 = expr_over(&safe, &mut rng, 2);
        LawInstance { e1, e2, names }
    }

    /// A side-condition-violating twin for each law that has conditions:
    /// the second expression reads the name the first statement writes.
    /// `e1` is pinned to a value no agreed field or funded asset starts
    /// with, so the violation is observably separating, not just formal.
    pub fn violating_instance(law: u8, seed: u64) -> Option<LawInstance> {
        if law == 1 || !(1..=10).contains(&law) {
            return None; // law 1 carries no side condition
        }
        let mut inst = random_instance(law, seed);
        inst.e1 = Expr::real(Fixed4::from_int(7));
        inst.e2 = Expr::name(inst.names[0].clone());
        Some(inst)
    }

    /// Random filler around the hole, over the same vocabulary.
    pub fn random_filler(seed: u64) -> (Vec<Stmt>, Vec<Stmt>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
        let stmts = |rng: &mut ChaCha8Rng| -> Vec<Stmt> {
            let n = rng.gen_range(0..2);
            (0..n)
                .map(|_| {
                    let field = FIELDS[rng.gen_range(0..2)].to_string();
                    stmt(StmtKind::Send {
                        value: literal(rng),
                        dest: field,
                    })
                })
                .collect()
        };
        (stmts(&mut rng), stmts(&mut rng))
    }
}
