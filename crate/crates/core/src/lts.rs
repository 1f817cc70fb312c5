//! Bounded labeled-transition-system exploration.
//!
//! Nodes are idle configurations at instant boundaries; a unit move is one
//! driver choice (agree, call, event firing, stale discard) run eagerly to
//! the next idle point, carrying the observable labels it emitted. Silent
//! steps are compressed into the units, giving the weak transitions the
//! equivalence game plays over.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ast::ContractDecl;
use crate::runtime::{
    apply_agree, apply_call, discard_stale_event, exec_step, finish_body, fire_event, tick,
    AgreeLabel, AssetOut, Configuration, ExecOutcome, Label, Program,
};
use crate::universe::Universe;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("exploration exceeded the node cap ({cap} nodes); raise STIPULA_NODE_CAP")]
pub struct ExplosionError {
    pub cap: usize,
}

/// Canonical form for memoization: scheduling ids are erased and pending
/// events sorted, since neither is observable.
pub fn canon_key(cfg: &Configuration) -> Configuration {
    let mut c = cfg.clone();
    for rc in &mut c.contracts {
        for ev in &mut rc.pending {
            ev.id = 0;
        }
        rc.pending.sort();
        rc.event_seq = 0;
    }
    c
}

/// What one unit move did.
#[derive(Debug, Clone)]
pub struct Unit {
    pub labels: Vec<Label>,
    pub target: UnitTarget,
}

#[derive(Debug, Clone)]
pub enum UnitTarget {
    Idle(Configuration),
    Stuck(Configuration),
}

/// Run every residual to completion, collecting observable labels. Returns
/// the stuck configuration when a body freezes.
fn settle_bodies(prog: &Program, mut cfg: Configuration, labels: &mut Vec<Label>) -> UnitTarget {
    loop {
        let busy = cfg
            .contracts
            .iter()
            .find(|rc| rc.residual.is_some() && rc.stuck.is_none())
            .map(|rc| rc.name.clone());
        let Some(name) = busy else {
            return UnitTarget::Idle(cfg);
        };
        let rc = cfg.contract(&name).expect("just found");
        let finished = rc.residual.as_ref().expect("busy").stmts.is_empty();
        let outcome = if finished {
            finish_body(prog, &cfg, &name)
        } else {
            exec_step(prog, &cfg, &name)
        };
        match outcome.expect("busy contract steps") {
            ExecOutcome::Step { label, next, .. } => {
                if label.is_observable() {
                    labels.push(label);
                }
                cfg = next;
            }
            ExecOutcome::Stuck { next, .. } => return UnitTarget::Stuck(next),
        }
    }
}

/// All unit moves the universe offers at an idle configuration.
pub fn unit_moves(prog: &Program, cfg: &Configuration, u: &Universe) -> Vec<Unit> {
    let mut out = Vec::new();
    if cfg
        .contracts
        .iter()
        .any(|rc| rc.residual.is_some() || rc.stuck.is_some())
    {
        return out;
    }

    for rc in &cfg.contracts {
        for ev in rc.due_events(cfg.clock) {
            if rc.phase.as_deref() == Some(ev.guard_state.as_str()) {
                let (_, next) = fire_event(cfg, &rc.name, ev.id).expect("due and matching");
                let mut labels = Vec::new();
                let target = settle_bodies(prog, next, &mut labels);
                out.push(Unit { labels, target });
            } else {
                let next = discard_stale_event(cfg, &rc.name, ev.id).expect("due and stale");
                out.push(Unit {
                    labels: Vec::new(),
                    target: UnitTarget::Idle(next),
                });
            }
        }
    }

    for rc in &cfg.contracts {
        for agree in &u.agrees {
            if let Ok((label, next)) = apply_agree(prog, cfg, &rc.name, agree) {
                out.push(Unit {
                    labels: vec![label],
                    target: UnitTarget::Idle(next),
                });
            }
        }
        for callee in &u.calls {
            if let Ok((label, next)) = apply_call(prog, cfg, &rc.name, callee) {
                let mut labels = vec![label];
                let target = settle_bodies(prog, next, &mut labels);
                out.push(Unit { labels, target });
            }
        }
    }
    out
}

/// Agreement unit moves only, for the pointwise agreement clause.
pub fn agree_moves(prog: &Program, cfg: &Configuration, u: &Universe) -> Vec<(AgreeLabel, Configuration)> {
    let mut out = Vec::new();
    if cfg
        .contracts
        .iter()
        .any(|rc| rc.residual.is_some() || rc.stuck.is_some())
    {
        return out;
    }
    for rc in &cfg.contracts {
        for agree in &u.agrees {
            if let Ok((_, next)) = apply_agree(prog, cfg, &rc.name, agree) {
                out.push((agree.clone(), next));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct LtsNode {
    pub config: Configuration,
    pub clock: u64,
    pub stuck: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeKind {
    Unit,
    Tick,
}

#[derive(Debug, Clone)]
pub struct LtsEdge {
    pub from: usize,
    pub to: usize,
    pub labels: Vec<Label>,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct Lts {
    pub nodes: Vec<LtsNode>,
    pub edges: Vec<LtsEdge>,
    pub initial: usize,
}

/// Explore every reachable idle configuration up to the horizon, closing
/// each node under the universe's agree/call labels, due-event firings,
/// stale discards, and tick.
pub fn explore(decl: &ContractDecl, u: &Universe) -> Result<Lts, ExplosionError> {
    let prog = Program::single(decl.clone());
    let initial = Configuration::initial(&prog, 0);
    explore_from(&prog, &initial, u)
}

pub fn explore_from(
    prog: &Program,
    initial: &Configuration,
    u: &Universe,
) -> Result<Lts, ExplosionError> {
    let start_clock = initial.clock;
    let mut nodes: Vec<LtsNode> = Vec::new();
    let mut edges: Vec<LtsEdge> = Vec::new();
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    let intern = |cfg: Configuration,
                      stuck: bool,
                      nodes: &mut Vec<LtsNode>,
                      index: &mut HashMap<Configuration, usize>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, ExplosionError> {
        let key = canon_key(&cfg);
        if let Some(&id) = index.get(&key) {
            return Ok(id);
        }
        if nodes.len() >= u.node_cap {
            return Err(ExplosionError { cap: u.node_cap });
        }
        let id = nodes.len();
        nodes.push(LtsNode {
            clock: cfg.clock,
            config: cfg,
            stuck,
        });
        index.insert(key, id);
        if !stuck {
            queue.push_back(id);
        }
        Ok(id)
    };

    let root = intern(initial.clone(), false, &mut nodes, &mut index, &mut queue)?;

    while let Some(id) = queue.pop_front() {
        let cfg = nodes[id].config.clone();
        if cfg.clock >= start_clock + u.horizon {
            continue;
        }
        for unit in unit_moves(prog, &cfg, u) {
            let (target_cfg, stuck) = match unit.target {
                UnitTarget::Idle(c) => (c, false),
                UnitTarget::Stuck(c) => (c, true),
            };
            let to = intern(target_cfg, stuck, &mut nodes, &mut index, &mut queue)?;
            edges.push(LtsEdge {
                from: id,
                to,
                labels: unit.labels,
                kind: EdgeKind::Unit,
            });
        }
        if let Ok(next) = tick(&cfg) {
            let to = intern(next, false, &mut nodes, &mut index, &mut queue)?;
            edges.push(LtsEdge {
                from: id,
                to,
                labels: Vec::new(),
                kind: EdgeKind::Tick,
            });
        }
    }

    Ok(Lts {
        nodes,
        edges,
        initial: root,
    })
}

fn label_text(label: &Label) -> String {
    match label {
        Label::Silent => "_".into(),
        Label::Tick => "tick".into(),
        Label::Agree(a) => {
            let mut s = format!("agree({})", a.parties.join(","));
            for g in &a.groups {
                let vals: Vec<String> = g.values.iter().map(|v| v.to_string()).collect();
                let _ = write!(s, " {}:{}", g.parties.join(","), vals.join(","));
            }
            s
        }
        Label::Call(c) => {
            let args: Vec<String> = c.args.iter().map(|v| v.to_string()).collect();
            let assets: Vec<String> = c
                .assets
                .iter()
                .map(|a| match a {
                    crate::runtime::AssetArg::Fungible(v) => v.to_string(),
                    crate::runtime::AssetArg::Token { id } => format!("token:{id}"),
                })
                .collect();
            format!("{}:{}({})[{}]", c.party, c.fn_name, args.join(","), assets.join(","))
        }
        Label::ValueOut { value, to } => format!("{value} -> {to}"),
        Label::AssetOut { asset, to } => match asset {
            AssetOut::Fungible(v) => format!("{v} -o {to}"),
            AssetOut::Token { id } => format!("token:{id} -o {to}"),
        },
    }
}

/// Render the LTS in DOT format for inspection.
pub fn to_dot(lts: &Lts, title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{title}\" {{");
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, n) in lts.nodes.iter().enumerate() {
        let state = n
            .config
            .contracts
            .iter()
            .map(|rc| rc.phase.clone().unwrap_or_else(|| "-".into()))
            .collect::<Vec<_>>()
            .join("/");
        let pending: usize = n.config.contracts.iter().map(|rc| rc.pending.len()).sum();
        let mut label = format!("@{state} t={}", n.clock);
        if pending > 0 {
            let _ = write!(label, " E{pending}");
        }
        if n.stuck {
            label.push_str(" STUCK");
        }
        let shape = if i == lts.initial { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  n{i} [label=\"{label}\", shape={shape}];");
    }
    for e in &lts.edges {
        let text = match e.kind {
            EdgeKind::Tick => "tick".to_string(),
            EdgeKind::Unit => {
                let parts: Vec<String> = e.labels.iter().map(label_text).collect();
                if parts.is_empty() {
                    "discard".to_string()
                } else {
                    parts.join(" ; ")
                }
            }
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            e.from,
            e.to,
            text.replace('"', "'")
        );
    }
    out.push_str("}\n");
    out
}

/// Convenience for tests: all observable label sequences on unit edges out
/// of a node.
pub fn node_unit_labels(lts: &Lts, node: usize) -> HashSet<Vec<Label>> {
    lts.edges
        .iter()
        .filter(|e| e.from == node && e.kind == EdgeKind::Unit)
        .map(|e| e.labels.clone())
        .collect()
}

/// True when some node can make a unit move whose first label is the call
/// of `fn_name`, at any explored clock.
pub fn some_node_offers_call(lts: &Lts, fn_name: &str) -> bool {
    lts.edges.iter().any(|e| {
        e.labels
            .first()
            .is_some_and(|l| matches!(l, Label::Call(c) if c.fn_name == fn_name))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_contract;
    use crate::runtime::CallLabel;

    fn fg_universe() -> Universe {
        Universe::new(
            2,
            vec![AgreeLabel {
                parties: vec!["A".into(), "B".into()],
                groups: vec![],
            }],
            vec![
                CallLabel {
                    party: "A".into(),
                    fn_name: "f".into(),
                    args: vec![],
                    assets: vec![],
                },
                CallLabel {
                    party: "B".into(),
                    fn_name: "g".into(),
                    args: vec![],
                    assets: vec![],
                },
            ],
        )
    }

    #[test]
    fn loops_stay_enabled_at_every_node() {
        let src = "stipula C { agreement (A, B)() { } => @Q \
                   @Q A : f { } => @Q  @Q B : g { } => @Q }";
        let decl = parse_contract(src).unwrap();
        let lts = explore(&decl, &fg_universe()).unwrap();
        // every active node within the horizon offers both f and g
        for (i, n) in lts.nodes.iter().enumerate() {
            if n.config.contracts[0].phase.is_none() || n.clock >= 2 {
                continue;
            }
            let labels = node_unit_labels(&lts, i);
            let has = |name: &str| {
                labels.iter().any(|seq| {
                    matches!(seq.first(), Some(Label::Call(c)) if c.fn_name == name)
                })
            };
            assert!(has("f") && has("g"), "node {i}");
        }
    }

    #[test]
    fn empty_alphabet_without_agreement_is_inert() {
        let src = "stipula C { agreement (A)() { } => @Q }";
        let decl = parse_contract(src).unwrap();
        let mut u = Universe::new(1, vec![], vec![]);
        u.node_cap = 100;
        let lts = explore(&decl, &u).unwrap();
        // only the inactive initial node; without an agreement nothing moves
        assert_eq!(lts.nodes.len(), 1);
        assert!(lts.edges.is_empty());
    }

    #[test]
    fn explosion_error_reports_the_cap() {
        let src = "stipula C { agreement (A, B)() { } => @Q \
                   @Q A : f { } => @Q  @Q B : g { } => @Q }";
        let decl = parse_contract(src).unwrap();
        let mut u = fg_universe();
        u.horizon = 50;
        u.node_cap = 3;
        assert!(matches!(explore(&decl, &u), Err(ExplosionError { cap: 3 })));
    }

    #[test]
    fn dot_export_mentions_states_and_labels() {
        let src = "stipula C { agreement (A, B)() { } => @Q \
                   @Q A : f { } => @Q2  @Q2 B : g { } => @Q }";
        let decl = parse_contract(src).unwrap();
        let lts = explore(&decl, &fg_universe()).unwrap();
        let dot = to_dot(&lts, "C");
        assert!(dot.contains("digraph"));
        assert!(dot.contains("@Q"));
        assert!(dot.contains("A:f()[]"));
        assert!(dot.contains("tick"));
    }
}
