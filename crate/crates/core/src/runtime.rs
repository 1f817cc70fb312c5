//! Runtime contracts, configurations, and the transition rules.
//!
//! Configurations are immutable: every operation returns a fresh
//! configuration (or a rejection that leaves the input untouched). A contract
//! that fails mid-body is flagged stuck and accepts no further transitions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ContractDecl, EventDecl, ExprKind, Stmt, StmtKind};
use crate::eval::{eval, EvalCtx, EvalError};
use crate::fixed::Fixed4;
use crate::value::{AssetValue, Memory, Slot, Value};

/// A program: one or more contract declarations sharing a clock.
#[derive(Debug, Clone)]
pub struct Program {
    pub contracts: Vec<ContractDecl>,
}

impl Program {
    pub fn single(decl: ContractDecl) -> Program {
        Program {
            contracts: vec![decl],
        }
    }

    pub fn decl(&self, name: &str) -> Option<&ContractDecl> {
        self.contracts.iter().find(|c| c.name == name)
    }
}

/// Which transition rule fired; part of every trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    Agree,
    Function,
    StateChange,
    EventMatch,
    Tick,
    ValueSend,
    AssetSend,
    FieldUpdate,
    AssetUpdate,
    CondTrue,
    CondFalse,
    DiscardStale,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Agree => "Agree",
            Rule::Function => "Function",
            Rule::StateChange => "State_Change",
            Rule::EventMatch => "Event_Match",
            Rule::Tick => "Tick",
            Rule::ValueSend => "Value_Send",
            Rule::AssetSend => "Asset_Send",
            Rule::FieldUpdate => "Field_Update",
            Rule::AssetUpdate => "Asset_Update",
            Rule::CondTrue => "Cond_true",
            Rule::CondFalse => "Cond_false",
            Rule::DiscardStale => "Discard_Stale",
        }
    }
}

/// An asset passed into a call by the external caller.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssetArg {
    Fungible(Fixed4),
    Token { id: String },
}

// Asset arguments serialize as {"fungible":"2.0000"} or {"token":"id"}.
impl Serialize for AssetArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(1))?;
        match self {
            AssetArg::Fungible(v) => map.serialize_entry("fungible", &v.to_string())?,
            AssetArg::Token { id } => map.serialize_entry("token", id)?,
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AssetArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<AssetArg, D::Error> {
        use serde::de::Error as _;
        let raw = serde_json::Value::deserialize(d)?;
        let obj = raw
            .as_object()
            .filter(|o| o.len() == 1)
            .ok_or_else(|| D::Error::custom("asset argument must be a single-key object"))?;
        let (k, v) = obj.iter().next().expect("len checked");
        match (k.as_str(), v.as_str()) {
            ("fungible", Some(s)) => Ok(AssetArg::Fungible(s.parse().map_err(D::Error::custom)?)),
            ("token", Some(s)) => Ok(AssetArg::Token { id: s.to_string() }),
            _ => Err(D::Error::custom("expected {\"fungible\":..} or {\"token\":..}")),
        }
    }
}

/// An asset leaving the contract toward a party.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssetOut {
    Fungible(Fixed4),
    Token { id: String },
}

/// The agreement observation `(A, A_1 : v_1, ...)`: actual parties
/// positionally bound to the contract's party parameters, plus one value
/// group per agreement row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgreeLabel {
    pub parties: Vec<String>,
    #[serde(default)]
    pub groups: Vec<AgreeGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgreeGroup {
    pub parties: Vec<String>,
    pub values: Vec<Value>,
}

/// The call observation `A : f(u)[v]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallLabel {
    pub party: String,
    #[serde(rename = "fn")]
    pub fn_name: String,
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default)]
    pub assets: Vec<AssetArg>,
}

/// Transition labels μ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Silent,
    Agree(AgreeLabel),
    Call(CallLabel),
    ValueOut { value: Value, to: String },
    AssetOut { asset: AssetOut, to: String },
    Tick,
}

impl Label {
    pub fn is_observable(&self) -> bool {
        !matches!(self, Label::Silent | Label::Tick)
    }
}

/// A scheduled event whose time guard has already been evaluated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PendingEvent {
    /// Scheduling-order id; not part of configuration identity.
    pub id: u64,
    pub trigger: u64,
    pub guard_state: String,
    pub handler: Vec<Stmt>,
    pub next_state: String,
}

/// The in-flight remainder of a function body or event handler.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Residual {
    pub stmts: Vec<Stmt>,
    pub events: Vec<EventDecl>,
    pub next_state: String,
    /// Parameter bindings dropped when the body completes.
    pub transient: Vec<String>,
}

/// The paper's C(Φ, ℓ, Σ, Ψ).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuntimeContract {
    pub name: String,
    pub phase: Option<String>,
    pub memory: Memory,
    pub residual: Option<Residual>,
    pub pending: Vec<PendingEvent>,
    pub stuck: Option<String>,
    /// Monotone counter behind `uses`/`use_once` codes.
    pub code_seq: u64,
    /// Source of scheduling-order ids for pending events.
    pub event_seq: u64,
}

impl RuntimeContract {
    fn fresh(name: &str) -> RuntimeContract {
        RuntimeContract {
            name: name.to_string(),
            phase: None,
            memory: Memory::new(),
            residual: None,
            pending: Vec::new(),
            stuck: None,
            code_seq: 0,
            event_seq: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.residual.is_none() && self.stuck.is_none()
    }

    pub fn due_events(&self, clock: u64) -> Vec<&PendingEvent> {
        self.pending.iter().filter(|e| e.trigger == clock).collect()
    }
}

/// A runtime configuration: the contracts plus the global clock.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub contracts: Vec<RuntimeContract>,
    pub clock: u64,
}

impl Configuration {
    pub fn initial(prog: &Program, clock: u64) -> Configuration {
        Configuration {
            contracts: prog
                .contracts
                .iter()
                .map(|c| RuntimeContract::fresh(&c.name))
                .collect(),
            clock,
        }
    }

    pub fn contract(&self, name: &str) -> Option<&RuntimeContract> {
        self.contracts.iter().find(|c| c.name == name)
    }

    fn contract_mut(&mut self, name: &str) -> Option<&mut RuntimeContract> {
        self.contracts.iter_mut().find(|c| c.name == name)
    }

    /// True when some contract has an event due at the current instant.
    pub fn any_event_due(&self) -> bool {
        self.contracts
            .iter()
            .any(|c| !c.due_events(self.clock).is_empty())
    }

    /// Token ids currently held anywhere in the configuration.
    pub fn held_token_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.contracts {
            for slot in c.memory.values() {
                if let Slot::Asset(AssetValue::Token { id, held: true }) = slot {
                    out.push(id.clone());
                }
            }
        }
        out
    }
}

/// One step of a recorded run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub at: u64,
    pub contract: String,
    pub rule: Rule,
    pub label: Label,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgreeError {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract is already active")]
    AlreadyActive,
    #[error("group mismatch: {0}")]
    GroupMismatch(String),
    #[error("missing field value: {0}")]
    MissingFieldValue(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CallRejected {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract is not idle")]
    NotIdle,
    #[error("contract is stuck: {0}")]
    Stuck(String),
    #[error("contract is not active yet")]
    NotActive,
    #[error("no function `{0}`")]
    NoSuchFunction(String),
    #[error("wrong state: `{fn_name}` is not callable in @{state}")]
    WrongState { fn_name: String, state: String },
    #[error("wrong caller: `{party}` may not call `{fn_name}`")]
    WrongCaller { party: String, fn_name: String },
    #[error("arity mismatch calling `{0}`")]
    ArityMismatch(String),
    #[error("an event is pending at this instant")]
    EventPending,
    #[error("precondition false")]
    PreconditionFalse,
    #[error("precondition failed to evaluate: {0}")]
    PreconditionError(EvalError),
    #[error("bad asset argument: {0}")]
    BadAssetArg(String),
    #[error("token `{0}` is already held by the configuration")]
    DuplicateToken(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventError {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract is not idle")]
    NotIdle,
    #[error("no pending event with id {0}")]
    NoSuchEvent(u64),
    #[error("event not ready: trigger {trigger} vs clock {clock}")]
    NotDue { trigger: u64, clock: u64 },
    #[error("event guard state @{guard} does not match @{state}")]
    GuardMismatch { guard: String, state: String },
    #[error("event guard state matches; fire it instead of discarding")]
    GuardMatches,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TickBlocked {
    #[error("contract `{0}` is mid-execution")]
    NotIdle(String),
    #[error("contract `{0}` is stuck")]
    StuckContract(String),
    #[error("contract `{0}` has no state yet; the first action is an agreement")]
    Inactive(String),
    #[error("event due in `{contract}` at the current instant")]
    EventDue { contract: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract has no residual to execute")]
    NoResidual,
    #[error("residual has no leading statement; the body is finished")]
    BodyFinished,
    #[error("residual has a leading statement; the body is not finished")]
    BodyNotFinished,
    #[error("contract is stuck: {0}")]
    AlreadyStuck(String),
}

/// Outcome of executing one body step: either a transition or a freeze.
#[derive(Debug, Clone)]
pub enum ExecOutcome {
    Step {
        rule: Rule,
        label: Label,
        next: Configuration,
    },
    Stuck {
        reason: String,
        next: Configuration,
    },
}

fn sorted(v: &[String]) -> Vec<String> {
    let mut s = v.to_vec();
    s.sort();
    s
}

/// Rule Agree: multiparty synchronization activating an inactive contract.
/// Binds party parameters, initializes the agreed fields, and creates empty
/// asset cells (no asset can be set during the agreement).
pub fn apply_agree(
    prog: &Program,
    cfg: &Configuration,
    contract: &str,
    label: &AgreeLabel,
) -> Result<(Label, Configuration), AgreeError> {
    let decl = prog
        .decl(contract)
        .ok_or_else(|| AgreeError::UnknownContract(contract.to_string()))?;
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| AgreeError::UnknownContract(contract.to_string()))?;
    if rc.phase.is_some() {
        return Err(AgreeError::AlreadyActive);
    }
    let a = &decl.agreement;
    if label.parties.len() != a.parties.len() {
        return Err(AgreeError::GroupMismatch(format!(
            "expected {} parties, got {}",
            a.parties.len(),
            label.parties.len()
        )));
    }
    let binding: BTreeMap<&String, &String> =
        a.parties.iter().zip(label.parties.iter()).collect();

    if label.groups.len() != a.groups.len() {
        return Err(AgreeError::GroupMismatch(format!(
            "expected {} groups, got {}",
            a.groups.len(),
            label.groups.len()
        )));
    }

    let mut memory = Memory::new();
    for (param, actual) in &binding {
        memory.insert(
            (*param).clone(),
            Slot::Val(Value::Party((*actual).clone())),
        );
    }
    for (decl_group, label_group) in a.groups.iter().zip(label.groups.iter()) {
        let expected: Vec<String> = decl_group
            .parties
            .iter()
            .map(|p| (*binding.get(p).expect("checked subset")).clone())
            .collect();
        if sorted(&expected) != sorted(&label_group.parties) {
            return Err(AgreeError::GroupMismatch(format!(
                "group parties {:?} do not match {:?}",
                label_group.parties, expected
            )));
        }
        if label_group.values.len() != decl_group.fields.len() {
            return Err(AgreeError::MissingFieldValue(format!(
                "group initializes {} fields, got {} values",
                decl_group.fields.len(),
                label_group.values.len()
            )));
        }
        for (field, value) in decl_group.fields.iter().zip(label_group.values.iter()) {
            memory.insert(field.clone(), Slot::Val(value.clone()));
        }
    }
    for asset in &decl.assets {
        memory.insert(asset.clone(), Slot::Asset(AssetValue::empty()));
    }

    let mut next = cfg.clone();
    let rc = next.contract_mut(contract).expect("looked up above");
    rc.phase = Some(a.initial_state.clone());
    rc.memory = memory;
    rc.residual = None;
    rc.pending.clear();
    Ok((Label::Agree(label.clone()), next))
}

/// Rule Function: a permitted call binds parameters and loads the body as
/// the residual. Pending events at the current instant have precedence and
/// reject the call. A rejection leaves the configuration unchanged.
pub fn apply_call(
    prog: &Program,
    cfg: &Configuration,
    contract: &str,
    call: &CallLabel,
) -> Result<(Label, Configuration), CallRejected> {
    let decl = prog
        .decl(contract)
        .ok_or_else(|| CallRejected::UnknownContract(contract.to_string()))?;
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| CallRejected::UnknownContract(contract.to_string()))?;
    if let Some(reason) = &rc.stuck {
        return Err(CallRejected::Stuck(reason.clone()));
    }
    if rc.residual.is_some() {
        return Err(CallRejected::NotIdle);
    }
    let state = rc.phase.as_ref().ok_or(CallRejected::NotActive)?;
    if !rc.due_events(cfg.clock).is_empty() {
        return Err(CallRejected::EventPending);
    }

    let named: Vec<_> = decl
        .functions
        .iter()
        .filter(|f| f.name == call.fn_name)
        .collect();
    if named.is_empty() {
        return Err(CallRejected::NoSuchFunction(call.fn_name.clone()));
    }
    let in_state: Vec<_> = named
        .iter()
        .filter(|f| f.guard_state == *state)
        .collect();
    if in_state.is_empty() {
        return Err(CallRejected::WrongState {
            fn_name: call.fn_name.clone(),
            state: state.clone(),
        });
    }
    let f = in_state
        .iter()
        .find(|f| {
            matches!(rc.memory.get(&f.caller), Some(Slot::Val(Value::Party(p))) if *p == call.party)
        })
        .ok_or_else(|| CallRejected::WrongCaller {
            party: call.party.clone(),
            fn_name: call.fn_name.clone(),
        })?;

    if call.args.len() != f.value_params.len() || call.assets.len() != f.asset_params.len() {
        return Err(CallRejected::ArityMismatch(call.fn_name.clone()));
    }

    let mut held = cfg.held_token_ids();
    let mut memory = rc.memory.clone();
    for (z, v) in f.value_params.iter().zip(call.args.iter()) {
        memory.insert(z.clone(), Slot::Val(v.clone()));
    }
    for (y, arg) in f.asset_params.iter().zip(call.assets.iter()) {
        let cell = match arg {
            AssetArg::Fungible(amount) => {
                if amount.is_negative() {
                    return Err(CallRejected::BadAssetArg(format!(
                        "negative amount {amount}"
                    )));
                }
                AssetValue::Fungible(*amount)
            }
            AssetArg::Token { id } => {
                if held.iter().any(|h| h == id) {
                    return Err(CallRejected::DuplicateToken(id.clone()));
                }
                held.push(id.clone());
                AssetValue::Token {
                    id: id.clone(),
                    held: true,
                }
            }
        };
        memory.insert(y.clone(), Slot::Asset(cell));
    }

    let mut code_seq = rc.code_seq;
    if let Some(pre) = &f.precondition {
        let mut ctx = EvalCtx {
            mem: &memory,
            now: cfg.clock,
            code_seq: &mut code_seq,
        };
        match eval(pre, &mut ctx) {
            Ok(Value::Bool(true)) => {}
            Ok(Value::Bool(false)) => return Err(CallRejected::PreconditionFalse),
            Ok(other) => {
                return Err(CallRejected::PreconditionError(EvalError::TypeMismatch(
                    format!("precondition evaluated to {}", other.type_name()),
                )))
            }
            Err(e) => return Err(CallRejected::PreconditionError(e)),
        }
    }

    let mut transient: Vec<String> = f.value_params.clone();
    transient.extend(f.asset_params.iter().cloned());

    let mut next = cfg.clone();
    let rc = next.contract_mut(contract).expect("looked up above");
    rc.memory = memory;
    rc.code_seq = code_seq;
    rc.residual = Some(Residual {
        stmts: f.body.clone(),
        events: f.events.clone(),
        next_state: f.next_state.clone(),
        transient,
    });
    Ok((Label::Call(call.clone()), next))
}

/// Execute exactly one leading statement of the residual (Table 3 rules).
pub fn exec_step(
    prog: &Program,
    cfg: &Configuration,
    contract: &str,
) -> Result<ExecOutcome, ExecError> {
    let decl = prog
        .decl(contract)
        .ok_or_else(|| ExecError::UnknownContract(contract.to_string()))?;
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| ExecError::UnknownContract(contract.to_string()))?;
    if let Some(reason) = &rc.stuck {
        return Err(ExecError::AlreadyStuck(reason.clone()));
    }
    let residual = rc.residual.as_ref().ok_or(ExecError::NoResidual)?;
    if residual.stmts.is_empty() {
        return Err(ExecError::BodyFinished);
    }
    let stmt = residual.stmts[0].clone();

    let mut next = cfg.clone();
    let clock = cfg.clock;
    let rcm = next.contract_mut(contract).expect("looked up above");
    rcm.residual.as_mut().expect("checked").stmts.remove(0);

    let stick = |mut cfg: Configuration, reason: String| {
        let rc = cfg.contract_mut(contract).expect("looked up above");
        rc.stuck = Some(reason.clone());
        Ok(ExecOutcome::Stuck { reason, next: cfg })
    };

    match stmt.kind {
        StmtKind::Send { value, dest } => {
            let is_field = decl.fields.contains(&dest);
            let mut seq = rcm.code_seq;
            let evaluated = {
                let mut ctx = EvalCtx {
                    mem: &rcm.memory,
                    now: clock,
                    code_seq: &mut seq,
                };
                eval(&value, &mut ctx)
            };
            let v = match evaluated {
                Ok(v) => v,
                Err(e) => return stick(next, e.to_string()),
            };
            rcm.code_seq = seq;
            if is_field {
                rcm.memory.insert(dest, Slot::Val(v));
                Ok(ExecOutcome::Step {
                    rule: Rule::FieldUpdate,
                    label: Label::Silent,
                    next,
                })
            } else {
                match rcm.memory.get(&dest) {
                    Some(Slot::Val(Value::Party(p))) => {
                        let to = p.clone();
                        Ok(ExecOutcome::Step {
                            rule: Rule::ValueSend,
                            label: Label::ValueOut { value: v, to },
                            next,
                        })
                    }
                    _ => stick(
                        next,
                        format!("`{dest}` is neither a field nor a bound party"),
                    ),
                }
            }
        }
        StmtKind::AssetTransfer {
            value,
            source,
            dest,
        } => {
            let source_cell = match rcm.memory.get(&source) {
                Some(Slot::Asset(a)) => a.clone(),
                _ => return stick(next, format!("`{source}` is not an asset cell")),
            };
            match source_cell {
                AssetValue::Token { id, held } => {
                    // tokens move whole; the source expression must be the cell itself
                    if !matches!(&value.kind, ExprKind::Name(n) if *n == source) {
                        return stick(next, format!("token asset `{source}` cannot be split"));
                    }
                    if !held {
                        return stick(next, format!("token in `{source}` is no longer held"));
                    }
                    match rcm.memory.get(&dest).cloned() {
                        Some(Slot::Val(Value::Party(p))) => {
                            rcm.memory.insert(
                                source,
                                Slot::Asset(AssetValue::Token {
                                    id: id.clone(),
                                    held: false,
                                }),
                            );
                            Ok(ExecOutcome::Step {
                                rule: Rule::AssetSend,
                                label: Label::AssetOut {
                                    asset: AssetOut::Token { id },
                                    to: p,
                                },
                                next,
                            })
                        }
                        Some(Slot::Asset(cell)) if cell.is_drained() => {
                            rcm.memory.insert(
                                source,
                                Slot::Asset(AssetValue::Token {
                                    id: id.clone(),
                                    held: false,
                                }),
                            );
                            rcm.memory
                                .insert(dest, Slot::Asset(AssetValue::Token { id, held: true }));
                            Ok(ExecOutcome::Step {
                                rule: Rule::AssetUpdate,
                                label: Label::Silent,
                                next,
                            })
                        }
                        Some(Slot::Asset(_)) => {
                            stick(next, format!("asset `{dest}` is not empty for a token"))
                        }
                        _ => stick(next, format!("`{dest}` is not an asset or bound party")),
                    }
                }
                AssetValue::Fungible(available) => {
                    let mut seq = rcm.code_seq;
                    let evaluated = {
                        let mut ctx = EvalCtx {
                            mem: &rcm.memory,
                            now: clock,
                            code_seq: &mut seq,
                        };
                        eval(&value, &mut ctx)
                    };
                    let amount = match evaluated {
                        Ok(Value::Real(v)) => v,
                        Ok(other) => {
                            return stick(
                                next,
                                format!("asset amount has type {}", other.type_name()),
                            )
                        }
                        Err(e) => return stick(next, e.to_string()),
                    };
                    rcm.code_seq = seq;
                    if amount.is_negative() {
                        return stick(next, format!("negative asset amount {amount}"));
                    }
                    if available < amount {
                        return stick(
                            next,
                            format!(
                                "insufficient asset `{source}`: have {available}, need {amount}"
                            ),
                        );
                    }
                    let remaining = match available.checked_sub(amount) {
                        Ok(v) => v,
                        Err(e) => return stick(next, e.to_string()),
                    };
                    match rcm.memory.get(&dest).cloned() {
                        Some(Slot::Val(Value::Party(p))) => {
                            rcm.memory
                                .insert(source, Slot::Asset(AssetValue::Fungible(remaining)));
                            Ok(ExecOutcome::Step {
                                rule: Rule::AssetSend,
                                label: Label::AssetOut {
                                    asset: AssetOut::Fungible(amount),
                                    to: p,
                                },
                                next,
                            })
                        }
                        Some(Slot::Asset(AssetValue::Fungible(existing))) => {
                            let total = match existing.checked_add(amount) {
                                Ok(v) => v,
                                Err(e) => return stick(next, e.to_string()),
                            };
                            rcm.memory
                                .insert(source, Slot::Asset(AssetValue::Fungible(remaining)));
                            rcm.memory
                                .insert(dest, Slot::Asset(AssetValue::Fungible(total)));
                            Ok(ExecOutcome::Step {
                                rule: Rule::AssetUpdate,
                                label: Label::Silent,
                                next,
                            })
                        }
                        Some(Slot::Asset(AssetValue::Token { .. })) => stick(
                            next,
                            format!("asset `{dest}` holds a token; cannot receive currency"),
                        ),
                        _ => stick(next, format!("`{dest}` is not an asset or bound party")),
                    }
                }
            }
        }
        StmtKind::If { cond, body } => {
            let mut seq = rcm.code_seq;
            let evaluated = {
                let mut ctx = EvalCtx {
                    mem: &rcm.memory,
                    now: clock,
                    code_seq: &mut seq,
                };
                eval(&cond, &mut ctx)
            };
            match evaluated {
                Ok(Value::Bool(true)) => {
                    rcm.code_seq = seq;
                    let residual = rcm.residual.as_mut().expect("checked");
                    let mut stmts = body;
                    stmts.append(&mut residual.stmts);
                    residual.stmts = stmts;
                    Ok(ExecOutcome::Step {
                        rule: Rule::CondTrue,
                        label: Label::Silent,
                        next,
                    })
                }
                Ok(Value::Bool(false)) => {
                    rcm.code_seq = seq;
                    Ok(ExecOutcome::Step {
                        rule: Rule::CondFalse,
                        label: Label::Silent,
                        next,
                    })
                }
                Ok(other) => stick(
                    next,
                    format!("condition has type {}", other.type_name()),
                ),
                Err(e) => stick(next, e.to_string()),
            }
        }
    }
}

/// Rule State Change: statements done; schedule the events (guards evaluated
/// eagerly with `now` bound to the clock), drop transient parameters, and
/// move to the target state. Dropping an undrained asset parameter is a
/// linearity failure and sticks the contract.
pub fn finish_body(
    prog: &Program,
    cfg: &Configuration,
    contract: &str,
) -> Result<ExecOutcome, ExecError> {
    let _ = prog;
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| ExecError::UnknownContract(contract.to_string()))?;
    if let Some(reason) = &rc.stuck {
        return Err(ExecError::AlreadyStuck(reason.clone()));
    }
    let residual = rc.residual.as_ref().ok_or(ExecError::NoResidual)?;
    if !residual.stmts.is_empty() {
        return Err(ExecError::BodyNotFinished);
    }

    let mut next = cfg.clone();
    let clock = cfg.clock;
    let rcm = next.contract_mut(contract).expect("looked up above");

    let stick = |mut cfg: Configuration, reason: String| {
        let rc = cfg.contract_mut(contract).expect("looked up above");
        rc.stuck = Some(reason.clone());
        Ok(ExecOutcome::Stuck { reason, next: cfg })
    };

    // evaluate event guards before dropping parameters (they cannot occur in
    // events, so the order is immaterial; eagerness is what matters)
    let residual = rcm.residual.clone().expect("checked");
    let mut scheduled = Vec::new();
    for w in &residual.events {
        let mut seq = rcm.code_seq;
        let evaluated = {
            let mut ctx = EvalCtx {
                mem: &rcm.memory,
                now: clock,
                code_seq: &mut seq,
            };
            eval(&w.guard_expr, &mut ctx)
        };
        let trigger = match evaluated {
            Ok(v) => match v.as_time() {
                Some(t) => t,
                None => {
                    return stick(
                        next,
                        format!("event guard evaluated to non-time {}", v.type_name()),
                    )
                }
            },
            Err(e) => return stick(next, format!("event guard failed: {e}")),
        };
        rcm.code_seq = seq;
        scheduled.push(PendingEvent {
            id: 0, // assigned below
            trigger,
            guard_state: w.guard_state.clone(),
            handler: w.handler.clone(),
            next_state: w.next_state.clone(),
        });
    }

    for name in &residual.transient {
        if let Some(Slot::Asset(cell)) = rcm.memory.get(name) {
            if !cell.is_drained() {
                return stick(
                    next,
                    format!("asset parameter `{name}` not drained at end of body"),
                );
            }
        }
        rcm.memory.remove(name);
    }

    for mut ev in scheduled {
        ev.id = rcm.event_seq;
        rcm.event_seq += 1;
        rcm.pending.push(ev);
    }
    rcm.phase = Some(residual.next_state.clone());
    rcm.residual = None;
    Ok(ExecOutcome::Step {
        rule: Rule::StateChange,
        label: Label::Silent,
        next,
    })
}

/// Rule Event Match: an event fires when its trigger equals the clock and
/// its guard state is the current state; the handler becomes the residual.
pub fn fire_event(
    cfg: &Configuration,
    contract: &str,
    event_id: u64,
) -> Result<(Label, Configuration), EventError> {
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| EventError::UnknownContract(contract.to_string()))?;
    if !rc.is_idle() {
        return Err(EventError::NotIdle);
    }
    let ev = rc
        .pending
        .iter()
        .find(|e| e.id == event_id)
        .ok_or(EventError::NoSuchEvent(event_id))?;
    if ev.trigger != cfg.clock {
        return Err(EventError::NotDue {
            trigger: ev.trigger,
            clock: cfg.clock,
        });
    }
    let state = rc.phase.clone().unwrap_or_default();
    if ev.guard_state != state {
        return Err(EventError::GuardMismatch {
            guard: ev.guard_state.clone(),
            state,
        });
    }
    let mut next = cfg.clone();
    let rcm = next.contract_mut(contract).expect("looked up above");
    let pos = rcm
        .pending
        .iter()
        .position(|e| e.id == event_id)
        .expect("found above");
    let ev = rcm.pending.remove(pos);
    rcm.residual = Some(Residual {
        stmts: ev.handler,
        events: Vec::new(),
        next_state: ev.next_state,
        transient: Vec::new(),
    });
    Ok((Label::Silent, next))
}

/// Silently drop an event that is due now but guards a different state. This
/// resolves the deadlock the literal rules would otherwise reach; strict
/// mode simply never invokes it.
pub fn discard_stale_event(
    cfg: &Configuration,
    contract: &str,
    event_id: u64,
) -> Result<Configuration, EventError> {
    let rc = cfg
        .contract(contract)
        .ok_or_else(|| EventError::UnknownContract(contract.to_string()))?;
    if !rc.is_idle() {
        return Err(EventError::NotIdle);
    }
    let ev = rc
        .pending
        .iter()
        .find(|e| e.id == event_id)
        .ok_or(EventError::NoSuchEvent(event_id))?;
    if ev.trigger != cfg.clock {
        return Err(EventError::NotDue {
            trigger: ev.trigger,
            clock: cfg.clock,
        });
    }
    if rc.phase.as_deref() == Some(ev.guard_state.as_str()) {
        return Err(EventError::GuardMatches);
    }
    let mut next = cfg.clone();
    let rcm = next.contract_mut(contract).expect("looked up above");
    let pos = rcm
        .pending
        .iter()
        .position(|e| e.id == event_id)
        .expect("found above");
    rcm.pending.remove(pos);
    Ok(next)
}

/// Rule Tick (and Tick+ over several contracts): time advances only when
/// every contract is idle and no event anywhere is due at this instant.
pub fn tick(cfg: &Configuration) -> Result<Configuration, TickBlocked> {
    for rc in &cfg.contracts {
        if rc.stuck.is_some() {
            return Err(TickBlocked::StuckContract(rc.name.clone()));
        }
        if rc.residual.is_some() {
            return Err(TickBlocked::NotIdle(rc.name.clone()));
        }
        if rc.phase.is_none() {
            return Err(TickBlocked::Inactive(rc.name.clone()));
        }
        if !rc.due_events(cfg.clock).is_empty() {
            return Err(TickBlocked::EventDue {
                contract: rc.name.clone(),
            });
        }
    }
    let mut next = cfg.clone();
    next.clock += 1;
    Ok(next)
}

/// Remove pending events whose trigger already elapsed; the result is
/// behaviorally equivalent to the input (they could never fire or block).
pub fn gc_events(cfg: &Configuration) -> Configuration {
    let mut next = cfg.clone();
    for rc in &mut next.contracts {
        rc.pending.retain(|e| e.trigger >= cfg.clock);
    }
    next
}

// ---------------------------------------------------------------------------
// conservation

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContractLedger {
    pub fungible_in: Fixed4,
    pub fungible_out: Fixed4,
    pub fungible_held: Fixed4,
    pub tokens_in: Vec<String>,
    pub tokens_out: Vec<String>,
    pub tokens_held: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservationLedger {
    pub per_contract: BTreeMap<String, ContractLedger>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConservationViolation {
    #[error("contract `{contract}`: received {received} but held {held} + sent {sent}")]
    FungibleMismatch {
        contract: String,
        received: Fixed4,
        held: Fixed4,
        sent: Fixed4,
    },
    #[error("contract `{contract}`: token `{id}` duplicated")]
    TokenDuplicated { contract: String, id: String },
    #[error("contract `{contract}`: token `{id}` {problem}")]
    TokenMismatch {
        contract: String,
        id: String,
        problem: String,
    },
    #[error("arithmetic overflow while summing the ledger")]
    Overflow,
}

/// Audit a complete run: per contract, fungible amounts received through
/// call arguments must equal amounts held in cells plus amounts emitted, and
/// every token id must sit in exactly one place. A violation indicates an
/// interpreter bug, never a user error.
pub fn conservation_report(
    entries: &[TraceEntry],
    final_cfg: &Configuration,
) -> Result<ConservationLedger, ConservationViolation> {
    let mut per_contract: BTreeMap<String, ContractLedger> = BTreeMap::new();
    for rc in &final_cfg.contracts {
        per_contract.insert(rc.name.clone(), ContractLedger::default());
    }
    let add = |a: Fixed4, b: Fixed4| a.checked_add(b).map_err(|_| ConservationViolation::Overflow);

    for entry in entries {
        if entry.contract.is_empty() {
            continue; // tick entries carry no contract
        }
        let ledger = per_contract.entry(entry.contract.clone()).or_default();
        match &entry.label {
            Label::Call(call) => {
                for arg in &call.assets {
                    match arg {
                        AssetArg::Fungible(v) => ledger.fungible_in = add(ledger.fungible_in, *v)?,
                        AssetArg::Token { id } => ledger.tokens_in.push(id.clone()),
                    }
                }
            }
            Label::AssetOut { asset, .. } => match asset {
                AssetOut::Fungible(v) => ledger.fungible_out = add(ledger.fungible_out, *v)?,
                AssetOut::Token { id } => ledger.tokens_out.push(id.clone()),
            },
            _ => {}
        }
    }

    for rc in &final_cfg.contracts {
        let ledger = per_contract.entry(rc.name.clone()).or_default();
        for slot in rc.memory.values() {
            match slot {
                Slot::Asset(AssetValue::Fungible(v)) => {
                    if v.is_negative() {
                        return Err(ConservationViolation::FungibleMismatch {
                            contract: rc.name.clone(),
                            received: ledger.fungible_in,
                            held: *v,
                            sent: ledger.fungible_out,
                        });
                    }
                    ledger.fungible_held = add(ledger.fungible_held, *v)?;
                }
                Slot::Asset(AssetValue::Token { id, held: true }) => {
                    ledger.tokens_held.push(id.clone());
                }
                _ => {}
            }
        }
    }

    for (contract, ledger) in &per_contract {
        let spent = add(ledger.fungible_held, ledger.fungible_out)?;
        if spent != ledger.fungible_in {
            return Err(ConservationViolation::FungibleMismatch {
                contract: contract.clone(),
                received: ledger.fungible_in,
                held: ledger.fungible_held,
                sent: ledger.fungible_out,
            });
        }
        let mut seen = BTreeMap::new();
        for id in ledger.tokens_held.iter().chain(ledger.tokens_out.iter()) {
            *seen.entry(id.clone()).or_insert(0u32) += 1;
        }
        for (id, count) in &seen {
            if *count > 1 {
                return Err(ConservationViolation::TokenDuplicated {
                    contract: contract.clone(),
                    id: id.clone(),
                });
            }
        }
        let mut received = BTreeMap::new();
        for id in &ledger.tokens_in {
            *received.entry(id.clone()).or_insert(0u32) += 1;
        }
        for (id, count) in &received {
            if *count > 1 {
                return Err(ConservationViolation::TokenDuplicated {
                    contract: contract.clone(),
                    id: id.clone(),
                });
            }
            if seen.get(id).copied().unwrap_or(0) != 1 {
                return Err(ConservationViolation::TokenMismatch {
                    contract: contract.clone(),
                    id: id.clone(),
                    problem: "received but neither held nor sent".into(),
                });
            }
        }
        for id in seen.keys() {
            if !received.contains_key(id) {
                return Err(ConservationViolation::TokenMismatch {
                    contract: contract.clone(),
                    id: id.clone(),
                    problem: "present without having been received".into(),
                });
            }
        }
    }

    Ok(ConservationLedger { per_contract })
}
