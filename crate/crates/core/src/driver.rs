//! Enabled-transition enumeration, choice dispatch, and the scripted trace
//! runner.
//!
//! The semantics has three sources of nondeterminism: the order ready event
//! handlers fire, the order permitted functions are called, and how long
//! calls are delayed. [`enabled`] exposes them as explicit choices;
//! [`run_trace`] resolves them deterministically (scheduling-order firing,
//! stale discards first, eager bodies) so golden traces are byte-stable.

use thiserror::Error;

use crate::runtime::{
    apply_agree, apply_call, discard_stale_event, exec_step, finish_body, fire_event, tick,
    AgreeLabel, CallLabel, Configuration, ExecOutcome, Label, Program, Rule,
    TraceEntry,
};
use crate::script::{ScriptAction, TraceScript};
use crate::universe::Universe;

/// Event-precedence handling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Due events whose guard state mismatches are silently discarded.
    #[default]
    Default,
    /// Literal rules: a due mismatching event blocks calls and ticks forever.
    StrictEvents,
}

/// One choice the configuration offers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnabledChoice {
    Agree { contract: String, label: AgreeLabel },
    Call { contract: String, label: CallLabel },
    FireEvent { contract: String, event_id: u64 },
    DiscardStale { contract: String, event_id: u64 },
    ExecStep { contract: String },
    Tick,
}

/// Enumerate every choice the transition rules offer, instantiating agree
/// and call labels from the universe. Sound and complete against [`step`]:
/// a choice is returned iff applying it succeeds.
pub fn enabled(prog: &Program, cfg: &Configuration, u: &Universe, mode: Mode) -> Vec<EnabledChoice> {
    let mut out = Vec::new();

    // mid-execution configurations offer exactly the next body step
    let mut mid_body = false;
    for rc in &cfg.contracts {
        if rc.residual.is_some() && rc.stuck.is_none() {
            out.push(EnabledChoice::ExecStep {
                contract: rc.name.clone(),
            });
            mid_body = true;
        }
    }
    if mid_body {
        return out;
    }

    for rc in &cfg.contracts {
        if rc.stuck.is_some() {
            continue;
        }
        for ev in rc.due_events(cfg.clock) {
            if rc.phase.as_deref() == Some(ev.guard_state.as_str()) {
                out.push(EnabledChoice::FireEvent {
                    contract: rc.name.clone(),
                    event_id: ev.id,
                });
            } else if mode == Mode::Default {
                out.push(EnabledChoice::DiscardStale {
                    contract: rc.name.clone(),
                    event_id: ev.id,
                });
            }
        }
    }

    for rc in &cfg.contracts {
        for label in &u.agrees {
            if apply_agree(prog, cfg, &rc.name, label).is_ok() {
                out.push(EnabledChoice::Agree {
                    contract: rc.name.clone(),
                    label: label.clone(),
                });
            }
        }
        for call in &u.calls {
            if apply_call(prog, cfg, &rc.name, call).is_ok() {
                out.push(EnabledChoice::Call {
                    contract: rc.name.clone(),
                    label: call.clone(),
                });
            }
        }
    }

    if tick(cfg).is_ok() {
        out.push(EnabledChoice::Tick);
    }
    out
}

/// Result of applying one choice: the transition taken, or the freeze the
/// body step ran into.
#[derive(Debug, Clone)]
pub enum StepOutcome {
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

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("choice not enabled: {0}")]
pub struct ChoiceNotEnabled(pub String);

/// Apply exactly one choice.
pub fn step(
    prog: &Program,
    cfg: &Configuration,
    choice: &EnabledChoice,
) -> Result<StepOutcome, ChoiceNotEnabled> {
    let stepped = |rule, label, next| Ok(StepOutcome::Step { rule, label, next });
    match choice {
        EnabledChoice::Agree { contract, label } => match apply_agree(prog, cfg, contract, label) {
            Ok((label, next)) => stepped(Rule::Agree, label, next),
            Err(e) => Err(ChoiceNotEnabled(e.to_string())),
        },
        EnabledChoice::Call { contract, label } => match apply_call(prog, cfg, contract, label) {
            Ok((label, next)) => stepped(Rule::Function, label, next),
            Err(e) => Err(ChoiceNotEnabled(e.to_string())),
        },
        EnabledChoice::FireEvent { contract, event_id } => {
            match fire_event(cfg, contract, *event_id) {
                Ok((label, next)) => stepped(Rule::EventMatch, label, next),
                Err(e) => Err(ChoiceNotEnabled(e.to_string())),
            }
        }
        EnabledChoice::DiscardStale { contract, event_id } => {
            match discard_stale_event(cfg, contract, *event_id) {
                Ok(next) => stepped(Rule::DiscardStale, Label::Silent, next),
                Err(e) => Err(ChoiceNotEnabled(e.to_string())),
            }
        }
        EnabledChoice::ExecStep { contract } => {
            let rc = cfg
                .contract(contract)
                .ok_or_else(|| ChoiceNotEnabled(format!("unknown contract `{contract}`")))?;
            let residual = rc
                .residual
                .as_ref()
                .ok_or_else(|| ChoiceNotEnabled("contract is idle".into()))?;
            let outcome = if residual.stmts.is_empty() {
                finish_body(prog, cfg, contract)
            } else {
                exec_step(prog, cfg, contract)
            };
            match outcome {
                Ok(ExecOutcome::Step { rule, label, next }) => stepped(rule, label, next),
                Ok(ExecOutcome::Stuck { reason, next }) => {
                    Ok(StepOutcome::Stuck { reason, next })
                }
                Err(e) => Err(ChoiceNotEnabled(e.to_string())),
            }
        }
        EnabledChoice::Tick => match tick(cfg) {
            Ok(next) => stepped(Rule::Tick, Label::Tick, next),
            Err(e) => Err(ChoiceNotEnabled(e.to_string())),
        },
    }
}

/// One line of a run: a transition, a recorded rejection, or the freeze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunLine {
    Step(TraceEntry),
    Rejected {
        at: u64,
        contract: String,
        party: String,
        fn_name: String,
        reason: String,
    },
    Stuck {
        at: u64,
        contract: String,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub lines: Vec<RunLine>,
    pub final_config: Configuration,
}

impl RunResult {
    pub fn entries(&self) -> Vec<TraceEntry> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                RunLine::Step(e) => Some(e.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn rejections(&self) -> Vec<(u64, String, String)> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                RunLine::Rejected {
                    at,
                    fn_name,
                    reason,
                    ..
                } => Some((*at, fn_name.clone(), reason.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn stuck(&self) -> Option<(u64, String)> {
        self.lines.iter().find_map(|l| match l {
            RunLine::Stuck { at, reason, .. } => Some((*at, reason.clone())),
            _ => None,
        })
    }

    /// Observable labels only, with their clock stamps.
    pub fn observations(&self) -> Vec<(u64, Label)> {
        self.entries()
            .into_iter()
            .filter(|e| e.label.is_observable())
            .map(|e| (e.at, e.label))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let with_contract = self.final_config.contracts.len() > 1;
        let mut out = String::new();
        for line in &self.lines {
            match line {
                RunLine::Step(e) => out.push_str(&crate::script::entry_to_json(e, with_contract)),
                RunLine::Rejected {
                    at,
                    contract,
                    party,
                    fn_name,
                    reason,
                } => {
                    let mut s = format!(
                        "{{\"at\":{at},\"kind\":\"rejected\",\"party\":{},\"fn\":{},\"reason\":{}",
                        serde_json::to_string(party).unwrap(),
                        serde_json::to_string(fn_name).unwrap(),
                        serde_json::to_string(reason).unwrap()
                    );
                    if with_contract {
                        s.push_str(&format!(
                            ",\"contract\":{}",
                            serde_json::to_string(contract).unwrap()
                        ));
                    }
                    s.push('}');
                    out.push_str(&s);
                }
                RunLine::Stuck {
                    at,
                    contract,
                    reason,
                } => {
                    let mut s = format!(
                        "{{\"at\":{at},\"kind\":\"stuck\",\"reason\":{}",
                        serde_json::to_string(reason).unwrap()
                    );
                    if with_contract {
                        s.push_str(&format!(
                            ",\"contract\":{}",
                            serde_json::to_string(contract).unwrap()
                        ));
                    }
                    s.push('}');
                    out.push_str(&s);
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("script transaction at {at} lies in the past (clock {clock})")]
    PastTransaction { at: u64, clock: u64 },
    #[error("unknown contract `{0}` in script")]
    UnknownContract(String),
    #[error("strict-events deadlock at clock {clock}: a due event matches no state")]
    Deadlock { clock: u64 },
    #[error("cannot advance the clock at {clock}: {reason}")]
    CannotAdvance { clock: u64, reason: String },
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub until: Option<u64>,
    pub mode: Mode,
}

struct Runner<'a> {
    prog: &'a Program,
    cfg: Configuration,
    lines: Vec<RunLine>,
    halted: bool,
    mode: Mode,
}

impl<'a> Runner<'a> {
    fn record(&mut self, contract: &str, rule: Rule, label: Label) {
        self.lines.push(RunLine::Step(TraceEntry {
            at: self.cfg.clock,
            contract: contract.to_string(),
            rule,
            label,
        }));
    }

    /// Run the named contract's residual to completion, recording each step.
    fn run_to_idle(&mut self, contract: &str) -> Result<(), RunError> {
        loop {
            let rc = self
                .cfg
                .contract(contract)
                .ok_or_else(|| RunError::UnknownContract(contract.to_string()))?;
            let Some(residual) = &rc.residual else {
                return Ok(());
            };
            let outcome = if residual.stmts.is_empty() {
                finish_body(self.prog, &self.cfg, contract)
            } else {
                exec_step(self.prog, &self.cfg, contract)
            };
            match outcome {
                Ok(ExecOutcome::Step { rule, label, next }) => {
                    self.cfg = next;
                    self.record(contract, rule, label);
                }
                Ok(ExecOutcome::Stuck { reason, next }) => {
                    self.cfg = next;
                    self.lines.push(RunLine::Stuck {
                        at: self.cfg.clock,
                        contract: contract.to_string(),
                        reason,
                    });
                    self.halted = true;
                    return Ok(());
                }
                Err(e) => return Err(RunError::Internal(e.to_string())),
            }
        }
    }

    /// Fire and discard due events until none remain at this instant:
    /// stale discards first, then the first matching event in scheduling
    /// order, handler run eagerly; repeat.
    fn settle_instant(&mut self) -> Result<(), RunError> {
        loop {
            if self.halted {
                return Ok(());
            }
            if self.mode == Mode::Default {
                let mut discarded = false;
                loop {
                    let stale = self.cfg.contracts.iter().find_map(|rc| {
                        rc.due_events(self.cfg.clock)
                            .into_iter()
                            .find(|e| rc.phase.as_deref() != Some(e.guard_state.as_str()))
                            .map(|e| (rc.name.clone(), e.id))
                    });
                    match stale {
                        None => break,
                        Some((contract, id)) => {
                            self.cfg = discard_stale_event(&self.cfg, &contract, id)
                                .map_err(|e| RunError::Internal(e.to_string()))?;
                            self.record(&contract, Rule::DiscardStale, Label::Silent);
                            discarded = true;
                        }
                    }
                }
                let _ = discarded;
            }
            let matching = self.cfg.contracts.iter().find_map(|rc| {
                rc.due_events(self.cfg.clock)
                    .into_iter()
                    .find(|e| rc.phase.as_deref() == Some(e.guard_state.as_str()))
                    .map(|e| (rc.name.clone(), e.id))
            });
            match matching {
                None => return Ok(()),
                Some((contract, id)) => {
                    let (label, next) = fire_event(&self.cfg, &contract, id)
                        .map_err(|e| RunError::Internal(e.to_string()))?;
                    self.cfg = next;
                    self.record(&contract, Rule::EventMatch, label);
                    self.run_to_idle(&contract)?;
                }
            }
        }
    }

    fn advance_to(&mut self, target: u64) -> Result<(), RunError> {
        while self.cfg.clock < target && !self.halted {
            self.settle_instant()?;
            if self.halted {
                return Ok(());
            }
            if self.cfg.any_event_due() {
                // only strict mode can leave a due event unsettled
                return Err(RunError::Deadlock {
                    clock: self.cfg.clock,
                });
            }
            let clock = self.cfg.clock;
            self.cfg = tick(&self.cfg).map_err(|e| RunError::CannotAdvance {
                clock,
                reason: e.to_string(),
            })?;
            // tick entries are stamped with the clock they leave
            self.lines.push(RunLine::Step(TraceEntry {
                at: self.cfg.clock - 1,
                contract: String::new(),
                rule: Rule::Tick,
                label: Label::Tick,
            }));
        }
        Ok(())
    }
}

/// Run a script against a program from the initial configuration at clock 0.
/// Rejected transactions are recorded and skipped; a stuck contract freezes
/// the run.
pub fn run_trace(
    prog: &Program,
    script: &TraceScript,
    opts: &RunOptions,
) -> Result<RunResult, RunError> {
    let mut runner = Runner {
        prog,
        cfg: Configuration::initial(prog, 0),
        lines: Vec::new(),
        halted: false,
        mode: opts.mode,
    };

    for entry in &script.entries {
        if runner.halted {
            break;
        }
        if entry.at < runner.cfg.clock {
            return Err(RunError::PastTransaction {
                at: entry.at,
                clock: runner.cfg.clock,
            });
        }
        let contract = match &entry.contract {
            Some(c) => c.clone(),
            None => prog
                .contracts
                .first()
                .map(|c| c.name.clone())
                .ok_or_else(|| RunError::Internal("empty program".into()))?,
        };
        if prog.decl(&contract).is_none() {
            return Err(RunError::UnknownContract(contract));
        }
        runner.advance_to(entry.at)?;
        if runner.halted {
            break;
        }
        runner.settle_instant()?;
        if runner.halted {
            break;
        }
        match &entry.action {
            ScriptAction::Agree(label) => {
                match apply_agree(prog, &runner.cfg, &contract, label) {
                    Ok((label, next)) => {
                        runner.cfg = next;
                        runner.record(&contract, Rule::Agree, label);
                    }
                    Err(e) => runner.lines.push(RunLine::Rejected {
                        at: runner.cfg.clock,
                        contract: contract.clone(),
                        party: String::new(),
                        fn_name: "agreement".into(),
                        reason: e.to_string(),
                    }),
                }
            }
            ScriptAction::Call(call) => match apply_call(prog, &runner.cfg, &contract, call) {
                Ok((label, next)) => {
                    runner.cfg = next;
                    runner.record(&contract, Rule::Function, label);
                    runner.run_to_idle(&contract)?;
                }
                Err(e) => runner.lines.push(RunLine::Rejected {
                    at: runner.cfg.clock,
                    contract: contract.clone(),
                    party: call.party.clone(),
                    fn_name: call.fn_name.clone(),
                    reason: e.to_string(),
                }),
            },
        }
    }

    if let Some(until) = opts.until {
        if !runner.halted {
            runner.advance_to(until)?;
            if !runner.halted {
                runner.settle_instant()?;
            }
        }
    } else if !runner.halted {
        runner.settle_instant()?;
    }

    Ok(RunResult {
        lines: runner.lines,
        final_config: runner.cfg,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("replay diverged at entry {index}: {message}")]
    Diverged { index: usize, message: String },
}

/// Re-run a recorded label stream through the single-step dispatcher; the
/// stream determines every choice. Returns the final configuration, which
/// must equal the original run's.
pub fn replay(prog: &Program, entries: &[TraceEntry]) -> Result<Configuration, ReplayError> {
    replay_with(prog, entries, |_| Ok(()))
}

/// Replay with an inspection hook invoked on every intermediate
/// configuration (used by invariant checks).
pub fn replay_with(
    prog: &Program,
    entries: &[TraceEntry],
    mut inspect: impl FnMut(&Configuration) -> Result<(), String>,
) -> Result<Configuration, ReplayError> {
    let mut cfg = Configuration::initial(prog, 0);
    let diverged = |index: usize, message: String| ReplayError::Diverged { index, message };
    inspect(&cfg).map_err(|m| diverged(0, m))?;

    for (index, entry) in entries.iter().enumerate() {
        let fail = |message: String| diverged(index, message);
        let outcome: Result<(Rule, Label, Configuration), String> = match entry.rule {
            Rule::Agree => match &entry.label {
                Label::Agree(label) => apply_agree(prog, &cfg, &entry.contract, label)
                    .map(|(l, c)| (Rule::Agree, l, c))
                    .map_err(|e| e.to_string()),
                other => Err(format!("Agree entry with label {other:?}")),
            },
            Rule::Function => match &entry.label {
                Label::Call(call) => apply_call(prog, &cfg, &entry.contract, call)
                    .map(|(l, c)| (Rule::Function, l, c))
                    .map_err(|e| e.to_string()),
                other => Err(format!("Function entry with label {other:?}")),
            },
            Rule::Tick => tick(&cfg)
                .map(|c| (Rule::Tick, Label::Tick, c))
                .map_err(|e| e.to_string()),
            Rule::EventMatch => {
                let pick = cfg
                    .contract(&entry.contract)
                    .and_then(|rc| {
                        rc.due_events(cfg.clock)
                            .into_iter()
                            .find(|e| rc.phase.as_deref() == Some(e.guard_state.as_str()))
                            .map(|e| e.id)
                    })
                    .ok_or_else(|| "no matching due event".to_string());
                pick.and_then(|id| {
                    fire_event(&cfg, &entry.contract, id)
                        .map(|(l, c)| (Rule::EventMatch, l, c))
                        .map_err(|e| e.to_string())
                })
            }
            Rule::DiscardStale => {
                let pick = cfg
                    .contract(&entry.contract)
                    .and_then(|rc| {
                        rc.due_events(cfg.clock)
                            .into_iter()
                            .find(|e| rc.phase.as_deref() != Some(e.guard_state.as_str()))
                            .map(|e| e.id)
                    })
                    .ok_or_else(|| "no stale due event".to_string());
                pick.and_then(|id| {
                    discard_stale_event(&cfg, &entry.contract, id)
                        .map(|c| (Rule::DiscardStale, Label::Silent, c))
                        .map_err(|e| e.to_string())
                })
            }
            Rule::StateChange => finish_body(prog, &cfg, &entry.contract)
                .map_err(|e| e.to_string())
                .and_then(|o| match o {
                    ExecOutcome::Step { rule, label, next } => Ok((rule, label, next)),
                    ExecOutcome::Stuck { reason, .. } => Err(format!("stuck: {reason}")),
                }),
            _ => exec_step(prog, &cfg, &entry.contract)
                .map_err(|e| e.to_string())
                .and_then(|o| match o {
                    ExecOutcome::Step { rule, label, next } => Ok((rule, label, next)),
                    ExecOutcome::Stuck { reason, .. } => Err(format!("stuck: {reason}")),
                }),
        };
        let (rule, label, next) = outcome.map_err(fail)?;
        if rule != entry.rule || label != entry.label {
            return Err(fail(format!(
                "expected {:?} {:?}, got {:?} {:?}",
                entry.rule, entry.label, rule, label
            )));
        }
        cfg = next;
        inspect(&cfg).map_err(|m| diverged(index, m))?;
    }
    Ok(cfg)
}
