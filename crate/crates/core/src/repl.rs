//! Interactive stepping session: the REPL front-end prints the current
//! configuration and the enabled-choice menu, applies one choice per turn,
//! and keeps a session log exportable as a trace script.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::ast::ContractDecl;
use crate::driver::Mode;
use crate::fixed::Fixed4;
use crate::lts::canon_key;
use crate::runtime::{
    apply_agree, apply_call, discard_stale_event, exec_step, finish_body, fire_event, tick,
    AgreeGroup, AgreeLabel, AssetArg, CallLabel, Configuration, ExecOutcome, Label, Program,
    Rule, TraceEntry,
};
use crate::script::{script_to_jsonl, ScriptAction, ScriptEntry, TraceScript};
use crate::value::Value;

pub struct ReplSession {
    pub prog: Program,
    pub cfg: Configuration,
    pub mode: Mode,
    pub labels: Vec<TraceEntry>,
    pub log: Vec<ScriptEntry>,
}

#[derive(Debug, Clone)]
pub enum MenuItem {
    Agree,
    Call { fn_name: String, caller: String },
    FireEvent { event_id: u64, trigger: u64 },
    DiscardStale { event_id: u64, trigger: u64 },
    Tick,
}

impl ReplSession {
    pub fn new(decl: ContractDecl, mode: Mode) -> ReplSession {
        let prog = Program::single(decl);
        let cfg = Configuration::initial(&prog, 0);
        ReplSession {
            prog,
            cfg,
            mode,
            labels: Vec::new(),
            log: Vec::new(),
        }
    }

    fn decl(&self) -> &ContractDecl {
        &self.prog.contracts[0]
    }

    fn contract_name(&self) -> String {
        self.decl().name.clone()
    }

    /// Stable digest of the canonical configuration.
    pub fn digest(&self) -> String {
        let mut h = DefaultHasher::new();
        canon_key(&self.cfg).hash(&mut h);
        format!("{:016x}", h.finish())
    }

    pub fn status(&self) -> String {
        let mut out = String::new();
        let rc = &self.cfg.contracts[0];
        out.push_str(&format!(
            "clock {} | {} @{}",
            self.cfg.clock,
            rc.name,
            rc.phase.as_deref().unwrap_or("-")
        ));
        if let Some(reason) = &rc.stuck {
            out.push_str(&format!(" STUCK({reason})"));
        }
        out.push('\n');
        if !rc.memory.is_empty() {
            out.push_str("  memory:");
            for (k, v) in &rc.memory {
                match v {
                    crate::value::Slot::Val(v) => out.push_str(&format!(" {k}={v}")),
                    crate::value::Slot::Asset(a) => out.push_str(&format!(" {k}:[{a}]")),
                }
            }
            out.push('\n');
        }
        if !rc.pending.is_empty() {
            out.push_str("  pending:");
            for e in &rc.pending {
                out.push_str(&format!(" [#{} t={} @{} => @{}]", e.id, e.trigger, e.guard_state, e.next_state));
            }
            out.push('\n');
        }
        out
    }

    /// The choice menu at the current configuration.
    pub fn menu(&self) -> Vec<MenuItem> {
        let mut items = Vec::new();
        let rc = &self.cfg.contracts[0];
        if rc.stuck.is_some() || rc.residual.is_some() {
            return items;
        }
        let due = rc.due_events(self.cfg.clock);
        for ev in &due {
            if rc.phase.as_deref() == Some(ev.guard_state.as_str()) {
                items.push(MenuItem::FireEvent {
                    event_id: ev.id,
                    trigger: ev.trigger,
                });
            } else if self.mode == Mode::Default {
                items.push(MenuItem::DiscardStale {
                    event_id: ev.id,
                    trigger: ev.trigger,
                });
            }
        }
        if rc.phase.is_none() {
            items.push(MenuItem::Agree);
            return items;
        }
        if due.is_empty() {
            for f in &self.decl().functions {
                if Some(f.guard_state.as_str()) == rc.phase.as_deref() {
                    items.push(MenuItem::Call {
                        fn_name: f.name.clone(),
                        caller: f.caller.clone(),
                    });
                }
            }
        }
        if tick(&self.cfg).is_ok() {
            items.push(MenuItem::Tick);
        }
        items
    }

    fn record(&mut self, rule: Rule, label: Label) {
        self.labels.push(TraceEntry {
            at: self.cfg.clock,
            contract: self.contract_name(),
            rule,
            label,
        });
    }

    /// Run bodies to completion, recording every transition.
    fn settle(&mut self) -> Result<(), String> {
        let name = self.contract_name();
        loop {
            let rc = &self.cfg.contracts[0];
            let Some(residual) = &rc.residual else {
                return Ok(());
            };
            let outcome = if residual.stmts.is_empty() {
                finish_body(&self.prog, &self.cfg, &name)
            } else {
                exec_step(&self.prog, &self.cfg, &name)
            };
            match outcome.map_err(|e| e.to_string())? {
                ExecOutcome::Step { rule, label, next } => {
                    self.cfg = next;
                    self.record(rule, label);
                }
                ExecOutcome::Stuck { reason, next } => {
                    self.cfg = next;
                    return Err(format!("contract is stuck: {reason}"));
                }
            }
        }
    }

    pub fn do_agree(&mut self, label: AgreeLabel) -> Result<(), String> {
        let name = self.contract_name();
        let at = self.cfg.clock;
        let (l, next) = apply_agree(&self.prog, &self.cfg, &name, &label).map_err(|e| e.to_string())?;
        self.cfg = next;
        self.record(Rule::Agree, l);
        self.log.push(ScriptEntry {
            at,
            contract: None,
            action: ScriptAction::Agree(label),
        });
        Ok(())
    }

    pub fn do_call(&mut self, call: CallLabel) -> Result<(), String> {
        let name = self.contract_name();
        let at = self.cfg.clock;
        let (l, next) = apply_call(&self.prog, &self.cfg, &name, &call).map_err(|e| e.to_string())?;
        self.cfg = next;
        self.record(Rule::Function, l);
        self.log.push(ScriptEntry {
            at,
            contract: None,
            action: ScriptAction::Call(call),
        });
        self.settle()
    }

    pub fn do_fire(&mut self, event_id: u64) -> Result<(), String> {
        let name = self.contract_name();
        let (l, next) = fire_event(&self.cfg, &name, event_id).map_err(|e| e.to_string())?;
        self.cfg = next;
        self.record(Rule::EventMatch, l);
        self.settle()
    }

    pub fn do_discard(&mut self, event_id: u64) -> Result<(), String> {
        let name = self.contract_name();
        let next = discard_stale_event(&self.cfg, &name, event_id).map_err(|e| e.to_string())?;
        self.cfg = next;
        self.record(Rule::DiscardStale, Label::Silent);
        Ok(())
    }

    pub fn do_tick(&mut self) -> Result<(), String> {
        let next = tick(&self.cfg).map_err(|e| e.to_string())?;
        self.labels.push(TraceEntry {
            at: self.cfg.clock,
            contract: String::new(),
            rule: Rule::Tick,
            label: Label::Tick,
        });
        self.cfg = next;
        Ok(())
    }

    pub fn do_gc(&mut self) {
        self.cfg = crate::runtime::gc_events(&self.cfg);
    }

    pub fn session_script(&self) -> TraceScript {
        TraceScript {
            entries: self.log.clone(),
        }
    }
}

/// Parse a user-entered value: decimals become reals, `true`/`false`
/// booleans, `t:<n>` times, quoted text strings, anything else a string.
pub fn parse_value(text: &str) -> Value {
    let t = text.trim();
    if let Ok(v) = t.parse::<Fixed4>() {
        return Value::Real(v);
    }
    match t {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("t:") {
        if let Ok(secs) = rest.parse::<u64>() {
            return Value::Time(secs);
        }
    }
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        return Value::Str(t[1..t.len() - 1].to_string());
    }
    Value::Str(t.to_string())
}

/// Parse an asset argument: `token:<id>` or a fungible amount.
pub fn parse_asset_arg(text: &str) -> Result<AssetArg, String> {
    let t = text.trim();
    if let Some(id) = t.strip_prefix("token:") {
        return Ok(AssetArg::Token { id: id.to_string() });
    }
    t.parse::<Fixed4>()
        .map(AssetArg::Fungible)
        .map_err(|e| e.to_string())
}

/// Drive a session over arbitrary line-based input and output.
pub fn run_repl<R: BufRead, W: Write>(
    decl: ContractDecl,
    mode: Mode,
    input: &mut R,
    out: &mut W,
) -> std::io::Result<ReplSession> {
    let mut session = ReplSession::new(decl, mode);
    let mut line = String::new();

    let mut read_line = |input: &mut R, out: &mut W, prompt: &str| -> std::io::Result<Option<String>> {
        write!(out, "{prompt}")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim().to_string()))
    };

    writeln!(out, "stipula repl — `:quit` leaves, `:labels` `:gc` `:digest` `:export <file>`")?;
    loop {
        write!(out, "{}", session.status())?;
        let menu = session.menu();
        if menu.is_empty() {
            writeln!(out, "no choices are enabled")?;
        }
        for (i, item) in menu.iter().enumerate() {
            let text = match item {
                MenuItem::Agree => "agree".to_string(),
                MenuItem::Call { fn_name, caller } => format!("call {fn_name} (caller {caller})"),
                MenuItem::FireEvent { event_id, trigger } => {
                    format!("fire event #{event_id} (due {trigger})")
                }
                MenuItem::DiscardStale { event_id, trigger } => {
                    format!("discard stale event #{event_id} (due {trigger})")
                }
                MenuItem::Tick => "tick".to_string(),
            };
            writeln!(out, "  {}) {}", i + 1, text)?;
        }
        let Some(cmd) = read_line(input, out, "> ")? else {
            break;
        };
        if cmd.is_empty() {
            continue;
        }
        if let Some(rest) = cmd.strip_prefix(':') {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("quit") | Some("q") => break,
                Some("labels") => {
                    for e in &session.labels {
                        if e.label.is_observable() {
                            writeln!(out, "  {}", crate::script::entry_to_json(e, false))?;
                        }
                    }
                }
                Some("gc") => {
                    session.do_gc();
                    writeln!(out, "expired events collected")?;
                }
                Some("digest") => writeln!(out, "{}", session.digest())?,
                Some("export") => match parts.next() {
                    Some(path) => {
                        let text = script_to_jsonl(&session.session_script());
                        match std::fs::write(path, text) {
                            Ok(()) => writeln!(out, "session written to {path}")?,
                            Err(e) => writeln!(out, "cannot write {path}: {e}")?,
                        }
                    }
                    None => writeln!(out, "usage: :export <file>")?,
                },
                other => writeln!(out, "unknown command {other:?}")?,
            }
            continue;
        }
        let Ok(choice) = cmd.parse::<usize>() else {
            writeln!(out, "enter a menu number or a `:` command")?;
            continue;
        };
        let Some(item) = menu.get(choice.saturating_sub(1)) else {
            writeln!(out, "no menu item {choice}")?;
            continue;
        };
        let result = match item.clone() {
            MenuItem::Agree => {
                let decl = session.decl().clone();
                let mut parties = Vec::new();
                let mut ok = true;
                for p in &decl.agreement.parties {
                    match read_line(input, out, &format!("party {p} = "))? {
                        Some(v) if !v.is_empty() => parties.push(v),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                let mut groups = Vec::new();
                if ok {
                    'groups: for g in &decl.agreement.groups {
                        let mut values = Vec::new();
                        for x in &g.fields {
                            match read_line(input, out, &format!("value {x} = "))? {
                                Some(v) if !v.is_empty() => values.push(parse_value(&v)),
                                _ => {
                                    ok = false;
                                    break 'groups;
                                }
                            }
                        }
                        let actuals: Vec<String> = g
                            .parties
                            .iter()
                            .map(|p| {
                                let idx = decl
                                    .agreement
                                    .parties
                                    .iter()
                                    .position(|q| q == p)
                                    .expect("checked contract");
                                parties[idx].clone()
                            })
                            .collect();
                        groups.push(AgreeGroup {
                            parties: actuals,
                            values,
                        });
                    }
                }
                if ok {
                    session.do_agree(AgreeLabel { parties, groups })
                } else {
                    Err("agreement aborted".to_string())
                }
            }
            MenuItem::Call { fn_name, caller } => {
                let decl = session.decl().clone();
                let f = decl
                    .functions
                    .iter()
                    .find(|f| {
                        f.name == fn_name
                            && Some(f.guard_state.as_str())
                                == session.cfg.contracts[0].phase.as_deref()
                    })
                    .expect("menu came from the declaration");
                let actual = match session.cfg.contracts[0].memory.get(&caller) {
                    Some(crate::value::Slot::Val(Value::Party(p))) => p.clone(),
                    _ => caller.clone(),
                };
                let mut args = Vec::new();
                let mut assets = Vec::new();
                let mut ok = true;
                for z in &f.value_params {
                    match read_line(input, out, &format!("arg {z} = "))? {
                        Some(v) if !v.is_empty() => args.push(parse_value(&v)),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    for y in &f.asset_params {
                        match read_line(input, out, &format!("asset {y} = "))? {
                            Some(v) if !v.is_empty() => match parse_asset_arg(&v) {
                                Ok(a) => assets.push(a),
                                Err(e) => {
                                    writeln!(out, "bad asset: {e}")?;
                                    ok = false;
                                    break;
                                }
                            },
                            _ => {
                                ok = false;
                                break;
                            }
                        }
                    }
                }
                if ok {
                    session.do_call(CallLabel {
                        party: actual,
                        fn_name,
                        args,
                        assets,
                    })
                } else {
                    Err("call aborted".to_string())
                }
            }
            MenuItem::FireEvent { event_id, .. } => session.do_fire(event_id),
            MenuItem::DiscardStale { event_id, .. } => session.do_discard(event_id),
            MenuItem::Tick => session.do_tick(),
        };
        match result {
            Ok(()) => {}
            Err(e) => writeln!(out, "refused: {e}")?,
        }
    }
    Ok(session)
}
