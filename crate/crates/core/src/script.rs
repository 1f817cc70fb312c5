//! Trace scripts and run output as JSON-lines.
//!
//! A script is one object per transaction, e.g.
//! `{"at":3,"kind":"call","party":"Bob","fn":"accept","args":[],"assets":[{"fungible":"2.0000"}]}`;
//! run output is one object per transition with the fired rule last. Field
//! order is fixed and decimals serialize at scale 4, so output is byte-stable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::{
    AgreeGroup, AgreeLabel, AssetArg, AssetOut, CallLabel, Label, Rule, TraceEntry,
};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceScript {
    pub entries: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub at: u64,
    /// Target contract; defaults to the only contract of the program.
    pub contract: Option<String>,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    Agree(AgreeLabel),
    Call(CallLabel),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("script line {line}: {message}")]
pub struct ScriptParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
struct RawGroup {
    parties: Vec<String>,
    values: Vec<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawScriptEntry {
    Agree {
        at: u64,
        #[serde(default)]
        contract: Option<String>,
        parties: Vec<String>,
        #[serde(default)]
        groups: Vec<RawGroup>,
    },
    Call {
        at: u64,
        #[serde(default)]
        contract: Option<String>,
        party: String,
        #[serde(rename = "fn")]
        fn_name: String,
        #[serde(default)]
        args: Vec<Value>,
        #[serde(default)]
        assets: Vec<AssetArg>,
    },
}

/// Parse a JSON-lines trace script; blank lines are ignored.
pub fn parse_script(text: &str) -> Result<TraceScript, ScriptParseError> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawScriptEntry =
            serde_json::from_str(line).map_err(|e| ScriptParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        let entry = match raw {
            RawScriptEntry::Agree {
                at,
                contract,
                parties,
                groups,
            } => ScriptEntry {
                at,
                contract,
                action: ScriptAction::Agree(AgreeLabel {
                    parties,
                    groups: groups
                        .into_iter()
                        .map(|g| AgreeGroup {
                            parties: g.parties,
                            values: g.values,
                        })
                        .collect(),
                }),
            },
            RawScriptEntry::Call {
                at,
                contract,
                party,
                fn_name,
                args,
                assets,
            } => ScriptEntry {
                at,
                contract,
                action: ScriptAction::Call(CallLabel {
                    party,
                    fn_name,
                    args,
                    assets,
                }),
            },
        };
        entries.push(entry);
    }
    Ok(TraceScript { entries })
}

// output structs: declaration order fixes the JSON field order

#[derive(Serialize)]
struct AgreeScriptOut<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    parties: &'a [String],
    groups: Vec<RawGroup>,
}

#[derive(Serialize)]
struct CallScriptOut<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    party: &'a str,
    #[serde(rename = "fn")]
    fn_name: &'a str,
    args: &'a [Value],
    assets: &'a [AssetArg],
}

/// Serialize a script back to JSON-lines (used for witness export and the
/// REPL session log).
pub fn script_to_jsonl(script: &TraceScript) -> String {
    let mut out = String::new();
    for e in &script.entries {
        let contract = e.contract.as_deref();
        let line = match &e.action {
            ScriptAction::Agree(label) => serde_json::to_string(&AgreeScriptOut {
                at: e.at,
                kind: "agree",
                contract,
                parties: &label.parties,
                groups: label
                    .groups
                    .iter()
                    .map(|g| RawGroup {
                        parties: g.parties.clone(),
                        values: g.values.clone(),
                    })
                    .collect(),
            }),
            ScriptAction::Call(call) => serde_json::to_string(&CallScriptOut {
                at: e.at,
                kind: "call",
                contract,
                party: &call.party,
                fn_name: &call.fn_name,
                args: &call.args,
                assets: &call.assets,
            }),
        };
        out.push_str(&line.expect("script serialization cannot fail"));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct AgreeLineOut<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    parties: &'a [String],
    groups: Vec<RawGroup>,
    rule: &'static str,
}

#[derive(Serialize)]
struct CallLineOut<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    party: &'a str,
    #[serde(rename = "fn")]
    fn_name: &'a str,
    args: &'a [Value],
    assets: &'a [AssetArg],
    rule: &'static str,
}

#[derive(Serialize)]
struct ValueOutLine<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    to: &'a str,
    value: &'a Value,
    rule: &'static str,
}

#[derive(Serialize)]
struct FungibleOutLine<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    to: &'a str,
    amount: String,
    rule: &'static str,
}

#[derive(Serialize)]
struct TokenOutLine<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    to: &'a str,
    token: &'a str,
    rule: &'static str,
}

#[derive(Serialize)]
struct SilentLine<'a> {
    at: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract: Option<&'a str>,
    rule: &'static str,
}

#[derive(Serialize)]
struct TickLine {
    at: u64,
    kind: &'static str,
    rule: &'static str,
}

/// Render one transition as its JSON line. `with_contract` adds the contract
/// name (useful only for multi-contract configurations).
pub fn entry_to_json(entry: &TraceEntry, with_contract: bool) -> String {
    let contract = if with_contract {
        Some(entry.contract.as_str())
    } else {
        None
    };
    let rule = entry.rule.name();
    let line = match &entry.label {
        Label::Agree(label) => serde_json::to_string(&AgreeLineOut {
            at: entry.at,
            kind: "agree",
            contract,
            parties: &label.parties,
            groups: label
                .groups
                .iter()
                .map(|g| RawGroup {
                    parties: g.parties.clone(),
                    values: g.values.clone(),
                })
                .collect(),
            rule,
        }),
        Label::Call(call) => serde_json::to_string(&CallLineOut {
            at: entry.at,
            kind: "call",
            contract,
            party: &call.party,
            fn_name: &call.fn_name,
            args: &call.args,
            assets: &call.assets,
            rule,
        }),
        Label::ValueOut { value, to } => serde_json::to_string(&ValueOutLine {
            at: entry.at,
            kind: "value_out",
            contract,
            to,
            value,
            rule,
        }),
        Label::AssetOut {
            asset: AssetOut::Fungible(v),
            to,
        } => serde_json::to_string(&FungibleOutLine {
            at: entry.at,
            kind: "asset_out",
            contract,
            to,
            amount: v.to_string(),
            rule,
        }),
        Label::AssetOut {
            asset: AssetOut::Token { id },
            to,
        } => serde_json::to_string(&TokenOutLine {
            at: entry.at,
            kind: "asset_out",
            contract,
            to,
            token: id,
            rule,
        }),
        Label::Tick => serde_json::to_string(&TickLine {
            at: entry.at,
            kind: "tick",
            rule,
        }),
        Label::Silent => serde_json::to_string(&SilentLine {
            at: entry.at,
            kind: "silent",
            contract,
            rule,
        }),
    };
    line.expect("trace serialization cannot fail")
}

/// The rule an entry must replay through, for rule-sequence assertions.
pub fn rule_sequence(entries: &[TraceEntry]) -> Vec<Rule> {
    entries.iter().map(|e| e.rule).collect()
}
