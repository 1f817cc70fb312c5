//! Shared helpers for integration tests: corpus loading and label builders.
#![allow(dead_code)] // not every test file uses every helper

use std::path::PathBuf;

use stipula_core::ast::ContractDecl;
use stipula_core::check::{check_wellformed, is_clean};
use stipula_core::fixed::Fixed4;
use stipula_core::parser::parse_contract;
use stipula_core::runtime::{AgreeGroup, AgreeLabel, AssetArg, CallLabel, Program};
use stipula_core::script::{parse_script, TraceScript};
use stipula_core::value::Value;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load_contract(name: &str) -> ContractDecl {
    let path = corpus_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    let decl = parse_contract(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    let diags = check_wellformed(&decl);
    assert!(is_clean(&diags), "{name} has errors: {diags:?}");
    decl
}

pub fn load_program(name: &str) -> Program {
    Program::single(load_contract(name))
}

pub fn load_trace(name: &str) -> TraceScript {
    let path = corpus_dir().join("traces").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    parse_script(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fx(s: &str) -> Fixed4 {
    s.parse().unwrap()
}

pub fn real(s: &str) -> Value {
    Value::Real(fx(s))
}

/// The Bike_Rental agreement with Alice renting to Bob for 2 at 3600 seconds
/// (the paper's memory, with the clean cost/rent_time reading).
pub fn bike_agree() -> AgreeLabel {
    AgreeLabel {
        parties: vec!["Alice".into(), "Bob".into()],
        groups: vec![AgreeGroup {
            parties: vec!["Alice".into(), "Bob".into()],
            values: vec![real("2"), real("3600")],
        }],
    }
}

pub fn call(party: &str, fn_name: &str, args: Vec<Value>, assets: Vec<AssetArg>) -> CallLabel {
    CallLabel {
        party: party.into(),
        fn_name: fn_name.into(),
        args,
        assets,
    }
}
