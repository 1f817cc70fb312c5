//! Toolchain for the Stipula legal-contract DSL: lexing, parsing and
//! well-formedness checking; the small-step operational semantics with
//! linear assets, scheduled events and a global clock; a trace driver and
//! REPL back-end; and a bounded legal-bisimulation checker.

pub mod ast;
pub mod bisim;
pub mod check;
pub mod driver;
pub mod eval;
pub mod fixed;
pub mod fuzz;
pub mod laws;
pub mod lexer;
pub mod lts;
pub mod parser;
pub mod pretty;
pub mod rename;
pub mod repl;
pub mod runtime;
pub mod script;
pub mod span;
pub mod token;
pub mod universe;
pub mod value;

pub use ast::ContractDecl;
pub use check::{check_wellformed, is_clean, lint_asset_drain};
pub use driver::{enabled, run_trace, step, EnabledChoice, Mode, RunOptions, RunResult};
pub use fixed::Fixed4;
pub use parser::parse_contract;
pub use pretty::pretty;
pub use runtime::{Configuration, Label, Program, Rule};
pub use script::{parse_script, TraceScript};
pub use universe::Universe;
pub use value::Value;
