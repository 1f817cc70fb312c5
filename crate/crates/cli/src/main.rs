//! Command-line front door: parse, check, run, repl, lts, equiv.
//!
//! Exit codes: 0 success, 1 semantic failure (diagnostics, rejected
//! verdicts, stuck or deadlocked runs), 2 I/O or usage errors, 3 resource
//! caps exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stipula_core::ast::ContractDecl;
use stipula_core::bisim;
use stipula_core::check::{check_wellformed, is_clean, lint_asset_drain};
use stipula_core::driver::{run_trace, Mode, RunOptions};
use stipula_core::fuzz::random_script;
use stipula_core::lts;
use stipula_core::parser::parse_contract;
use stipula_core::pretty::pretty;
use stipula_core::runtime::{conservation_report, Program};
use stipula_core::script::parse_script;
use stipula_core::universe::Universe;
use stipula_core::value::Slot;

#[derive(Parser)]
#[command(name = "stipula", version, about = "Toolchain for the Stipula legal-contract DSL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a contract and print its canonical form
    Parse { file: PathBuf },
    /// Check well-formedness; lints print as warnings
    Check { file: PathBuf },
    /// Run a trace script and emit the label stream as JSON lines
    Run {
        file: PathBuf,
        /// Trace script (JSON lines); omit when using --fuzz
        trace: Option<PathBuf>,
        /// Advance the clock to this instant, firing due events
        #[arg(long)]
        until: Option<u64>,
        /// Literal event-match rules: stale due events deadlock the clock
        #[arg(long)]
        strict_events: bool,
        /// Run this many random scripts and audit asset conservation
        #[arg(long)]
        fuzz: Option<u64>,
        /// Seed for --fuzz
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the final configuration to stderr
        #[arg(long)]
        final_state: bool,
    },
    /// Interactive stepping session
    Repl {
        file: PathBuf,
        #[arg(long)]
        strict_events: bool,
    },
    /// Explore the bounded transition system; optionally export DOT
    Lts {
        file: PathBuf,
        universe: PathBuf,
        /// Write the graph in DOT format to this file
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Decide bounded bisimilarity of two contracts
    Equiv {
        file1: PathBuf,
        file2: PathBuf,
        universe: PathBuf,
        /// Write the distinguishing play as a trace script
        #[arg(long)]
        witness: Option<PathBuf>,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_SEMANTIC: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CAP: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(cli))
}

fn dispatch(cli: Cli) -> u8 {
    match cli.command {
        Command::Parse { file } => cmd_parse(&file),
        Command::Check { file } => cmd_check(&file),
        Command::Run {
            file,
            trace,
            until,
            strict_events,
            fuzz,
            seed,
            final_state,
        } => cmd_run(&file, trace.as_deref(), until, strict_events, fuzz, seed, final_state),
        Command::Repl {
            file,
            strict_events,
        } => cmd_repl(&file, strict_events),
        Command::Lts {
            file,
            universe,
            dot,
        } => cmd_lts(&file, &universe, dot.as_deref()),
        Command::Equiv {
            file1,
            file2,
            universe,
            witness,
        } => cmd_equiv(&file1, &file2, &universe, witness.as_deref()),
    }
}

fn read(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_IO
    })
}

/// Parse only; diagnostics rendered as `file:line:col: error: message`.
fn load_parsed(path: &Path) -> Result<ContractDecl, u8> {
    let text = read(path)?;
    parse_contract(&text).map_err(|e| {
        eprintln!("{}:{}: error: {}", path.display(), e.span(), e.message());
        EXIT_SEMANTIC
    })
}

/// Parse and check; prints every diagnostic, fails on errors.
fn load_checked(path: &Path) -> Result<ContractDecl, u8> {
    let decl = load_parsed(path)?;
    let mut diags = check_wellformed(&decl);
    diags.extend(lint_asset_drain(&decl));
    for d in &diags {
        eprintln!("{}", d.render(&path.display().to_string()));
    }
    if is_clean(&diags) {
        Ok(decl)
    } else {
        Err(EXIT_SEMANTIC)
    }
}

fn cmd_parse(file: &Path) -> u8 {
    match load_parsed(file) {
        Ok(decl) => {
            print!("{}", pretty(&decl));
            EXIT_OK
        }
        Err(code) => code,
    }
}

fn cmd_check(file: &Path) -> u8 {
    match load_checked(file) {
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

fn print_final_state(prog_final: &stipula_core::Configuration) {
    let contracts: Vec<serde_json::Value> = prog_final
        .contracts
        .iter()
        .map(|rc| {
            let memory: serde_json::Map<String, serde_json::Value> = rc
                .memory
                .iter()
                .map(|(k, v)| {
                    let rendered = match v {
                        Slot::Val(v) => v.to_string(),
                        Slot::Asset(a) => a.to_string(),
                    };
                    (k.clone(), serde_json::Value::String(rendered))
                })
                .collect();
            serde_json::json!({
                "name": rc.name,
                "state": rc.phase,
                "stuck": rc.stuck,
                "memory": memory,
                "pending": rc.pending.len(),
            })
        })
        .collect();
    let obj = serde_json::json!({ "clock": prog_final.clock, "contracts": contracts });
    eprintln!("{obj}");
}

fn cmd_run(
    file: &Path,
    trace: Option<&Path>,
    until: Option<u64>,
    strict_events: bool,
    fuzz: Option<u64>,
    seed: u64,
    final_state: bool,
) -> u8 {
    let decl = match load_checked(file) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let prog = Program::single(decl);
    let mode = if strict_events {
        Mode::StrictEvents
    } else {
        Mode::Default
    };

    if let Some(runs) = fuzz {
        return cmd_fuzz(&prog, runs, seed, mode);
    }

    let Some(trace_path) = trace else {
        eprintln!("a trace file is required unless --fuzz is given");
        return EXIT_IO;
    };
    let script_text = match read(trace_path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let script = match parse_script(&script_text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", trace_path.display());
            return EXIT_SEMANTIC;
        }
    };

    match run_trace(&prog, &script, &RunOptions { until, mode }) {
        Ok(run) => {
            print!("{}", run.to_jsonl());
            if final_state {
                print_final_state(&run.final_config);
            }
            if let Some((at, reason)) = run.stuck() {
                eprintln!("stuck at clock {at}: {reason}");
                EXIT_SEMANTIC
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_SEMANTIC
        }
    }
}

fn cmd_fuzz(prog: &Program, runs: u64, seed: u64, mode: Mode) -> u8 {
    let decl = &prog.contracts[0];
    let mut violations = 0u64;
    let mut stuck_runs = 0u64;
    let mut rejected = 0u64;
    for i in 0..runs {
        let script = random_script(decl, seed.wrapping_add(i));
        let run = match run_trace(prog, &script, &RunOptions { until: None, mode }) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("seed {}: {e}", seed.wrapping_add(i));
                violations += 1;
                continue;
            }
        };
        rejected += run.rejections().len() as u64;
        if run.stuck().is_some() {
            stuck_runs += 1;
        }
        if let Err(v) = conservation_report(&run.entries(), &run.final_config) {
            eprintln!("seed {}: {v}", seed.wrapping_add(i));
            violations += 1;
        }
    }
    println!(
        "fuzz {}: {} runs, {} conservation violations, {} stuck runs, {} rejected calls",
        decl.name, runs, violations, stuck_runs, rejected
    );
    if violations == 0 {
        EXIT_OK
    } else {
        EXIT_SEMANTIC
    }
}

fn cmd_repl(file: &Path, strict_events: bool) -> u8 {
    let decl = match load_checked(file) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let mode = if strict_events {
        Mode::StrictEvents
    } else {
        Mode::Default
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut input = stdin.lock();
    let mut output = stdout.lock();
    match stipula_core::repl::run_repl(decl, mode, &mut input, &mut output) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            EXIT_IO
        }
    }
}

fn load_universe(path: &Path) -> Result<Universe, u8> {
    let text = read(path)?;
    Universe::from_json(&text)
        .map(Universe::with_env_node_cap)
        .map_err(|e| {
            eprintln!("{}: {e}", path.display());
            EXIT_SEMANTIC
        })
}

fn cmd_lts(file: &Path, universe: &Path, dot: Option<&Path>) -> u8 {
    let decl = match load_checked(file) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let u = match load_universe(universe) {
        Ok(u) => u,
        Err(code) => return code,
    };
    match lts::explore(&decl, &u) {
        Ok(graph) => {
            println!(
                "{}: {} nodes, {} edges up to horizon {}",
                decl.name,
                graph.nodes.len(),
                graph.edges.len(),
                u.horizon
            );
            if let Some(path) = dot {
                if let Err(e) = std::fs::write(path, lts::to_dot(&graph, &decl.name)) {
                    eprintln!("{}: {e}", path.display());
                    return EXIT_IO;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CAP
        }
    }
}

fn cmd_equiv(file1: &Path, file2: &Path, universe: &Path, witness: Option<&Path>) -> u8 {
    let c1 = match load_checked(file1) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let c2 = match load_checked(file2) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let u = match load_universe(universe) {
        Ok(u) => u,
        Err(code) => return code,
    };
    match bisim::bisimilar(&c1, &c2, &u) {
        Ok(verdict) if verdict.related => {
            println!("RELATED");
            EXIT_OK
        }
        Ok(verdict) => {
            println!("NOT RELATED");
            if let Some(w) = &verdict.witness {
                print!("{}", w.describe());
                if let Some(path) = witness {
                    let text = stipula_core::script::script_to_jsonl(&w.script);
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("{}: {e}", path.display());
                        return EXIT_IO;
                    }
                }
            }
            EXIT_SEMANTIC
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CAP
        }
    }
}
