//! Fuzzed runs over the corpus: conservation holds on every run, no cell
//! ever goes negative, clocks are monotone, and the replayed stream lands
//! on the same configuration. (The full 1000-run-per-contract gate lives in
//! the acceptance suite; this is the same harness at friendlier volume.)

mod common;

use common::*;
use stipula_core::driver::{replay_with, run_trace, RunOptions};
use stipula_core::fuzz::random_script;
use stipula_core::runtime::{conservation_report, Configuration};
use stipula_core::value::{AssetValue, Slot};

pub fn assert_non_negative(cfg: &Configuration) -> Result<(), String> {
    for rc in &cfg.contracts {
        for (name, slot) in &rc.memory {
            if let Slot::Asset(AssetValue::Fungible(v)) = slot {
                if v.is_negative() {
                    return Err(format!("{}.{name} = {v}", rc.name));
                }
            }
        }
    }
    Ok(())
}

#[test]
fn fuzzed_corpus_runs_conserve_assets() {
    let corpus = [
        "bike_rental.stipula",
        "free_rent.stipula",
        "licence.stipula",
        "alea.stipula",
        "boolean_demo.stipula",
    ];
    for name in corpus {
        let prog = load_program(name);
        let decl = &prog.contracts[0];
        for seed in 0..60u64 {
            let script = random_script(decl, seed);
            let run = match run_trace(&prog, &script, &RunOptions::default()) {
                Ok(r) => r,
                Err(e) => panic!("{name} seed {seed}: {e}"),
            };
            // conservation: inflows = held + outflows, token ids unique
            if let Err(v) = conservation_report(&run.entries(), &run.final_config) {
                panic!("{name} seed {seed}: {v}");
            }
            // non-negativity at every intermediate configuration, clock
            // monotone, and replay lands on the same configuration
            let mut last_clock = 0;
            let mut final_cfg = replay_with(&prog, &run.entries(), |cfg| {
                assert_non_negative(cfg)?;
                if cfg.clock < last_clock {
                    return Err(format!("clock went backwards at {}", cfg.clock));
                }
                last_clock = cfg.clock;
                Ok(())
            })
            .unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
            // a frozen run ends with the freezing step, which is not a
            // trace entry; re-apply it to reach the recorded configuration
            if run.stuck().is_some() {
                let frozen = run
                    .lines
                    .iter()
                    .find_map(|l| match l {
                        stipula_core::driver::RunLine::Stuck { contract, .. } => {
                            Some(contract.clone())
                        }
                        _ => None,
                    })
                    .unwrap();
                let empty_body = final_cfg
                    .contract(&frozen)
                    .and_then(|rc| rc.residual.as_ref())
                    .is_some_and(|r| r.stmts.is_empty());
                let outcome = if empty_body {
                    stipula_core::runtime::finish_body(&prog, &final_cfg, &frozen)
                } else {
                    stipula_core::runtime::exec_step(&prog, &final_cfg, &frozen)
                };
                match outcome {
                    Ok(stipula_core::runtime::ExecOutcome::Stuck { next, .. }) => final_cfg = next,
                    other => panic!("{name} seed {seed}: freeze did not replay: {other:?}"),
                }
            }
            assert_eq!(final_cfg, run.final_config, "{name} seed {seed}");
        }
    }
}

#[test]
fn enabled_step_soundness_on_reachable_configurations() {
    use stipula_core::driver::{enabled, step, EnabledChoice, Mode, StepOutcome};
    use stipula_core::universe::Universe;

    let path = corpus_dir().join("universes/bike_rental.json");
    let u = Universe::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let prog = load_program("bike_rental.stipula");
    let decl = &prog.contracts[0];

    for seed in 0..20u64 {
        let script = random_script(decl, seed);
        let Ok(run) = run_trace(&prog, &script, &RunOptions::default()) else {
            continue;
        };
        let entries = run.entries();
        // walk a sample of prefixes; at each reachable configuration every
        // offered choice applies, and a wrong-state call is refused
        for cut in [0, entries.len() / 2, entries.len()] {
            let cfg = stipula_core::driver::replay(&prog, &entries[..cut]).unwrap();
            for choice in enabled(&prog, &cfg, &u, Mode::Default) {
                match step(&prog, &cfg, &choice) {
                    Ok(StepOutcome::Step { .. }) | Ok(StepOutcome::Stuck { .. }) => {}
                    Err(e) => panic!("seed {seed} cut {cut}: offered {choice:?} refused: {e}"),
                }
            }
            let bogus = EnabledChoice::Call {
                contract: "Bike_Rental".into(),
                label: call("Alice", "no_such_fn", vec![], vec![]),
            };
            assert!(step(&prog, &cfg, &bogus).is_err());
        }
    }
}

#[test]
fn forged_histories_are_caught() {
    use stipula_core::runtime::{AssetOut, ConservationViolation, Label, Rule, TraceEntry};

    let prog = load_program("bike_rental.stipula");
    let run = run_trace(&prog, &load_trace("bike_rental_end.trace"), &RunOptions::default()).unwrap();
    // pretend the contract emitted an extra payment it never received
    let mut entries = run.entries();
    entries.push(TraceEntry {
        at: 99,
        contract: "Bike_Rental".into(),
        rule: Rule::AssetSend,
        label: Label::AssetOut {
            asset: AssetOut::Fungible(fx("7")),
            to: "Alice".into(),
        },
    });
    match conservation_report(&entries, &run.final_config) {
        Err(ConservationViolation::FungibleMismatch { .. }) => {}
        other => panic!("expected a mismatch, got {other:?}"),
    }
}
