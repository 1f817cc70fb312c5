//! Trace runner, enabled-choice enumeration, and replay.

mod common;

use common::*;
use stipula_core::driver::*;
use stipula_core::runtime::*;
use stipula_core::script::TraceScript;
use stipula_core::universe::Universe;
use stipula_core::value::Value;

fn bike_universe() -> Universe {
    let path = corpus_dir().join("universes/bike_rental.json");
    Universe::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn table3_script_reproduces_the_rule_sequence() {
    let prog = load_program("bike_rental.stipula");
    let script = load_trace("bike_rental_table3.trace");
    let run = run_trace(&prog, &script, &RunOptions::default()).unwrap();
    let rules: Vec<Rule> = run.entries().iter().map(|e| e.rule).collect();
    // the worked trace: agree at 0, offer at 1, two idle ticks, accept at 3
    assert_eq!(
        &rules[..8],
        &[
            Rule::Agree,
            Rule::Tick,
            Rule::Function,
            Rule::FieldUpdate,
            Rule::StateChange,
            Rule::Tick,
            Rule::Tick,
            Rule::Function,
        ]
    );
    // accept's body completes eagerly within the same instant
    assert_eq!(
        &rules[8..],
        &[Rule::AssetUpdate, Rule::ValueSend, Rule::StateChange]
    );
    let at3: Vec<u64> = run.entries()[7..].iter().map(|e| e.at).collect();
    assert!(at3.iter().all(|&t| t == 3), "body atomic in time: {at3:?}");

    // final memory per the worked trace
    let rc = run.final_config.contract("Bike_Rental").unwrap();
    let get = |n: &str| rc.memory.get(n).cloned();
    use stipula_core::value::Slot;
    assert_eq!(get("cost"), Some(Slot::Val(real("2"))));
    assert_eq!(get("rent_time"), Some(Slot::Val(real("3600"))));
    assert_eq!(get("use_code"), Some(Slot::Val(real("123"))));
    assert_eq!(rc.phase.as_deref(), Some("Using"));
}

#[test]
fn empty_script_never_activates() {
    let prog = load_program("bike_rental.stipula");
    let run = run_trace(&prog, &TraceScript { entries: vec![] }, &RunOptions::default()).unwrap();
    assert!(run.lines.is_empty());
    assert!(run.final_config.contract("Bike_Rental").unwrap().phase.is_none());
}

#[test]
fn timeout_path_fires_the_end_of_time_obligation() {
    let prog = load_program("bike_rental.stipula");
    let script = load_trace("bike_rental_table3.trace");
    let run = run_trace(
        &prog,
        &script,
        &RunOptions {
            until: Some(3604),
            mode: Mode::Default,
        },
    )
    .unwrap();
    let at_3603: Vec<&TraceEntry> = run
        .entries()
        .iter()
        .filter(|e| e.at == 3603 && e.label.is_observable())
        .cloned()
        .map(|e| Box::leak(Box::new(e)) as &TraceEntry)
        .collect();
    assert_eq!(at_3603.len(), 2);
    assert_eq!(
        at_3603[0].label,
        Label::ValueOut {
            value: Value::Str("End_Reached".into()),
            to: "Bob".into()
        }
    );
    assert_eq!(
        at_3603[1].label,
        Label::AssetOut {
            asset: AssetOut::Fungible(fx("2")),
            to: "Alice".into()
        }
    );
    assert_eq!(run.final_config.clock, 3604);
    assert_eq!(
        run.final_config.contract("Bike_Rental").unwrap().phase.as_deref(),
        Some("End")
    );
}

#[test]
fn calls_at_the_event_instant_are_rejected() {
    let prog = load_program("bike_rental.stipula");
    let script = load_trace("bike_rental_late_end.trace");
    let run = run_trace(
        &prog,
        &script,
        &RunOptions {
            until: Some(3604),
            mode: Mode::Default,
        },
    )
    .unwrap();
    let rejections = run.rejections();
    assert_eq!(rejections.len(), 1);
    assert_eq!(rejections[0].0, 3603);
    assert_eq!(rejections[0].1, "end");
    // the event still fired
    assert!(run
        .entries()
        .iter()
        .any(|e| e.at == 3603 && matches!(e.label, Label::AssetOut { .. })));
}

#[test]
fn enabled_menu_matches_the_rules() {
    let prog = load_program("bike_rental.stipula");
    let u = bike_universe();
    let cfg = Configuration::initial(&prog, 0);

    // fresh: the agreement is the only choice
    let fresh = enabled(&prog, &cfg, &u, Mode::Default);
    assert!(matches!(fresh.as_slice(), [EnabledChoice::Agree { .. }]));

    // Inactive at t=1: Alice may offer, or time may pass
    let (_, cfg) = apply_agree(&prog, &cfg, "Bike_Rental", &bike_agree()).unwrap();
    let cfg = tick(&cfg).unwrap();
    let menu = enabled(&prog, &cfg, &u, Mode::Default);
    let mut kinds: Vec<&str> = menu
        .iter()
        .map(|c| match c {
            EnabledChoice::Agree { .. } => "agree",
            EnabledChoice::Call { label, .. } => label.fn_name.as_str(),
            EnabledChoice::Tick => "tick",
            EnabledChoice::FireEvent { .. } => "fire",
            EnabledChoice::DiscardStale { .. } => "discard",
            EnabledChoice::ExecStep { .. } => "exec",
        })
        .collect();
    kinds.sort();
    assert_eq!(kinds, vec!["offer", "tick"]);

    // at the event instant in @Using, only the firing is offered
    let script = load_trace("bike_rental_table3.trace");
    let run = run_trace(&prog, &script, &RunOptions::default()).unwrap();
    let mut cfg = run.final_config;
    while cfg.clock < 3603 {
        cfg = tick(&cfg).unwrap();
    }
    let menu = enabled(&prog, &cfg, &u, Mode::Default);
    assert!(
        matches!(menu.as_slice(), [EnabledChoice::FireEvent { .. }]),
        "{menu:?}"
    );
}

#[test]
fn step_agrees_with_enabled() {
    let prog = load_program("bike_rental.stipula");
    let u = bike_universe();
    let cfg = Configuration::initial(&prog, 0);
    let (_, cfg) = apply_agree(&prog, &cfg, "Bike_Rental", &bike_agree()).unwrap();
    let cfg = tick(&cfg).unwrap();

    for choice in enabled(&prog, &cfg, &u, Mode::Default) {
        assert!(step(&prog, &cfg, &choice).is_ok(), "{choice:?}");
    }
    // a non-enabled choice is refused
    let bad = EnabledChoice::Call {
        contract: "Bike_Rental".into(),
        label: call("Bob", "accept", vec![], vec![AssetArg::Fungible(fx("2"))]),
    };
    assert!(step(&prog, &cfg, &bad).is_err());
}

#[test]
fn replay_reproduces_the_final_configuration() {
    for (contract, trace) in [
        ("bike_rental.stipula", "bike_rental_end.trace"),
        ("licence.stipula", "licence_buy.trace"),
        ("alea.stipula", "alea_winner1.trace"),
        ("free_rent.stipula", "free_rent_happy.trace"),
    ] {
        let prog = load_program(contract);
        let run = run_trace(&prog, &load_trace(trace), &RunOptions::default()).unwrap();
        assert!(run.stuck().is_none(), "{trace} stuck");
        let replayed = replay(&prog, &run.entries()).unwrap();
        assert_eq!(replayed, run.final_config, "{trace}");
    }
}

#[test]
fn past_transactions_are_script_errors() {
    let prog = load_program("bike_rental.stipula");
    let mut script = load_trace("bike_rental_table3.trace");
    script.entries[2].at = 0; // accept before the clock got there
    let err = run_trace(&prog, &script, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::PastTransaction { .. }));
}

#[test]
fn strict_mode_deadlocks_on_stale_events() {
    // hello_event: f schedules a now-event guarding @Q2 while staying in @Q
    let prog = load_program("hello_event.stipula");
    let agree = AgreeLabel {
        parties: vec!["A".into(), "B".into()],
        groups: vec![],
    };
    let script = TraceScript {
        entries: vec![
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Agree(agree),
            },
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Call(call("A", "f", vec![], vec![])),
            },
        ],
    };

    // default mode: the stale event is discarded, g never sees the handler
    let run = run_trace(
        &prog,
        &script,
        &RunOptions {
            until: Some(2),
            mode: Mode::Default,
        },
    )
    .unwrap();
    assert!(run
        .entries()
        .iter()
        .any(|e| e.rule == Rule::DiscardStale));
    assert_eq!(run.final_config.clock, 2);

    // strict mode: the literal premises leave no way to advance
    let err = run_trace(
        &prog,
        &script,
        &RunOptions {
            until: Some(2),
            mode: Mode::StrictEvents,
        },
    )
    .unwrap_err();
    assert!(matches!(err, RunError::Deadlock { clock: 0 }));
}

#[test]
fn same_instant_events_fire_before_the_clock_moves() {
    // f schedules an event due immediately in the state f itself reaches;
    // the tick is blocked until the handler has run
    let src = "stipula Prompt { agreement (A)() { } => @Q \
               @Q A : f { now >> @Q2 { \"x\" -> A } => @Q3 } => @Q2 }";
    let prog = Program::single(stipula_core::parse_contract(src).unwrap());
    let script = TraceScript {
        entries: vec![
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Agree(AgreeLabel {
                    parties: vec!["A".into()],
                    groups: vec![],
                }),
            },
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Call(call("A", "f", vec![], vec![])),
            },
        ],
    };
    let cfg_mid = {
        // directly after the body, the due matching event blocks the tick
        let (_, cfg) = apply_agree(
            &prog,
            &Configuration::initial(&prog, 0),
            "Prompt",
            &AgreeLabel {
                parties: vec!["A".into()],
                groups: vec![],
            },
        )
        .unwrap();
        let (_, cfg) = apply_call(&prog, &cfg, "Prompt", &call("A", "f", vec![], vec![])).unwrap();
        let mut cfg = cfg;
        while cfg.contract("Prompt").unwrap().residual.is_some() {
            cfg = match stipula_core::runtime::finish_body(&prog, &cfg, "Prompt") {
                Ok(stipula_core::runtime::ExecOutcome::Step { next, .. }) => next,
                other => panic!("{other:?}"),
            };
        }
        cfg
    };
    assert!(matches!(tick(&cfg_mid), Err(TickBlocked::EventDue { .. })));

    let run = run_trace(
        &prog,
        &script,
        &RunOptions {
            until: Some(1),
            mode: Mode::Default,
        },
    )
    .unwrap();
    let hello_at: Vec<u64> = run
        .entries()
        .iter()
        .filter(|e| matches!(&e.label, Label::ValueOut { value: Value::Str(s), .. } if s == "x"))
        .map(|e| e.at)
        .collect();
    assert_eq!(hello_at, vec![0], "handler ran in the scheduling instant");
    assert_eq!(
        run.final_config.contract("Prompt").unwrap().phase.as_deref(),
        Some("Q3")
    );
}

#[test]
fn negative_transfer_amounts_freeze() {
    let src = "stipula Neg { assets h agreement (A)() { } => @Q \
               @Q A : f { 0 - 5 -o h,A } => @Q2 }";
    let prog = Program::single(stipula_core::parse_contract(src).unwrap());
    let script = TraceScript {
        entries: vec![
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Agree(AgreeLabel {
                    parties: vec!["A".into()],
                    groups: vec![],
                }),
            },
            stipula_core::script::ScriptEntry {
                at: 0,
                contract: None,
                action: stipula_core::script::ScriptAction::Call(call("A", "f", vec![], vec![])),
            },
        ],
    };
    let run = run_trace(&prog, &script, &RunOptions::default()).unwrap();
    let (_, reason) = run.stuck().expect("minting via negative amounts freezes");
    assert!(reason.contains("negative asset amount"), "{reason}");
}

#[test]
fn fuzzed_runs_respect_event_precedence() {
    // no call label may appear at an instant when that contract had a due
    // unfired event; run_trace settles events first, so scan the stream
    for contract in [
        "bike_rental.stipula",
        "free_rent.stipula",
        "licence.stipula",
        "alea.stipula",
    ] {
        let prog = load_program(contract);
        let decl = &prog.contracts[0];
        for seed in 0..40 {
            let script = stipula_core::fuzz::random_script(decl, seed);
            let Ok(run) = run_trace(&prog, &script, &RunOptions::default()) else {
                continue;
            };
            let entries = run.entries();
            for (i, e) in entries.iter().enumerate() {
                if e.rule != Rule::Function {
                    continue;
                }
                // replay up to just before this call and check no event was due
                let cfg = replay(&prog, &entries[..i]).unwrap();
                let rc = cfg.contract(&e.contract).unwrap();
                assert!(
                    rc.due_events(cfg.clock).is_empty(),
                    "{contract} seed {seed}: call at {} with due event",
                    e.at
                );
            }
        }
    }
}
