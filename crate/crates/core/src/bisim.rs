//! Bounded legal bisimulation.
//!
//! The game relates configurations at equal clocks. Agreement observations
//! are matched pointwise (modulo reordering of party vectors and of whole
//! agreement rows); all other observations are matched per complete
//! tick-block, where the defender may permute the attacker's label sequence
//! and the successors after the tick must stay related. Runs that freeze
//! mid-body never reach a tick; they are matched against equally-labelled
//! frozen runs and nothing else.
//!
//! The check is a greatest fixpoint over lazily discovered node pairs:
//! every pair starts assumed related, and a pair dies when some attack has
//! no surviving defender response. Universes bound the alphabets, horizon,
//! block length and node count, making everything finite.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::ast::ContractDecl;
use crate::lts::{agree_moves, canon_key, unit_moves, ExplosionError, UnitTarget};
use crate::runtime::{tick, AgreeLabel, Configuration, Label, Program};
use crate::script::{ScriptAction, ScriptEntry, TraceScript};
use crate::universe::Universe;

/// Result of the bisimulation game.
#[derive(Debug, Clone)]
pub struct BisimVerdict {
    pub related: bool,
    /// Distinguishing play when not related.
    pub witness: Option<Witness>,
}

/// A play the attacker wins: realizable on one contract, refused by the
/// other. `script` carries the attacker's transactions for replay.
#[derive(Debug, Clone)]
pub struct Witness {
    /// 0 = first contract moved, 1 = second.
    pub side: u8,
    pub steps: Vec<WitnessStep>,
    pub script: TraceScript,
}

#[derive(Debug, Clone)]
pub enum WitnessStep {
    Agreement { side: u8, label: AgreeLabel },
    Block { side: u8, labels: Vec<Label>, stuck: bool },
}

impl Witness {
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            let (side, text) = match step {
                WitnessStep::Agreement { side, label } => {
                    (side, format!("agreement({})", label.parties.join(",")))
                }
                WitnessStep::Block {
                    side,
                    labels,
                    stuck,
                } => {
                    let mut parts: Vec<String> = labels.iter().map(summarize_label).collect();
                    if parts.is_empty() {
                        parts.push("(no observation)".into());
                    }
                    if *stuck {
                        parts.push("STUCK".into());
                    } else {
                        parts.push("tick".into());
                    }
                    (side, parts.join(" ; "))
                }
            };
            out.push_str(&format!("contract {} plays: {}\n", side + 1, text));
        }
        out
    }
}

fn summarize_label(l: &Label) -> String {
    match l {
        Label::Agree(a) => format!("agree({})", a.parties.join(",")),
        Label::Call(c) => format!("{}:{}", c.party, c.fn_name),
        Label::ValueOut { value, to } => format!("{value} -> {to}"),
        Label::AssetOut { asset, to } => match asset {
            crate::runtime::AssetOut::Fungible(v) => format!("{v} -o {to}"),
            crate::runtime::AssetOut::Token { id } => format!("token:{id} -o {to}"),
        },
        Label::Silent => "_".into(),
        Label::Tick => "tick".into(),
    }
}

/// Agreement observations compare modulo reordering of the party vector and
/// of whole rows; values within a row stay positional.
pub fn canon_agree(a: &AgreeLabel) -> AgreeLabel {
    let mut parties = a.parties.clone();
    parties.sort();
    let mut groups = a.groups.clone();
    for g in &mut groups {
        g.parties.sort();
    }
    groups.sort();
    AgreeLabel { parties, groups }
}

fn agree_equiv(a: &AgreeLabel, b: &AgreeLabel) -> bool {
    canon_agree(a) == canon_agree(b)
}

/// Canonical multiset view of a block's labels: agreements canonicalized,
/// then sorted.
fn canon_labels(labels: &[Label]) -> Vec<Label> {
    let mut out: Vec<Label> = labels
        .iter()
        .map(|l| match l {
            Label::Agree(a) => Label::Agree(canon_agree(a)),
            other => other.clone(),
        })
        .collect();
    out.sort();
    out
}

// -- per-side node store ----------------------------------------------------

#[derive(Debug, Clone)]
struct Block {
    labels: Vec<Label>, // canonical multiset
    /// Tick successor node; None when the block froze mid-body.
    succ: Option<usize>,
}

struct Side {
    prog: Program,
    nodes: Vec<Configuration>,
    clocks: Vec<u64>,
    index: HashMap<Configuration, usize>,
    blocks: Vec<Option<Vec<Block>>>,
    singles: Vec<Option<Vec<(AgreeLabel, usize)>>>,
}

impl Side {
    fn new(prog: Program) -> Side {
        Side {
            prog,
            nodes: Vec::new(),
            clocks: Vec::new(),
            index: HashMap::new(),
            blocks: Vec::new(),
            singles: Vec::new(),
        }
    }

    fn intern(&mut self, cfg: Configuration, cap: usize) -> Result<usize, ExplosionError> {
        let key = canon_key(&cfg);
        if let Some(&id) = self.index.get(&key) {
            return Ok(id);
        }
        if self.nodes.len() >= cap {
            return Err(ExplosionError { cap });
        }
        let id = self.nodes.len();
        self.clocks.push(cfg.clock);
        self.nodes.push(cfg);
        self.index.insert(key, id);
        self.blocks.push(None);
        self.singles.push(None);
        Ok(id)
    }

    fn singles_of(
        &mut self,
        id: usize,
        u: &Universe,
    ) -> Result<Vec<(AgreeLabel, usize)>, ExplosionError> {
        if let Some(s) = &self.singles[id] {
            return Ok(s.clone());
        }
        let cfg = self.nodes[id].clone();
        let mut out = Vec::new();
        for (label, next) in agree_moves(&self.prog, &cfg, u) {
            let nid = self.intern(next, u.node_cap)?;
            out.push((label, nid));
        }
        self.singles[id] = Some(out.clone());
        Ok(out)
    }

    /// Complete tick-blocks from a node: DFS over unit moves within the
    /// instant, ending at a tick (or a freeze).
    fn blocks_of(&mut self, id: usize, u: &Universe) -> Result<Vec<Block>, ExplosionError> {
        if let Some(b) = &self.blocks[id] {
            return Ok(b.clone());
        }
        let start = self.nodes[id].clone();
        let mut found: HashMap<(Vec<Label>, Option<usize>), ()> = HashMap::new();
        let mut seen: HashSet<(Configuration, Vec<Label>)> = HashSet::new();
        let mut stack: VecDeque<(Configuration, Vec<Label>)> = VecDeque::new();
        stack.push_back((start, Vec::new()));

        while let Some((cfg, acc)) = stack.pop_back() {
            let seen_key = (canon_key(&cfg), canon_labels(&acc));
            if !seen.insert(seen_key) {
                continue;
            }
            if seen.len() > u.node_cap {
                return Err(ExplosionError { cap: u.node_cap });
            }
            if let Ok(next) = tick(&cfg) {
                let nid = self.intern(next, u.node_cap)?;
                found.insert((canon_labels(&acc), Some(nid)), ());
            }
            for unit in unit_moves(&self.prog, &cfg, u) {
                let mut labels = acc.clone();
                labels.extend(unit.labels.iter().cloned());
                if labels.len() > u.max_block {
                    continue;
                }
                match unit.target {
                    UnitTarget::Idle(next) => stack.push_back((next, labels)),
                    UnitTarget::Stuck(_) => {
                        found.insert((canon_labels(&labels), None), ());
                    }
                }
            }
        }

        let blocks: Vec<Block> = found
            .into_keys()
            .map(|(labels, succ)| Block { labels, succ })
            .collect();
        self.blocks[id] = Some(blocks.clone());
        Ok(blocks)
    }
}

// -- the pair game ------------------------------------------------------------

type PairKey = (usize, usize);

#[derive(Debug, Clone)]
enum AttackDesc {
    Agreement { side: u8, label: AgreeLabel },
    Block { side: u8, labels: Vec<Label>, stuck: bool },
}

#[derive(Debug, Clone)]
struct Attack {
    desc: AttackDesc,
    /// Defender responses; `None` is a terminal match (both froze).
    candidates: Vec<Option<PairKey>>,
}

struct PairData {
    attacks: Vec<Attack>,
    alive: bool,
}

pub struct Game {
    left: Side,
    right: Side,
    u: Universe,
    start_clock: u64,
    pairs: HashMap<PairKey, PairData>,
    dependents: HashMap<PairKey, Vec<PairKey>>,
}

impl Game {
    /// Start the game on two initial (pre-agreement) configurations at the
    /// given clock.
    pub fn over_contracts(
        c1: &ContractDecl,
        c2: &ContractDecl,
        u: &Universe,
        clock: u64,
    ) -> Game {
        let p1 = Program::single(c1.clone());
        let p2 = Program::single(c2.clone());
        let cfg1 = Configuration::initial(&p1, clock);
        let cfg2 = Configuration::initial(&p2, clock);
        Game::over_configs(p1, cfg1, p2, cfg2, u)
    }

    pub fn over_configs(
        p1: Program,
        cfg1: Configuration,
        p2: Program,
        cfg2: Configuration,
        u: &Universe,
    ) -> Game {
        assert_eq!(cfg1.clock, cfg2.clock, "the game compares equal clocks");
        let start_clock = cfg1.clock;
        let mut left = Side::new(p1);
        let mut right = Side::new(p2);
        left.intern(cfg1, u.node_cap).expect("first node fits");
        right.intern(cfg2, u.node_cap).expect("first node fits");
        Game {
            left,
            right,
            u: u.clone(),
            start_clock,
            pairs: HashMap::new(),
            dependents: HashMap::new(),
        }
    }

    fn expand(&mut self, key: PairKey) -> Result<(), ExplosionError> {
        if self.pairs.contains_key(&key) {
            return Ok(());
        }
        let (l, r) = key;
        // leaf: horizon reached, assume related
        let depth = self.left.clocks[l].saturating_sub(self.start_clock);
        if depth >= self.u.horizon {
            self.pairs.insert(
                key,
                PairData {
                    attacks: Vec::new(),
                    alive: true,
                },
            );
            return Ok(());
        }

        let u = self.u.clone();
        let mut attacks = Vec::new();

        // clause 1: pointwise agreement observations
        let l_singles = self.left.singles_of(l, &u)?;
        let r_singles = self.right.singles_of(r, &u)?;
        for (label, succ) in &l_singles {
            let candidates = r_singles
                .iter()
                .filter(|(other, _)| agree_equiv(label, other))
                .map(|(_, rs)| Some((*succ, *rs)))
                .collect();
            attacks.push(Attack {
                desc: AttackDesc::Agreement {
                    side: 0,
                    label: label.clone(),
                },
                candidates,
            });
        }
        for (label, succ) in &r_singles {
            let candidates = l_singles
                .iter()
                .filter(|(other, _)| agree_equiv(label, other))
                .map(|(_, ls)| Some((*ls, *succ)))
                .collect();
            attacks.push(Attack {
                desc: AttackDesc::Agreement {
                    side: 1,
                    label: label.clone(),
                },
                candidates,
            });
        }

        // clause 2: complete tick-blocks up to permutation
        let l_blocks = self.left.blocks_of(l, &u)?;
        let r_blocks = self.right.blocks_of(r, &u)?;
        for b in &l_blocks {
            let candidates: Vec<Option<PairKey>> = r_blocks
                .iter()
                .filter(|ob| ob.labels == b.labels && ob.succ.is_some() == b.succ.is_some())
                .map(|ob| match (b.succ, ob.succ) {
                    (Some(ls), Some(rs)) => Some((ls, rs)),
                    _ => None,
                })
                .collect();
            attacks.push(Attack {
                desc: AttackDesc::Block {
                    side: 0,
                    labels: b.labels.clone(),
                    stuck: b.succ.is_none(),
                },
                candidates,
            });
        }
        for b in &r_blocks {
            let candidates: Vec<Option<PairKey>> = l_blocks
                .iter()
                .filter(|ob| ob.labels == b.labels && ob.succ.is_some() == b.succ.is_some())
                .map(|ob| match (ob.succ, b.succ) {
                    (Some(ls), Some(rs)) => Some((ls, rs)),
                    _ => None,
                })
                .collect();
            attacks.push(Attack {
                desc: AttackDesc::Block {
                    side: 1,
                    labels: b.labels.clone(),
                    stuck: b.succ.is_none(),
                },
                candidates,
            });
        }

        for attack in &attacks {
            for cand in attack.candidates.iter().flatten() {
                self.dependents.entry(*cand).or_default().push(key);
            }
        }
        self.pairs.insert(
            key,
            PairData {
                attacks,
                alive: true,
            },
        );
        // discover successor pairs
        let successor_keys: Vec<PairKey> = self.pairs[&key]
            .attacks
            .iter()
            .flat_map(|a| a.candidates.iter().flatten().copied())
            .collect();
        for succ in successor_keys {
            self.expand(succ)?;
        }
        Ok(())
    }

    fn run_fixpoint(&mut self) {
        // kill pairs whose attacks have no surviving response, to fixpoint
        let keys: Vec<PairKey> = self.pairs.keys().copied().collect();
        let mut queue: VecDeque<PairKey> = keys.into_iter().collect();
        while let Some(key) = queue.pop_front() {
            let Some(data) = self.pairs.get(&key) else {
                continue;
            };
            if !data.alive {
                continue;
            }
            let dead = data.attacks.iter().any(|a| {
                !a.candidates.iter().any(|c| match c {
                    None => true,
                    Some(succ) => self.pairs.get(succ).map(|p| p.alive).unwrap_or(false),
                })
            });
            if dead {
                self.pairs.get_mut(&key).expect("present").alive = false;
                if let Some(deps) = self.dependents.get(&key) {
                    for d in deps.clone() {
                        queue.push_back(d);
                    }
                }
            }
        }
    }

    pub fn decide(&mut self) -> Result<BisimVerdict, ExplosionError> {
        let root = (0usize, 0usize);
        self.expand(root)?;
        self.run_fixpoint();
        if self.pairs[&root].alive {
            return Ok(BisimVerdict {
                related: true,
                witness: None,
            });
        }
        let witness = self.build_witness(root);
        Ok(BisimVerdict {
            related: false,
            witness: Some(witness),
        })
    }

    /// Walk failing attacks from the root, preferring immediate mismatches,
    /// recording the attacker's play.
    fn build_witness(&self, root: PairKey) -> Witness {
        let mut steps = Vec::new();
        let mut clock = self.start_clock;
        let mut script_entries: Vec<ScriptEntry> = Vec::new();
        let mut key = root;
        let mut witness_side = None;
        let mut guard = 0;

        loop {
            guard += 1;
            if guard > 64 {
                break;
            }
            let Some(data) = self.pairs.get(&key) else {
                break;
            };
            if data.alive {
                break;
            }
            let failing: Vec<&Attack> = data
                .attacks
                .iter()
                .filter(|a| {
                    !a.candidates.iter().any(|c| match c {
                        None => true,
                        Some(succ) => self.pairs.get(succ).map(|p| p.alive).unwrap_or(false),
                    })
                })
                .collect();
            // prefer an immediate mismatch with the fewest labels, so the
            // witness stays minimal and readable
            let weight = |a: &Attack| {
                let len = match &a.desc {
                    AttackDesc::Agreement { .. } => 1,
                    AttackDesc::Block { labels, .. } => labels.len(),
                };
                (!a.candidates.is_empty(), len)
            };
            let attack = match failing.iter().min_by_key(|a| weight(a)) {
                Some(a) => *a,
                None => break,
            };
            let side = match &attack.desc {
                AttackDesc::Agreement { side, .. } | AttackDesc::Block { side, .. } => *side,
            };
            witness_side.get_or_insert(side);
            match &attack.desc {
                AttackDesc::Agreement { label, .. } => {
                    steps.push(WitnessStep::Agreement {
                        side,
                        label: label.clone(),
                    });
                    if Some(side) == witness_side {
                        script_entries.push(ScriptEntry {
                            at: clock,
                            contract: None,
                            action: ScriptAction::Agree(label.clone()),
                        });
                    }
                }
                AttackDesc::Block {
                    labels, stuck, ..
                } => {
                    steps.push(WitnessStep::Block {
                        side,
                        labels: labels.clone(),
                        stuck: *stuck,
                    });
                    if Some(side) == witness_side {
                        for l in labels {
                            match l {
                                Label::Agree(a) => script_entries.push(ScriptEntry {
                                    at: clock,
                                    contract: None,
                                    action: ScriptAction::Agree(a.clone()),
                                }),
                                Label::Call(c) => script_entries.push(ScriptEntry {
                                    at: clock,
                                    contract: None,
                                    action: ScriptAction::Call(c.clone()),
                                }),
                                _ => {}
                            }
                        }
                    }
                }
            }
            if attack.candidates.is_empty() {
                break;
            }
            // all candidates failed; descend into the first to extend the play
            let next = attack
                .candidates
                .iter()
                .flatten()
                .next()
                .copied()
                .expect("non-empty candidate list");
            if matches!(attack.desc, AttackDesc::Block { .. }) {
                clock += 1;
            }
            key = next;
        }

        Witness {
            side: witness_side.unwrap_or(0),
            steps,
            script: TraceScript {
                entries: script_entries,
            },
        }
    }
}

/// Decide bounded legal bisimilarity of two contracts from their initial
/// configurations at clock 0.
pub fn bisimilar(
    c1: &ContractDecl,
    c2: &ContractDecl,
    u: &Universe,
) -> Result<BisimVerdict, ExplosionError> {
    bisimilar_at(c1, c2, u, 0)
}

/// Same, but starting the game at a chosen clock.
pub fn bisimilar_at(
    c1: &ContractDecl,
    c2: &ContractDecl,
    u: &Universe,
    clock: u64,
) -> Result<BisimVerdict, ExplosionError> {
    Game::over_contracts(c1, c2, u, clock).decide()
}

/// Node-level game over two runtime configurations sharing a clock.
pub fn bisimilar_configs(
    p1: &Program,
    cfg1: &Configuration,
    p2: &Program,
    cfg2: &Configuration,
    u: &Universe,
) -> Result<BisimVerdict, ExplosionError> {
    Game::over_configs(p1.clone(), cfg1.clone(), p2.clone(), cfg2.clone(), u).decide()
}

/// Theorem "time shift" (part 1) as a check: if the contracts are related
/// starting at `t`, are they still related starting at `t' >= t`?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeShiftReport {
    pub related_at_t: bool,
    pub related_at_t_prime: bool,
}

pub fn check_time_shift(
    c1: &ContractDecl,
    c2: &ContractDecl,
    u: &Universe,
    t: u64,
    t_prime: u64,
) -> Result<TimeShiftReport, ExplosionError> {
    assert!(t <= t_prime, "time shift goes forward");
    let at_t = bisimilar_at(c1, c2, u, t)?;
    let at_t_prime = bisimilar_at(c1, c2, u, t_prime)?;
    Ok(TimeShiftReport {
        related_at_t: at_t.related,
        related_at_t_prime: at_t_prime.related,
    })
}

/// Replay a witness on both contracts: it must run clean (no rejections, no
/// freeze) on `on`, and fail to reproduce on the other side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReplay {
    pub realizable_on_winner: bool,
    pub refused_on_loser: bool,
}

pub fn replay_witness(
    c1: &ContractDecl,
    c2: &ContractDecl,
    witness: &Witness,
) -> WitnessReplay {
    let (winner, loser) = if witness.side == 0 { (c1, c2) } else { (c2, c1) };
    // a play may legitimately end in a freeze; then the winner freezes too
    let expects_stuck = witness
        .steps
        .iter()
        .any(|s| matches!(s, WitnessStep::Block { stuck: true, side, .. } if *side == witness.side));
    let run_on = |decl: &ContractDecl| {
        let prog = Program::single(decl.clone());
        crate::driver::run_trace(&prog, &witness.script, &crate::driver::RunOptions::default())
    };
    let winner_run = run_on(winner);
    let loser_run = run_on(loser);
    let clean = |r: &Result<crate::driver::RunResult, crate::driver::RunError>| match r {
        Ok(run) => run.rejections().is_empty() && run.stuck().is_some() == expects_stuck,
        Err(_) => false,
    };
    let obs_of = |r: &Result<crate::driver::RunResult, crate::driver::RunError>| {
        r.as_ref().ok().map(|run| {
            let mut obs: Vec<Label> = run.observations().into_iter().map(|(_, l)| l).collect();
            obs.sort();
            obs
        })
    };
    let winner_obs = obs_of(&winner_run);
    let loser_obs = obs_of(&loser_run);
    WitnessReplay {
        realizable_on_winner: clean(&winner_run),
        refused_on_loser: !clean(&loser_run) || winner_obs != loser_obs,
    }
}
