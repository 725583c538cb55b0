//! Buyer models: the truthful buyer and exact strategic-buyer oracles.
//!
//! The strategic buyer maximizes `Σ γ_t a_t (v − p_t)` over a horizon `T`
//! knowing the seller's machine. Both oracles run the same backward induction;
//! the memoized one keys node values on `(state, t)` and skips subtrees whose
//! surplus cannot reach what is already secured elsewhere.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::discounts::DiscountSequence;
use crate::error::{LabError, Result};
use crate::price::Price;
use crate::pricing::{Decision, DecisionPath, PricingMachine};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 22;
pub const DEFAULT_MEMO_CAP: usize = 20_000_000;

/// Stack for the memoized solver, whose recursion is `T` frames deep.
const SOLVER_STACK_BYTES: usize = 512 << 20;

/// Secondary objective among surplus-optimal strategies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Largest seller regret; reject if that ties too.
    #[default]
    MaxRegret,
    PreferReject,
    PreferAccept,
}

impl TieBreak {
    pub fn name(self) -> &'static str {
        match self {
            TieBreak::MaxRegret => "max-regret",
            TieBreak::PreferReject => "prefer-reject",
            TieBreak::PreferAccept => "prefer-accept",
        }
    }
}

impl std::str::FromStr for TieBreak {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-regret" => Ok(TieBreak::MaxRegret),
            "prefer-reject" => Ok(TieBreak::PreferReject),
            "prefer-accept" => Ok(TieBreak::PreferAccept),
            other => Err(LabError::InvalidParameter(format!("unknown tie-break {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub tie_break: TieBreak,
    /// Surplus differences up to `theta` count as ties.
    pub theta: f64,
    pub brute_force_cap: usize,
    pub memo_cap: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tie_break: TieBreak::MaxRegret,
            theta: 0.0,
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
            memo_cap: DEFAULT_MEMO_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayRecord {
    pub prices: Vec<Price>,
    pub decisions: DecisionPath,
    pub v: f64,
    pub horizon: usize,
}

impl PlayRecord {
    /// Replays `decisions` against `machine`.
    pub fn replay<M: PricingMachine>(machine: &M, v: f64, decisions: DecisionPath) -> Self {
        let prices = crate::pricing::price_path(machine, &decisions);
        Self {
            horizon: prices.len(),
            prices,
            decisions,
            v,
        }
    }

    pub fn rounds(&self) -> impl Iterator<Item = (&Price, Decision)> + '_ {
        self.prices.iter().zip(self.decisions.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPlay {
    pub surplus: f64,
    pub play: PlayRecord,
    pub seller_regret: f64,
    pub node_count: usize,
}

#[derive(Clone, Debug)]
pub enum BuyerKind {
    Truthful,
    Strategic {
        discount: DiscountSequence,
        horizon: usize,
        tie_break: TieBreak,
    },
}

#[derive(Clone, Debug)]
pub struct BuyerModel {
    pub v: f64,
    pub kind: BuyerKind,
}

impl BuyerModel {
    pub fn truthful(v: f64) -> Result<Self> {
        check_valuation(v)?;
        Ok(Self {
            v,
            kind: BuyerKind::Truthful,
        })
    }

    pub fn strategic(v: f64, discount: DiscountSequence, horizon: usize, tie_break: TieBreak) -> Result<Self> {
        check_valuation(v)?;
        check_horizon(horizon)?;
        Ok(Self {
            v,
            kind: BuyerKind::Strategic {
                discount,
                horizon,
                tie_break,
            },
        })
    }

    /// The buyer's play over `horizon` rounds. A strategic buyer is solved
    /// with the memoized oracle over its own horizon.
    pub fn play<M: PricingMachine>(&self, machine: &M, horizon: usize) -> Result<PlayRecord> {
        match &self.kind {
            BuyerKind::Truthful => Ok(truthful_play(machine, self.v, horizon)),
            BuyerKind::Strategic {
                discount,
                horizon,
                tie_break,
            } => {
                let opts = OracleOptions {
                    tie_break: *tie_break,
                    ..OracleOptions::default()
                };
                Ok(optimal_play_memoized(machine, self.v, discount, *horizon, &opts)?.play)
            }
        }
    }
}

fn check_valuation(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("valuation must lie in [0, 1], got {v}")))
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon >= 1 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter("horizon must be at least 1".into()))
    }
}

/// `Σ γ_t a_t (v − p_t)`.
pub fn surplus_of(play: &PlayRecord, discount: &DiscountSequence) -> f64 {
    play.rounds()
        .enumerate()
        .filter(|(_, (_, d))| d.is_accept())
        .map(|(i, (p, _))| discount.gamma_at(i as u64 + 1) * (play.v - p.to_f64()))
        .sum()
}

/// Accepts exactly the offers at or below `v`.
pub fn truthful_play<M: PricingMachine>(machine: &M, v: f64, horizon: usize) -> PlayRecord {
    let mut state = machine.initial_state();
    let mut prices = Vec::with_capacity(horizon);
    let mut decisions = DecisionPath::new();
    for _ in 0..horizon {
        let p = machine.offer(&state);
        let d = Decision::from_bit(p.to_f64() <= v);
        state = machine.step(&state, d);
        prices.push(p);
        decisions.push(d);
    }
    PlayRecord {
        prices,
        decisions,
        v,
        horizon,
    }
}

/// No accepted price exceeds the valuation.
pub fn is_locally_non_losing(play: &PlayRecord) -> bool {
    play.rounds()
        .all(|(p, d)| !d.is_accept() || p.to_f64() <= play.v)
}

/// Surplus and seller regret collected from round `t` on, and the decision
/// taken at `t`. Surplus is measured in units of `γ_t`, so that values stay
/// of order one however deep the round and however small `γ_t` gets.
#[derive(Clone, Copy, Debug, PartialEq)]
struct NodeValue {
    surplus: f64,
    regret: f64,
    choice: Decision,
}

const LEAF: NodeValue = NodeValue {
    surplus: 0.0,
    regret: 0.0,
    choice: Decision::Reject,
};

/// One node's data: price `p` and `ratio = γ_{t+1}/γ_t`.
#[derive(Clone, Copy)]
struct Round {
    v: f64,
    p: f64,
    ratio: f64,
}

impl Round {
    fn accept(&self, child: &NodeValue) -> NodeValue {
        NodeValue {
            surplus: (self.v - self.p) + self.ratio * child.surplus,
            regret: (self.v - self.p) + child.regret,
            choice: Decision::Accept,
        }
    }

    fn reject(&self, child: &NodeValue) -> NodeValue {
        NodeValue {
            surplus: self.ratio * child.surplus,
            regret: self.v + child.regret,
            choice: Decision::Reject,
        }
    }

    /// Combines the two continuations. `theta` applies to the normalized
    /// surplus of the node.
    fn choose(&self, opts: &OracleOptions, reject: &NodeValue, accept: &NodeValue) -> NodeValue {
        let acc = self.accept(accept);
        let rej = self.reject(reject);
        let take_accept = if (acc.surplus - rej.surplus).abs() <= opts.theta {
            match opts.tie_break {
                TieBreak::MaxRegret => acc.regret > rej.regret,
                TieBreak::PreferReject => false,
                TieBreak::PreferAccept => true,
            }
        } else {
            acc.surplus > rej.surplus
        };
        if take_accept {
            acc
        } else {
            rej
        }
    }
}

/// `γ_{t+1}/γ_t` for `t = 1..=T`.
fn discount_ratios(discount: &DiscountSequence, horizon: usize) -> Result<Vec<f64>> {
    let ratios: Vec<f64> = (1..=horizon as u64).map(|t| discount.ratio_at(t)).collect();
    match ratios.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
        Some(i) => Err(LabError::InvalidParameter(format!(
            "discount weights must stay positive, γ_{}/γ_{} = {}",
            i + 2,
            i + 1,
            ratios[i]
        ))),
        None => Ok(ratios),
    }
}

fn finish<M: PricingMachine>(
    machine: &M,
    v: f64,
    discount: &DiscountSequence,
    decisions: DecisionPath,
    node_count: usize,
) -> OptimalPlay {
    let play = PlayRecord::replay(machine, v, decisions);
    OptimalPlay {
        surplus: surplus_of(&play, discount),
        seller_regret: crate::regret::regret_of(&play),
        play,
        node_count,
    }
}

/// Backward induction over the full depth-`T` tree, without memoization.
pub fn optimal_play_bruteforce<M: PricingMachine>(
    machine: &M,
    v: f64,
    discount: &DiscountSequence,
    horizon: usize,
    opts: &OracleOptions,
) -> Result<OptimalPlay> {
    check_valuation(v)?;
    check_horizon(horizon)?;
    let cap = opts.brute_force_cap.min(63);
    if horizon > cap {
        return Err(LabError::HorizonTooLarge { horizon, cap });
    }
    let ratios = discount_ratios(discount, horizon)?;
    let mut nodes = 0usize;
    // decisions are packed into a bit mask, round t at bit t
    fn go<M: PricingMachine>(
        machine: &M,
        state: &M::State,
        t: usize,
        v: f64,
        ratios: &[f64],
        opts: &OracleOptions,
        nodes: &mut usize,
    ) -> (NodeValue, u64) {
        if t == ratios.len() {
            return (LEAF, 0);
        }
        *nodes += 1;
        let round = Round {
            v,
            p: machine.offer(state).to_f64(),
            ratio: ratios[t],
        };
        let (rej, rej_bits) = go(machine, &machine.step(state, Decision::Reject), t + 1, v, ratios, opts, nodes);
        let (acc, acc_bits) = go(machine, &machine.step(state, Decision::Accept), t + 1, v, ratios, opts, nodes);
        let node = round.choose(opts, &rej, &acc);
        let bits = match node.choice {
            Decision::Accept => acc_bits | (1 << t),
            Decision::Reject => rej_bits,
        };
        (node, bits)
    }
    let (_, bits) = go(machine, &machine.initial_state(), 0, v, &ratios, opts, &mut nodes);
    let decisions = (0..horizon)
        .map(|t| Decision::from_bit(bits >> t & 1 == 1))
        .collect();
    Ok(finish(machine, v, discount, decisions, nodes))
}

enum Entry {
    Exact(NodeValue),
    /// The node's surplus is below this value.
    Below(f64),
}

struct Solver<'a, M: PricingMachine> {
    machine: &'a M,
    v: f64,
    ratios: Vec<f64>,
    /// `suffix[t] = Σ_{s ≥ t} γ_s / γ_t` over the remaining rounds (0-based).
    suffix: Vec<f64>,
    opts: OracleOptions,
    memo: HashMap<(M::State, u32), Entry>,
}

impl<M: PricingMachine> Solver<'_, M> {
    fn upper_bound(&self, state: &M::State, t: usize) -> f64 {
        let floor = self.machine.price_floor(state).to_f64();
        (self.v - floor).max(0.0) * self.suffix[t] * (1.0 + 1e-9)
    }

    fn margin(&self, t: usize) -> f64 {
        (1e-9 * self.suffix[t]).max(4.0 * self.opts.theta)
    }

    /// Exact value of the node, or `None` when its surplus is below `beta`.
    fn solve(&mut self, state: &M::State, t: usize, beta: f64) -> Result<Option<NodeValue>> {
        if t == self.ratios.len() {
            return Ok(Some(LEAF));
        }
        let key = (state.clone(), t as u32);
        match self.memo.get(&key) {
            Some(Entry::Exact(node)) => return Ok(Some(*node)),
            Some(Entry::Below(b)) if *b <= beta => return Ok(None),
            _ => {}
        }
        let result = if self.upper_bound(state, t) < beta {
            None
        } else {
            self.expand(state, t, beta)?
        };
        match result {
            Some(node) => {
                self.memo.insert(key, Entry::Exact(node));
            }
            None => {
                let entry = self.memo.entry(key).or_insert(Entry::Below(beta));
                if let Entry::Below(b) = entry {
                    *b = b.min(beta);
                }
            }
        }
        if self.memo.len() > self.opts.memo_cap {
            return Err(LabError::MemoryBudgetExceeded {
                cap: self.opts.memo_cap,
            });
        }
        Ok(result)
    }

    fn expand(&mut self, state: &M::State, t: usize, beta: f64) -> Result<Option<NodeValue>> {
        let round = Round {
            v: self.v,
            p: self.machine.offer(state).to_f64(),
            ratio: self.ratios[t],
        };
        let m = self.margin(t);
        let rej_state = self.machine.step(state, Decision::Reject);
        let acc_state = self.machine.step(state, Decision::Accept);
        let gain = self.v - round.p;
        let acc_first = gain + round.ratio * self.upper_bound(&acc_state, t + 1)
            > round.ratio * self.upper_bound(&rej_state, t + 1);
        let (first, second) = if acc_first {
            ((&acc_state, gain), (&rej_state, 0.0))
        } else {
            ((&rej_state, 0.0), (&acc_state, gain))
        };
        // a child value c contributes offset + ratio·c to this node
        let child_beta = |target: f64, offset: f64| (target - offset) / round.ratio;
        let pick = |accept: bool, child: &NodeValue| {
            if accept {
                round.accept(child)
            } else {
                round.reject(child)
            }
        };
        let (c1, c2) = match self.solve(first.0, t + 1, child_beta(beta - m, first.1))? {
            Some(c1) => {
                let total1 = pick(acc_first, &c1).surplus;
                match self.solve(second.0, t + 1, child_beta(beta.max(total1) - m, second.1))? {
                    Some(c2) => (c1, c2),
                    None if total1 >= beta => return Ok(Some(pick(acc_first, &c1))),
                    None => return Ok(None),
                }
            }
            None => match self.solve(second.0, t + 1, child_beta(beta, second.1))? {
                Some(c2) if pick(!acc_first, &c2).surplus >= beta => {
                    return Ok(Some(pick(!acc_first, &c2)))
                }
                _ => return Ok(None),
            },
        };
        let (acc, rej) = if acc_first { (c1, c2) } else { (c2, c1) };
        Ok(Some(round.choose(&self.opts, &rej, &acc)))
    }

    fn extract(&self) -> DecisionPath {
        let mut state = self.machine.initial_state();
        let mut path = DecisionPath::new();
        for t in 0..self.ratios.len() {
            let choice = match self.memo.get(&(state.clone(), t as u32)) {
                Some(Entry::Exact(node)) => node.choice,
                _ => unreachable!("optimal path leaves the solved region at round {t}"),
            };
            path.push(choice);
            state = self.machine.step(&state, choice);
        }
        path
    }
}

/// Backward induction keyed on `(state, t)`. Subtrees whose best conceivable
/// surplus `(v − floor)·Σ_{s≥t} γ_s` falls short of an already secured value
/// are skipped; the skipped side is then strictly worse than the chosen one by
/// more than the tie window, so the result matches the brute-force oracle.
pub fn optimal_play_memoized<M: PricingMachine>(
    machine: &M,
    v: f64,
    discount: &DiscountSequence,
    horizon: usize,
    opts: &OracleOptions,
) -> Result<OptimalPlay> {
    check_valuation(v)?;
    check_horizon(horizon)?;
    let ratios = discount_ratios(discount, horizon)?;
    let mut suffix = vec![0.0; horizon + 1];
    for t in (0..horizon).rev() {
        suffix[t] = 1.0 + ratios[t] * suffix[t + 1];
    }
    let mut solver = Solver {
        machine,
        v,
        ratios,
        suffix,
        opts: *opts,
        memo: HashMap::new(),
    };
    let decisions = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(SOLVER_STACK_BYTES)
            .spawn_scoped(scope, || -> Result<DecisionPath> {
                solver.solve(&machine.initial_state(), 0, f64::NEG_INFINITY)?;
                Ok(solver.extract())
            })
            .expect("failed to spawn the solver thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })?;
    Ok(finish(machine, v, discount, decisions, solver.memo.len()))
}

/// Every strategy of length `horizon` as a decision path, in binary order.
pub fn all_strategies(horizon: usize) -> impl Iterator<Item = DecisionPath> {
    (0u64..1 << horizon).map(move |bits| {
        (0..horizon)
            .map(|t| Decision::from_bit(bits >> t & 1 == 1))
            .collect()
    })
}
