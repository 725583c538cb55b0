//! Seller regret, strategic-regret reports and the linear-regret witness
//! search for weakly consistent machines.

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, AlgorithmSpec, ExploitRate};
use crate::bounds::{self, BoundParams};
use crate::buyer::{
    optimal_play_bruteforce, optimal_play_memoized, is_locally_non_losing, OptimalPlay,
    OracleOptions, PlayRecord, TieBreak,
};
use crate::discounts::DiscountSequence;
use crate::error::{LabError, Result};
use crate::price::Price;
use crate::pricing::{Decision, DecisionPath, PricingMachine};

pub const DEFAULT_WITNESS_DEPTH: usize = 16;

/// `Σ (v − a_t p_t)`.
pub fn regret_of(play: &PlayRecord) -> f64 {
    play.rounds()
        .map(|(p, d)| if d.is_accept() { play.v - p.to_f64() } else { play.v })
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[serde(alias = "brute-force")]
    BruteForce,
    #[default]
    Memoized,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::BruteForce => "bruteforce",
            OracleKind::Memoized => "memoized",
        }
    }

    pub fn solve<M: PricingMachine>(
        self,
        machine: &M,
        v: f64,
        discount: &DiscountSequence,
        horizon: usize,
        opts: &OracleOptions,
    ) -> Result<OptimalPlay> {
        match self {
            OracleKind::BruteForce => optimal_play_bruteforce(machine, v, discount, horizon, opts),
            OracleKind::Memoized => optimal_play_memoized(machine, v, discount, horizon, opts),
        }
    }
}

impl std::str::FromStr for OracleKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" | "brute-force" => Ok(OracleKind::BruteForce),
            "memoized" => Ok(OracleKind::Memoized),
            other => Err(LabError::InvalidParameter(format!("unknown oracle {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `C_{r,κ}(log₂log₂T + 2)`
    Prrfes,
    /// The prePRRFES right-hand side with the `⌈G⌉` terms.
    PrePrrfes,
}

/// A regret bound whose parameter conditions have been checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundClaim {
    pub kind: BoundKind,
    pub params: BoundParams,
}

impl BoundClaim {
    /// Validates that `spec` run against `discount` is covered by a bound for
    /// the given κ.
    pub fn for_algorithm(spec: &AlgorithmSpec, discount: &DiscountSequence, kappa: f64) -> Result<Self> {
        let gamma = discount.geometric_rate().ok_or_else(|| {
            LabError::PreconditionViolated(format!(
                "bounds need geometric discounting, got {}",
                discount.label()
            ))
        })?;
        let r = spec.params.r;
        match (&spec.kind, spec.params.exploit) {
            (AlgorithmKind::Prrfes, ExploitRate::Default) => {
                let params = BoundParams { gamma, kappa, r, g: None };
                params.check_prrfes()?;
                Ok(Self {
                    kind: BoundKind::Prrfes,
                    params,
                })
            }
            (AlgorithmKind::PrePrrfes, ExploitRate::Floor(g)) => {
                let params = BoundParams { gamma, kappa, r, g: Some(g) };
                params.check_preprrfes()?;
                Ok(Self {
                    kind: BoundKind::PrePrrfes,
                    params,
                })
            }
            (AlgorithmKind::Prrfes, _) => Err(LabError::PreconditionViolated(
                "the PRRFES bound needs the default exploitation rate".into(),
            )),
            (AlgorithmKind::PrePrrfes, _) => Err(LabError::PreconditionViolated(
                "the prePRRFES bound needs g(l) = max{2^2^l, ⌈G⌉}".into(),
            )),
            (other, _) => Err(LabError::PreconditionViolated(format!("no regret bound for {other}"))),
        }
    }

    pub fn rhs(&self, horizon: u64, v: f64) -> Result<f64> {
        let p = &self.params;
        match self.kind {
            BoundKind::Prrfes => bounds::prrfes_bound_rhs(horizon, p.r, p.kappa, v),
            BoundKind::PrePrrfes => {
                bounds::preprrfes_bound_rhs(horizon, p.r, p.kappa, v, p.g.unwrap_or(0.0))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub horizon: usize,
    pub v: f64,
    pub discount: String,
    pub algorithm: String,
    pub r: Option<u32>,
    pub kappa: Option<f64>,
    pub g_policy: Option<String>,
    pub oracle: OracleKind,
    pub tie_break: TieBreak,
    pub sreg: f64,
    pub bound_rhs: Option<f64>,
    pub within_bound: Option<bool>,
    pub locally_non_losing: bool,
    pub node_count: usize,
}

/// Strategic regret of a built-in algorithm, with the bound attached when a
/// claim is supplied.
pub fn strategic_regret(
    spec: &AlgorithmSpec,
    v: f64,
    discount: &DiscountSequence,
    horizon: usize,
    oracle: OracleKind,
    opts: &OracleOptions,
    claim: Option<&BoundClaim>,
) -> Result<RegretReport> {
    let machine = spec.build();
    let best = oracle.solve(&machine, v, discount, horizon, opts)?;
    let bound_rhs = claim.map(|c| c.rhs(horizon as u64, v)).transpose()?;
    Ok(RegretReport {
        horizon,
        v,
        discount: discount.label(),
        algorithm: spec.name(),
        r: spec.is_phased().then_some(spec.params.r),
        kappa: claim.map(|c| c.params.kappa),
        g_policy: spec.is_phased().then(|| spec.params.exploit.label()),
        oracle,
        tie_break: opts.tie_break,
        sreg: best.seller_regret,
        within_bound: bound_rhs.map(|rhs| best.seller_regret <= rhs),
        bound_rhs,
        locally_non_losing: is_locally_non_losing(&best.play),
        node_count: best.node_count,
    })
}

#[derive(Debug)]
pub struct RegretCell {
    pub v: f64,
    pub horizon: usize,
    pub outcome: Result<RegretReport>,
}

/// One report per `(v, T)` cell, `v`-major. Failing cells keep their error.
pub fn regret_curve(
    spec: &AlgorithmSpec,
    v_grid: &[f64],
    horizons: &[usize],
    discount: &DiscountSequence,
    oracle: OracleKind,
    opts: &OracleOptions,
    claim: Option<&BoundClaim>,
) -> Result<Vec<RegretCell>> {
    if v_grid.is_empty() || horizons.is_empty() {
        return Err(LabError::InvalidParameter("grids must be nonempty".into()));
    }
    Ok(v_grid
        .iter()
        .flat_map(|&v| horizons.iter().map(move |&t| (v, t)))
        .map(|(v, horizon)| RegretCell {
            v,
            horizon,
            outcome: strategic_regret(spec, v, discount, horizon, oracle, opts, claim),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow {
    pub horizon: usize,
    pub sreg: f64,
    pub slope: f64,
    /// `T > t̃₁`; smaller horizons are reported but not checked.
    pub in_regime: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearRegretWitness {
    /// Decisions up to and including round `t̃₁`.
    pub path: DecisionPath,
    pub t0: usize,
    pub t1: usize,
    pub first_price: Price,
    pub delta: f64,
    pub epsilon0: f64,
    pub epsilon: f64,
    pub v_witness: f64,
    pub slopes: Vec<SlopeRow>,
}

impl LinearRegretWitness {
    pub fn all_hold(&self) -> bool {
        self.slopes.iter().all(|row| row.holds)
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    epsilon0: f64,
    t0: usize,
    t1: usize,
    delta: Price,
    path: DecisionPath,
}

/// Searches every path of `depth` rounds for `t̃₀ ≤ t̃₁` with
/// `p_{t̃₁+1} < p_{t̃₀} < p₁` and keeps the one with the largest `ε₀`
/// (earlier `t̃₁`, then earlier paths on ties).
fn find_double_decrease<M: PricingMachine>(
    machine: &M,
    discount: &DiscountSequence,
    depth: usize,
) -> Option<Candidate> {
    let root = machine.initial_state();
    let p1 = machine.offer(&root);
    let one_minus_p1 = 1.0 - p1.to_f64();
    let mut best: Option<Candidate> = None;
    let mut prices = vec![p1.clone()];
    let mut path = DecisionPath::new();

    #[allow(clippy::too_many_arguments)]
    fn go<M: PricingMachine>(
        machine: &M,
        state: &M::State,
        p1: &Price,
        one_minus_p1: f64,
        discount: &DiscountSequence,
        depth: usize,
        prices: &mut Vec<Price>,
        path: &mut DecisionPath,
        best: &mut Option<Candidate>,
    ) {
        if prices.len() == depth {
            return;
        }
        for d in [Decision::Reject, Decision::Accept] {
            let child = machine.step(state, d);
            let next = machine.offer(&child);
            path.push(d);
            // next is p_{t̃₁+1} with t̃₁ = path.len()
            let t1 = path.len();
            let mut chosen: Option<(usize, &Price)> = None;
            for (i, p) in prices.iter().enumerate().skip(1) {
                if *p < *p1 && next < *p && chosen.is_none_or(|(_, c)| p < c) {
                    chosen = Some((i + 1, p));
                }
            }
            if let Some((t0, p_t0)) = chosen {
                let delta = p1.checked_sub(p_t0).expect("p_t0 < p1");
                let head: f64 = (1..=t1 as u64).map(|t| discount.gamma_at(t)).sum();
                let ratio = discount.gamma_at(t1 as u64 + 1) / head;
                let epsilon0 = (delta.to_f64() * ratio).min(one_minus_p1);
                let better = match best {
                    None => true,
                    Some(b) => epsilon0 > b.epsilon0 || (epsilon0 == b.epsilon0 && t1 < b.t1),
                };
                if better {
                    *best = Some(Candidate {
                        epsilon0,
                        t0,
                        t1,
                        delta,
                        path: path.clone(),
                    });
                }
            }
            prices.push(next);
            go(machine, &child, p1, one_minus_p1, discount, depth, prices, path, best);
            prices.pop();
            path.pop();
        }
    }

    go(
        machine,
        &root,
        &p1,
        one_minus_p1,
        discount,
        depth,
        &mut prices,
        &mut path,
        &mut best,
    );
    best
}

/// Builds the linear-regret witness valuation `v = p₁ + ε₀/2` and measures
/// `SReg(T)/T` at it for every horizon of `horizons`.
pub fn check_linear_regret<M: PricingMachine>(
    machine: &M,
    discount: &DiscountSequence,
    horizons: &[usize],
    depth: usize,
    opts: &OracleOptions,
) -> Result<LinearRegretWitness> {
    let found = find_double_decrease(machine, discount, depth)
        .ok_or(LabError::NoDoubleDecrease { depth })?;
    let first_price = machine.offer(&machine.initial_state());
    if first_price.is_zero() || first_price >= Price::one() {
        return Err(LabError::PreconditionViolated(format!(
            "first price {first_price} is not inside (0, 1)"
        )));
    }
    let epsilon = found.epsilon0 / 2.0;
    let v_witness = first_price.to_f64() + epsilon;
    let slopes = horizons
        .iter()
        .map(|&horizon| {
            let best = optimal_play_memoized(machine, v_witness, discount, horizon, opts)?;
            let sreg = best.seller_regret;
            let in_regime = horizon > found.t1;
            Ok(SlopeRow {
                horizon,
                sreg,
                slope: sreg / horizon as f64,
                in_regime,
                holds: !in_regime || sreg >= epsilon * horizon as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearRegretWitness {
        path: found.path,
        t0: found.t0,
        t1: found.t1,
        first_price,
        delta: found.delta.to_f64(),
        epsilon0: found.epsilon0,
        epsilon,
        v_witness,
        slopes,
    })
}
