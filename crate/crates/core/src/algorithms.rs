//! Concrete pricing machines.
//!
//! PRRFES explores prices `q + k·2^{-2^l}` above the last accepted price `q`,
//! answers a rejection with `r − 1` penalization repeats followed by `g(l)`
//! exploitation offers of `q`, and then moves to the next phase with a finer
//! step. prePRRFES runs the same control flow but always offers the carried
//! price `q`, which makes it price-equivalent to `pre(0, PRRFES)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::price::Price;
use crate::pricing::{Decision, PricingMachine};

/// Largest phase index whose exploitation rate `2^{2^l}` fits in 64 bits.
pub const MAX_PHASE: u32 = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseParams {
    pub l: u32,
    pub epsilon: Price,
    /// `N_l = 1/ε_{l−1}`, defined from phase 1 on.
    pub n: Option<u64>,
}

/// `ε_l = 2^{-2^l}` and `N_l = 2^{2^{l−1}}`.
pub fn exploration_params(l: u32) -> Result<PhaseParams> {
    if l > MAX_PHASE {
        return Err(LabError::Overflow { l });
    }
    Ok(PhaseParams {
        l,
        epsilon: Price::pow2_neg(1 << l),
        n: (l >= 1).then(|| 1u64 << (1u32 << (l - 1))),
    })
}

/// `g(l) = 2^{2^l}`.
pub fn default_exploit_rate(l: u32) -> Result<u64> {
    if l > MAX_PHASE {
        return Err(LabError::Overflow { l });
    }
    Ok(pow2_pow2(l))
}

/// `g(l) = max{2^{2^l}, ⌈G⌉}`.
pub fn preprrfes_exploit_rate(l: u32, g: f64) -> Result<u64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(LabError::InvalidParameter(format!("G must be positive, got {g}")));
    }
    Ok(default_exploit_rate(l)?.max(g.ceil() as u64))
}

fn pow2_pow2(l: u32) -> u64 {
    if l >= 6 {
        u64::MAX
    } else {
        1u64 << (1u32 << l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExploitRate {
    /// `2^{2^l}`
    Default,
    /// `max{2^{2^l}, ⌈G⌉}`
    Floor(f64),
}

impl ExploitRate {
    /// Rounds of exploitation in phase `l`. Phases past [`MAX_PHASE`]
    /// saturate at `u64::MAX`; they need more than 2^32 earlier rounds.
    pub fn rounds(&self, l: u32) -> u64 {
        let base = pow2_pow2(l);
        match self {
            ExploitRate::Default => base,
            ExploitRate::Floor(g) => base.max(g.ceil() as u64),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ExploitRate::Default => "default".to_string(),
            ExploitRate::Floor(g) => format!("preprrfes:{g}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrrfesParams {
    /// Penalization length: the rejected offer plus `r − 1` repeats.
    pub r: u32,
    pub exploit: ExploitRate,
}

impl PrrfesParams {
    pub fn new(r: u32, exploit: ExploitRate) -> Result<Self> {
        if r == 0 {
            return Err(LabError::InvalidParameter("r must be at least 1".into()));
        }
        if let ExploitRate::Floor(g) = exploit {
            if !(g > 0.0) || !g.is_finite() {
                return Err(LabError::InvalidParameter(format!("G must be positive, got {g}")));
            }
        }
        Ok(Self { r, exploit })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Explore,
    /// Repeats of the rejected price still to be offered, current one included.
    Penalize(u32),
    /// Exploitation offers still to be made, current one included.
    Exploit(u64),
}

/// Shared state of PRRFES and prePRRFES: last accepted price `q`, exploration
/// price `p`, phase `l`, and where in the phase the machine is.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhaseState {
    pub q: Price,
    pub p: Price,
    pub l: u32,
    pub mode: Mode,
}

impl PhaseState {
    fn initial() -> Self {
        Self {
            q: Price::zero(),
            p: Price::dyadic(1, 1),
            l: 0,
            mode: Mode::Explore,
        }
    }
}

fn phase_step(params: &PrrfesParams, s: &PhaseState, decision: Decision) -> PhaseState {
    match (&s.mode, decision) {
        (Mode::Explore | Mode::Penalize(_), Decision::Accept) => {
            let q = s.p.clone();
            let p = next_exploration_price(&q, &s.p, s.l);
            PhaseState {
                q,
                p,
                l: s.l,
                mode: Mode::Explore,
            }
        }
        (Mode::Explore, Decision::Reject) => after_rejection(params, s, params.r - 1),
        (Mode::Penalize(left), Decision::Reject) => after_rejection(params, s, left - 1),
        (Mode::Exploit(left), _) => {
            if *left > 1 {
                PhaseState {
                    mode: Mode::Exploit(left - 1),
                    ..s.clone()
                }
            } else {
                let l = s.l + 1;
                PhaseState {
                    q: s.q.clone(),
                    p: next_exploration_price(&s.q, &s.p, l),
                    l,
                    mode: Mode::Explore,
                }
            }
        }
    }
}

fn after_rejection(params: &PrrfesParams, s: &PhaseState, repeats_left: u32) -> PhaseState {
    let mode = if repeats_left > 0 {
        Mode::Penalize(repeats_left)
    } else {
        Mode::Exploit(params.exploit.rounds(s.l).max(1))
    };
    PhaseState { mode, ..s.clone() }
}

/// `p := q + 2^{-2^l}` unless the search has saturated at the top of `[0, 1]`.
fn next_exploration_price(q: &Price, p: &Price, l: u32) -> Price {
    if *q < Price::one() {
        q + &Price::pow2_neg(1u32 << l.min(31))
    } else {
        p.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prrfes {
    params: PrrfesParams,
}

impl Prrfes {
    pub fn new(params: PrrfesParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &PrrfesParams {
        &self.params
    }
}

impl PricingMachine for Prrfes {
    type State = PhaseState;

    fn initial_state(&self) -> PhaseState {
        PhaseState::initial()
    }

    fn offer(&self, s: &PhaseState) -> Price {
        match s.mode {
            Mode::Explore | Mode::Penalize(_) => s.p.clone(),
            Mode::Exploit(_) => s.q.clone(),
        }
    }

    fn step(&self, s: &PhaseState, d: Decision) -> PhaseState {
        phase_step(&self.params, s, d)
    }

    fn price_floor(&self, s: &PhaseState) -> Price {
        s.q.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrePrrfes {
    params: PrrfesParams,
}

impl PrePrrfes {
    pub fn new(params: PrrfesParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &PrrfesParams {
        &self.params
    }
}

impl PricingMachine for PrePrrfes {
    type State = PhaseState;

    fn initial_state(&self) -> PhaseState {
        PhaseState::initial()
    }

    fn offer(&self, s: &PhaseState) -> Price {
        s.q.clone()
    }

    fn step(&self, s: &PhaseState, d: Decision) -> PhaseState {
        phase_step(&self.params, s, d)
    }

    fn price_floor(&self, s: &PhaseState) -> Price {
        s.q.clone()
    }
}

/// Bisection of the feasible interval `[a, b]`, starting from `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BinarySearch;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Price,
    pub hi: Price,
}

impl PricingMachine for BinarySearch {
    type State = Interval;

    fn initial_state(&self) -> Interval {
        Interval {
            lo: Price::zero(),
            hi: Price::one(),
        }
    }

    fn offer(&self, s: &Interval) -> Price {
        s.lo.midpoint(&s.hi)
    }

    fn step(&self, s: &Interval, d: Decision) -> Interval {
        let mid = self.offer(s);
        match d {
            Decision::Accept => Interval {
                lo: mid,
                hi: s.hi.clone(),
            },
            Decision::Reject => Interval {
                lo: s.lo.clone(),
                hi: mid,
            },
        }
    }

    fn price_floor(&self, s: &Interval) -> Price {
        s.lo.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantPrice {
    price: Price,
}

impl ConstantPrice {
    pub fn new(price: Price) -> Self {
        Self { price }
    }
}

impl PricingMachine for ConstantPrice {
    type State = ();

    fn initial_state(&self) {}

    fn offer(&self, _: &()) -> Price {
        self.price.clone()
    }

    fn step(&self, _: &(), _: Decision) {}

    fn price_floor(&self, _: &()) -> Price {
        self.price.clone()
    }
}

/// Built-in machine names accepted on the command line and in configs.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmKind {
    Prrfes,
    PrePrrfes,
    BinarySearch,
    Constant(Price),
}

impl FromStr for AlgorithmKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prrfes" => Ok(Self::Prrfes),
            "preprrfes" => Ok(Self::PrePrrfes),
            "binary-search" => Ok(Self::BinarySearch),
            other => {
                if let Some(c) = other.strip_prefix("constant:") {
                    let x: f64 = c.parse().map_err(|_| {
                        LabError::InvalidParameter(format!("bad constant price {c:?}"))
                    })?;
                    let price = Price::from_f64(x).ok_or_else(|| {
                        LabError::InvalidParameter(format!("constant price must be ≥ 0, got {x}"))
                    })?;
                    Ok(Self::Constant(price))
                } else {
                    Err(LabError::InvalidParameter(format!("unknown algorithm {other:?}")))
                }
            }
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Prrfes => f.write_str("prrfes"),
            Self::PrePrrfes => f.write_str("preprrfes"),
            Self::BinarySearch => f.write_str("binary-search"),
            Self::Constant(p) => write!(f, "constant:{}", p.to_f64()),
        }
    }
}

/// A named built-in algorithm with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub params: PrrfesParams,
}

impl AlgorithmSpec {
    pub fn prrfes(r: u32, exploit: ExploitRate) -> Result<Self> {
        Ok(Self {
            kind: AlgorithmKind::Prrfes,
            params: PrrfesParams::new(r, exploit)?,
        })
    }

    pub fn preprrfes(r: u32, exploit: ExploitRate) -> Result<Self> {
        Ok(Self {
            kind: AlgorithmKind::PrePrrfes,
            params: PrrfesParams::new(r, exploit)?,
        })
    }

    pub fn binary_search() -> Self {
        Self {
            kind: AlgorithmKind::BinarySearch,
            params: PrrfesParams {
                r: 1,
                exploit: ExploitRate::Default,
            },
        }
    }

    pub fn constant(price: Price) -> Self {
        Self {
            kind: AlgorithmKind::Constant(price),
            params: PrrfesParams {
                r: 1,
                exploit: ExploitRate::Default,
            },
        }
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    /// Whether `r` and the exploitation policy mean anything for this machine.
    pub fn is_phased(&self) -> bool {
        matches!(self.kind, AlgorithmKind::Prrfes | AlgorithmKind::PrePrrfes)
    }

    pub fn build(&self) -> Machine {
        match &self.kind {
            AlgorithmKind::Prrfes => Machine::Prrfes(Prrfes::new(self.params)),
            AlgorithmKind::PrePrrfes => Machine::PrePrrfes(PrePrrfes::new(self.params)),
            AlgorithmKind::BinarySearch => Machine::BinarySearch(BinarySearch),
            AlgorithmKind::Constant(p) => Machine::Constant(ConstantPrice::new(p.clone())),
        }
    }
}

/// Any built-in machine behind one type.
#[derive(Clone, Debug)]
pub enum Machine {
    Prrfes(Prrfes),
    PrePrrfes(PrePrrfes),
    BinarySearch(BinarySearch),
    Constant(ConstantPrice),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MachineState {
    Phase(PhaseState),
    Interval(Interval),
    Unit,
}

impl PricingMachine for Machine {
    type State = MachineState;

    fn initial_state(&self) -> MachineState {
        match self {
            Machine::Prrfes(m) => MachineState::Phase(m.initial_state()),
            Machine::PrePrrfes(m) => MachineState::Phase(m.initial_state()),
            Machine::BinarySearch(m) => MachineState::Interval(m.initial_state()),
            Machine::Constant(_) => MachineState::Unit,
        }
    }

    fn offer(&self, state: &MachineState) -> Price {
        match (self, state) {
            (Machine::Prrfes(m), MachineState::Phase(s)) => m.offer(s),
            (Machine::PrePrrfes(m), MachineState::Phase(s)) => m.offer(s),
            (Machine::BinarySearch(m), MachineState::Interval(s)) => m.offer(s),
            (Machine::Constant(m), MachineState::Unit) => m.offer(&()),
            _ => unreachable!("state does not belong to this machine"),
        }
    }

    fn step(&self, state: &MachineState, d: Decision) -> MachineState {
        match (self, state) {
            (Machine::Prrfes(m), MachineState::Phase(s)) => MachineState::Phase(m.step(s, d)),
            (Machine::PrePrrfes(m), MachineState::Phase(s)) => MachineState::Phase(m.step(s, d)),
            (Machine::BinarySearch(m), MachineState::Interval(s)) => {
                MachineState::Interval(m.step(s, d))
            }
            (Machine::Constant(_), MachineState::Unit) => MachineState::Unit,
            _ => unreachable!("state does not belong to this machine"),
        }
    }

    fn price_floor(&self, state: &MachineState) -> Price {
        match (self, state) {
            (Machine::Prrfes(m), MachineState::Phase(s)) => m.price_floor(s),
            (Machine::PrePrrfes(m), MachineState::Phase(s)) => m.price_floor(s),
            (Machine::BinarySearch(m), MachineState::Interval(s)) => m.price_floor(s),
            (Machine::Constant(m), MachineState::Unit) => m.price_floor(&()),
            _ => unreachable!("state does not belong to this machine"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{
        check_consistent, check_regular_weakly_consistent, check_right_consistent,
        check_weakly_consistent, path_prices_nondecreasing, pre_transform, price_equivalent,
        price_path, DecisionPath,
    };

    fn p(num: u64, exp: u32) -> Price {
        Price::dyadic(num, exp)
    }

    fn bits(s: &str) -> DecisionPath {
        s.parse().unwrap()
    }

    fn prrfes(r: u32) -> Prrfes {
        Prrfes::new(PrrfesParams::new(r, ExploitRate::Default).unwrap())
    }

    fn preprrfes(r: u32) -> PrePrrfes {
        PrePrrfes::new(PrrfesParams::new(r, ExploitRate::Default).unwrap())
    }

    #[test]
    fn exploration_params_examples() {
        assert_eq!(exploration_params(0).unwrap().epsilon, p(1, 1));
        assert_eq!(exploration_params(0).unwrap().n, None);
        let two = exploration_params(2).unwrap();
        assert_eq!((two.epsilon, two.n), (p(1, 4), Some(4)));
        let four = exploration_params(4).unwrap();
        assert_eq!((four.epsilon, four.n), (Price::pow2_neg(16), Some(256)));
        assert!(matches!(exploration_params(6), Err(LabError::Overflow { l: 6 })));
    }

    #[test]
    fn exploration_params_recurrences() {
        for l in 1..=MAX_PHASE {
            let cur = exploration_params(l).unwrap();
            let prev = exploration_params(l - 1).unwrap();
            // ε_l = ε_{l−1}², N_l = 1/ε_{l−1}, ε_l · N_l = ε_{l−1}
            assert_eq!(cur.epsilon.denominator_exp(), 2 * prev.epsilon.denominator_exp());
            let n = cur.n.unwrap();
            assert_eq!(n.trailing_zeros(), prev.epsilon.denominator_exp());
            assert_eq!(
                cur.epsilon.denominator_exp() - n.trailing_zeros(),
                prev.epsilon.denominator_exp()
            );
        }
    }

    #[test]
    fn exploit_rates() {
        assert_eq!(default_exploit_rate(0).unwrap(), 2);
        assert_eq!(default_exploit_rate(5).unwrap(), 1 << 32);
        assert!(default_exploit_rate(6).is_err());
        assert_eq!(preprrfes_exploit_rate(0, 12.16).unwrap(), 13);
        assert_eq!(preprrfes_exploit_rate(4, 12.16).unwrap(), 65_536);
        assert!(preprrfes_exploit_rate(0, -1.0).is_err());
    }

    #[test]
    fn binary_search_traces() {
        assert_eq!(price_path(&BinarySearch, &bits("001")), vec![p(1, 1), p(1, 2), p(1, 3)]);
        let s = BinarySearch.state_after(&bits("00"));
        assert_eq!(BinarySearch.offer(&s), p(1, 3));
        assert_eq!(price_path(&BinarySearch, &bits("10")), vec![p(1, 1), p(3, 2)]);
        assert_eq!(BinarySearch.offer(&BinarySearch.state_after(&bits("10"))), p(5, 3));
    }

    #[test]
    fn prrfes_first_offer_and_trace() {
        let m = prrfes(2);
        assert_eq!(m.offer(&m.initial_state()), p(1, 1));
        let path = bits("10000");
        assert_eq!(price_path(&m, &path), vec![p(1, 1), p(1, 0), p(1, 0), p(1, 1), p(1, 1)]);
        assert_eq!(m.offer(&m.state_after(&path)), p(3, 2));
    }

    #[test]
    fn prrfes_accept_always_saturates() {
        let m = prrfes(3);
        let prices = price_path(&m, &bits("111111"));
        assert_eq!(prices[0], p(1, 1));
        assert!(prices[1..].iter().all(|x| *x == Price::one()));
    }

    #[test]
    fn preprrfes_traces() {
        let m = preprrfes(3);
        assert_eq!(m.offer(&m.initial_state()), Price::zero());
        let prices = price_path(&m, &bits("11111"));
        assert_eq!(&prices[..3], &[Price::zero(), p(1, 1), Price::one()]);
        assert!(prices[2..].iter().all(|x| *x == Price::one()));
    }

    #[test]
    fn preprrfes_is_pre_of_prrfes() {
        for r in [1, 2, 4, 11] {
            let params = PrrfesParams::new(r, ExploitRate::Default).unwrap();
            let pre = pre_transform(Price::zero(), Prrfes::new(params));
            assert!(price_equivalent(&PrePrrfes::new(params), &pre, 14).holds, "r={r}");
        }
        let params = PrrfesParams::new(6, ExploitRate::Floor(9.0)).unwrap();
        let pre = pre_transform(Price::zero(), Prrfes::new(params));
        assert!(price_equivalent(&PrePrrfes::new(params), &pre, 14).holds);
    }

    #[test]
    fn exploitation_rounds_collapse() {
        let m = prrfes(2);
        let s = m.state_after(&bits("000"));
        assert!(matches!(s.mode, Mode::Exploit(_)));
        assert_eq!(m.step(&s, Decision::Accept), m.step(&s, Decision::Reject));
    }

    #[test]
    fn penalization_repeats_share_right_subtrees() {
        let r = 4;
        let m = prrfes(r);
        // first rejected exploration node after accepting 1/2
        let first = m.state_after(&bits("1"));
        let mut node = first.clone();
        for _ in 1..r {
            node = m.step(&node, Decision::Reject);
            assert_eq!(m.offer(&node), m.offer(&first));
            assert_eq!(m.step(&node, Decision::Accept), m.step(&first, Decision::Accept));
        }
    }

    #[test]
    fn explore_prices_lie_on_the_phase_grid() {
        let m = prrfes(2);
        let pre = preprrfes(2);
        let mut stack = vec![(m.initial_state(), 0usize)];
        while let Some((s, depth)) = stack.pop() {
            if s.mode == Mode::Explore {
                let eps = exploration_params(s.l).unwrap().epsilon;
                let k_eps = s.p.checked_sub(&s.q);
                // p = q + k ε with k ≥ 1 unless saturated at 1
                if s.q < Price::one() {
                    let k_eps = k_eps.unwrap();
                    assert!(k_eps >= eps);
                    assert!(k_eps.denominator_exp() <= eps.denominator_exp());
                }
                // the carried-price machine offers q itself: k = 0
                assert_eq!(pre.offer(&s), s.q);
            }
            if depth < 12 {
                for d in [Decision::Reject, Decision::Accept] {
                    stack.push((m.step(&s, d), depth + 1));
                }
            }
        }
    }

    #[test]
    fn class_membership() {
        let pr = prrfes(3);
        let pre = preprrfes(3);
        assert!(check_right_consistent(&pr, 12).holds);
        let wc = check_weakly_consistent(&pr, 12);
        assert!(!wc.holds);
        assert!(wc.witness.is_some());
        assert!(check_weakly_consistent(&pre, 12).holds);
        assert!(check_right_consistent(&pre, 12).holds);
        assert!(path_prices_nondecreasing(&pre, 14).holds);
        let c = check_consistent(&pre, 12);
        assert!(!c.holds);
        assert!(!path_prices_nondecreasing(&pr, 6).holds);
    }

    #[test]
    fn preprrfes_regularity_regression() {
        // The penalization repeats pass (accepting from any of them lands in
        // the same state), but at the last repeat before exploitation the
        // rejected branch keeps offering q = 0 only until the next phase
        // starts, so it is neither constant nor equivalent to the accept side.
        let v = check_regular_weakly_consistent(&preprrfes(3), 10, 6);
        assert!(!v.holds);
        assert_eq!(v.witness.unwrap().to_string(), "00");
    }

    #[test]
    fn names_parse() {
        assert_eq!("prrfes".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::Prrfes);
        assert_eq!(
            "constant:0.5".parse::<AlgorithmKind>().unwrap(),
            AlgorithmKind::Constant(p(1, 1))
        );
        assert!("fes".parse::<AlgorithmKind>().is_err());
        assert_eq!(AlgorithmKind::BinarySearch.to_string(), "binary-search");
    }
}
