//! Pricing algorithms as deterministic transition systems.
//!
//! A horizon-independent pricing algorithm is an infinite binary tree whose
//! nodes are labeled with prices: accepting moves to the right child,
//! rejecting to the left one. [`PricingMachine`] encodes that tree lazily as a
//! state, an offer function and a step function. States double as
//! fingerprints: two equal states must label price-equivalent subtrees, which
//! is what lets the buyer oracles and checkers collapse repeated subtrees.

mod consistency;

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::error::LabError;
use crate::price::Price;

pub use consistency::{
    check_consistent, check_regular_weakly_consistent, check_right_consistent,
    check_weakly_consistent, path_prices_nondecreasing, Verdict,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Reject = 0,
    Accept = 1,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// A buyer strategy prefix, serialized as a bit string (`1` = accept).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionPath(Vec<Decision>);

impl DecisionPath {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_decisions(decisions: Vec<Decision>) -> Self {
        Self(decisions)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| Decision::from_bit(b != 0)).collect())
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, d: Decision) {
        self.0.push(d);
    }

    pub fn pop(&mut self) -> Option<Decision> {
        self.0.pop()
    }

    pub fn with(&self, d: Decision) -> Self {
        let mut next = self.clone();
        next.push(d);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = Decision> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for DecisionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            f.write_str(if d.is_accept() { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for DecisionPath {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Decision::Reject),
                '1' => Ok(Decision::Accept),
                other => Err(LabError::InvalidParameter(format!(
                    "decision paths are bit strings, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(DecisionPath)
    }
}

impl FromIterator<Decision> for DecisionPath {
    fn from_iter<I: IntoIterator<Item = Decision>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A horizon-independent deterministic pricing algorithm.
///
/// `offer` and `step` must be pure functions of the state, and equal states
/// must behave identically (the state is its own fingerprint).
pub trait PricingMachine: Sync {
    type State: Clone + Eq + Hash + fmt::Debug + Send + Sync;

    fn initial_state(&self) -> Self::State;

    fn offer(&self, state: &Self::State) -> Price;

    fn step(&self, state: &Self::State, decision: Decision) -> Self::State;

    /// A lower bound on every price offered from `state` on, the current
    /// offer included. Prices are non-negative, so zero is always valid.
    fn price_floor(&self, _state: &Self::State) -> Price {
        Price::zero()
    }

    /// State reached from the root by following `path`.
    fn state_after(&self, path: &DecisionPath) -> Self::State {
        path.iter()
            .fold(self.initial_state(), |s, d| self.step(&s, d))
    }
}

impl<M: PricingMachine + ?Sized> PricingMachine for &M {
    type State = M::State;

    fn initial_state(&self) -> Self::State {
        (**self).initial_state()
    }

    fn offer(&self, state: &Self::State) -> Price {
        (**self).offer(state)
    }

    fn step(&self, state: &Self::State, decision: Decision) -> Self::State {
        (**self).step(state, decision)
    }

    fn price_floor(&self, state: &Self::State) -> Price {
        (**self).price_floor(state)
    }
}

/// Prices offered along `path`: one price per decision.
pub fn price_path<M: PricingMachine>(machine: &M, path: &DecisionPath) -> Vec<Price> {
    let mut state = machine.initial_state();
    let mut prices = Vec::with_capacity(path.len());
    for d in path.iter() {
        prices.push(machine.offer(&state));
        state = machine.step(&state, d);
    }
    prices
}

/// A machine given directly as a function of the decision history. Its state
/// is the full history, so nothing is ever collapsed.
pub struct PathMachine<F> {
    label: F,
}

impl<F> PathMachine<F>
where
    F: Fn(&DecisionPath) -> Price + Sync,
{
    pub fn new(label: F) -> Self {
        Self { label }
    }
}

impl<F> PricingMachine for PathMachine<F>
where
    F: Fn(&DecisionPath) -> Price + Sync,
{
    type State = DecisionPath;

    fn initial_state(&self) -> DecisionPath {
        DecisionPath::new()
    }

    fn offer(&self, state: &DecisionPath) -> Price {
        (self.label)(state)
    }

    fn step(&self, state: &DecisionPath, decision: Decision) -> DecisionPath {
        state.with(decision)
    }
}

/// The `pre(q, ·)` transformation: tracks the source machine node by node but
/// offers the price at which the buyer last purchased (or `q` before any
/// purchase).
#[derive(Clone, Debug)]
pub struct PreTransform<M> {
    seed: Price,
    inner: M,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreState<S> {
    pub inner: S,
    pub carried: Price,
}

pub fn pre_transform<M: PricingMachine>(seed: Price, machine: M) -> PreTransform<M> {
    PreTransform {
        seed,
        inner: machine,
    }
}

impl<M> PreTransform<M> {
    pub fn seed(&self) -> &Price {
        &self.seed
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: PricingMachine> PricingMachine for PreTransform<M> {
    type State = PreState<M::State>;

    fn initial_state(&self) -> Self::State {
        PreState {
            inner: self.inner.initial_state(),
            carried: self.seed.clone(),
        }
    }

    fn offer(&self, state: &Self::State) -> Price {
        state.carried.clone()
    }

    fn step(&self, state: &Self::State, decision: Decision) -> Self::State {
        match decision {
            Decision::Accept => PreState {
                carried: self.inner.offer(&state.inner),
                inner: self.inner.step(&state.inner, Decision::Accept),
            },
            Decision::Reject => PreState {
                carried: state.carried.clone(),
                inner: self.inner.step(&state.inner, Decision::Reject),
            },
        }
    }

    fn price_floor(&self, state: &Self::State) -> Price {
        let inner = self.inner.price_floor(&state.inner);
        if inner < state.carried {
            inner
        } else {
            state.carried.clone()
        }
    }
}

/// Whether two machines offer the same prices on every decision history for
/// the first `depth` rounds. A failure carries the first diverging history.
pub fn price_equivalent<A, B>(a: &A, b: &B, depth: usize) -> Verdict
where
    A: PricingMachine,
    B: PricingMachine,
{
    let mut seen = HashSet::new();
    let mut path = DecisionPath::new();
    let witness = equivalence_walk(
        a,
        b,
        &a.initial_state(),
        &b.initial_state(),
        depth,
        &mut path,
        &mut seen,
    );
    Verdict::from_witness(witness, depth)
}

/// Equivalence of the subtrees rooted at two states of the same machine.
pub(crate) fn states_equivalent<M: PricingMachine>(
    machine: &M,
    s1: &M::State,
    s2: &M::State,
    depth: usize,
    seen: &mut HashSet<(M::State, M::State, usize)>,
) -> bool {
    let mut path = DecisionPath::new();
    equivalence_walk(machine, machine, s1, s2, depth, &mut path, seen).is_none()
}

fn equivalence_walk<A, B>(
    a: &A,
    b: &B,
    sa: &A::State,
    sb: &B::State,
    remaining: usize,
    path: &mut DecisionPath,
    seen: &mut HashSet<(A::State, B::State, usize)>,
) -> Option<DecisionPath>
where
    A: PricingMachine,
    B: PricingMachine,
{
    if remaining == 0 {
        return None;
    }
    let key = (sa.clone(), sb.clone(), remaining);
    if seen.contains(&key) {
        return None;
    }
    if a.offer(sa) != b.offer(sb) {
        return Some(path.clone());
    }
    for d in [Decision::Reject, Decision::Accept] {
        path.push(d);
        let found = equivalence_walk(a, b, &a.step(sa, d), &b.step(sb, d), remaining - 1, path, seen);
        path.pop();
        if found.is_some() {
            return found;
        }
    }
    seen.insert(key);
    None
}
