//! Depth-bounded membership checks for the consistency classes.
//!
//! Every check explores the `2^d − 1` nodes offered during the first `d`
//! rounds. A `true` verdict only certifies the explored depth; a `false`
//! verdict is a real counterexample and carries the history of the node at
//! which the violation was observed.

use std::collections::HashSet;

use super::{states_equivalent, Decision, DecisionPath, PricingMachine};
use crate::price::Price;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    pub witness: Option<DecisionPath>,
    pub depth: usize,
}

impl Verdict {
    pub(crate) fn from_witness(witness: Option<DecisionPath>, depth: usize) -> Self {
        Self {
            holds: witness.is_none(),
            witness,
            depth,
        }
    }
}

/// Which inequalities an ancestor imposes on its subtrees.
#[derive(Clone, Copy)]
struct Rules {
    right: bool,
    left: bool,
    /// Only constrain a subtree when its root's price differs from the parent's.
    weak: bool,
}

fn bounded_walk<M: PricingMachine>(machine: &M, depth: usize, rules: Rules) -> Verdict {
    let mut path = DecisionPath::new();
    let witness = walk(
        machine,
        &machine.initial_state(),
        None,
        None,
        depth,
        rules,
        &mut path,
    );
    Verdict::from_witness(witness, depth)
}

fn walk<M: PricingMachine>(
    machine: &M,
    state: &M::State,
    lower: Option<&Price>,
    upper: Option<&Price>,
    remaining: usize,
    rules: Rules,
    path: &mut DecisionPath,
) -> Option<DecisionPath> {
    if remaining == 0 {
        return None;
    }
    let price = machine.offer(state);
    if lower.is_some_and(|lo| price < *lo) || upper.is_some_and(|hi| price > *hi) {
        return Some(path.clone());
    }
    for d in [Decision::Reject, Decision::Accept] {
        let child = machine.step(state, d);
        let constrains = match d {
            Decision::Accept => rules.right,
            Decision::Reject => rules.left,
        } && (!rules.weak || machine.offer(&child) != price);
        let (lo, hi) = match (d, constrains) {
            (Decision::Accept, true) => (Some(max_ref(lower, &price)), upper.cloned()),
            (Decision::Reject, true) => (lower.cloned(), Some(min_ref(upper, &price))),
            _ => (lower.cloned(), upper.cloned()),
        };
        path.push(d);
        let found = walk(machine, &child, lo.as_ref(), hi.as_ref(), remaining - 1, rules, path);
        path.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

fn max_ref(a: Option<&Price>, b: &Price) -> Price {
    match a {
        Some(a) if a > b => a.clone(),
        _ => b.clone(),
    }
}

fn min_ref(a: Option<&Price>, b: &Price) -> Price {
    match a {
        Some(a) if a < b => a.clone(),
        _ => b.clone(),
    }
}

/// Never offers below a price accepted earlier on the path.
pub fn check_right_consistent<M: PricingMachine>(machine: &M, depth: usize) -> Verdict {
    bounded_walk(
        machine,
        depth,
        Rules {
            right: true,
            left: false,
            weak: false,
        },
    )
}

/// Never offers below an accepted price nor above a rejected one.
pub fn check_consistent<M: PricingMachine>(machine: &M, depth: usize) -> Verdict {
    bounded_walk(
        machine,
        depth,
        Rules {
            right: true,
            left: true,
            weak: false,
        },
    )
}

/// Like [`check_consistent`], except that a child repeating its parent's
/// price does not yet commit the subtree to either side.
pub fn check_weakly_consistent<M: PricingMachine>(machine: &M, depth: usize) -> Verdict {
    bounded_walk(
        machine,
        depth,
        Rules {
            right: true,
            left: true,
            weak: true,
        },
    )
}

/// Regular weak consistency: weak consistency plus, at every node whose price
/// is repeated by a child, either the repeat is permanent or the pricing does
/// not depend on when the buyer makes the decision. Subtree equivalence is
/// checked `equiv_depth` rounds deep.
pub fn check_regular_weakly_consistent<M: PricingMachine>(
    machine: &M,
    depth: usize,
    equiv_depth: usize,
) -> Verdict {
    let weak = check_weakly_consistent(machine, depth);
    if !weak.holds {
        return weak;
    }
    let mut path = DecisionPath::new();
    let mut seen = HashSet::new();
    let witness = regularity_walk(
        machine,
        &machine.initial_state(),
        depth,
        equiv_depth,
        &mut path,
        &mut seen,
    );
    Verdict::from_witness(witness, depth)
}

fn regularity_walk<M: PricingMachine>(
    machine: &M,
    state: &M::State,
    remaining: usize,
    equiv_depth: usize,
    path: &mut DecisionPath,
    seen: &mut HashSet<(M::State, M::State, usize)>,
) -> Option<DecisionPath> {
    // children must lie inside the explored depth
    if remaining < 2 {
        return None;
    }
    let price = machine.offer(state);
    let left = machine.step(state, Decision::Reject);
    let right = machine.step(state, Decision::Accept);
    let left_repeats = machine.offer(&left) == price;
    let right_repeats = machine.offer(&right) == price;
    // subtrees rooted at grandchildren are explored up to the overall depth
    let below = remaining - 2;

    let ok = match (left_repeats, right_repeats) {
        (true, true) => {
            let right_of_left = machine.step(&left, Decision::Accept);
            let left_of_right = machine.step(&right, Decision::Reject);
            (constant_subtree(machine, &right_of_left, &price, below)
                && constant_subtree(machine, &left_of_right, &price, below))
                || states_equivalent(machine, &left, &right, equiv_depth, seen)
        }
        (true, false) => {
            let right_of_left = machine.step(&left, Decision::Accept);
            constant_subtree(machine, &right_of_left, &price, below)
                || states_equivalent(machine, &right_of_left, &right, equiv_depth, seen)
        }
        (false, true) => {
            let left_of_right = machine.step(&right, Decision::Reject);
            constant_subtree(machine, &left_of_right, &price, below)
                || states_equivalent(machine, &left_of_right, &left, equiv_depth, seen)
        }
        (false, false) => true,
    };
    if !ok {
        return Some(path.clone());
    }
    for (d, child) in [(Decision::Reject, left), (Decision::Accept, right)] {
        path.push(d);
        let found = regularity_walk(machine, &child, remaining - 1, equiv_depth, path, seen);
        path.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

fn constant_subtree<M: PricingMachine>(
    machine: &M,
    state: &M::State,
    price: &Price,
    remaining: usize,
) -> bool {
    if remaining == 0 {
        return true;
    }
    machine.offer(state) == *price
        && [Decision::Reject, Decision::Accept]
            .into_iter()
            .all(|d| constant_subtree(machine, &machine.step(state, d), price, remaining - 1))
}

/// Every path of the first `depth` rounds offers a nondecreasing price sequence.
pub fn path_prices_nondecreasing<M: PricingMachine>(machine: &M, depth: usize) -> Verdict {
    fn go<M: PricingMachine>(
        machine: &M,
        state: &M::State,
        previous: Option<&Price>,
        remaining: usize,
        path: &mut DecisionPath,
    ) -> Option<DecisionPath> {
        if remaining == 0 {
            return None;
        }
        let price = machine.offer(state);
        if previous.is_some_and(|p| price < *p) {
            return Some(path.clone());
        }
        for d in [Decision::Reject, Decision::Accept] {
            path.push(d);
            let found = go(machine, &machine.step(state, d), Some(&price), remaining - 1, path);
            path.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
    let mut path = DecisionPath::new();
    let witness = go(machine, &machine.initial_state(), None, depth, &mut path);
    Verdict::from_witness(witness, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{BinarySearch, ConstantPrice};
    use crate::pricing::PathMachine;

    fn p(num: u64, exp: u32) -> Price {
        Price::dyadic(num, exp)
    }

    #[test]
    fn binary_search_is_consistent() {
        assert!(check_consistent(&BinarySearch, 12).holds);
        assert!(check_right_consistent(&BinarySearch, 12).holds);
        assert!(check_weakly_consistent(&BinarySearch, 12).holds);
        assert!(check_regular_weakly_consistent(&BinarySearch, 10, 6).holds);
        assert!(!path_prices_nondecreasing(&BinarySearch, 3).holds);
    }

    #[test]
    fn constant_machine_is_in_every_class() {
        let c = ConstantPrice::new(p(3, 3));
        assert!(check_consistent(&c, 10).holds);
        assert!(check_regular_weakly_consistent(&c, 8, 4).holds);
        assert!(path_prices_nondecreasing(&c, 10).holds);
    }

    #[test]
    fn right_violation_has_witness() {
        // root 1/2, right child 1/4
        let m = PathMachine::new(|h: &DecisionPath| match h.to_string().as_str() {
            "1" => p(1, 2),
            _ => p(1, 1),
        });
        let v = check_right_consistent(&m, 4);
        assert!(!v.holds);
        assert_eq!(v.witness.unwrap().to_string(), "1");
        assert_eq!(v.depth, 4);
    }

    #[test]
    fn irregular_repeat_is_not_rwc() {
        // root 1/2 repeated by both children; the two subtrees then diverge in
        // different directions and keep changing price.
        let m = PathMachine::new(|h: &DecisionPath| {
            let s = h.to_string();
            match s.as_str() {
                "" | "0" | "1" => p(1, 1),
                _ if s.starts_with("01") => p(5, 3),
                _ if s.starts_with("10") => p(3, 3),
                _ if s.starts_with("00") => p(1, 3),
                _ => p(3, 2),
            }
        });
        assert!(check_weakly_consistent(&m, 6).holds);
        let v = check_regular_weakly_consistent(&m, 6, 4);
        assert!(!v.holds);
        assert_eq!(v.witness.unwrap().to_string(), "");
    }
}
