//! Checks of the rejection and exploitation laws on optimal plays against the
//! phased machines. Each check walks the play, tests the law at every node
//! where its hypotheses hold, and reports how many nodes were checked and
//! which ones violated it.

use crate::algorithms::{Mode, PhaseState, PrePrrfes, Prrfes};
use crate::bounds::eta;
use crate::buyer::PlayRecord;
use crate::discounts::DiscountSequence;
use crate::pricing::{Decision, PricingMachine};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LawReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl LawReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: LawReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }
}

fn states_along<M: PricingMachine<State = PhaseState>>(machine: &M, play: &PlayRecord) -> Vec<PhaseState> {
    let mut state = machine.initial_state();
    let mut states = Vec::with_capacity(play.horizon);
    for d in play.decisions.iter() {
        states.push(state.clone());
        state = machine.step(&state, d);
    }
    states
}

/// PRRFES: a rejected exploration offer `p_t` with last accepted price `q`
/// means `v − p_t < ζ_{r,γ,t}·(p_t − q)`. Nodes where ζ is undefined are
/// skipped.
pub fn rejection_bound(machine: &Prrfes, discount: &DiscountSequence, play: &PlayRecord) -> LawReport {
    let r = machine.params().r as u64;
    let mut report = LawReport::default();
    for (i, (state, d)) in states_along(machine, play).iter().zip(play.decisions.iter()).enumerate() {
        let t = i as u64 + 1;
        if state.mode != Mode::Explore || d.is_accept() {
            continue;
        }
        let Ok(zeta) = discount.zeta(r, t) else { continue };
        report.checked += 1;
        let p = state.p.to_f64();
        let q = state.q.to_f64();
        if !(play.v - p < zeta * (p - q)) {
            report.violations.push(format!(
                "t={t} v={} p={p} q={q}: v − p = {} ≥ ζ·(p − q) = {}",
                play.v,
                play.v - p,
                zeta * (p - q)
            ));
        }
    }
    report
}

/// prePRRFES: a rejected carried price `q` at a penalization start, whose
/// accept branch offers `p`, means `v − p < η_{r,γ}·(p − q)`. Requires
/// geometric discounting with `1 − γ² − γ^r > 0`; otherwise nothing is checked.
pub fn carried_rejection_bound(machine: &PrePrrfes, discount: &DiscountSequence, play: &PlayRecord) -> LawReport {
    let mut report = LawReport::default();
    let Some(gamma) = discount.geometric_rate() else { return report };
    let Ok(eta) = eta(gamma, machine.params().r) else { return report };
    for (i, (state, d)) in states_along(machine, play).iter().zip(play.decisions.iter()).enumerate() {
        if state.mode != Mode::Explore || d.is_accept() {
            continue;
        }
        report.checked += 1;
        let p = state.p.to_f64();
        let q = state.q.to_f64();
        if !(play.v - p < eta * (p - q)) {
            report.violations.push(format!(
                "t={} v={} p={p} q={q}: v − p = {} ≥ η·(p − q) = {}",
                i + 1,
                play.v,
                play.v - p,
                eta * (p - q)
            ));
        }
    }
    report
}

/// prePRRFES: at a penalization start offering `q` with `q < v < p` (every
/// price of the accept branch is at least `p`), with `r < log_γ(1−γ)`,
/// `g > log_γ(1 − (1−γ)γ^{−r})` and the whole penalization and exploitation
/// inside the horizon, the buyer rejects for `r` rounds and then accepts all
/// `g` exploitation offers.
pub fn exploitation_guarantee(machine: &PrePrrfes, discount: &DiscountSequence, play: &PlayRecord) -> LawReport {
    let mut report = LawReport::default();
    let Some(gamma) = discount.geometric_rate() else { return report };
    let r = machine.params().r as usize;
    if !((r as f64) < (1.0 - gamma).ln() / gamma.ln()) {
        return report;
    }
    let arg = 1.0 - (1.0 - gamma) * gamma.powi(-(r as i32));
    if arg <= 0.0 {
        return report;
    }
    let g_min = arg.ln() / gamma.ln();
    let decisions: Vec<Decision> = play.decisions.iter().collect();
    for (i, state) in states_along(machine, play).iter().enumerate() {
        if state.mode != Mode::Explore {
            continue;
        }
        let g = machine.params().exploit.rounds(state.l);
        let q = state.q.to_f64();
        let p = state.p.to_f64();
        let fits = (i as u64) + r as u64 + g <= play.horizon as u64;
        if !(q < play.v && play.v < p) || !(g as f64 > g_min) || !fits {
            continue;
        }
        report.checked += 1;
        let g = g as usize;
        let rejects = decisions[i..i + r].iter().all(|d| !d.is_accept());
        let accepts = decisions[i + r..i + r + g].iter().all(|d| d.is_accept());
        if !(rejects && accepts) {
            let shown: String = decisions[i..i + r + g]
                .iter()
                .map(|d| if d.is_accept() { '1' } else { '0' })
                .collect();
            report.violations.push(format!(
                "t={} v={} q={q} p={p}: decisions {shown}, expected {} rejections then {g} acceptances",
                i + 1,
                play.v,
                r
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{ExploitRate, PrrfesParams};
    use crate::buyer::{optimal_play_bruteforce, OracleOptions};

    #[test]
    fn laws_hold_on_a_small_instance() {
        let d = DiscountSequence::geometric(0.8).unwrap();
        let opts = OracleOptions::default();
        let pr = Prrfes::new(PrrfesParams::new(8, ExploitRate::Default).unwrap());
        let best = optimal_play_bruteforce(&pr, 0.4, &d, 12, &opts).unwrap();
        assert!(rejection_bound(&pr, &d, &best.play).holds());

        let pre = PrePrrfes::new(PrrfesParams::new(2, ExploitRate::Default).unwrap());
        let best = optimal_play_bruteforce(&pre, 0.3, &d, 12, &opts).unwrap();
        let report = exploitation_guarantee(&pre, &d, &best.play);
        assert!(report.checked > 0);
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn violations_are_reported() {
        // a play that rejects a cheap exploration offer with a high valuation
        let d = DiscountSequence::geometric(0.5).unwrap();
        let pr = Prrfes::new(PrrfesParams::new(4, ExploitRate::Default).unwrap());
        let play = PlayRecord::replay(&pr, 0.99, "0000".parse().unwrap());
        let report = rejection_bound(&pr, &d, &play);
        assert_eq!(report.checked, 1);
        assert!(!report.holds());
    }
}
