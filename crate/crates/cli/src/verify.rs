//! Bundled invariant suites behind `pricing-lab verify`.

use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pricing_lab::bounds::{
    factor_improvement, g_gamma_kappa, min_penalization_rounds, optimal_kappa, r_for_kappa_geometric,
    r_gamma_kappa, snapped_ceil,
};
use pricing_lab::buyer::{
    all_strategies, optimal_play_bruteforce, optimal_play_memoized, surplus_of, truthful_play,
};
use pricing_lab::laws::{self, LawReport};
use pricing_lab::pricing::{
    check_consistent, check_right_consistent, check_weakly_consistent, path_prices_nondecreasing,
    pre_transform, price_equivalent,
};
use pricing_lab::regret::{check_linear_regret, DEFAULT_WITNESS_DEPTH};
use pricing_lab::{
    AlgorithmSpec, BinarySearch, DiscountSequence, ExploitRate, OracleOptions, PlayRecord, PrePrrfes,
    Price, Prrfes, PrrfesParams, TieBreak, Verdict,
};

use crate::error::CliError;
use crate::format::g12;

/// Seed of the randomized oracle cross-validation.
pub const ORACLE_SEED: u64 = 20_240_601;
pub const ORACLE_INSTANCES: usize = 200;
pub const CONSISTENCY_DEPTH: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Constants,
    Consistency,
    Oracles,
    Propositions,
    LinearRegret,
    All,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "constants" => Ok(Suite::Constants),
            "consistency" => Ok(Suite::Consistency),
            "oracles" => Ok(Suite::Oracles),
            "propositions" => Ok(Suite::Propositions),
            "linear-regret" => Ok(Suite::LinearRegret),
            "all" => Ok(Suite::All),
            other => Err(CliError::Config(format!(
                "unknown suite {other:?} (constants, consistency, oracles, propositions, linear-regret, all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "CHECK {} {verdict} {}", self.name, self.detail.trim_end())
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Constants => constants(),
        Suite::Consistency => consistency(),
        Suite::Oracles => oracles(),
        Suite::Propositions => propositions(),
        Suite::LinearRegret => linear_regret(),
        Suite::All => [constants(), consistency(), oracles(), propositions(), linear_regret()].concat(),
    }
}

const KAPPA0_TABLE: [(f64, f64, f64); 5] = [
    (0.05, 0.137, 33.2),
    (0.25, 0.255, 22.9),
    (0.75, 0.734, 1.5),
    (0.95, 1.815, 2.8),
    (0.99, 3.706, 6.3),
];

fn constants() -> Vec<Check> {
    let mut checks = Vec::new();
    for (gamma, kappa0, reduction) in KAPPA0_TABLE {
        checks.push(match optimal_kappa(gamma) {
            Ok(k) => Check::new(
                format!("kappa0[{gamma}]"),
                (k - kappa0).abs() <= 5e-4,
                format!("{} vs {kappa0}", g12(k)),
            ),
            Err(e) => Check::new(format!("kappa0[{gamma}]"), false, e.to_string()),
        });
        checks.push(match factor_improvement(gamma) {
            Ok(f) => Check::new(
                format!("reduction[{gamma}]"),
                (f.reduction_percent - reduction).abs() <= 0.1,
                format!("{:.3}% vs {reduction}%", f.reduction_percent),
            ),
            Err(e) => Check::new(format!("reduction[{gamma}]"), false, e.to_string()),
        });
    }
    for (gamma, at_one, min) in [(0.75, 8, 5), (0.95, 72, 59)] {
        let a = r_for_kappa_geometric(gamma, 1.0);
        let b = min_penalization_rounds(gamma);
        checks.push(Check::new(
            format!("penalization-rounds[{gamma}]"),
            a == Ok(at_one) && b == Ok(min),
            format!("r(κ=1)={a:?} min={b:?}, expected {at_one} and {min}"),
        ));
    }
    checks
}

fn membership(name: &str, verdict: Verdict, expected: bool) -> Check {
    let witness = verdict.witness.as_ref().map(|w| format!(" witness={w}")).unwrap_or_default();
    let pass = verdict.holds == expected && (verdict.holds || verdict.witness.is_some());
    Check::new(name, pass, format!("{} at depth {}{witness}", verdict.holds, verdict.depth))
}

fn consistency() -> Vec<Check> {
    let d = CONSISTENCY_DEPTH;
    let params = PrrfesParams::new(4, ExploitRate::Default).expect("valid parameters");
    let prrfes = Prrfes::new(params);
    let pre = PrePrrfes::new(params);
    let mut checks = vec![
        membership("prrfes-in-C_R", check_right_consistent(&prrfes, d), true),
        membership("prrfes-not-in-WC", check_weakly_consistent(&prrfes, d), false),
        membership("preprrfes-in-WC", check_weakly_consistent(&pre, d), true),
        membership("preprrfes-in-C_R", check_right_consistent(&pre, d), true),
        membership("preprrfes-nondecreasing", path_prices_nondecreasing(&pre, d), true),
        membership("binary-search-in-C", check_consistent(&BinarySearch, d), true),
    ];
    for r in [4, 11] {
        let params = PrrfesParams::new(r, ExploitRate::Default).expect("valid parameters");
        let v = price_equivalent(&pre_transform(Price::zero(), Prrfes::new(params)), &PrePrrfes::new(params), 14);
        checks.push(membership(&format!("pre-transform-identity[r={r}]"), v, true));
    }
    checks
}

fn random_spec(rng: &mut StdRng) -> AlgorithmSpec {
    match rng.gen_range(0..4) {
        0 => AlgorithmSpec::prrfes(rng.gen_range(1..=6), ExploitRate::Default),
        1 => {
            let exploit = if rng.gen_bool(0.5) {
                ExploitRate::Default
            } else {
                ExploitRate::Floor(rng.gen_range(1.0..12.0))
            };
            AlgorithmSpec::preprrfes(rng.gen_range(1..=6), exploit)
        }
        2 => Ok(AlgorithmSpec::binary_search()),
        _ => Ok(AlgorithmSpec::constant(Price::dyadic(rng.gen_range(0..=16), 4))),
    }
    .expect("valid parameters")
}

fn oracles() -> Vec<Check> {
    let mut rng = StdRng::seed_from_u64(ORACLE_SEED);
    let mut checks = Vec::new();
    for tie_break in [TieBreak::MaxRegret, TieBreak::PreferReject, TieBreak::PreferAccept] {
        let opts = OracleOptions {
            tie_break,
            ..OracleOptions::default()
        };
        let mut mismatches = Vec::new();
        let mut worst = 0.0f64;
        for i in 0..ORACLE_INSTANCES {
            let spec = random_spec(&mut rng);
            let gamma = [0.7, 0.8, 0.9][rng.gen_range(0..3)];
            let v = rng.gen_range(1..20) as f64 / 20.0;
            let horizon = rng.gen_range(1..=16);
            let discount = DiscountSequence::geometric(gamma).expect("valid rate");
            let machine = spec.build();
            let bf = optimal_play_bruteforce(&machine, v, &discount, horizon, &opts);
            let mm = optimal_play_memoized(&machine, v, &discount, horizon, &opts);
            match (bf, mm) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max((a.surplus - b.surplus).abs());
                    if (a.surplus - b.surplus).abs() > 1e-12 || a.seller_regret != b.seller_regret {
                        mismatches.push(format!("#{i} {} γ={gamma} v={v} T={horizon}", spec.name()));
                    }
                }
                (a, b) => mismatches.push(format!("#{i}: {:?} {:?}", a.err(), b.err())),
            }
        }
        checks.push(Check::new(
            format!("oracle-equivalence[{}]", tie_break.name()),
            mismatches.is_empty(),
            format!(
                "{ORACLE_INSTANCES} instances, max surplus gap {} {}",
                g12(worst),
                mismatches.join("; ")
            ),
        ));
    }

    let opts = OracleOptions::default();
    let mut beaten = Vec::new();
    for i in 0..20 {
        let spec = random_spec(&mut rng);
        let discount = DiscountSequence::geometric([0.5, 0.75, 0.9][i % 3]).expect("valid rate");
        let v = (i as f64 + 0.5) / 20.0;
        let horizon = 6 + i % 5;
        let machine = spec.build();
        let Ok(best) = optimal_play_bruteforce(&machine, v, &discount, horizon, &opts) else {
            beaten.push(format!("#{i}: oracle failed"));
            continue;
        };
        let top = all_strategies(horizon)
            .map(|path| surplus_of(&PlayRecord::replay(&machine, v, path), &discount))
            .fold(f64::NEG_INFINITY, f64::max);
        if best.surplus < top - 1e-12 {
            beaten.push(format!("#{i} {}: {} < {}", spec.name(), best.surplus, top));
        }
    }
    checks.push(Check::new(
        "oracle-optimality",
        beaten.is_empty(),
        format!("20 exhaustive instances, T ≤ 10 {}", beaten.join("; ")),
    ));
    checks
}

fn law_check(name: &str, report: LawReport, instances: usize) -> Check {
    let first = report.violations.first().cloned().unwrap_or_default();
    Check::new(
        name,
        report.holds() && report.checked > 0,
        format!(
            "{instances} instances, {} nodes checked, {} violations {first}",
            report.checked,
            report.violations.len()
        ),
    )
}

fn propositions() -> Vec<Check> {
    const HORIZON: usize = 16;
    let opts = OracleOptions::default();
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
    let solve = |machine: &dyn Fn(f64, &DiscountSequence) -> Result<LawReport, String>,
                 gamma: f64,
                 report: &mut LawReport| {
        let discount = DiscountSequence::geometric(gamma).expect("valid rate");
        for &v in &grid {
            match machine(v, &discount) {
                Ok(r) => report.merge(r),
                Err(e) => report.violations.push(e),
            }
        }
    };

    let mut rejection = LawReport::default();
    for (gamma, r) in [(0.5, 2), (0.6, 2), (0.7, 4), (0.8, 8), (0.8, 11)] {
        let m = Prrfes::new(PrrfesParams::new(r, ExploitRate::Default).expect("valid parameters"));
        let law = |v: f64, d: &DiscountSequence| {
            optimal_play_bruteforce(&m, v, d, HORIZON, &opts)
                .map(|best| laws::rejection_bound(&m, d, &best.play))
                .map_err(|e| e.to_string())
        };
        solve(&law, gamma, &mut rejection);
    }

    let mut carried = LawReport::default();
    for (gamma, kappa) in [(0.75, 1.0), (0.8, 1.6), (0.7, 2.0), (0.85, 1.0), (0.9, 1.0)] {
        let (Ok(r), Ok(g)) = (r_gamma_kappa(gamma, kappa), g_gamma_kappa(gamma, kappa)) else {
            carried.violations.push(format!("γ={gamma} κ={kappa} is not eligible"));
            continue;
        };
        let params = PrrfesParams::new(snapped_ceil(r) as u32, ExploitRate::Floor(g)).expect("valid parameters");
        let m = PrePrrfes::new(params);
        let law = |v: f64, d: &DiscountSequence| {
            optimal_play_bruteforce(&m, v, d, HORIZON, &opts)
                .map(|best| laws::carried_rejection_bound(&m, d, &best.play))
                .map_err(|e| e.to_string())
        };
        solve(&law, gamma, &mut carried);
    }

    let mut exploitation = LawReport::default();
    for (gamma, r, exploit) in [
        (0.8, 2, ExploitRate::Default),
        (0.8, 3, ExploitRate::Default),
        (0.75, 2, ExploitRate::Default),
        (0.9, 4, ExploitRate::Default),
        (0.8, 6, ExploitRate::Floor(8.15)),
    ] {
        let m = PrePrrfes::new(PrrfesParams::new(r, exploit).expect("valid parameters"));
        let law = |v: f64, d: &DiscountSequence| {
            optimal_play_bruteforce(&m, v, d, HORIZON, &opts)
                .map(|best| laws::exploitation_guarantee(&m, d, &best.play))
                .map_err(|e| e.to_string())
        };
        solve(&law, gamma, &mut exploitation);
    }

    vec![
        law_check("prrfes-rejection-bound", rejection, 50),
        law_check("preprrfes-carried-rejection-bound", carried, 50),
        law_check("preprrfes-exploitation", exploitation, 50),
    ]
}

fn linear_regret() -> Vec<Check> {
    let mut checks = Vec::new();
    let discount = DiscountSequence::geometric(0.5).expect("valid rate");
    let horizons = [64, 128, 256, 512, 1024];
    checks.push(
        match check_linear_regret(&BinarySearch, &discount, &horizons, DEFAULT_WITNESS_DEPTH, &OracleOptions::default()) {
            Ok(w) => {
                let rows: Vec<String> = w.slopes.iter().map(|r| format!("{}:{}", r.horizon, g12(r.slope))).collect();
                Check::new(
                    "binary-search-linear-regret",
                    w.epsilon >= 1.0 / 48.0 && w.all_hold(),
                    format!(
                        "path={} ε={} v={} slopes {}",
                        w.path,
                        g12(w.epsilon),
                        g12(w.v_witness),
                        rows.join(" ")
                    ),
                )
            }
            Err(e) => Check::new("binary-search-linear-regret", false, e.to_string()),
        },
    );

    let v = 0.6;
    let horizon = 10_000;
    let params = PrrfesParams::new(2, ExploitRate::Default).expect("valid parameters");
    let play = truthful_play(&PrePrrfes::new(params), v, horizon);
    let refused: Vec<bool> = play
        .rounds()
        .map(|(p, d)| !d.is_accept() && p.to_f64() > v)
        .collect();
    let t0 = refused.iter().rposition(|&r| !r).map_or(0, |i| i + 1);
    let tail_exact = play.rounds().skip(t0).all(|(p, d)| !d.is_accept() && p == &play.prices[t0]);
    checks.push(Check::new(
        "preprrfes-truthful-linear-regret",
        t0 < horizon / 2 && tail_exact,
        format!(
            "offers stay at {} > v={v} and are refused from round {} to {horizon}",
            play.prices.get(t0).map(|p| p.to_string()).unwrap_or_default(),
            t0 + 1
        ),
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("linear-regret".parse::<Suite>().unwrap(), Suite::LinearRegret);
        assert!(matches!("everything".parse::<Suite>(), Err(CliError::Config(_))));
    }

    #[test]
    fn constants_pass() {
        let checks = run_suite(Suite::Constants);
        assert_eq!(checks.len(), 12);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert!(checks[0].to_string().starts_with("CHECK kappa0[0.05] PASS "));
    }
}
