//! Text output of the `trace`, `bounds`, `optimize-kappa` and `consistency`
//! subcommands.

use std::fmt::Write as _;

use pricing_lab::bounds::{
    c_factor, eta, factor_improvement, g_gamma_kappa, golden_threshold, kappa_threshold,
    min_penalization_rounds, optimal_kappa, r_for_kappa_geometric, r_gamma_kappa, snapped_ceil,
};
use pricing_lab::buyer::{surplus_of, BuyerModel};
use pricing_lab::pricing::{
    check_consistent, check_regular_weakly_consistent, check_right_consistent, check_weakly_consistent,
    path_prices_nondecreasing,
};
use pricing_lab::regret::regret_of;
use pricing_lab::{AlgorithmSpec, DiscountSequence, Verdict};

use crate::error::CliError;
use crate::format::g12;

/// Rows of a two-column table; rendered as aligned text or as CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table(pub Vec<(String, String)>);

impl Table {
    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.0.push((key.to_string(), value.into()));
    }

    fn push_result<T>(&mut self, key: &str, value: pricing_lab::Result<T>, show: impl Fn(T) -> String) {
        match value {
            Ok(v) => self.push(key, show(v)),
            Err(e) => self.push(key, format!("not-applicable ({e})")),
        }
    }

    pub fn text(&self) -> String {
        let width = self.0.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "{k:<width$}  {v}").expect("writing to a string");
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("name,value\n");
        for (k, v) in &self.0 {
            let v = if v.contains(',') { format!("\"{}\"", v.replace('"', "\"\"")) } else { v.clone() };
            writeln!(out, "{k},{v}").expect("writing to a string");
        }
        out
    }
}

fn check_gamma(gamma: f64) -> Result<(), CliError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

pub fn bounds_table(gamma: f64, kappa: Option<f64>) -> Result<Table, CliError> {
    check_gamma(gamma)?;
    let mut t = Table::default();
    t.push("gamma", g12(gamma));
    t.push("golden_threshold", g12(golden_threshold()));
    t.push("kappa_threshold", g12(kappa_threshold(gamma)));
    t.push_result("min_penalization_rounds", min_penalization_rounds(gamma), |r| r.to_string());
    t.push_result("optimal_kappa", optimal_kappa(gamma), g12);
    let Some(kappa) = kappa else { return Ok(t) };
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(CliError::Config(format!("kappa must be positive, got {kappa}")));
    }
    let discount = DiscountSequence::geometric(gamma)?;
    t.push("kappa", g12(kappa));
    match r_for_kappa_geometric(gamma, kappa) {
        Ok(r) => {
            t.push("r_for_kappa", r.to_string());
            t.push_result("zeta", discount.zeta(r as u64, 1), g12);
            t.push("c_factor_v1", g12(c_factor(r, kappa, 1.0)));
        }
        Err(e) => t.push("r_for_kappa", format!("not-applicable ({e})")),
    }
    match r_gamma_kappa(gamma, kappa) {
        Ok(r) => {
            let r_int = snapped_ceil(r) as u32;
            t.push("r_gamma_kappa", g12(r));
            t.push("r_gamma_kappa_ceil", r_int.to_string());
            t.push_result("eta", eta(gamma, r_int), g12);
        }
        Err(e) => t.push("r_gamma_kappa", format!("not-applicable ({e})")),
    }
    t.push_result("G_gamma_kappa", g_gamma_kappa(gamma, kappa), g12);
    Ok(t)
}

pub fn kappa_table(gamma: f64) -> Result<Table, CliError> {
    check_gamma(gamma)?;
    let f = factor_improvement(gamma)?;
    let mut t = Table::default();
    t.push("gamma", g12(gamma));
    t.push("kappa0", g12(f.kappa0));
    t.push("f_1", g12(f.f_one));
    t.push("f_kappa0", g12(f.f_kappa0));
    t.push("reduction_percent", g12(f.reduction_percent));
    Ok(t)
}

fn verdict_cell(v: &Verdict) -> String {
    match &v.witness {
        Some(w) => format!("false  {w}"),
        None => "true".to_string(),
    }
}

/// Membership of `spec` in every class, checked to `depth` rounds.
pub fn consistency_table(spec: &AlgorithmSpec, depth: usize, equiv_depth: usize) -> Table {
    let m = spec.build();
    let mut t = Table::default();
    t.push("algorithm", spec.name());
    t.push("depth", depth.to_string());
    t.push("C", verdict_cell(&check_consistent(&m, depth)));
    t.push("RWC", verdict_cell(&check_regular_weakly_consistent(&m, depth, equiv_depth)));
    t.push("WC", verdict_cell(&check_weakly_consistent(&m, depth)));
    t.push("C_R", verdict_cell(&check_right_consistent(&m, depth)));
    t.push("nondecreasing", verdict_cell(&path_prices_nondecreasing(&m, depth)));
    t
}

/// Per-round table `t price decision gain` followed by totals.
pub fn trace(spec: &AlgorithmSpec, buyer: &BuyerModel, discount: &DiscountSequence, horizon: usize) -> Result<String, CliError> {
    let play = buyer.play(&spec.build(), horizon)?;
    let mut out = String::from("t\tprice\tdecision\tgain\n");
    for (i, (p, d)) in play.rounds().enumerate() {
        let t = i as u64 + 1;
        let gain = if d.is_accept() { discount.gamma_at(t) * (play.v - p.to_f64()) } else { 0.0 };
        writeln!(out, "{t}\t{p}\t{}\t{}", u8::from(d.is_accept()), g12(gain)).expect("writing to a string");
    }
    writeln!(out, "# surplus {}", g12(surplus_of(&play, discount))).expect("writing to a string");
    writeln!(out, "# regret {}", g12(regret_of(&play))).expect("writing to a string");
    Ok(out)
}
