//! Discount sequences `γ_1, γ_2, …` applied to the buyer's surplus.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Relative truncation tolerance of numeric tail sums.
pub const DEFAULT_TOLERANCE: f64 = 1e-15;
/// Relative size below which `γ_t − tail` counts as zero in [`DiscountSequence::zeta_numeric`].
pub const NUMERIC_RESOLUTION: f64 = 1e-12;
pub const DEFAULT_TERM_CAP: u64 = 10_000_000;
/// Horizon up to which concavity is scanned when no explicit horizon is given
/// (ten times the largest horizon the harness runs by default).
pub const DEFAULT_SCAN_HORIZON: u64 = 40_960;

type WeightFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DiscountKind {
    Geometric { gamma: f64 },
    General(GeneralDiscount),
}

/// A sequence given by a per-round weight function. Tail sums come from the
/// analytic form when one is supplied, otherwise from truncated summation.
#[derive(Clone)]
pub struct GeneralDiscount {
    name: String,
    weight: WeightFn,
    tail: Option<WeightFn>,
    tolerance: f64,
    cap: u64,
}

#[derive(Clone)]
pub struct DiscountSequence {
    kind: DiscountKind,
}

/// Serialized form used in experiment configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DiscountSpec {
    Geometric { gamma: f64 },
    Telescoping,
}

impl DiscountSpec {
    pub fn build(&self) -> Result<DiscountSequence> {
        match self {
            DiscountSpec::Geometric { gamma } => DiscountSequence::geometric(*gamma),
            DiscountSpec::Telescoping => Ok(DiscountSequence::telescoping()),
        }
    }
}

impl DiscountSequence {
    pub fn geometric(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "geometric rate must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(Self {
            kind: DiscountKind::Geometric { gamma },
        })
    }

    /// A general sequence summed numerically. Fails if the tail from `t = 1`
    /// does not reach `tolerance` within `cap` terms.
    pub fn general<F>(name: impl Into<String>, weight: F, tolerance: f64, cap: u64) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        if !(tolerance > 0.0) || cap == 0 {
            return Err(LabError::InvalidParameter(
                "tolerance must be positive and cap nonzero".into(),
            ));
        }
        let seq = Self {
            kind: DiscountKind::General(GeneralDiscount {
                name: name.into(),
                weight: Arc::new(weight),
                tail: None,
                tolerance,
                cap,
            }),
        };
        seq.tail_sum(1)?;
        Ok(seq)
    }

    /// A general sequence with a known closed-form tail `t ↦ Σ_{s≥t} γ_s`.
    pub fn general_with_tail<F, G>(name: impl Into<String>, weight: F, tail: G) -> Self
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
        G: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: DiscountKind::General(GeneralDiscount {
                name: name.into(),
                weight: Arc::new(weight),
                tail: Some(Arc::new(tail)),
                tolerance: DEFAULT_TOLERANCE,
                cap: DEFAULT_TERM_CAP,
            }),
        }
    }

    /// `γ_t = 1 / (t (t + 1))`, whose tail telescopes to `1 / t`.
    pub fn telescoping() -> Self {
        Self::general_with_tail(
            "telescoping",
            |t| 1.0 / (t as f64 * (t as f64 + 1.0)),
            |t| 1.0 / t as f64,
        )
    }

    pub fn kind(&self) -> &DiscountKind {
        &self.kind
    }

    /// The geometric rate, if this is a geometric sequence.
    pub fn geometric_rate(&self) -> Option<f64> {
        match self.kind {
            DiscountKind::Geometric { gamma } => Some(gamma),
            DiscountKind::General(_) => None,
        }
    }

    /// Short label used in reports: the rate for geometric sequences, else the name.
    pub fn label(&self) -> String {
        match &self.kind {
            DiscountKind::Geometric { gamma } => format!("{gamma}"),
            DiscountKind::General(g) => g.name.clone(),
        }
    }

    pub fn gamma_at(&self, t: u64) -> f64 {
        debug_assert!(t >= 1, "rounds are 1-based");
        match &self.kind {
            DiscountKind::Geometric { gamma } => geometric_power(*gamma, t - 1),
            DiscountKind::General(g) => (g.weight)(t),
        }
    }

    /// `γ_{t+1}/γ_t`, exact for geometric sequences at any depth.
    pub fn ratio_at(&self, t: u64) -> f64 {
        match &self.kind {
            DiscountKind::Geometric { gamma } => *gamma,
            DiscountKind::General(g) => (g.weight)(t + 1) / (g.weight)(t),
        }
    }

    /// `Σ_{s ≥ t} γ_s`.
    pub fn tail_sum(&self, t: u64) -> Result<f64> {
        match &self.kind {
            DiscountKind::Geometric { gamma } => Ok(geometric_power(*gamma, t - 1) / (1.0 - gamma)),
            DiscountKind::General(g) => match &g.tail {
                Some(tail) => Ok(tail(t)),
                None => self.tail_sum_numeric_with(t, g.tolerance, g.cap),
            },
        }
    }

    /// Tail sum by truncated summation, regardless of any closed form.
    pub fn tail_sum_numeric(&self, t: u64) -> Result<f64> {
        match &self.kind {
            DiscountKind::Geometric { .. } => {
                self.tail_sum_numeric_with(t, DEFAULT_TOLERANCE, DEFAULT_TERM_CAP)
            }
            DiscountKind::General(g) => self.tail_sum_numeric_with(t, g.tolerance, g.cap),
        }
    }

    /// Sums terms from `t` until the geometric majorant of the remainder,
    /// `γ_{s+1} / (1 - γ_{s+1}/γ_s)`, drops below `tolerance` relative to the
    /// partial sum.
    pub fn tail_sum_numeric_with(&self, t: u64, tolerance: f64, cap: u64) -> Result<f64> {
        // Neumaier-compensated running sum
        let mut sum = 0.0;
        let mut carry = 0.0;
        let mut current = self.gamma_at(t);
        for s in (t..).take(cap as usize) {
            let next_sum = sum + current;
            carry += if sum.abs() >= current.abs() {
                (sum - next_sum) + current
            } else {
                (current - next_sum) + sum
            };
            sum = next_sum;
            let next = self.gamma_at(s + 1);
            let ratio = next / current;
            if ratio < 1.0 && next / (1.0 - ratio) < tolerance * sum {
                return Ok(sum + carry);
            }
            current = next;
        }
        Err(LabError::ConvergenceNotReached { t, cap })
    }

    /// `ζ_{r,γ,t} = tail(t+r) / (γ_t − tail(t+r))`. Geometric sequences use the
    /// t-free closed form `γ^r / (1 − γ − γ^r)`.
    pub fn zeta(&self, r: u64, t: u64) -> Result<f64> {
        match &self.kind {
            DiscountKind::Geometric { gamma } => {
                let gr = geometric_power(*gamma, r);
                let denom = 1.0 - gamma - gr;
                if denom <= 0.0 {
                    return Err(LabError::ConditionViolated(format!(
                        "γ_t ≤ Σ_{{s≥t+r}} γ_s for γ = {gamma}, r = {r} (γ^r = {gr} ≥ 1 − γ)"
                    )));
                }
                Ok(gr / denom)
            }
            DiscountKind::General(_) => {
                let tail = self.tail_sum(t + r)?;
                zeta_from_parts(self.gamma_at(t), tail, r, t, 0.0)
            }
        }
    }

    /// ζ computed from numerically truncated tail sums. A denominator within
    /// [`NUMERIC_RESOLUTION`] of the tail is treated as zero: the truncated
    /// sum cannot tell it apart from an exact tie.
    pub fn zeta_numeric(&self, r: u64, t: u64) -> Result<f64> {
        let tail = self.tail_sum_numeric(t + r)?;
        zeta_from_parts(self.gamma_at(t), tail, r, t, NUMERIC_RESOLUTION * tail)
    }

    /// Whether `γ_{t+1}/γ_t ≥ γ_{t+2}/γ_{t+1}` for all `t ≤ T − 2` and the
    /// sequence decreases on `[1, T]`. Ratios are compared with a relative slack
    /// of 1e-12 so that exactly-geometric stretches are not rejected by rounding.
    pub fn is_geometrically_concave(&self, horizon: u64) -> bool {
        self.first_concavity_failure(horizon).is_none()
    }

    fn first_concavity_failure(&self, horizon: u64) -> Option<u64> {
        if let DiscountKind::Geometric { .. } = self.kind {
            return None;
        }
        let mut prev = self.gamma_at(1);
        let mut prev_ratio: Option<f64> = None;
        for t in 1..horizon {
            let next = self.gamma_at(t + 1);
            if next >= prev {
                return Some(t);
            }
            let ratio = next / prev;
            if let Some(pr) = prev_ratio {
                if pr < ratio * (1.0 - 1e-12) {
                    return Some(t - 1);
                }
            }
            prev_ratio = Some(ratio);
            prev = next;
        }
        None
    }

    /// Smallest integer `r` strictly greater than `log_{α₂}(κ(1−α₂)/(1+κ))`,
    /// with `α₂ = γ₂/γ₁`. For a geometrically concave sequence this makes
    /// `ζ_{r,γ,t} < κ` at every round.
    pub fn penalization_rounds_for_kappa(&self, kappa: f64) -> Result<u64> {
        self.penalization_rounds_for_kappa_scanned(kappa, DEFAULT_SCAN_HORIZON)
    }

    pub fn penalization_rounds_for_kappa_scanned(&self, kappa: f64, scan_horizon: u64) -> Result<u64> {
        if !(kappa > 0.0) {
            return Err(LabError::InvalidParameter(format!("κ must be positive, got {kappa}")));
        }
        if let Some(t) = self.first_concavity_failure(scan_horizon) {
            return Err(LabError::NotConcave { t });
        }
        let alpha2 = self.gamma_at(2) / self.gamma_at(1);
        let x = kappa * (1.0 - alpha2) / (1.0 + kappa);
        let log = x.ln() / alpha2.ln();
        Ok((log.floor() as i64 + 1).max(1) as u64)
    }
}

fn zeta_from_parts(gamma_t: f64, tail: f64, r: u64, t: u64, slack: f64) -> Result<f64> {
    let denom = gamma_t - tail;
    if denom <= slack {
        return Err(LabError::ConditionViolated(format!(
            "γ_t = {gamma_t} ≤ Σ_{{s≥t+r}} γ_s = {tail} at t = {t}, r = {r}"
        )));
    }
    Ok(tail / denom)
}

fn geometric_power(gamma: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        gamma.powi(n as i32)
    } else {
        gamma.powf(n as f64)
    }
}

impl fmt::Debug for DiscountSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DiscountKind::Geometric { gamma } => write!(f, "Geometric({gamma})"),
            DiscountKind::General(g) => write!(f, "General({})", g.name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gamma_at_examples() {
        let half = DiscountSequence::geometric(0.5).unwrap();
        assert_eq!(half.gamma_at(3), 0.25);
        assert_eq!(DiscountSequence::geometric(0.9).unwrap().gamma_at(1), 1.0);
        assert!(close(DiscountSequence::telescoping().gamma_at(4), 0.05, 1e-15));
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(DiscountSequence::geometric(1.0).is_err());
        assert!(DiscountSequence::geometric(0.0).is_err());
        assert!(DiscountSequence::geometric(f64::NAN).is_err());
    }

    #[test]
    fn tail_sum_examples() {
        assert_eq!(DiscountSequence::geometric(0.5).unwrap().tail_sum(1).unwrap(), 2.0);
        assert!(close(DiscountSequence::telescoping().tail_sum(4).unwrap(), 0.25, 1e-15));
        let g = DiscountSequence::geometric(0.75).unwrap();
        assert!(close(g.tail_sum(9).unwrap(), 0.400_451_660_156_25, 1e-12));
        assert!(close(g.tail_sum_numeric(9).unwrap(), 0.400_451_660_156_25, 1e-10));
    }

    #[test]
    fn telescoping_partial_sums_match_identity() {
        // Σ_{s=t}^{N} 1/(s(s+1)) = 1/t − 1/(N+1)
        let seq = DiscountSequence::telescoping();
        for t in [1u64, 4, 17, 100] {
            let n = 200_000u64;
            let partial: f64 = (t..=n).map(|s| seq.gamma_at(s)).sum();
            let expected = 1.0 / t as f64 - 1.0 / (n + 1) as f64;
            assert!(close(partial, expected, 1e-12), "t={t}: {partial} vs {expected}");
            assert!(close(seq.tail_sum(t).unwrap(), partial + 1.0 / (n + 1) as f64, 1e-12));
        }
    }

    #[test]
    fn numeric_tail_fails_to_converge_for_slow_sequences() {
        let res = DiscountSequence::general("harmonic-square", |t| 1.0 / (t as f64).powi(2), 1e-12, 10_000);
        assert!(matches!(res, Err(LabError::ConvergenceNotReached { .. })));
    }

    #[test]
    fn general_sequence_numeric_tail() {
        let seq = DiscountSequence::general("geo-0.6", |t| 0.6f64.powi(t as i32 - 1), 1e-13, 100_000).unwrap();
        assert!(close(seq.tail_sum(3).unwrap(), 0.36 / 0.4, 1e-12));
    }

    #[test]
    fn zeta_examples() {
        let g = DiscountSequence::geometric(0.75).unwrap();
        let z = g.zeta(8, 1).unwrap();
        let g8 = 0.75f64.powi(8);
        assert!(close(z, g8 / (0.25 - g8), 1e-15));
        assert!(close(z, 0.667_92, 1e-5));
        assert_eq!(g.zeta(8, 1).unwrap(), g.zeta(8, 17).unwrap());
        assert!(matches!(g.zeta(4, 1), Err(LabError::ConditionViolated(_))));
    }

    #[test]
    fn zeta_geometric_matches_numeric_tails() {
        for gamma in [0.3, 0.5, 0.75, 0.9, 0.95] {
            let seq = DiscountSequence::geometric(gamma).unwrap();
            for r in [60u64, 80] {
                for t in [1u64, 50, 200] {
                    match (seq.zeta(r, t), seq.zeta_numeric(r, t)) {
                        (Ok(a), Ok(b)) => assert!(close(a, b, 1e-10), "γ={gamma} r={r} t={t}"),
                        (Err(_), Err(_)) => {}
                        other => panic!("routes disagree on validity: {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn concavity() {
        assert!(DiscountSequence::geometric(0.6).unwrap().is_geometrically_concave(100));
        assert!(!DiscountSequence::telescoping().is_geometrically_concave(100));
        let mixed = DiscountSequence::general(
            "half-times-1+1/t",
            |t| 0.5f64.powi(t as i32 - 1) * (1.0 + 1.0 / t as f64),
            1e-12,
            1_000_000,
        )
        .unwrap();
        // direct ratio evaluation: γ_{t+1}/γ_t = 0.5 t(t+2)/(t+1)^2 grows with t
        let ratio = |t: f64| 0.5 * t * (t + 2.0) / ((t + 1.0) * (t + 1.0));
        assert!(ratio(1.0) < ratio(2.0));
        assert!(!mixed.is_geometrically_concave(50));
    }

    #[test]
    fn penalization_rounds_examples() {
        let g75 = DiscountSequence::geometric(0.75).unwrap();
        let g95 = DiscountSequence::geometric(0.95).unwrap();
        assert_eq!(g75.penalization_rounds_for_kappa(1.0).unwrap(), 8);
        assert_eq!(g95.penalization_rounds_for_kappa(1.0).unwrap(), 72);
        // log_{0.75}(18 · 0.25 / 19) ≈ 5.0068, so the smallest integer above it is 6;
        // r = 5 would leave ζ ≈ 18.7 ≥ 18.
        assert_eq!(g75.penalization_rounds_for_kappa(18.0).unwrap(), 6);
        assert!(g75.zeta(5, 1).unwrap() > 18.0);
        assert!(g75.zeta(6, 1).unwrap() < 18.0);
        assert!(matches!(
            DiscountSequence::telescoping().penalization_rounds_for_kappa(1.0),
            Err(LabError::NotConcave { .. })
        ));
    }
}
