//! Closed-form constants, bound right-hand sides and the κ optimizer for
//! geometric discounting.

use crate::error::{LabError, Result};

/// Golden-ratio threshold `(√5 − 1)/2`; the PRRFES-to-prePRRFES constants
/// need γ strictly above it.
pub fn golden_threshold() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Bracket for the κ optimizer.
pub const KAPPA_BRACKET: (f64, f64) = (1e-9, 1e6);
pub const KAPPA_TOLERANCE: f64 = 1e-9;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("γ must lie in (0, 1), got {gamma}")))
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("κ must be positive, got {kappa}")))
    }
}

fn log_base(base: f64, x: f64) -> f64 {
    x.ln() / base.ln()
}

/// Ceiling that snaps to the nearest integer when `x` is within 1e-12 of it.
pub fn snapped_ceil(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-12 {
        nearest
    } else {
        x.ceil()
    }
}

/// `η_{r,γ} = (γ^r + γ − 1)/(1 − γ² − γ^r)`.
pub fn eta(gamma: f64, r: u32) -> Result<f64> {
    check_gamma(gamma)?;
    let gr = gamma.powi(r as i32);
    let denom = 1.0 - gamma * gamma - gr;
    if denom <= 0.0 {
        return Err(LabError::ConditionViolated(format!(
            "1 − γ² − γ^r = {denom} ≤ 0 for γ = {gamma}, r = {r}"
        )));
    }
    Ok((gr + gamma - 1.0) / denom)
}

/// Lower bound on κ for which `r_{γ,κ}` and `G_{γ,κ}` are defined.
pub fn kappa_threshold(gamma: f64) -> f64 {
    (1.0 - gamma) / (gamma * gamma + gamma - 1.0)
}

fn check_kappa_preconditions(gamma: f64, kappa: f64) -> Result<()> {
    check_gamma(gamma)?;
    check_kappa(kappa)?;
    let golden = golden_threshold();
    if gamma <= golden {
        return Err(LabError::PreconditionViolated(format!(
            "γ > (√5 − 1)/2 ≈ {golden:.6} fails for γ = {gamma}"
        )));
    }
    let threshold = kappa_threshold(gamma);
    if kappa <= threshold {
        return Err(LabError::PreconditionViolated(format!(
            "κ > (1 − γ)/(γ² + γ − 1) = {threshold:.6} fails for κ = {kappa}"
        )));
    }
    Ok(())
}

fn kappa_factor(gamma: f64, kappa: f64) -> f64 {
    1.0 + kappa * gamma / (1.0 + kappa)
}

/// `r_{γ,κ} = log_γ((1 − γ)(1 + κγ/(1 + κ)))`.
pub fn r_gamma_kappa(gamma: f64, kappa: f64) -> Result<f64> {
    check_kappa_preconditions(gamma, kappa)?;
    Ok(log_base(gamma, (1.0 - gamma) * kappa_factor(gamma, kappa)))
}

/// `G_{γ,κ} = log_γ(1 − (1 + κγ/(1 + κ))^{-1} γ^{-1})`.
pub fn g_gamma_kappa(gamma: f64, kappa: f64) -> Result<f64> {
    check_kappa_preconditions(gamma, kappa)?;
    let arg = 1.0 - 1.0 / (kappa_factor(gamma, kappa) * gamma);
    if !(arg > 0.0 && arg < 1.0) {
        return Err(LabError::PreconditionViolated(format!(
            "logarithm argument {arg} outside (0, 1)"
        )));
    }
    Ok(log_base(gamma, arg))
}

/// `C_{r,κ} = r·v + ((2 + κ)² − 1)/2`.
pub fn c_factor(r: u32, kappa: f64, v: f64) -> f64 {
    r as f64 * v + ((2.0 + kappa).powi(2) - 1.0) / 2.0
}

fn loglog_term(horizon: u64) -> f64 {
    (horizon as f64).log2().log2() + 2.0
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon >= 2 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("horizon must be at least 2, got {horizon}")))
    }
}

/// `C_{r,κ}(log₂log₂T + 2)`.
pub fn prrfes_bound_rhs(horizon: u64, r: u32, kappa: f64, v: f64) -> Result<f64> {
    check_horizon(horizon)?;
    Ok(c_factor(r, kappa, v) * loglog_term(horizon))
}

/// `(r·v + ((1+κ)/2)(2 + max{2,⌈G⌉} + κ))(log₂log₂T + 2) + ⌈G⌉/2 − 1`.
pub fn preprrfes_bound_rhs(horizon: u64, r: u32, kappa: f64, v: f64, g: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let g_ceil = g.ceil();
    let factor = r as f64 * v + (1.0 + kappa) / 2.0 * (2.0 + g_ceil.max(2.0) + kappa);
    Ok(factor * loglog_term(horizon) + g_ceil / 2.0 - 1.0)
}

/// `⌈log_γ(1 − γ)⌉`.
pub fn min_penalization_rounds(gamma: f64) -> Result<u32> {
    check_gamma(gamma)?;
    Ok(snapped_ceil(log_base(gamma, 1.0 - gamma)).max(1.0) as u32)
}

/// `⌈log_γ(κ(1 − γ)/(1 + κ))⌉`.
pub fn r_for_kappa_geometric(gamma: f64, kappa: f64) -> Result<u32> {
    check_gamma(gamma)?;
    check_kappa(kappa)?;
    let x = kappa * (1.0 - gamma) / (1.0 + kappa);
    Ok(snapped_ceil(log_base(gamma, x)).max(1.0) as u32)
}

/// Positive root of `κ(κ+1)(κ+2) = 1/ln(1/γ)` by bisection.
pub fn optimal_kappa(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let target = 1.0 / (1.0 / gamma).ln();
    let cubic = |k: f64| k * (k + 1.0) * (k + 2.0) - target;
    let (mut lo, mut hi) = KAPPA_BRACKET;
    if cubic(hi) < 0.0 {
        return Err(LabError::InvalidParameter(format!(
            "γ = {gamma} too close to 1 for the κ bracket"
        )));
    }
    if cubic(lo) >= 0.0 {
        return Ok(lo);
    }
    while hi - lo > KAPPA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if cubic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `f(κ) = log_γ(κ(1−γ)/(1+κ)) + 1 + ((2+κ)² − 1)/2`: the factor `C_{r,κ}`
/// with `v = 1` and `r` replaced by its continuous upper estimate.
pub fn factor_estimate(gamma: f64, kappa: f64) -> f64 {
    log_base(gamma, kappa * (1.0 - gamma) / (1.0 + kappa)) + 1.0
        + ((2.0 + kappa).powi(2) - 1.0) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorImprovement {
    pub kappa0: f64,
    pub f_one: f64,
    pub f_kappa0: f64,
    pub reduction_percent: f64,
}

pub fn factor_improvement(gamma: f64) -> Result<FactorImprovement> {
    let kappa0 = optimal_kappa(gamma)?;
    let f_one = factor_estimate(gamma, 1.0);
    let f_kappa0 = factor_estimate(gamma, kappa0);
    Ok(FactorImprovement {
        kappa0,
        f_one,
        f_kappa0,
        reduction_percent: (f_one - f_kappa0) / f_one * 100.0,
    })
}

/// Parameters for which a bound is claimed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub gamma: f64,
    pub kappa: f64,
    pub r: u32,
    /// Exploitation floor for prePRRFES.
    pub g: Option<f64>,
}

impl BoundParams {
    /// PRRFES needs `γ^r/(1 − γ − γ^r) < κ`.
    pub fn check_prrfes(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        check_kappa(self.kappa)?;
        let gr = self.gamma.powi(self.r as i32);
        let denom = 1.0 - self.gamma - gr;
        if denom <= 0.0 {
            return Err(LabError::PreconditionViolated(format!(
                "γ^r ≥ 1 − γ for γ = {}, r = {}",
                self.gamma, self.r
            )));
        }
        let zeta = gr / denom;
        if zeta >= self.kappa {
            return Err(LabError::PreconditionViolated(format!(
                "ζ = {zeta} is not below κ = {}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// prePRRFES needs the golden and κ thresholds, `r = ⌈r_{γ,κ}⌉` and
    /// `G ≥ G_{γ,κ}`.
    pub fn check_preprrfes(&self) -> Result<()> {
        let r_star = r_gamma_kappa(self.gamma, self.kappa)?;
        let g_star = g_gamma_kappa(self.gamma, self.kappa)?;
        let r_ceil = snapped_ceil(r_star) as u32;
        if self.r != r_ceil {
            return Err(LabError::PreconditionViolated(format!(
                "r = {} differs from ⌈r_γ,κ⌉ = {r_ceil}",
                self.r
            )));
        }
        let g = self
            .g
            .ok_or_else(|| LabError::PreconditionViolated("G is required".into()))?;
        if g < g_star {
            return Err(LabError::PreconditionViolated(format!(
                "G = {g} is below G_γ,κ = {g_star}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_examples() {
        let e = eta(0.8, 5).unwrap();
        let expect = (0.8f64.powi(5) + 0.8 - 1.0) / (1.0 - 0.64 - 0.8f64.powi(5));
        assert!((e - expect).abs() < 1e-12);
        assert!((e - 3.9505).abs() < 1e-3);
        assert!(matches!(eta(0.8, 4), Err(LabError::ConditionViolated(_))));
        let r = snapped_ceil(r_gamma_kappa(0.75, 1.0).unwrap()) as u32;
        assert_eq!(r, 4);
        assert!(eta(0.75, r).unwrap() <= 1.0);
    }

    #[test]
    fn derived_constants_at_three_quarters() {
        let r = r_gamma_kappa(0.75, 1.0).unwrap();
        assert!((r - 0.34375f64.ln() / 0.75f64.ln()).abs() < 1e-12);
        assert!((r - 3.712).abs() < 1e-3);
        let g = g_gamma_kappa(0.75, 1.0).unwrap();
        assert!((g - 12.154).abs() < 1e-3);
        assert_eq!(g.ceil(), 13.0);
        // the proof's sandwich
        let rc = r.ceil();
        assert!(rc < 0.25f64.ln() / 0.75f64.ln());
        assert!(rc > (1.0 - 0.5625f64).ln() / 0.75f64.ln());
    }

    #[test]
    fn kappa_preconditions_are_named() {
        let err = r_gamma_kappa(0.7, 1.0).unwrap_err();
        match err {
            LabError::PreconditionViolated(msg) => assert!(msg.contains("κ >")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(g_gamma_kappa(0.6, 5.0), Err(LabError::PreconditionViolated(_))));
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(c_factor(8, 1.0, 1.0), 12.0);
        assert!((prrfes_bound_rhs(1 << 16, 8, 1.0, 1.0).unwrap() - 72.0).abs() < 1e-12);
        let rhs = prrfes_bound_rhs(4096, 11, 1.0, 0.73).unwrap();
        assert!((rhs - 12.03 * (12f64.log2() + 2.0)).abs() < 1e-9);
        assert!((rhs - 67.2).abs() < 0.05);
        let pre = preprrfes_bound_rhs(256, 4, 1.0, 1.0, 12.154).unwrap();
        assert!((pre - 105.5).abs() < 1e-12);
        // max{2, ⌈G⌉} floors at 2
        let small = preprrfes_bound_rhs(256, 1, 1.0, 0.0, 1.5).unwrap();
        assert!((small - (5.0 * 5.0 + 1.0 - 1.0)).abs() < 1e-12);
        assert!(prrfes_bound_rhs(1, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn penalization_round_examples() {
        assert_eq!(min_penalization_rounds(0.75).unwrap(), 5);
        assert_eq!(r_for_kappa_geometric(0.75, 1.0).unwrap(), 8);
        assert_eq!(min_penalization_rounds(0.95).unwrap(), 59);
        assert_eq!(r_for_kappa_geometric(0.95, 1.0).unwrap(), 72);
        assert_eq!(min_penalization_rounds(0.5).unwrap(), 1);
        assert_eq!(r_for_kappa_geometric(0.8, 1.0).unwrap(), 11);
    }

    #[test]
    fn kappa_examples() {
        for (gamma, expect) in [(0.75, 0.734), (0.95, 1.815), (0.99, 3.706)] {
            let k = optimal_kappa(gamma).unwrap();
            assert!((k - expect).abs() < 5e-4, "γ={gamma}: {k}");
        }
    }

    #[test]
    fn factor_examples() {
        for (gamma, expect) in [(0.05, 33.2), (0.75, 1.5), (0.99, 6.3)] {
            let f = factor_improvement(gamma).unwrap();
            assert!((f.reduction_percent - expect).abs() < 0.1, "γ={gamma}: {f:?}");
            assert!(f.f_kappa0 <= f.f_one);
        }
    }

    #[test]
    fn eligibility() {
        let ok = BoundParams { gamma: 0.8, kappa: 1.0, r: 11, g: None };
        assert!(ok.check_prrfes().is_ok());
        let short = BoundParams { r: 5, ..ok };
        assert!(short.check_prrfes().is_err());
        let pre = BoundParams { gamma: 0.8, kappa: 1.6, r: 6, g: Some(9.0) };
        assert!(pre.check_preprrfes().is_ok());
        assert!(BoundParams { r: 7, ..pre }.check_preprrfes().is_err());
        assert!(BoundParams { g: Some(8.0), ..pre }.check_preprrfes().is_err());
    }
}
