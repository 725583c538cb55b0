//! Experiment configuration: a JSON document whose keys are mirrored by
//! command-line flags. Flags win over file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use pricing_lab::bounds::{g_gamma_kappa, r_for_kappa_geometric, r_gamma_kappa, snapped_ceil};
use pricing_lab::buyer::DEFAULT_BRUTE_FORCE_CAP;
use pricing_lab::{
    AlgorithmKind, AlgorithmSpec, BoundClaim, DiscountSequence, DiscountSpec, ExploitRate, OracleKind,
    OracleOptions, TieBreak,
};

use crate::error::CliError;

/// Largest γ accepted; the κ bisection bracket covers up to `1 − 1e-6`.
pub const GAMMA_MAX: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ValuationGrid {
    List(Vec<f64>),
    Linspace { linspace: Linspace },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Pow2Range {
    pub from: u32,
    pub to: u32,
    #[serde(default = "one")]
    pub step: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum HorizonGrid {
    List(Vec<usize>),
    Pow2 { pow2: Pow2Range },
}

/// Every key is optional so that a file and a set of flags can be layered.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algorithm: Option<String>,
    pub r: Option<u32>,
    /// `default`, `preprrfes:<G>` or `preprrfes:auto` (G from κ).
    pub exploit: Option<String>,
    pub discount: Option<DiscountSpec>,
    pub v_grid: Option<ValuationGrid>,
    pub t_grid: Option<HorizonGrid>,
    pub oracle: Option<OracleKind>,
    pub tie_break: Option<TieBreak>,
    pub theta: Option<f64>,
    /// Largest memo table of the memoized oracle, in keys.
    pub memo_cap: Option<usize>,
    /// Attach the regret bound to every row.
    pub bound: Option<bool>,
    pub kappa: Option<f64>,
    pub output: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    /// Keys set in `over` replace those of `self`.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            algorithm: over.algorithm.or(self.algorithm),
            r: over.r.or(self.r),
            exploit: over.exploit.or(self.exploit),
            discount: over.discount.or(self.discount),
            v_grid: over.v_grid.or(self.v_grid),
            t_grid: over.t_grid.or(self.t_grid),
            oracle: over.oracle.or(self.oracle),
            tie_break: over.tie_break.or(self.tie_break),
            theta: over.theta.or(self.theta),
            memo_cap: over.memo_cap.or(self.memo_cap),
            bound: over.bound.or(self.bound),
            kappa: over.kappa.or(self.kappa),
            output: over.output.or(self.output),
            plot_data: over.plot_data.or(self.plot_data),
            threads: over.threads.or(self.threads),
        }
    }
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmSpec,
    pub discount: DiscountSequence,
    pub v_grid: Vec<f64>,
    pub horizons: Vec<usize>,
    pub oracle: OracleKind,
    pub options: OracleOptions,
    pub kappa: Option<f64>,
    pub claim: Option<BoundClaim>,
    pub output: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ValuationGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let values = match self {
            ValuationGrid::List(v) => v.clone(),
            ValuationGrid::Linspace { linspace: l } => match l.count {
                0 => Vec::new(),
                1 => vec![l.start],
                n => (0..n)
                    .map(|i| l.start + (l.stop - l.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        };
        if values.is_empty() {
            return Err(config_err("v grid is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(config_err(format!("valuation {bad} outside [0, 1]")));
        }
        Ok(values)
    }
}

impl HorizonGrid {
    pub fn values(&self) -> Result<Vec<usize>, CliError> {
        let values = match self {
            HorizonGrid::List(v) => v.clone(),
            HorizonGrid::Pow2 { pow2: p } => {
                if p.step == 0 || p.to >= usize::BITS {
                    return Err(config_err("pow2 range needs step ≥ 1 and exponents below the word size"));
                }
                (p.from..=p.to).step_by(p.step as usize).map(|e| 1usize << e).collect()
            }
        };
        if values.is_empty() {
            return Err(config_err("T grid is empty"));
        }
        if values.contains(&0) {
            return Err(config_err("horizons must be at least 1"));
        }
        Ok(values)
    }
}

fn parse_exploit(text: &str, gamma: Option<f64>, kappa: Option<f64>) -> Result<ExploitRate, CliError> {
    match text {
        "default" => Ok(ExploitRate::Default),
        "preprrfes:auto" => {
            let (Some(gamma), Some(kappa)) = (gamma, kappa) else {
                return Err(config_err("preprrfes:auto needs geometric discounting and kappa"));
            };
            Ok(ExploitRate::Floor(g_gamma_kappa(gamma, kappa)?))
        }
        other => {
            let g = other
                .strip_prefix("preprrfes:")
                .and_then(|g| g.parse::<f64>().ok())
                .filter(|g| g.is_finite() && *g >= 0.0)
                .ok_or_else(|| config_err(format!("bad exploit policy {other:?}")))?;
            Ok(ExploitRate::Floor(g))
        }
    }
}

/// Penalization length implied by κ when `r` is not given.
fn derived_r(kind: &AlgorithmKind, gamma: Option<f64>, kappa: Option<f64>) -> Result<u32, CliError> {
    let (Some(gamma), Some(kappa)) = (gamma, kappa) else {
        return Err(config_err("phased algorithms need r, or kappa with geometric discounting"));
    };
    match kind {
        AlgorithmKind::PrePrrfes => Ok(snapped_ceil(r_gamma_kappa(gamma, kappa)?) as u32),
        _ => Ok(r_for_kappa_geometric(gamma, kappa)?),
    }
}

impl TryFrom<ConfigFile> for ExperimentConfig {
    type Error = CliError;

    fn try_from(file: ConfigFile) -> Result<Self, CliError> {
        let discount_spec = file.discount.ok_or_else(|| config_err("missing discount"))?;
        if let DiscountSpec::Geometric { gamma } = discount_spec {
            if !(gamma > 0.0 && gamma <= GAMMA_MAX) {
                return Err(config_err(format!("gamma must lie in (0, {GAMMA_MAX}], got {gamma}")));
            }
        }
        let discount = discount_spec.build()?;
        let gamma = discount.geometric_rate();
        if let Some(k) = file.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(config_err(format!("kappa must be positive, got {k}")));
            }
        }

        let name = file.algorithm.ok_or_else(|| config_err("missing algorithm"))?;
        let kind: AlgorithmKind = name.parse()?;
        let algorithm = match kind {
            AlgorithmKind::Prrfes | AlgorithmKind::PrePrrfes => {
                let r = match file.r {
                    Some(r) => r,
                    None => derived_r(&kind, gamma, file.kappa)?,
                };
                let exploit = parse_exploit(file.exploit.as_deref().unwrap_or("default"), gamma, file.kappa)?;
                if kind == AlgorithmKind::Prrfes {
                    AlgorithmSpec::prrfes(r, exploit)?
                } else {
                    AlgorithmSpec::preprrfes(r, exploit)?
                }
            }
            AlgorithmKind::BinarySearch => AlgorithmSpec::binary_search(),
            AlgorithmKind::Constant(p) => AlgorithmSpec::constant(p),
        };

        let v_grid = file.v_grid.ok_or_else(|| config_err("missing v_grid"))?.values()?;
        let horizons = file.t_grid.ok_or_else(|| config_err("missing t_grid"))?.values()?;
        let oracle = file.oracle.unwrap_or_default();
        let max_t = horizons.iter().copied().max().unwrap_or(0);
        if oracle == OracleKind::BruteForce && max_t > DEFAULT_BRUTE_FORCE_CAP {
            return Err(config_err(format!(
                "brute-force oracle is limited to T ≤ {DEFAULT_BRUTE_FORCE_CAP}, grid reaches {max_t}"
            )));
        }
        let theta = file.theta.unwrap_or(0.0);
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(config_err(format!("theta must be a nonnegative number, got {theta}")));
        }
        let defaults = OracleOptions::default();
        let options = OracleOptions {
            tie_break: file.tie_break.unwrap_or_default(),
            theta,
            memo_cap: file.memo_cap.unwrap_or(defaults.memo_cap),
            ..defaults
        };

        let claim = if file.bound.unwrap_or(false) {
            let kappa = file.kappa.ok_or_else(|| config_err("bound attachment needs kappa"))?;
            Some(
                BoundClaim::for_algorithm(&algorithm, &discount, kappa)
                    .map_err(|e| config_err(format!("bound not applicable: {e}")))?,
            )
        } else {
            None
        };
        if file.threads == Some(0) {
            return Err(config_err("threads must be at least 1"));
        }

        Ok(ExperimentConfig {
            algorithm,
            discount,
            v_grid,
            horizons,
            oracle,
            options,
            kappa: file.kappa,
            claim,
            output: file.output,
            plot_data: file.plot_data,
            threads: file.threads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::try_from(ConfigFile::parse(text)?)
    }

    #[test]
    fn grids_expand() {
        let cfg = parse(
            r#"{"algorithm":"prrfes","r":3,"discount":{"kind":"geometric","gamma":0.8},
                "v_grid":{"linspace":{"start":0.05,"stop":0.95,"count":10}},
                "t_grid":{"pow2":{"from":6,"to":12,"step":2}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.v_grid.len(), 10);
        assert!((cfg.v_grid[9] - 0.95).abs() < 1e-12);
        assert_eq!(cfg.horizons, vec![64, 256, 1024, 4096]);
        assert_eq!(cfg.oracle, OracleKind::Memoized);
    }

    #[test]
    fn r_and_g_follow_kappa() {
        let cfg = parse(
            r#"{"algorithm":"preprrfes","exploit":"preprrfes:auto","kappa":1.6,"bound":true,
                "discount":{"kind":"geometric","gamma":0.8},"v_grid":[0.5],"t_grid":[64]}"#,
        )
        .unwrap();
        assert_eq!(cfg.algorithm.params.r, 6);
        assert!(matches!(cfg.algorithm.params.exploit, ExploitRate::Floor(g) if (g - 8.1466).abs() < 1e-3));
        assert!(cfg.claim.is_some());

        let cfg = parse(
            r#"{"algorithm":"prrfes","kappa":1,"discount":{"kind":"geometric","gamma":0.8},
                "v_grid":[0.5],"t_grid":[64]}"#,
        )
        .unwrap();
        assert_eq!(cfg.algorithm.params.r, 11);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = r#""discount":{"kind":"geometric","gamma":0.8},"v_grid":[0.5]"#;
        for bad in [
            format!(r#"{{"algorithm":"binary-search",{base},"t_grid":[]}}"#),
            format!(r#"{{"algorithm":"binary-search",{base},"t_grid":[64],"oracle":"bruteforce"}}"#),
            format!(r#"{{"algorithm":"prrfes",{base},"t_grid":[8]}}"#),
            format!(r#"{{"algorithm":"prrfes","r":2,"kappa":1,"bound":true,{base},"t_grid":[8]}}"#),
            format!(r#"{{"algorithm":"binary-search",{base},"t_grid":[8],"colour":"red"}}"#),
            format!(r#"{{"algorithm":"quicksort",{base},"t_grid":[8]}}"#),
        ] {
            assert!(matches!(parse(&bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse(r#"{"algorithm":"prrfes","r":3}"#).unwrap();
        let flags = ConfigFile {
            r: Some(5),
            ..ConfigFile::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.r, Some(5));
        assert_eq!(merged.algorithm.as_deref(), Some("prrfes"));
    }
}
