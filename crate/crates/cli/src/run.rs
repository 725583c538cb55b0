//! Grid execution and CSV output.

use std::fmt::Write as _;

use rayon::prelude::*;

use pricing_lab::regret::strategic_regret;
use pricing_lab::{LabError, RegretReport};

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_CELL_ERROR, EXIT_OK};
use crate::format::g12;

pub const CSV_HEADER: &str = "alg,gamma,r,kappa,g_policy,v,T,oracle,tie_break,sreg,bound_rhs,within_bound";

/// Environment variable capping the number of workers.
pub const THREADS_ENV: &str = "PRICING_LAB_THREADS";

#[derive(Debug)]
pub struct Cell {
    pub v: f64,
    pub horizon: usize,
    pub outcome: Result<RegretReport, LabError>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub cells: Vec<Cell>,
    pub csv: String,
    pub plot_data: String,
}

impl RunOutput {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    pub fn exit_code(&self) -> u8 {
        if self.failed_cells() == 0 {
            EXIT_OK
        } else {
            EXIT_CELL_ERROR
        }
    }
}

/// Worker count: the configured value (or every core), capped by
/// `PRICING_LAB_THREADS` when that is set.
pub fn worker_count(configured: Option<usize>) -> Result<usize, CliError> {
    let base = configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match std::env::var(THREADS_ENV) {
        Ok(cap) => {
            let cap: usize = cap
                .trim()
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {cap:?}")))?;
            Ok(base.min(cap))
        }
        Err(_) => Ok(base),
    }
}

/// Solves every cell, `v`-major, on a bounded pool. Output order never
/// depends on completion order.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let workers = worker_count(config.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start workers: {e}")))?;
    let grid: Vec<(f64, usize)> = config
        .v_grid
        .iter()
        .flat_map(|&v| config.horizons.iter().map(move |&t| (v, t)))
        .collect();
    let cells: Vec<Cell> = pool.install(|| {
        grid.par_iter()
            .map(|&(v, horizon)| Cell {
                v,
                horizon,
                outcome: strategic_regret(
                    &config.algorithm,
                    v,
                    &config.discount,
                    horizon,
                    config.oracle,
                    &config.options,
                    config.claim.as_ref(),
                ),
            })
            .collect()
    });
    let csv = render_csv(config, &cells);
    let plot_data = render_plot_data(&cells);
    Ok(RunOutput { cells, csv, plot_data })
}

/// Runs the experiment and writes the artifacts it names. The CSV goes to
/// `output` when set; the caller prints it otherwise.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let out = execute(config)?;
    if let Some(path) = &config.output {
        std::fs::write(path, &out.csv)?;
    }
    if let Some(path) = &config.plot_data {
        std::fs::write(path, &out.plot_data)?;
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(g12).unwrap_or_default()
}

pub fn render_csv(config: &ExperimentConfig, cells: &[Cell]) -> String {
    let spec = &config.algorithm;
    let gamma = config
        .discount
        .geometric_rate()
        .map(g12)
        .unwrap_or_else(|| config.discount.label());
    let r = if spec.is_phased() { spec.params.r.to_string() } else { String::new() };
    let g_policy = if spec.is_phased() { spec.params.exploit.label() } else { String::new() };
    let kappa = opt(config.claim.as_ref().map(|c| c.params.kappa).or(config.kappa));
    let mut csv = String::with_capacity(64 * (cells.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for cell in cells {
        let (sreg, rhs, within) = match &cell.outcome {
            Ok(rep) => (
                g12(rep.sreg),
                opt(rep.bound_rhs),
                rep.within_bound.map(|b| b.to_string()).unwrap_or_default(),
            ),
            Err(e) => (format!("error:{}", e.kind()), String::new(), String::new()),
        };
        writeln!(
            csv,
            "{},{gamma},{r},{kappa},{g_policy},{},{},{},{},{sreg},{rhs},{within}",
            spec.name(),
            g12(cell.v),
            cell.horizon,
            config.oracle.name(),
            config.options.tie_break.name(),
        )
        .expect("writing to a string");
    }
    csv
}

/// gnuplot data: one index block per valuation with `T sreg` rows. Failed
/// cells appear as comments.
pub fn render_plot_data(cells: &[Cell]) -> String {
    let mut out = String::new();
    let mut current: Option<f64> = None;
    for cell in cells {
        if current != Some(cell.v) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            writeln!(out, "# v={}", g12(cell.v)).expect("writing to a string");
            current = Some(cell.v);
        }
        match &cell.outcome {
            Ok(rep) => writeln!(out, "{} {}", cell.horizon, g12(rep.sreg)),
            Err(e) => writeln!(out, "# {} error:{}", cell.horizon, e.kind()),
        }
        .expect("writing to a string");
    }
    out
}
