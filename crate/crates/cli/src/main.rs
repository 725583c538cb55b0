use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pricing_lab::buyer::BuyerModel;
use pricing_lab::{DiscountSpec, OracleKind, TieBreak};
use pricing_lab_cli::config::{HorizonGrid, Linspace, Pow2Range, ValuationGrid};
use pricing_lab_cli::error::{EXIT_CONFIG, EXIT_FAILED, EXIT_OK};
use pricing_lab_cli::report::{self, Table};
use pricing_lab_cli::verify::{run_suite, Suite};
use pricing_lab_cli::{run, CliError, ConfigFile, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pricing-lab", version, about = "Repeated posted-price auctions against strategic buyers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strategic regret over a (v, T) grid, written as CSV.
    Simulate(Box<SimulateArgs>),
    /// Round-by-round play of one buyer.
    Trace(TraceArgs),
    /// Constants derived from γ (and κ).
    Bounds {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// κ₀ and the factor reduction it buys.
    OptimizeKappa {
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        gamma: Vec<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// Depth-bounded class membership of one algorithm.
    Consistency {
        #[command(flatten)]
        alg: AlgArgs,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// Depth of the subtree comparisons behind RWC.
        #[arg(long, default_value_t = 8)]
        equiv_depth: usize,
    },
    /// Runs a bundled suite: constants, consistency, oracles, propositions,
    /// linear-regret or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Args, Clone, Default)]
struct AlgArgs {
    /// prrfes, preprrfes, binary-search or constant:<price>
    #[arg(long = "alg")]
    algorithm: Option<String>,
    #[arg(long)]
    r: Option<u32>,
    /// default, preprrfes:<G> or preprrfes:auto
    #[arg(long)]
    exploit: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct DiscountArgs {
    #[arg(long, conflicts_with = "telescoping")]
    gamma: Option<f64>,
    /// γ_t = 1/(t(t+1))
    #[arg(long)]
    telescoping: bool,
}

impl DiscountArgs {
    fn spec(&self) -> Option<DiscountSpec> {
        if self.telescoping {
            Some(DiscountSpec::Telescoping)
        } else {
            self.gamma.map(|gamma| DiscountSpec::Geometric { gamma })
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    alg: AlgArgs,
    #[command(flatten)]
    discount: DiscountArgs,
    #[arg(long = "v", value_delimiter = ',', conflicts_with = "v_linspace")]
    v: Option<Vec<f64>>,
    /// start:stop:count
    #[arg(long)]
    v_linspace: Option<String>,
    #[arg(long = "T", alias = "t", value_delimiter = ',', conflicts_with = "t_pow2")]
    t: Option<Vec<usize>>,
    /// from:to[:step], exponents of two
    #[arg(long = "T-pow2", alias = "t-pow2")]
    t_pow2: Option<String>,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    tie_break: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    memo_cap: Option<usize>,
    /// Attach the regret bound for κ.
    #[arg(long)]
    bound: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    alg: AlgArgs,
    #[command(flatten)]
    discount: DiscountArgs,
    /// truthful or strategic
    #[arg(long, default_value = "strategic")]
    buyer: String,
    #[arg(long = "v")]
    v: f64,
    #[arg(long = "T", alias = "t")]
    t: usize,
    #[arg(long)]
    tie_break: Option<String>,
}

fn numbers<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(':')
        .map(|s| s.trim().parse().map_err(|_| CliError::Config(format!("bad {what} {text:?}"))))
        .collect()
}

fn v_linspace(text: &str) -> Result<ValuationGrid, CliError> {
    let parts: Vec<f64> = numbers(text, "linspace")?;
    match parts[..] {
        [start, stop, count] if count >= 0.0 && count.fract() == 0.0 => Ok(ValuationGrid::Linspace {
            linspace: Linspace {
                start,
                stop,
                count: count as usize,
            },
        }),
        _ => Err(CliError::Config(format!("linspace is start:stop:count, got {text:?}"))),
    }
}

fn t_pow2(text: &str) -> Result<HorizonGrid, CliError> {
    let parts: Vec<u32> = numbers(text, "pow2 range")?;
    let (from, to, step) = match parts[..] {
        [from, to] => (from, to, 1),
        [from, to, step] => (from, to, step),
        _ => return Err(CliError::Config(format!("pow2 range is from:to[:step], got {text:?}"))),
    };
    Ok(HorizonGrid::Pow2 {
        pow2: Pow2Range { from, to, step },
    })
}

fn parse<T: std::str::FromStr<Err = pricing_lab::LabError>>(text: Option<&String>) -> Result<Option<T>, CliError> {
    text.map(|s| s.parse::<T>()).transpose().map_err(CliError::from)
}

impl AlgArgs {
    fn layer(&self) -> ConfigFile {
        ConfigFile {
            algorithm: self.algorithm.clone(),
            r: self.r,
            exploit: self.exploit.clone(),
            kappa: self.kappa,
            ..ConfigFile::default()
        }
    }
}

impl SimulateArgs {
    fn layer(&self) -> Result<ConfigFile, CliError> {
        let v_grid = match (&self.v, &self.v_linspace) {
            (Some(v), _) => Some(ValuationGrid::List(v.clone())),
            (None, Some(l)) => Some(v_linspace(l)?),
            (None, None) => None,
        };
        let t_grid = match (&self.t, &self.t_pow2) {
            (Some(t), _) => Some(HorizonGrid::List(t.clone())),
            (None, Some(p)) => Some(t_pow2(p)?),
            (None, None) => None,
        };
        Ok(ConfigFile {
            discount: self.discount.spec(),
            v_grid,
            t_grid,
            oracle: parse::<OracleKind>(self.oracle.as_ref())?,
            tie_break: parse::<TieBreak>(self.tie_break.as_ref())?,
            theta: self.theta,
            memo_cap: self.memo_cap,
            bound: self.bound.then_some(true),
            output: self.out.clone(),
            plot_data: self.plot_data.clone(),
            threads: self.threads,
            ..self.alg.layer()
        })
    }
}

fn print_table(table: &Table, csv: bool) {
    print!("{}", if csv { table.csv() } else { table.text() });
}

fn simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let config = ExperimentConfig::try_from(file.overlay(args.layer()?))?;
    let out = run::run(&config)?;
    if config.output.is_none() {
        print!("{}", out.csv);
    }
    for cell in &out.cells {
        if let Err(e) = &cell.outcome {
            eprintln!("cell v={} T={}: {e}", cell.v, cell.horizon);
        }
    }
    Ok(out.exit_code())
}

fn trace(args: &TraceArgs) -> Result<u8, CliError> {
    let layer = ConfigFile {
        discount: args.discount.spec(),
        v_grid: Some(ValuationGrid::List(vec![args.v])),
        t_grid: Some(HorizonGrid::List(vec![args.t])),
        ..args.alg.layer()
    };
    let config = ExperimentConfig::try_from(layer)?;
    let tie_break = parse::<TieBreak>(args.tie_break.as_ref())?.unwrap_or_default();
    let buyer = match args.buyer.as_str() {
        "truthful" => BuyerModel::truthful(args.v)?,
        "strategic" => BuyerModel::strategic(args.v, config.discount.clone(), args.t, tie_break)?,
        other => return Err(CliError::Config(format!("unknown buyer {other:?} (truthful, strategic)"))),
    };
    print!("{}", report::trace(&config.algorithm, &buyer, &config.discount, args.t)?);
    Ok(EXIT_OK)
}

fn consistency(alg: &AlgArgs, depth: usize, equiv_depth: usize) -> Result<u8, CliError> {
    // the classes do not depend on discounting or grids; fill them to validate the rest
    let layer = ConfigFile {
        discount: Some(DiscountSpec::Geometric { gamma: 0.5 }),
        v_grid: Some(ValuationGrid::List(vec![0.5])),
        t_grid: Some(HorizonGrid::List(vec![1])),
        ..alg.layer()
    };
    let config = ExperimentConfig::try_from(layer)?;
    print!("{}", report::consistency_table(&config.algorithm, depth, equiv_depth).text());
    Ok(EXIT_OK)
}

fn verify(suite: &str) -> Result<u8, CliError> {
    let suite: Suite = suite.parse()?;
    let checks = run_suite(suite);
    for check in &checks {
        println!("{check}");
    }
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_FAILED })
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Trace(args) => trace(&args),
        Command::Bounds { gamma, kappa, csv } => {
            print_table(&report::bounds_table(gamma, kappa)?, csv);
            Ok(EXIT_OK)
        }
        Command::OptimizeKappa { gamma, csv } => {
            for (i, g) in gamma.iter().enumerate() {
                let table = report::kappa_table(*g)?;
                if csv && i > 0 {
                    // one header for the whole run
                    print!("{}", table.csv().split_once('\n').map_or("", |(_, rest)| rest));
                } else {
                    if i > 0 {
                        println!();
                    }
                    print_table(&table, csv);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Consistency { alg, depth, equiv_depth } => consistency(&alg, depth, equiv_depth),
        Command::Verify { suite } => verify(&suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
