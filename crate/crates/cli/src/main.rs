use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use stackcache::follower::{self, BrOptions, BrSchedule, BrTrace, FollowerError};
use stackcache::scenario::{self, CpSweepRow, PriceSweepRow};
use stackcache::stackelberg::{self, SolveOptions, StackelbergError};
use stackcache::{LeaderError, Market, MarketConfig, ParityConvention, QuantityProfile};

#[derive(Parser)]
#[command(name = "stackcache", version, about = "Stackelberg pricing for incentive proactive edge caching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full leader/follower game and write the equilibrium report.
    Equilibrium {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        br: BrArgs,
        /// Skip the best-response cross-check.
        #[arg(long)]
        no_br: bool,
        #[arg(long, value_enum, default_value = "even")]
        parity: ParityArg,
        /// Cap quantities at each provider's catalog size.
        #[arg(long)]
        strict_catalog: bool,
    },
    /// Best-response dynamics at a fixed price, as a CSV trace.
    BrTrace {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        price: f64,
        #[command(flatten)]
        br: BrArgs,
        #[arg(long, value_enum, default_value = "simultaneous")]
        schedule: ScheduleArg,
    },
    /// Operator utility against price, one curve per capacity.
    PriceSweep {
        #[command(flatten)]
        io: IoArgs,
        /// Evaluate a single price instead of a grid.
        #[arg(long)]
        price: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Lower sweep bound; defaults to the feasible range.
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        /// Total capacities to sweep, replacing the config's fleet, e.g. `50,100`.
        #[arg(long, value_delimiter = ',')]
        capacities: Vec<f64>,
    },
    /// Provider utilities at q*, q*/2 and 2q* as the number of providers grows.
    CpSweep {
        #[command(flatten)]
        io: IoArgs,
        /// Provider counts, e.g. `2..6`.
        #[arg(long, default_value = "2..6", value_parser = parse_range)]
        m_range: RangeInclusive<usize>,
        /// Traffic loads follow alpha_m = M + m + shift.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha_shift: f64,
    },
}

#[derive(clap::Args)]
struct IoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BrArgs {
    /// Initial quantities, e.g. `0,0`; zeros when omitted.
    #[arg(long, value_delimiter = ',')]
    init: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl BrArgs {
    fn options(&self, schedule: BrSchedule) -> BrOptions {
        BrOptions { tol: self.tol, max_iter: self.max_iter, schedule }
    }

    fn initial(&self, m: usize) -> Result<QuantityProfile, Failure> {
        if self.init.is_empty() {
            return Ok(QuantityProfile::zeros(m));
        }
        if self.init.len() != m {
            return Err(Failure::validation(format!("--init has {} entries, market has {m} providers", self.init.len())));
        }
        Ok(QuantityProfile::new(self.init.clone()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
    Rounded,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Simultaneous,
    Sequential,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim_start_matches('=').trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || a > b {
        return Err(format!("empty or invalid range `{s}`"));
    }
    Ok(a..=b)
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const VALIDATION: u8 = 2;
    const INFEASIBLE: u8 = 3;
    const NON_CONVERGENCE: u8 = 4;

    fn validation(message: impl Into<String>) -> Self {
        Self { code: Self::VALIDATION, message: message.into() }
    }
}

impl From<StackelbergError> for Failure {
    fn from(e: StackelbergError) -> Self {
        let code = match &e {
            StackelbergError::Validation(_) => Failure::VALIDATION,
            StackelbergError::Leader(LeaderError::InfeasibleMarket { .. }) => Failure::INFEASIBLE,
            StackelbergError::Follower(FollowerError::NonConvergence(_)) => Failure::NON_CONVERGENCE,
            _ => Failure::VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self { code: 1, message: format!("{e:#}") }
    }
}

fn load_market(path: &Path) -> Result<Market, Failure> {
    let config = MarketConfig::from_path(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    Market::new(config).map_err(|e| Failure::validation(format!("invalid market {}:\n{e}", path.display())))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(bytes).context("writing to stdout"),
    }
}

fn csv_bytes(header: Vec<String>, records: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for record in records {
        writer.write_record(record)?;
    }
    writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

fn trace_csv(trace: &BrTrace) -> anyhow::Result<Vec<u8>> {
    csv_bytes(trace.csv_header(), trace.csv_records())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Equilibrium { io, format, br, no_br, parity, strict_catalog } => {
            let market = load_market(&io.config)?;
            let options = SolveOptions {
                parity: match parity {
                    ParityArg::Even => ParityConvention::Even,
                    ParityArg::Odd => ParityConvention::Odd,
                    ParityArg::Rounded => ParityConvention::Rounded,
                },
                run_br: !no_br,
                br_initial: Some(br.initial(market.num_cps())?.q),
                br: br.options(BrSchedule::Simultaneous),
                strict_catalog,
            };
            let report = stackelberg::solve_market(&market, &options)?;
            let bytes = match format {
                Format::Json => (report.to_json() + "\n").into_bytes(),
                Format::Csv => csv_bytes(stackcache::EquilibriumReport::csv_header(), report.csv_records())?,
            };
            write_output(io.out.as_deref(), &bytes)?;
            if report.is_infeasible() {
                return Err(Failure { code: Failure::INFEASIBLE, message: "equilibrium exceeds capacity".into() });
            }
        }
        Command::BrTrace { io, price, br, schedule } => {
            let market = load_market(&io.config)?;
            if !(price > 0.0 && price < 1.0) {
                return Err(Failure::validation(format!("--price {price} outside (0, 1)")));
            }
            let schedule = match schedule {
                ScheduleArg::Simultaneous => BrSchedule::Simultaneous,
                ScheduleArg::Sequential => BrSchedule::Sequential,
            };
            let initial = br.initial(market.num_cps())?;
            match follower::br_dynamics(&market, price, &initial, &br.options(schedule)) {
                Ok(trace) => write_output(io.out.as_deref(), &trace_csv(&trace)?)?,
                Err(FollowerError::NonConvergence(trace)) => {
                    write_output(io.out.as_deref(), &trace_csv(&trace)?)?;
                    return Err(Failure {
                        code: Failure::NON_CONVERGENCE,
                        message: format!("no convergence after {} rounds (residual {:e})", trace.rounds(), trace.final_residual),
                    });
                }
                Err(e) => return Err(Failure::validation(e.to_string())),
            }
        }
        Command::PriceSweep { io, price, grid, lo, hi, capacities } => {
            let base = load_market(&io.config)?;
            let markets = if capacities.is_empty() {
                vec![base]
            } else {
                capacities
                    .iter()
                    .map(|&s| base.with_capacity(s).map_err(|e| Failure::validation(format!("capacity {s}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let prices = match price {
                Some(p) => vec![p],
                None => {
                    let (auto_lo, auto_hi) = scenario::auto_bounds(&markets)?;
                    let (lo, hi) = (lo.unwrap_or(auto_lo), hi.unwrap_or(auto_hi));
                    if grid < 2 || !(lo < hi) {
                        return Err(Failure::validation(format!("bad sweep: grid {grid}, bounds ({lo}, {hi})")));
                    }
                    scenario::price_grid(lo, hi, grid)
                }
            };
            if let Some(bad) = prices.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
                return Err(Failure::validation(format!("price {bad} outside (0, 1)")));
            }
            let mut rows = Vec::new();
            for market in &markets {
                rows.extend(scenario::price_sweep(market, &prices)?);
            }
            let bytes = csv_bytes(PriceSweepRow::csv_header(), rows.iter().map(PriceSweepRow::csv_record))?;
            write_output(io.out.as_deref(), &bytes)?;
        }
        Command::CpSweep { io, m_range, alpha_shift } => {
            let template = MarketConfig::from_path(&io.config)
                .map_err(|e| Failure::validation(format!("{}: {e}", io.config.display())))?;
            let rows = scenario::cp_sweep(&template, m_range, alpha_shift)?;
            let bytes = csv_bytes(CpSweepRow::csv_header(), rows.iter().map(CpSweepRow::csv_record))?;
            write_output(io.out.as_deref(), &bytes)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
