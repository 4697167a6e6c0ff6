use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chsh_core::events::{Cell, Dataset};
use chsh_core::harness::{self, SimConfig, SimError};
use chsh_core::ingest::{self, ColumnMap, IngestError, OutcomeEncoding};
use chsh_core::lhv::{canonical_saturating_mixture, PostselectionPolicy, RemovalMode};
use chsh_core::stats::{self, StatsError};
use clap::{Parser, Subcommand, ValueEnum};

mod render;

use render::Format;

#[derive(Parser, Debug)]
#[command(name = "chsh", version, about = "CHSH Bell-test statistics and postselection simulation")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Setting tallies, counts table, correlators, CHSH S and the k p-value.
    Analyze { file: PathBuf },
    /// Chi-square uniformity of the setting cells and the minimum-cell tail probability.
    Uniformity {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Generated and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-party +1 counts split by the remote setting.
    Nosignal { file: PathBuf },
    /// Multi-run LHV simulation with postselection.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        removals: u64,
    },
    /// Mean S as a function of the removal cap, as CSV.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        min: u64,
        #[arg(long, default_value_t = 15)]
        max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a raw numeric matrix into a canonical dataset file.
    Import {
        matrix: PathBuf,
        /// Columns of setting_a, setting_b, outcome_a, outcome_b (0-based).
        #[arg(long, value_parser = parse_cols)]
        cols: [usize; 4],
        #[arg(long, value_enum)]
        encoding: EncodingArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the bundled 245-event dataset in canonical format.
    Fixture {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct SimArgs {
    #[arg(long, default_value_t = SimConfig::DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = SimConfig::DEFAULT_RUNS)]
    runs: u64,
    /// mismatch, any, oriented:+- or oriented:-+
    #[arg(long, default_value = "mismatch", value_parser = parse_mode)]
    mode: RemovalMode,
    #[arg(long, default_value = "00", value_parser = parse_cell)]
    cell: Cell,
    /// Generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; does not affect results.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodingArg {
    Pm1,
    Zo,
}

fn parse_mode(s: &str) -> Result<RemovalMode, String> {
    s.parse()
}

fn parse_cols(s: &str) -> Result<[usize; 4], String> {
    let cols = s
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|_| format!("not a column index: `{c}`")))
        .collect::<Result<Vec<_>, _>>()?;
    cols.try_into()
        .map_err(|v: Vec<usize>| format!("expected 4 comma-separated columns, got {}", v.len()))
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    Cell::parse(s).ok_or_else(|| format!("cell must be one of 00, 01, 10, 11, got `{s}`"))
}

#[derive(Debug)]
enum CliError {
    Input(IngestError),
    Stats(StatsError),
    Sim(SimError),
    Output { path: Option<PathBuf>, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Sim(_) | CliError::Input(IngestError::DuplicateColumn { .. }) => 2,
            CliError::Input(IngestError::Write { .. }) => 5,
            CliError::Input(_) => 3,
            CliError::Stats(_) => 4,
            CliError::Output { .. } => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "input error: {e}"),
            CliError::Stats(e) => write!(f, "statistics error: {e}"),
            CliError::Sim(e) => write!(f, "invalid simulation settings: {e}"),
            CliError::Output { path: Some(p), source } => {
                write!(f, "cannot write {}: {source}", p.display())
            }
            CliError::Output { path: None, source } => write!(f, "cannot write output: {source}"),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Stats(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Output { path: None, source })
}

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn sim_config(args: &SimArgs, removals: u64) -> SimConfig {
    let mut cfg = SimConfig::new(
        canonical_saturating_mixture(),
        PostselectionPolicy::new(args.cell, removals, args.mode),
        seed_or_fresh(args.seed),
    );
    cfg.trials_per_run = args.trials;
    cfg.runs = args.runs;
    cfg
}

fn workers(args: &SimArgs) -> usize {
    args.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load(file: &Path) -> Result<Dataset, CliError> {
    Ok(ingest::read_canonical(file)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    match cli.command {
        Command::Analyze { file } => {
            let d = load(&file)?;
            let jc = d.joint_counts();
            let report = stats::chsh(&jc)?;
            emit(&render::analyze(format, &d.tally_settings(), &jc, &report))
        }
        Command::Uniformity {
            file,
            samples,
            seed,
        } => {
            let d = load(&file)?;
            let seed = seed_or_fresh(seed);
            let tally = d.tally_settings();
            let chi = stats::uniformity_chi2(&tally)?;
            let (min_idx, &min_count) = tally
                .cell_counts
                .iter()
                .enumerate()
                .min_by_key(|&(i, c)| (*c, i))
                .expect("four cells");
            let total = tally.total();
            let mc = stats::min_cell_tail(total, min_count, 0.25, samples, seed)?;
            let exact = stats::exact_binom_cdf(total, min_count, 0.25)?;
            let u = render::Uniformity {
                tally,
                chi,
                min_cell: Cell::from_index(min_idx),
                min_count,
                mc,
                exact,
                seed,
            };
            emit(&render::uniformity(format, &u))
        }
        Command::Nosignal { file } => {
            let d = load(&file)?;
            emit(&render::nosignal(format, &stats::no_signal_report(&d.joint_counts())))
        }
        Command::Simulate { sim, removals } => {
            let cfg = sim_config(&sim, removals);
            let report = harness::monte_carlo_with_workers(&cfg, workers(&sim))?;
            emit(&render::simulate(format, &cfg, &report))
        }
        Command::Sweep { sim, min, max, out } => {
            let cfg = sim_config(&sim, min);
            let rows = harness::sweep_with_workers(&cfg, min, max, workers(&sim))?;
            match out {
                Some(path) => {
                    fs::write(&path, harness::render_sweep_csv(&rows)).map_err(|source| {
                        CliError::Output {
                            path: Some(path.clone()),
                            source,
                        }
                    })?;
                    emit(&render::sweep_written(format, &path, rows.len(), &cfg))
                }
                None => emit(&render::sweep(format, &rows, &cfg)),
            }
        }
        Command::Import {
            matrix,
            cols,
            encoding,
            out,
        } => {
            let encoding = match encoding {
                EncodingArg::Pm1 => OutcomeEncoding::PlusMinusOne,
                EncodingArg::Zo => OutcomeEncoding::ZeroOne,
            };
            let map = ColumnMap::new(cols[0], cols[1], cols[2], cols[3], encoding)?;
            let d = ingest::import_matrix(&matrix, &map)?;
            ingest::write_canonical(&d, &out)?;
            emit(&render::written(format, &out, d.len()))
        }
        Command::Fixture { out } => {
            let d = chsh_core::fixture_hensen_245();
            ingest::write_canonical(&d, &out)?;
            emit(&render::written(format, &out, d.len()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chsh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
