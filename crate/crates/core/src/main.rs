use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irs_secrecy::channel::ScenarioConfig;
use irs_secrecy::harness::{
    realization_seed, run_experiment, run_point, trace_rows, Baselines, ExperimentSpec, Mode, Point, Sweep,
    DEFAULT_QOS_DB, DEFAULT_RANDOM_TRIALS, DEFAULT_REALIZATIONS,
};
use irs_secrecy::par::Execution;
use irs_secrecy::Result;

#[derive(Parser)]
#[command(name = "irs-sim", version, about = "IRS-assisted cognitive-radio secrecy-rate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep writing detail and aggregate CSVs.
    Simulate(SimulateArgs),
    /// Per-iteration objective of a single realization as CSV.
    Trace(TraceArgs),
    /// Print the default scenario config.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FullCsi,
    Robust,
    NoCsi,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::FullCsi => Mode::FullCsi,
            ModeArg::Robust => Mode::Robust,
            ModeArg::NoCsi => Mode::NoCsi,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    NoIrs,
    RandomPhase,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Scenario TOML; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// QoS target in dB for no-csi mode.
    #[arg(long, default_value_t = DEFAULT_QOS_DB)]
    qos_db: f64,
    /// Raw CSI error bound for robust mode.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        match &self.config {
            Some(p) => ScenarioConfig::load(p),
            None => Ok(ScenarioConfig::default()),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// `var=start:step:stop` with var one of P_T (dBm), T (dB), eps.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    realizations: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',')]
    baselines: Vec<BaselineArg>,
    #[arg(long, default_value_t = DEFAULT_RANDOM_TRIALS)]
    random_trials: usize,
    /// Run realizations one after another.
    #[arg(long)]
    sequential: bool,
    /// Exit nonzero if any run is flagged as failed.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Realization index under the master seed.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

fn simulate(args: SimulateArgs) -> Result<bool> {
    let base = args.common.config()?;
    let mut spec = ExperimentSpec::new(args.common.mode.into(), base, args.out);
    if let Some(s) = &args.sweep {
        spec.sweep = s.parse::<Sweep>()?;
    }
    spec.realizations = args.realizations;
    spec.seed = args.common.seed;
    spec.qos_db = args.common.qos_db;
    spec.eps = args.common.eps;
    spec.random_trials = args.random_trials;
    spec.baselines = Baselines {
        no_irs: args.baselines.contains(&BaselineArg::NoIrs),
        random_phase: args.baselines.contains(&BaselineArg::RandomPhase),
    };
    spec.exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let out = run_experiment(&spec)?;
    eprintln!("wrote {} and {}", out.detail.display(), out.aggregate.display());
    Ok(!(args.strict && out.has_failures()))
}

fn trace(args: TraceArgs) -> Result<bool> {
    let mut config = args.common.config()?;
    config.seed = realization_seed(args.common.seed, args.realization);
    let point = Point { config, qos_db: args.common.qos_db, eps: args.common.eps };
    let r = run_point(args.common.mode.into(), &point, Execution::Parallel)?;
    let rows = trace_rows(&r);
    match &args.out {
        Some(p) => irs_secrecy::harness::write_csv(p, &rows)?,
        None => {
            let mut w = csv::Writer::from_writer(io::stdout());
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    Ok(!(args.strict && r.flags.is_failure()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Trace(a) => trace(a),
        Command::DefaultConfig => ScenarioConfig::default().to_toml().map(|t| {
            print!("{t}");
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("flagged failures present");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
