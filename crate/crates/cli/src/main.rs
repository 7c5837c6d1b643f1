mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "rtevo", version, about = "Evolve and check CAN response-time tests")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run everything on one thread with serial fitness evaluation.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus of message sets.
    GenCorpus(GenCorpusArgs),
    /// Run response-time tests on one message set.
    Analyze(AnalyzeArgs),
    /// Simulate the bus under a release scenario.
    Simulate(SimulateArgs),
    /// Evolve a response-time test against a corpus.
    EvolveTest(EvolveTestArgs),
    /// Alternate test evolution with counterexample scenario search.
    Coevolve(CoevolveArgs),
    /// Search for a task-to-node allocation.
    Allocate(AllocateArgs),
    /// Compare an evolved test against the built-in tests.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long)]
    sets: Option<usize>,
    /// Messages per set. Without it the total message count is used.
    #[arg(long)]
    msgs: Option<usize>,
    /// Total messages spread over the sets.
    #[arg(long, conflicts_with = "msgs")]
    total: Option<usize>,
    #[arg(long)]
    util: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// One of s1, cf-d, cf-s, exact, all.
    #[arg(long, default_value = "all")]
    test: String,
    /// Report CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `critical` or a scenario CSV file.
    #[arg(long, default_value = "critical")]
    scenario: String,
    #[arg(long)]
    horizon: Option<i64>,
    /// Per-frame trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Watermark CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvolveTestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
}

#[derive(Debug, Args)]
struct CoevolveArgs {
    /// Corpus directory.
    #[arg(long, required_unless_present = "corpus_params", conflicts_with = "corpus_params")]
    corpus: Option<PathBuf>,
    /// Configuration file whose generator keys describe the corpus to build.
    #[arg(long)]
    corpus_params: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Best tests, one S-expression per line.
    #[arg(long)]
    out: PathBuf,
    /// Refuting scenarios CSV.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Test history CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Per-round summary CSV.
    #[arg(long)]
    rounds_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    /// Task graph JSON.
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    nodes: usize,
    /// `count` or `breakdown`.
    #[arg(long, default_value = "count")]
    fitness: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// History CSV of an evolve-test run; its last row names the evolved test.
    #[arg(long)]
    history: PathBuf,
    /// Corpus directory the tests are scored on.
    #[arg(long)]
    baselines: PathBuf,
    #[arg(long)]
    svg: PathBuf,
    /// Numbers behind the chart; defaults to the SVG path with a .csv
    /// extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::RunConfig::default();
    if let Some(path) = &cli.config {
        commands::load_config(&mut cfg, path)?;
    }
    let threads = if cli.serial { Some(1) } else { cli.threads };
    if cli.serial {
        cfg.evo.parallel = false;
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(e))?;
    }
    match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(cfg, a),
        Command::Analyze(a) => commands::analyze(cfg, a),
        Command::Simulate(a) => commands::simulate(cfg, a),
        Command::EvolveTest(a) => commands::evolve_test(cfg, a),
        Command::Coevolve(a) => commands::coevolve(cfg, a),
        Command::Allocate(a) => commands::allocate(cfg, a),
        Command::Report(a) => commands::report(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rtevo: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
