//! `rllcap`: capacity of finite-size 2-D constrained channels.
//!
//! Subcommands: `estimate` (SMC sampler), `exact` (transfer matrix / brute
//! force), `bench` (repeated-run benchmark grid with CSV output).
//!
//! Exit codes: 0 success; 1 runtime failure (diagnostic on stderr);
//! 2 invalid flags or configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rllcap::bench::{self, BenchConfig, BenchError};
use rllcap::modelspec::{ConfigError, ModelSpec};
use rllcap::report::{self, ExactRow, Format, ResultRow};
use rllcap_core::oracle;
use rllcap_core::smc::{self, RngSpec};

#[derive(Parser)]
#[command(name = "rllcap", version, about = "Capacity of 2-D constrained channels")]
struct Cli {
    /// Worker threads for per-particle work (default: all cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the capacity with the sequential Monte Carlo sampler
    Estimate(EstimateArgs),
    /// Compute the exact capacity (transfer matrix or brute force)
    Exact(ExactArgs),
    /// Run a benchmark grid from a config file and write CSV results
    Bench(BenchArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model specification file (see README for the grammar)
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rows", "cols", "potential"])]
    model_spec: Option<PathBuf>,
    /// Lattice rows
    #[arg(long)]
    rows: Option<usize>,
    /// Lattice columns
    #[arg(long)]
    cols: Option<usize>,
    /// `rll` or four weights `w00 w01 w10 w11` (both edge orientations)
    #[arg(long)]
    potential: Option<String>,
    /// Columns grouped into one sampling step (overrides the spec file)
    #[arg(long)]
    strip_width: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelSpec, CliError> {
        let mut spec = match &self.model_spec {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read {}: {e}", path.display()))
                })?;
                ModelSpec::parse(&text).map_err(usage)?
            }
            None => {
                let rows = self
                    .rows
                    .ok_or_else(|| CliError::Usage("--rows is required (or --model-spec)".into()))?;
                let cols = self
                    .cols
                    .ok_or_else(|| CliError::Usage("--cols is required (or --model-spec)".into()))?;
                ModelSpec::inline(rows, cols, self.potential.as_deref(), None).map_err(usage)?
            }
        };
        if let Some(w) = self.strip_width {
            spec.strip_width = w;
            if w == 0 || w > spec.cols {
                return Err(CliError::Usage(format!(
                    "--strip-width must be in 1..={}, got {w}",
                    spec.cols
                )));
            }
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of particles
    #[arg(long)]
    particles: usize,
    /// Base seed; run r uses seed + r
    #[arg(long)]
    seed: u64,
    /// Independent runs, one result row each
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Write results here instead of standard output
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark configuration file (see README for the grammar)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Write the full CSV here; summaries are echoed to standard output
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    JsonLines,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::JsonLines => Format::JsonLines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Transfer,
    Brute,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Auto => "auto",
            MethodArg::Transfer => "transfer",
            MethodArg::Brute => "brute",
        }
    }
}

impl From<MethodArg> for oracle::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => oracle::Method::Auto,
            MethodArg::Transfer => oracle::Method::Transfer,
            MethodArg::Brute => oracle::Method::Brute,
        }
    }
}

enum CliError {
    /// Invalid flags or configuration: exit 2, nothing computed or written.
    Usage(String),
    /// Failure while computing or writing: exit 1.
    Runtime(String),
}

fn usage(e: ConfigError) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: rllcap_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build();
            match pool {
                Ok(pool) => pool.install(|| dispatch(cli.command)),
                Err(e) => Err(CliError::Runtime(format!("cannot build thread pool: {e}"))),
            }
        }
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    if args.particles == 0 {
        return Err(CliError::Usage("--particles must be at least 1".into()));
    }
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let spec = args.model.resolve()?;
    let model = spec.build().map_err(usage)?;
    let view = model.strip_view(spec.strip_width).map_err(runtime)?;

    let mut rows = Vec::with_capacity(args.runs);
    for run in 0..args.runs {
        let seed = args.seed.wrapping_add(run as u64);
        let started = Instant::now();
        let estimate = smc::run(&view, args.particles, &RngSpec::new(seed)).map_err(runtime)?;
        let estimate = estimate.with_wall_clock(started.elapsed().as_secs_f64());
        rows.push(ResultRow {
            kind: "record",
            n: estimate.n_particles,
            w: estimate.strip_width,
            run,
            seed,
            capacity: estimate.capacity,
            log2_z: estimate.log2_z,
            wall_clock_s: estimate.wall_clock_seconds,
        });
    }
    emit(&report::render_results(&rows, args.format.into()), args.output.as_deref())
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let spec = args.model.resolve()?;
    let model = spec.build().map_err(usage)?;
    let log2_z = oracle::exact_log2_z(&model, args.method.into()).map_err(runtime)?;
    let row = ExactRow {
        kind: "exact",
        rows: model.rows(),
        cols: model.cols(),
        method: args.method.name().into(),
        capacity: smc::capacity_from_log2_z(log2_z, model.rows(), model.cols()),
        log2_z,
    };
    emit(&report::render_exact(&row, args.format.into()), args.output.as_deref())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let config = BenchConfig::parse(&text).map_err(usage)?;
    let output = bench::run_bench(&config).map_err(|e| match e {
        BenchError::Config(e) => usage(e),
        BenchError::Run(e) => runtime(e),
    })?;
    let rendered = report::render_bench(&output, args.format.into());
    match args.output.as_deref() {
        Some(path) => {
            write_file(path, &rendered)?;
            print!("{}", report::summary_lines(&output));
            Ok(())
        }
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
