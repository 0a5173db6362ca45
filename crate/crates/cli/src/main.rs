//! `l1tucker` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use l1tucker::harness::classify::{run_classification, ClassificationData, ClassifyExperimentSpec, ClassifySweep};
use l1tucker::harness::recon::{gaussian_tensor, run_reconstruction_sweep, ReconExperimentSpec, SweepGrid};
use l1tucker::harness::results::{write_results, ResultTable};
use l1tucker::tucker::{self, DecompTrace};
use l1tucker::{io as lt1, Error, HooiConfig, HooiInit, Solver};
use serde::de::DeserializeOwned;
use serde_json::Value;

/// Every numeric default, echoed as `#` lines at the top of each CSV.
const DEFAULTS: &[(&str, &str)] = &[
    ("tol", "1e-6"),
    ("max_outer_iters", "100"),
    ("inner_tol", "1e-6"),
    ("inner_max_iters", "min(100*D_n,1000)"),
    ("seed", "0"),
    ("threads", "0 (auto)"),
    ("recon.core_std", "3"),
    ("recon.awgn_std", "1"),
    ("recon.sweep", "outlier_std 4,8,...,28"),
    ("classify.classes", "5"),
    ("classify.samples_per_class", "10"),
    ("classify.image_dim", "28"),
    ("classify.rank", "5"),
    ("classify.beta", "0.8"),
    ("classify.noise_ratio", "10"),
    ("classify.test_per_class", "100"),
    ("classify.sweep", "alpha 0,0.1,0.2,0.3"),
];

const DEFAULT_TOL: f64 = 1e-6;
const DEFAULT_MAX_OUTER: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "l1tucker", version, about = "L1-norm Tucker decomposition and robustness experiments")]
struct Cli {
    /// Worker threads for trial-level parallelism (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output format for tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose an LT1 tensor and write the model.
    Decompose(DecomposeArgs),
    /// Reconstruction-error sweep over corrupted synthetic Tucker tensors.
    ReconSweep(ReconArgs),
    /// Classification accuracy sweep on MNIST or synthetic digits.
    Classify(ClassifyArgs),
    /// Per-iteration metric trace of one decomposition.
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Comma-separated ranks d1,d2,...
    #[arg(long, value_delimiter = ',', required = true)]
    ranks: Vec<usize>,
    #[arg(long, default_value = "l1-hooi", value_parser = parse_solver)]
    solver: Solver,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Outer iteration cap.
    #[arg(long, default_value_t = DEFAULT_MAX_OUTER)]
    max_iters: usize,
    /// Seed for a random initialization (`--init random`).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Auto)]
    init: InitArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Auto,
    Hosvd,
    L1Hosvd,
    Random,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: PathBuf,
    /// Store the core tensor in the model file as well.
    #[arg(long)]
    with_core: bool,
}

#[derive(Args, Debug)]
struct ReconArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true)))]
struct ClassifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the four standard MNIST IDX files.
    #[arg(long, group = "source")]
    mnist_dir: Option<PathBuf>,
    /// Use the built-in synthetic digits instead of MNIST.
    #[arg(long, group = "source")]
    synthetic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("tensor").required(true)))]
struct TraceArgs {
    #[arg(long, group = "tensor")]
    input: Option<PathBuf>,
    /// Trace a standard normal tensor of this shape drawn from `--seed`.
    #[arg(long, value_delimiter = ',', group = "tensor")]
    shape: Option<Vec<usize>>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_solver(s: &str) -> Result<Solver, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// An error together with its process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_) => 2,
            Error::Format { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn arg_err(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

impl SolverArgs {
    fn config(&self) -> CliResult<HooiConfig> {
        let mut cfg = HooiConfig::with_tol(self.tol);
        cfg.max_outer_iters = self.max_iters;
        cfg.init = match self.init {
            InitArg::Auto => HooiInit::Auto,
            InitArg::Hosvd => HooiInit::Hosvd,
            InitArg::L1Hosvd => HooiInit::L1Hosvd,
            InitArg::Random => HooiInit::Random(self.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn preamble(command: &str, settings: &[(String, String)]) -> Vec<String> {
    let mut lines = vec![format!("l1tucker {} {command}", env!("CARGO_PKG_VERSION"))];
    lines.extend(DEFAULTS.iter().map(|(k, v)| format!("default {k} = {v}")));
    lines.extend(settings.iter().map(|(k, v)| format!("run {k} = {v}")));
    lines
}

/// Prefixes an error message with the file it concerns.
fn at_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure {
            code: f.code,
            message: format!("{}: {}", path.display(), f.message),
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| arg_err(format!("cannot write {}: {e}", path.display())))
}

fn emit(table: &ResultTable, lines: &[String], path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    write_results(table, lines, &mut w)?;
    w.flush()?;
    Ok(())
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| arg_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

/// Pulls the runner keys (`sweep`, `tol`, `max_outer_iters`) out of a config
/// object; everything left must match the experiment type exactly.
struct SplitConfig<T> {
    spec: T,
    sweep: Option<Value>,
    solver: HooiConfig,
}

fn split_config<T: DeserializeOwned>(path: &Path) -> CliResult<SplitConfig<T>> {
    let mut value = read_json(path)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| arg_err(format!("{}: config must be a JSON object", path.display())))?;
    let sweep = obj.remove("sweep");
    let tol = match obj.remove("tol") {
        Some(v) => v.as_f64().ok_or_else(|| arg_err("tol must be a number"))?,
        None => DEFAULT_TOL,
    };
    let max_outer = match obj.remove("max_outer_iters") {
        Some(v) => v.as_u64().ok_or_else(|| arg_err("max_outer_iters must be a nonnegative integer"))? as usize,
        None => DEFAULT_MAX_OUTER,
    };
    let spec = serde_json::from_value(value).map_err(|e| arg_err(format!("{}: {e}", path.display())))?;
    let mut solver = HooiConfig::with_tol(tol);
    solver.max_outer_iters = max_outer;
    solver.validate()?;
    Ok(SplitConfig { spec, sweep, solver })
}

fn parse_sweep<S: DeserializeOwned>(sweep: Option<Value>, default: S) -> CliResult<S> {
    match sweep {
        Some(v) => serde_json::from_value(v).map_err(|e| arg_err(format!("sweep: {e}"))),
        None => Ok(default),
    }
}

fn compact_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config types serialize")
}

fn decompose(args: &DecomposeArgs) -> CliResult<()> {
    let x = lt1::load_tensor(&args.input).map_err(at_path(&args.input))?;
    let cfg = args.solver.config()?;
    let (mut model, trace) = args.solver.solver.decompose(&x, &args.solver.ranks, &cfg)?;
    if args.with_core {
        model = model.with_core(&x)?;
    }
    lt1::save_model(&args.output, &model).map_err(at_path(&args.output))?;
    println!(
        "{} ranks={:?} metric={} iterations={} converged={}",
        args.solver.solver,
        model.ranks,
        trace.final_metric().unwrap_or(f64::NAN),
        trace.iterations,
        trace.converged
    );
    Ok(())
}

fn recon_sweep(args: &ReconArgs) -> CliResult<()> {
    let cfg: SplitConfig<ReconExperimentSpec> = split_config(&args.config)?;
    let sweep: SweepGrid = parse_sweep(cfg.sweep, SweepGrid::outlier_std_default())?;
    let table = run_reconstruction_sweep(&cfg.spec, &sweep, &cfg.solver)?;
    let lines = preamble(
        "recon-sweep",
        &[
            ("spec".into(), compact_json(&cfg.spec)),
            ("sweep".into(), compact_json(&sweep)),
            ("tol".into(), cfg.solver.tol.to_string()),
            ("max_outer_iters".into(), cfg.solver.max_outer_iters.to_string()),
        ],
    );
    emit(&table, &lines, &args.out)
}

fn classify(args: &ClassifyArgs) -> CliResult<()> {
    let cfg: SplitConfig<ClassifyExperimentSpec> = split_config(&args.config)?;
    let sweep: ClassifySweep = parse_sweep(cfg.sweep, ClassifySweep::alpha_default())?;
    cfg.spec.validate()?;
    let (data, source) = match &args.mnist_dir {
        Some(dir) => (ClassificationData::from_mnist_dir(dir).map_err(at_path(dir))?, dir.display().to_string()),
        None => (ClassificationData::synthetic(&cfg.spec)?, "synthetic".to_string()),
    };
    let table = run_classification(&cfg.spec, &data, &sweep, &cfg.solver)?;
    let lines = preamble(
        "classify",
        &[
            ("data".into(), source),
            ("spec".into(), compact_json(&cfg.spec)),
            ("sweep".into(), compact_json(&sweep)),
            ("tol".into(), cfg.solver.tol.to_string()),
            ("max_outer_iters".into(), cfg.solver.max_outer_iters.to_string()),
        ],
    );
    emit(&table, &lines, &args.out)
}

fn write_trace<W: Write>(w: &mut W, solver: Solver, lines: &[String], trace: &DecompTrace) -> io::Result<()> {
    for line in lines {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "solver,iteration,metric")?;
    for (q, m) in trace.metric_per_outer_iter.iter().enumerate() {
        writeln!(w, "{solver},{q},{m}")?;
    }
    Ok(())
}

fn trace(args: &TraceArgs) -> CliResult<()> {
    let (x, source) = match (&args.input, &args.shape) {
        (Some(path), _) => (lt1::load_tensor(path).map_err(at_path(path))?, path.display().to_string()),
        (None, Some(shape)) => {
            if shape.is_empty() || shape.contains(&0) {
                return Err(arg_err(format!("invalid shape {shape:?}")));
            }
            (gaussian_tensor(shape, args.solver.seed), format!("gaussian {shape:?} seed {}", args.solver.seed))
        }
        (None, None) => return Err(arg_err("one of --input or --shape is required")),
    };
    let cfg = args.solver.config()?;
    tucker::validate_ranks(&x, &args.solver.ranks)?;
    let (_, tr) = args.solver.solver.decompose(&x, &args.solver.ranks, &cfg)?;
    let lines = preamble(
        "trace",
        &[
            ("tensor".into(), source),
            ("ranks".into(), format!("{:?}", args.solver.ranks)),
            ("tol".into(), cfg.tol.to_string()),
            ("max_outer_iters".into(), cfg.max_outer_iters.to_string()),
        ],
    );
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_trace(&mut w, args.solver.solver, &lines, &tr)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_trace(&mut w, args.solver.solver, &lines, &tr)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let Format::Csv = cli.format;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| arg_err(format!("cannot start {} threads: {e}", cli.threads)))?;
    match &cli.command {
        Command::Decompose(a) => decompose(a),
        Command::ReconSweep(a) => recon_sweep(a),
        Command::Classify(a) => classify(a),
        Command::Trace(a) => trace(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error[2]: {text}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.code)
        }
    }
}
