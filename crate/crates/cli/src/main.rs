use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grkmeans::evaluation::{write_rows, CurveRow, ReportRow, TrialSource};
use grkmeans::rng::derive_seed;
use grkmeans::{
    cluster, error_rate, gen_gapratio_toy, gen_lego, gen_norm_toy, load_csv, run_benchmark,
    sweep_exponent, write_csv, Error, ExperimentConfig, FeatureMatrix, KMeansConfig, LabelColumn,
    LabeledDataset, LegoGenConfig, MethodSpec, WeightScheme, WeightVector,
};
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "grkm", version, about = "Gap-ratio weighted K-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster one dataset and write the model as JSON.
    Cluster(ClusterArgs),
    /// Run the 5-method x {scaled, raw} benchmark grid.
    Bench(BenchArgs),
    /// Failure and error rate as a function of the weight exponent.
    Sweep(SweepArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Generator {
    NormToy,
    GapratioToy,
    Lego,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Scheme {
    None,
    Cv,
    Gr,
}

impl From<Scheme> for WeightScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::None => WeightScheme::Uniform,
            Scheme::Cv => WeightScheme::Cv,
            Scheme::Gr => WeightScheme::Gr,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "source")]
struct SourceChoice {
    /// CSV file with one row per object.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Synthetic generator instead of a file.
    #[arg(long, value_enum)]
    gen: Option<Generator>,
}

#[derive(Args, Debug)]
struct SourceArgs {
    #[command(flatten)]
    choice: SourceChoice,
    /// Class label column of --input, by header name or zero-based index.
    #[arg(long)]
    label_col: Option<String>,
    /// Points per cluster for the toy generators.
    #[arg(long, default_value_t = 50)]
    n_per_cluster: usize,
    /// Amount subtracted from the blue channel of generated bricks.
    #[arg(long, default_value_t = 0.0)]
    blue_shift: f64,
}

#[derive(Args, Debug)]
struct SeedArgs {
    #[arg(long, env = "GRKM_SEED", default_value_t = 0)]
    seed: u64,
    /// K-means++ restarts per clustering; the lowest-inertia one is kept.
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl SeedArgs {
    fn kmeans(&self, k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig::new(k)
            .with_seed(seed)
            .with_n_init(self.n_init)
            .with_max_iter(self.max_iter)
            .with_tol(self.tol)
    }

    fn experiment(&self, runs: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(runs, self.seed);
        cfg.kmeans = self.kmeans(1, 0);
        cfg
    }
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Scheme::None)]
    scheme: Scheme,
    /// Weight exponent.
    #[arg(long, default_value_t = 1)]
    p: u32,
    /// Z-score each feature before applying the weights.
    #[arg(long)]
    scale: bool,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value_t = Scheme::Gr)]
    scheme: Scheme,
    #[arg(long, default_value_t = 1)]
    p_min: u32,
    #[arg(long, default_value_t = 20)]
    p_max: u32,
    /// Weight the raw features instead of z-scored ones.
    #[arg(long)]
    no_scale: bool,
    #[arg(long, default_value_t = 98)]
    runs: usize,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    gen: Generator,
    #[arg(long, default_value_t = 50)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 0.0)]
    blue_shift: f64,
    #[arg(long, env = "GRKM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Where the rows of each run come from.
enum Source {
    File(LabeledDataset),
    NormToy(usize),
    GapratioToy(usize),
    Lego(LegoGenConfig),
}

impl Source {
    fn new(args: &SourceArgs) -> CliResult<Self> {
        if let Some(path) = &args.choice.input {
            let label = args
                .label_col
                .as_deref()
                .map_or(LabelColumn::None, LabelColumn::parse);
            return Ok(Source::File(load_csv(path, &label)?));
        }
        let gen = args.choice.gen.expect("clap enforces one source");
        if args.label_col.is_some() {
            return Err(Failure::Usage("--label-col only applies to --input".into()));
        }
        if args.blue_shift != 0.0 && gen != Generator::Lego {
            return Err(Failure::Usage(
                "--blue-shift only applies to --gen lego".into(),
            ));
        }
        Ok(match gen {
            Generator::NormToy => Source::NormToy(args.n_per_cluster),
            Generator::GapratioToy => Source::GapratioToy(args.n_per_cluster),
            Generator::Lego => Source::Lego(LegoGenConfig {
                blue_shift: args.blue_shift,
                ..LegoGenConfig::default()
            }),
        })
    }

    fn has_labels(&self, args: &SourceArgs) -> bool {
        !matches!(self, Source::File(_)) || args.label_col.is_some()
    }

    fn name(&self, args: &SourceArgs) -> String {
        match self {
            Source::File(_) => args
                .choice
                .input
                .as_ref()
                .and_then(|p| p.file_stem())
                .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned()),
            Source::NormToy(_) => "norm-toy".into(),
            Source::GapratioToy(_) => "gapratio-toy".into(),
            Source::Lego(_) => "lego".into(),
        }
    }
}

impl TrialSource for Source {
    fn trial(&self, seed: u64) -> grkmeans::Result<Cow<'_, LabeledDataset>> {
        match self {
            Source::File(d) => Ok(Cow::Borrowed(d)),
            Source::NormToy(n) => gen_norm_toy(*n, seed).map(Cow::Owned),
            Source::GapratioToy(n) => gen_gapratio_toy(*n, seed).map(Cow::Owned),
            Source::Lego(cfg) => gen_lego(&cfg.with_seed(seed)).map(Cow::Owned),
        }
    }

    fn is_fixed(&self) -> bool {
        matches!(self, Source::File(_))
    }
}

fn open_output(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| {
            Error::Io {
                path: p.clone(),
                source,
            }
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> CliResult<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|source| io_error(path, source))?;
    Ok(())
}

fn io_error(path: Option<&PathBuf>, source: io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.cloned().unwrap_or_else(|| "<stdout>".into()),
        source,
    })
}

#[derive(Serialize)]
struct ClusterOutput<'a> {
    method: String,
    k: usize,
    seed: u64,
    weights: &'a WeightVector,
    assignments: &'a [usize],
    centroids: &'a FeatureMatrix,
    objective: f64,
    inertia: f64,
    n_iter: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_rate: Option<f64>,
}

fn cmd_cluster(args: &ClusterArgs) -> CliResult<()> {
    let source = Source::new(&args.source)?;
    let seed = args.seeds.seed;
    let data = source.trial(seed)?;
    let method = MethodSpec::new(args.scheme.into(), args.p, args.scale);
    let kmeans = args.seeds.kmeans(args.k, derive_seed(seed, 1));
    let result = cluster(data.features(), &method, &kmeans)?;
    let error_rate = if source.has_labels(&args.source) {
        Some(error_rate(
            &result.model.assignments,
            data.labels(),
            args.k,
        )?)
    } else {
        None
    };
    let out = ClusterOutput {
        method: method.label(),
        k: args.k,
        seed,
        weights: &result.weights,
        assignments: &result.model.assignments,
        centroids: &result.model.centroids,
        objective: result.model.objective,
        inertia: result.model.inertia,
        n_iter: result.model.n_iter,
        converged: result.model.converged,
        error_rate,
    };
    write_json(&out, args.output.as_ref())
}

fn require_labels(source: &Source, args: &SourceArgs) -> CliResult<()> {
    if source.has_labels(args) {
        Ok(())
    } else {
        Err(Failure::Usage(
            "error rates need ground truth: pass --label-col".into(),
        ))
    }
}

fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let source = Source::new(&args.source)?;
    require_labels(&source, &args.source)?;
    let report = run_benchmark(
        &source.name(&args.source),
        &source,
        &args.seeds.experiment(args.runs),
    )?;
    match args.format {
        Format::Json => write_json(&report, args.output.as_ref()),
        Format::Csv => {
            let rows: Vec<ReportRow> = report.cells.iter().map(ReportRow::from).collect();
            write_rows(&rows, open_output(args.output.as_ref())?)?;
            Ok(())
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    if args.p_min > args.p_max {
        return Err(Failure::Usage(format!(
            "--p-min {} exceeds --p-max {}",
            args.p_min, args.p_max
        )));
    }
    let source = Source::new(&args.source)?;
    require_labels(&source, &args.source)?;
    let reports = sweep_exponent(
        &source,
        args.scheme.into(),
        args.p_min..=args.p_max,
        !args.no_scale,
        &args.seeds.experiment(args.runs),
    )?;
    let rows: Vec<CurveRow> = reports.iter().map(CurveRow::from).collect();
    write_rows(&rows, open_output(args.output.as_ref())?)?;
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let data = match args.gen {
        Generator::NormToy => gen_norm_toy(args.n_per_cluster, args.seed)?,
        Generator::GapratioToy => gen_gapratio_toy(args.n_per_cluster, args.seed)?,
        Generator::Lego => gen_lego(&LegoGenConfig {
            blue_shift: args.blue_shift,
            seed: args.seed,
            ..LegoGenConfig::default()
        })?,
    };
    let mut out = open_output(args.output.as_ref())?;
    write_csv(&data, &mut out)?;
    out.flush()
        .map_err(|source| io_error(args.output.as_ref(), source))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Degenerate(_) => EXIT_DEGENERATE,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
