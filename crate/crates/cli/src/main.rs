use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use exmlds::data::{build_label_cooccurrence, write_mask_manifest};
use exmlds::predict::{predict_batch, write_score_dump};
use exmlds::{
    evaluate, load_model, mask_labels, read_xmlc_file, save_model, train, write_xmlc_dataset,
    Algorithm, Dataset, HyperParams, JointWeights, Predictor, Similarity, TrainLog, TrainOptions,
    TrainedModel, UpdateMode,
};

mod repro;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "exmlds",
    version,
    about = "Extreme multi-label learning with SGNS-style label embeddings"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded, reproducible execution everywhere.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to --model.
    Train(TrainCmd),
    /// Print the top-ranked labels for every test point.
    Predict(PredictCmd),
    /// Report P@{1,3,5} and nDCG@{1,3,5} on a labeled test set.
    Eval(EvalCmd),
    /// Hide a fraction of the training labels.
    Mask(MaskCmd),
    /// Run one of the bundled experiments.
    Repro(repro::ReproCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Dot,
    Cosine,
}

impl From<SimilarityArg> for Similarity {
    fn from(s: SimilarityArg) -> Self {
        match s {
            SimilarityArg::Dot => Similarity::Dot,
            SimilarityArg::Cosine => Similarity::Cosine,
        }
    }
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value = "exmlds1", value_parser = parse_algo)]
    algo: Algorithm,
    /// Embedding dimension.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Neighbors per instance for context pairs.
    #[arg(long, default_value_t = 10)]
    knn_context: usize,
    /// Neighbors averaged at prediction.
    #[arg(long, default_value_t = 10)]
    knn_predict: usize,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 15)]
    neg: usize,
    /// SPPMI shift k in log k (defaults to --neg).
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    mu1: f64,
    #[arg(long, default_value_t = 1.0)]
    mu2: f64,
    #[arg(long, default_value_t = 1.0)]
    mu3: f64,
    /// Number of instance partitions (default depends on data size).
    #[arg(long)]
    clusters: Option<usize>,
    /// Ridge weight (default scales with the features).
    #[arg(long)]
    lambda: Option<f64>,
    /// SGD epochs.
    #[arg(long, default_value_t = 35)]
    iters: usize,
    /// Learning rate (default depends on --algo).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum, default_value = "dot")]
    similarity: SimilarityArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Labels returned per point.
    #[arg(long, default_value_t = 5)]
    topk: usize,
    /// Keep only mutual top-k entries of the gram matrix.
    #[arg(long)]
    knn_sparsify: bool,
    /// Zero the gram diagonal.
    #[arg(long)]
    zero_diagonal: bool,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: exmlds::Error| e.to_string())
}

impl ParamArgs {
    fn params(&self) -> HyperParams {
        let base = HyperParams::for_algorithm(self.algo);
        HyperParams {
            algo: self.algo,
            dim: self.dim,
            k_context: self.knn_context,
            k_predict: self.knn_predict,
            top_p: self.topk,
            negatives: self.neg,
            shift: self.shift.unwrap_or(self.neg as f64),
            mu: JointWeights {
                mu1: self.mu1,
                mu2: self.mu2,
                mu3: self.mu3,
            },
            lambda: self.lambda,
            clusters: self.clusters,
            iterations: self.iters,
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            similarity: self.similarity.into(),
            seed: self.seed,
            knn_sparsify: self.knn_sparsify,
            zero_diagonal: self.zero_diagonal,
            ..base
        }
    }
}

#[derive(Args)]
struct TrainCmd {
    /// Training data in XMLC format.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// XMLC file whose label co-occurrence is the label correlation matrix
    /// (exmlds3; defaults to the training labels).
    #[arg(long)]
    side_labels: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct PredictCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Labels per point (defaults to the model's setting).
    #[arg(long)]
    topk: Option<usize>,
    /// Neighbors averaged (defaults to the model's setting).
    #[arg(long)]
    knn_predict: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    knn_predict: Option<usize>,
    /// Per-point score dump (TSV: point, label, score).
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct MaskCmd {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Masked dataset output.
    #[arg(long)]
    out: PathBuf,
    /// Hidden-entry manifest (defaults to <out>.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Error that should end the process with a usage exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<exmlds::Error>() {
            return if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_DATA;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub(crate) struct Exec {
    pub deterministic: bool,
    pub threads: usize,
}

impl Exec {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            mode: if self.deterministic || self.threads <= 1 {
                UpdateMode::Deterministic
            } else {
                UpdateMode::Async {
                    threads: self.threads,
                }
            },
            parallel_clusters: !self.deterministic,
            ..TrainOptions::default()
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = match (cli.deterministic, cli.threads) {
        (true, _) => 1,
        (false, Some(0)) => return Err(usage("--threads must be >= 1")),
        (false, Some(t)) => t,
        (false, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    let exec = Exec {
        deterministic: cli.deterministic,
        threads,
    };
    match cli.command {
        Command::Train(c) => cmd_train(c, &exec),
        Command::Predict(c) => cmd_predict(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Mask(c) => cmd_mask(c),
        Command::Repro(c) => repro::run(c, &exec),
    }
}

pub(crate) fn read_data(path: &Path) -> anyhow::Result<Dataset> {
    read_xmlc_file(path).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn checked_params(args: &ParamArgs) -> anyhow::Result<HyperParams> {
    let p = args.params();
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

fn cmd_train(c: TrainCmd, exec: &Exec) -> anyhow::Result<()> {
    let params = checked_params(&c.params)?;
    let data = read_data(&c.data)?;
    log::info!(
        "{}: {} instances, {} features, {} labels",
        c.data.display(),
        data.len(),
        data.num_features(),
        data.num_labels()
    );
    let side = match &c.side_labels {
        Some(p) => {
            if params.algo != Algorithm::Exmlds3 {
                log::warn!("--side-labels only affects exmlds3");
            }
            let s = read_data(p)?;
            if s.num_labels() != data.num_labels() {
                bail!(exmlds::Error::DimensionMismatch {
                    context: "side-information labels",
                    expected: data.num_labels(),
                    actual: s.num_labels(),
                });
            }
            Some(build_label_cooccurrence(&s.labels))
        }
        None => None,
    };
    let (model, log) = train(&data, &params, side.as_ref(), &exec.train_options())?;
    save_model(&c.model, &model).with_context(|| format!("writing {}", c.model.display()))?;
    println!("training time: {:.3} s", log.elapsed.as_secs_f64());
    write_sidecar(&c.model, &model, &log)?;
    Ok(())
}

/// Timing and per-cluster details, kept out of the model so that model files
/// are reproducible.
fn write_sidecar(model_path: &Path, model: &TrainedModel, log: &TrainLog) -> anyhow::Result<()> {
    let mut path = model_path.as_os_str().to_owned();
    path.push(".log");
    let mut w = BufWriter::new(File::create(&path)?);
    let stamp = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    writeln!(w, "written_unix {stamp}")?;
    writeln!(w, "algo {}", model.params.algo)?;
    writeln!(w, "train_seconds {:.6}", log.elapsed.as_secs_f64())?;
    for c in &log.clusters {
        writeln!(
            w,
            "cluster {} members {} matrix_order {} rank {} lambda {:e} seconds {:.6}",
            c.cluster,
            c.members,
            c.matrix_order.map_or("-".into(), |o| o.to_string()),
            c.rank,
            c.lambda,
            c.elapsed.as_secs_f64()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<TrainedModel> {
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

fn read_test(path: &Path) -> anyhow::Result<Dataset> {
    let data = read_data(path)?;
    if data.is_empty() {
        bail!(exmlds::Error::InvalidArgument(format!(
            "{} has no test points",
            path.display()
        )));
    }
    Ok(data)
}

fn cmd_predict(c: PredictCmd) -> anyhow::Result<()> {
    let model = load(&c.model)?;
    let test = read_test(&c.test)?;
    let mut p = c.topk.unwrap_or(model.params.top_p);
    if p == 0 {
        return Err(usage("--topk must be >= 1"));
    }
    if p > model.num_labels {
        log::warn!(
            "--topk {p} exceeds the {} labels; clipping",
            model.num_labels
        );
        p = model.num_labels;
    }
    let k = c.knn_predict.unwrap_or(model.params.k_predict);
    let pred = Predictor::new(&model).with_k(k);
    let ranked = predict_batch(&pred, &test.features, p)?;
    let out: Box<dyn Write> = match &c.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    for (i, r) in ranked.iter().enumerate() {
        write!(out, "{i}:")?;
        for (l, s) in r {
            write!(out, " {l}:{s}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(c: EvalCmd) -> anyhow::Result<()> {
    let model = load(&c.model)?;
    let test = read_test(&c.test)?;
    let k = c.knn_predict.unwrap_or(model.params.k_predict);
    let pred = Predictor::new(&model).with_k(k);
    let (report, ranked) = evaluate(&pred, &test.features, &test.labels)?;
    print!("{report}");
    if let Some(path) = &c.dump {
        write_score_dump(BufWriter::new(File::create(path)?), &ranked)?;
    }
    Ok(())
}

fn cmd_mask(c: MaskCmd) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&c.fraction) {
        return Err(usage(format!("--fraction {} outside [0, 1]", c.fraction)));
    }
    let data = read_data(&c.data)?;
    let mask = mask_labels(&data.labels, c.fraction, c.seed)?;
    let masked = data.with_labels(mask.masked.clone())?;
    let mut out = BufWriter::new(File::create(&c.out)?);
    write_xmlc_dataset(&masked, &mut out)?;
    out.flush()?;
    let manifest = c.manifest.clone().unwrap_or_else(|| {
        let mut p = c.out.as_os_str().to_owned();
        p.push(".manifest");
        p.into()
    });
    let mut m = BufWriter::new(File::create(&manifest)?);
    write_mask_manifest(&mask, &mut m)?;
    m.flush()?;
    println!(
        "hid {} of {} label entries; kept {}",
        mask.hidden.len(),
        data.labels.nnz(),
        mask.masked.nnz()
    );
    Ok(())
}
