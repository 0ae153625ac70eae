//! `scriptline` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::contour::trace_boundaries;
use crate::corpus::{load_corpus, stratified_split, synth_corpus, SynthSpec};
use crate::eval::{evaluate, kfold_cross_validate};
use crate::featureset::{
    extract_features, feature_count, read_features, write_features, ExtractConfig, FeatureVector, LabelSet,
};
use crate::learn::{Kernel, ModelSpec, SvmParams, TrainedModel};
use crate::raster::{gaussian_smooth, otsu_binarize, GrayImage, InkPolarity};
use crate::spectral::{spectrum_images, DEFAULT_GRID};

#[derive(Debug, Parser)]
#[command(
    name = "scriptline",
    version,
    about = "Script identification of handwritten text-line images"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only report errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract feature vectors from a corpus laid out as root/<Label>/<name>.(pgm|png).
    Extract(ExtractArgs),
    /// Stratified train/test split of a feature CSV.
    Split(SplitArgs),
    /// Fit a classifier on a feature CSV.
    Train(TrainArgs),
    /// Classify an image or every row of a feature CSV.
    Predict(PredictArgs),
    /// Score a model on a labelled feature CSV.
    Evaluate(EvaluateArgs),
    /// Stratified k-fold cross-validation on a feature CSV.
    Crossval(CrossvalArgs),
    /// Render a synthetic pseudo-script corpus.
    Synth(SynthArgs),
    /// Write debug images for one line: binary, boundary overlay, chain codes, spectrum.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Polarity {
    Dark,
    Light,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Gaussian smoothing sigma.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Gaussian kernel size (odd).
    #[arg(long, default_value_t = 5)]
    kernel_size: usize,
    /// Ink polarity: dark ink on light paper, or the reverse.
    #[arg(long, value_enum, default_value_t = Polarity::Dark)]
    polarity: Polarity,
    /// Spectral grid size n (n x n blocks, 2n^2 features).
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

impl PreprocessArgs {
    fn config(&self) -> ExtractConfig {
        ExtractConfig {
            sigma: self.sigma,
            kernel_size: self.kernel_size,
            polarity: match self.polarity {
                Polarity::Dark => InkPolarity::DarkInk,
                Polarity::Light => InkPolarity::LightInk,
            },
            grid: self.grid,
        }
    }
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Comma separated label set, in tie-break order. Defaults to the eight
    /// built-in script names.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Accept labels outside the label set, appending them in order of appearance.
    #[arg(long)]
    allow_new_labels: bool,
}

impl LabelArgs {
    fn label_set(&self) -> anyhow::Result<LabelSet> {
        Ok(match &self.labels {
            Some(names) => LabelSet::new(names.iter().map(|n| n.trim().to_string()))?,
            None => LabelSet::default(),
        })
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Corpus root directory.
    root: PathBuf,
    /// Output feature CSV.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pre: PreprocessArgs,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Labelled feature CSV.
    features: PathBuf,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.65)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV for the training part.
    #[arg(long)]
    train: PathBuf,
    /// Output CSV for the test part.
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Svm,
    Knn,
    NaiveBayes,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Classifier.
    #[arg(long, value_enum, default_value_t = ModelKind::Svm)]
    model: ModelKind,
    /// Neighbours for k-NN.
    #[arg(short, long, default_value_t = 3)]
    k: usize,
    /// SVM soft-margin penalty.
    #[arg(short = 'c', long = "cost", default_value_t = 10.0)]
    c: f64,
    /// SVM kernel.
    #[arg(long, value_enum, default_value_t = KernelKind::Rbf)]
    kernel: KernelKind,
    /// RBF width; defaults to 1/dimension.
    #[arg(long)]
    gamma: Option<f64>,
    /// SMO stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// SMO iteration bound.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl ModelArgs {
    fn spec(&self, dim: usize) -> ModelSpec {
        match self.model {
            ModelKind::Knn => ModelSpec::Knn { k: self.k },
            ModelKind::NaiveBayes => ModelSpec::NaiveBayes,
            ModelKind::Svm => ModelSpec::Svm(SvmParams {
                c: self.c,
                kernel: match self.kernel {
                    KernelKind::Linear => Kernel::Linear,
                    KernelKind::Rbf => Kernel::Rbf {
                        gamma: self.gamma.unwrap_or(1.0 / dim as f64),
                    },
                },
                tol: self.tol,
                max_iter: self.max_iter,
            }),
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labelled feature CSV.
    features: PathBuf,
    /// Output model file.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file.
    model: PathBuf,
    /// A .pgm/.png image or a feature CSV.
    input: PathBuf,
    #[command(flatten)]
    pre: PreprocessArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Model file.
    model: PathBuf,
    /// Labelled feature CSV.
    features: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    matrix_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CrossvalArgs {
    /// Labelled feature CSV.
    features: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 384)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Destination directory.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct DumpArgs {
    /// Input image.
    image: PathBuf,
    /// Destination directory.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pre: PreprocessArgs,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Failures print one `error:` line on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return 2;
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) if is_broken_pipe(&e) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            1
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string().replace('\n', " ");
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // a second call in the same process keeps the first logger
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Extract(a) => extract(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Crossval(a) => crossval(a),
        Command::Synth(a) => synth(a),
        Command::Dump(a) => dump(a),
    }
}

fn extract(a: ExtractArgs) -> anyhow::Result<()> {
    let labels = a.labels.label_set()?;
    let corpus = load_corpus(&a.root, &labels, a.labels.allow_new_labels)
        .with_context(|| format!("loading corpus {}", a.root.display()))?;
    let rows = crate::corpus::extract_corpus(&corpus, &a.pre.config())?;
    write_features(&rows, &a.output)?;
    log::info!("{} feature vectors written to {}", rows.len(), a.output.display());
    Ok(())
}

/// The label column of a feature CSV, in order of first appearance.
fn labels_in_file(path: &Path) -> anyhow::Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut seen = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        if let Some(name) = record.get(0) {
            if !name.is_empty() && !seen.iter().any(|s| s == name) {
                seen.push(name.to_string());
            }
        }
    }
    Ok(seen)
}

fn read_labelled(path: &Path, args: &LabelArgs) -> anyhow::Result<(Vec<FeatureVector>, LabelSet)> {
    let mut labels = args.label_set()?;
    if args.allow_new_labels {
        for name in labels_in_file(path)? {
            labels.push(name)?;
        }
    }
    let rows = read_features(path, &labels)?;
    if rows.is_empty() {
        bail!("{} holds no feature rows", path.display());
    }
    if rows.iter().any(|r| r.label.is_none()) {
        bail!("{} has unlabelled rows", path.display());
    }
    Ok((rows, labels))
}

fn class_indices(rows: &[FeatureVector], labels: &LabelSet) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let name = r.label.as_ref().expect("rows checked as labelled");
            labels.index_of(name.as_str()).expect("labels parsed against the set")
        })
        .collect()
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let (rows, labels) = read_labelled(&a.features, &a.labels)?;
    let s = stratified_split(&class_indices(&rows, &labels), labels.names(), a.fraction, a.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>();
    write_features(&pick(&s.train), &a.train)?;
    write_features(&pick(&s.test), &a.test)?;
    log::info!("{} training rows, {} test rows", s.train.len(), s.test.len());
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let (rows, labels) = read_labelled(&a.features, &a.labels)?;
    let spec = a.model.spec(rows[0].values().len());
    let model = TrainedModel::fit(&spec, &rows, &labels)?;
    model.save(&a.output)?;
    log::info!(
        "{} model over {} labels written to {}",
        spec.name(),
        model.labels().len(),
        a.output.display()
    );
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if is_csv(&a.input) {
        // the label column is ignored, so parse against a permissive set
        let mut labels = model.labels().clone();
        for name in labels_in_file(&a.input)? {
            labels.push(name)?;
        }
        for row in read_features(&a.input, &labels)? {
            let p = model.predict(&row)?;
            let source = row.source.as_deref().unwrap_or("-");
            writeln!(out, "{source} {} {:.6}", p.label, p.scores[p.class])?;
        }
    } else {
        let config = a.pre.config();
        if feature_count(config.grid) != model.dim() {
            bail!(
                "grid {} gives {} features but the model expects {}",
                config.grid,
                feature_count(config.grid),
                model.dim()
            );
        }
        let img = GrayImage::load(&a.input)?;
        let fv = extract_features(&img, &config).with_context(|| format!("extracting {}", a.input.display()))?;
        let p = model.predict(&fv)?;
        writeln!(out, "{} {:.6}", p.label, p.scores[p.class])?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let rows = read_features(&a.features, model.labels()).with_context(|| {
        format!(
            "test set does not match the model's labels {:?}",
            model.labels().names()
        )
    })?;
    let report = evaluate(&model, &rows)?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.matrix_csv {
        fs::write(path, report.matrix.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn crossval(a: CrossvalArgs) -> anyhow::Result<()> {
    let (rows, labels) = read_labelled(&a.features, &a.labels)?;
    let spec = a.model.spec(rows[0].values().len());
    let cv = kfold_cross_validate(&spec, &rows, &labels, a.folds, a.seed)?;
    println!(
        "{}-fold cross-validation, accuracy per fold {:.4} +/- {:.4}",
        a.folds, cv.mean_accuracy, cv.std_accuracy
    );
    print!("{}", cv.pooled.to_text());
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut spec = SynthSpec::new(a.classes, a.per_class, a.seed, &a.labels.label_set()?)?;
    spec.width = a.width;
    spec.height = a.height;
    let corpus = synth_corpus(&spec, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    log::info!("{} images written to {}", corpus.entries.len(), a.output.display());
    Ok(())
}

fn dump(a: DumpArgs) -> anyhow::Result<()> {
    let config = a.pre.config();
    let img = GrayImage::load(&a.image)?;
    let smooth = gaussian_smooth(&img, config.sigma, config.kernel_size)?;
    let binary = otsu_binarize(&smooth, config.polarity);
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    smooth.write_pgm(a.output.join("smoothed.pgm"))?;
    binary.to_gray().write_pgm(a.output.join("binary.pgm"))?;
    let boundaries = trace_boundaries(&binary).with_context(|| format!("tracing {}", a.image.display()))?;
    boundaries.overlay(&binary).write_pgm(a.output.join("overlay.pgm"))?;
    let chain = a.output.join("chain.txt");
    fs::write(&chain, boundaries.to_text()).with_context(|| format!("writing {}", chain.display()))?;
    if let Some(bbox) = binary.bounding_box() {
        let (magnitude, phase) = spectrum_images(&binary.crop(bbox)?);
        magnitude.write_pgm(a.output.join("magnitude.pgm"))?;
        phase.write_pgm(a.output.join("phase.pgm"))?;
    }
    Ok(())
}
