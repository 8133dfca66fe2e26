//! The `kan-aft` command line: simulate, train, evaluate, extract, diagram.
//!
//! Every command can read a JSON run configuration with `--config`; explicit flags
//! override values from the file. Each artifact records the tool version and the
//! effective configuration that produced it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split, CsvSchema, SyntheticSpec, Truth};
use crate::diagram::render_svg;
use crate::error::{KanAftError, Result};
use crate::metrics::MetricReport;
use crate::symbolic::{extract_formula, SymbolicFormula};
use crate::trainers::{fit, FitConfig, Strategy, TrainedModel};
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(name = "kan-aft", version, about = "KAN accelerated failure time models for censored survival data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic censored dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model on a CSV dataset and report train/test metrics.
    Train(TrainArgs),
    /// Score a saved model on a CSV dataset.
    Evaluate(EvaluateArgs),
    /// Fit closed-form functions to the edges of a saved model.
    Extract(ExtractArgs),
    /// Draw a saved model as an SVG network diagram.
    Diagram(DiagramArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    #[arg(long)]
    pub time_col: Option<String>,
    #[arg(long)]
    pub event_col: Option<String>,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub truth: Option<Truth>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub censor_mean: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Mask edges whose mean |phi| on the training split is below this threshold.
    #[arg(long)]
    pub prune: Option<f64>,
    /// Where to write the metric report (default: next to the model).
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagramArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: PathBuf,
}

/// File-level configuration shared by all commands. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub synthetic: SyntheticSpec,
    pub schema: CsvSchema,
    pub fit: FitConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub test_fraction: f64,
    pub prune: Option<f64>,
    pub metrics_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            synthetic: SyntheticSpec::default(),
            schema: CsvSchema::default(),
            fit: FitConfig::default(),
            data: None,
            out: None,
            test_fraction: 0.25,
            prune: None,
            metrics_out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text)
            .map_err(|e| KanAftError::Config(format!("{}: {e}", path.display())))
    }

    fn from_common(common: &CommonArgs) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.synthetic.seed = seed;
            cfg.fit.seed = seed;
        }
        if let Some(out) = &common.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }

    fn apply_schema(&mut self, args: &SchemaArgs) {
        if let Some(t) = &args.time_col {
            self.schema.time_column = t.clone();
        }
        if let Some(e) = &args.event_col {
            self.schema.event_column = e.clone();
        }
        if let Some(c) = &args.covariates {
            self.schema.covariate_columns = c.clone();
        }
    }

    fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| KanAftError::Config("an output path is required (--out)".into()))
    }

    fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| KanAftError::Config("a data file is required (--data)".into()))
    }
}

/// Envelope for JSON artifacts.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub version: String,
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

fn artifact<T>(config: &RunConfig, body: T) -> Artifact<T> {
    Artifact {
        version: VERSION.to_string(),
        config: config.clone(),
        body,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rows: usize,
    pub events: usize,
    pub censoring_fraction: f64,
    pub csv: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub strategy: Strategy,
    pub train: MetricReport,
    pub test: MetricReport,
    pub n_train: usize,
    pub n_test: usize,
    pub bj_rounds: usize,
    pub transform_alpha: Option<f64>,
    pub active_edges: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_version: String,
    pub strategy: Strategy,
    pub report: MetricReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FormulaArtifact {
    pub formula: SymbolicFormula,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `dir/name.ext` becomes `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        KanAftError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::from_json(&read_text(path)?)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = RunConfig::from_common(&args.common)?;
    if let Some(t) = args.truth {
        cfg.synthetic.truth = t;
    }
    if let Some(n) = args.n {
        cfg.synthetic.n = n;
    }
    if let Some(m) = args.censor_mean {
        cfg.synthetic.censor_mean = m;
    }
    if let Some(s) = args.noise_sd {
        cfg.synthetic.noise_sd = s;
    }
    let out = cfg.require_out()?.to_path_buf();
    let data = crate::data::generate(&cfg.synthetic)?;
    data.save_csv(&out)?;
    let summary = SimulationSummary {
        rows: data.len(),
        events: data.n_events(),
        censoring_fraction: data.censoring_fraction(),
        csv: out.clone(),
    };
    write_json(&sibling(&out, "meta.json"), &artifact(&cfg, &summary))?;
    println!(
        "wrote {} rows to {} ({} events, censoring fraction {:.3})",
        summary.rows,
        out.display(),
        summary.events,
        summary.censoring_fraction
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::from_common(&args.common)?;
    cfg.apply_schema(&args.schema);
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = args.strategy {
        cfg.fit.strategy = s;
    }
    if let Some(e) = args.epochs {
        cfg.fit.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.fit.learning_rate = lr;
    }
    if let Some(g) = args.grid {
        cfg.fit.grid = g;
    }
    if let Some(k) = args.degree {
        cfg.fit.degree = k;
    }
    if let Some(f) = args.test_fraction {
        cfg.test_fraction = f;
    }
    if let Some(p) = args.prune {
        cfg.prune = Some(p);
    }
    if let Some(m) = &args.metrics_out {
        cfg.metrics_out = Some(m.clone());
    }
    cfg.fit.validate()?;
    let out = cfg.require_out()?.to_path_buf();
    let loaded = load_csv(cfg.require_data()?, &cfg.schema)?;
    if loaded.dropped_rows > 0 {
        eprintln!("skipped {} rows with missing values", loaded.dropped_rows);
    }
    let (train, test) = split(&loaded.dataset, cfg.test_fraction, cfg.fit.seed)?;
    let mut model = fit(&train, &cfg.fit)?;
    if let Some(theta) = cfg.prune {
        model = model.prune(theta, &train)?;
    }
    let report = TrainReport {
        strategy: model.strategy,
        train: model.evaluate(&train)?,
        test: model.evaluate(&test)?,
        n_train: train.len(),
        n_test: test.len(),
        bj_rounds: model.bj_convergence_trace.len(),
        transform_alpha: model.transform_alpha,
        active_edges: model.network.layers.iter().map(|l| l.active_count()).sum(),
    };
    std::fs::write(&out, model.to_json()? + "\n")?;
    let metrics_path = cfg
        .metrics_out
        .clone()
        .unwrap_or_else(|| sibling(&out, "metrics.json"));
    write_json(&metrics_path, &artifact(&cfg, &report))?;
    println!(
        "{:<22} {:>9} {:>9} {:>10} {:>10}",
        "strategy", "C train", "C test", "MSE train", "MSE test"
    );
    println!(
        "{:<22} {:>9.4} {:>9.4} {:>10.4} {:>10.4}",
        report.strategy.label(),
        report.train.c_index,
        report.test.c_index,
        report.train.mse_log,
        report.test.mse_log
    );
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = RunConfig::from_common(&args.common)?;
    cfg.apply_schema(&args.schema);
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    let model = load_model(&args.model)?;
    cfg.fit = model.config.clone();
    let loaded = load_csv(cfg.require_data()?, &cfg.schema)?;
    let report = model.evaluate(&loaded.dataset)?;
    println!(
        "{} C-index {:.4}  MSE(log T) {:.4}  comparable pairs {}  uncensored {}",
        model.strategy.label(),
        report.c_index,
        report.mse_log,
        report.n_comparable_pairs,
        report.n_uncensored
    );
    if let Some(out) = &cfg.out {
        let body = EvaluationReport {
            model_version: model.version.clone(),
            strategy: model.strategy,
            report,
        };
        write_json(out, &artifact(&cfg, &body))?;
    }
    Ok(())
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let mut cfg = RunConfig::from_common(&args.common)?;
    let model = load_model(&args.model)?;
    cfg.fit = model.config.clone();
    let out = cfg.require_out()?.to_path_buf();
    let formula = extract_formula(&model)?;
    write_json(&out, &artifact(&cfg, FormulaArtifact { formula: formula.clone() }))?;
    std::fs::write(sibling(&out, "txt"), format!("{}\n", formula.rendered))?;
    println!("{}", formula.rendered);
    Ok(())
}

pub fn cmd_diagram(args: &DiagramArgs) -> Result<()> {
    let cfg = RunConfig::from_common(&args.common)?;
    let model = load_model(&args.model)?;
    let out = cfg.require_out()?;
    std::fs::write(out, render_svg(&model)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Diagram(a) => cmd_diagram(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
