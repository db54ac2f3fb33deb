use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use featrestrict::error::{Error, Result};
use featrestrict::histogram::HistogramSpec;
use featrestrict::io::{load_features, FeatureFormat};
use featrestrict::lab::{run_experiment, Condition, ExperimentConfig, ExperimentReport};
use featrestrict::numeric::DEFAULT_FD_STEP;
use featrestrict::prdc::{compute_prdc, PrdcConfig, PrdcScores, DEFAULT_K};
use featrestrict::report::{emit_report, ReportInput};
use featrestrict::restriction::{
    batch_kl, check_gradients, combined_restriction, conventional_kl_features, correlation_loss,
    histogram_imitation_loss,
};
use featrestrict::translation::{total_loss, LossComponents, LossWeights};

#[derive(Parser)]
#[command(name = "featrestrict", version, about = "Encoded-feature restriction losses, PRDC and the toy lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Loss evaluation on feature files or component sets.
    #[command(subcommand)]
    Losses(LossesCommand),
    /// Precision / recall / density / coverage of fake features against real ones.
    Prdc(PrdcArgs),
    /// Runs the toy lab and writes a report bundle.
    TrainToy(TrainToyArgs),
    /// Finite-difference check of every restriction loss gradient.
    Gradcheck(GradcheckArgs),
    /// Re-renders a bundle from a saved report.json or scores.json.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum LossesCommand {
    /// Prints {kl, bkl, corr, hist, combined} for a feature batch.
    Eval(EvalArgs),
    /// Prints the weighted total of a component set.
    Total(TotalArgs),
}

#[derive(Args)]
struct FeatureInput {
    /// Feature file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FeatureFormat>,
    /// Skip the first CSV line.
    #[arg(long)]
    header: bool,
}

impl FeatureInput {
    fn load(&self, path: &Path) -> Result<featrestrict::FeatureBatch> {
        let format = self.format.unwrap_or_else(|| FeatureFormat::from_path(path));
        load_features(path, format, self.header)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// `default` or a JSON file with {max, min, bins, sigma}.
    #[arg(long, default_value = "default")]
    spec: String,
    /// Preset (`default`, `proposed`, `conventional`, `zeros`) or a JSON file.
    #[arg(long, default_value = "default")]
    weights: String,
    #[command(flatten)]
    features: FeatureInput,
}

#[derive(Args)]
struct TotalArgs {
    #[arg(long)]
    components: PathBuf,
    #[arg(long, default_value = "default")]
    weights: String,
}

#[derive(Args)]
struct PrdcArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    fake: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureInput,
}

#[derive(Args)]
struct TrainToyArgs {
    #[arg(long, default_value = "proposed")]
    condition: String,
    /// Pretrain the encoder as a classifier first.
    #[arg(long)]
    pretrain: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Full experiment config as JSON; `--seed` and `--condition` still apply.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    step: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn resolve_spec(arg: &str) -> Result<HistogramSpec> {
    match arg {
        "default" => Ok(HistogramSpec::default()),
        path => read_json(Path::new(path)),
    }
}

fn resolve_weights(arg: &str) -> Result<LossWeights> {
    match LossWeights::preset(arg) {
        Some(w) => Ok(w),
        None => {
            let w: LossWeights = read_json(Path::new(arg))?;
            w.validate()?;
            Ok(w)
        }
    }
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn losses_eval(args: &EvalArgs) -> Result<()> {
    let b = args.features.load(&args.input)?;
    let spec = resolve_spec(&args.spec)?;
    let weights = resolve_weights(&args.weights)?;
    let corr = if b.d() >= 2 {
        Some(correlation_loss(&b)?.value)
    } else {
        None
    };
    print_json(&json!({
        "kl": conventional_kl_features(&b).value,
        "bkl": batch_kl(&b)?.value,
        "corr": corr,
        "hist": histogram_imitation_loss(&b, &spec)?.value,
        "combined": combined_restriction(&b, &weights, &spec)?.value,
    }))
}

fn losses_total(args: &TotalArgs) -> Result<()> {
    let c: LossComponents = read_json(&args.components)?;
    let w = resolve_weights(&args.weights)?;
    print_json(&json!({ "total": total_loss(&c, &w)? }))
}

fn prdc(args: &PrdcArgs) -> Result<()> {
    let real = args.features.load(&args.real)?;
    let fake = args.features.load(&args.fake)?;
    let scores = compute_prdc(&real, &fake, &PrdcConfig::new(args.k)?)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(&scores)?;
    text.push('\n');
    fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))?;
    print_json(&serde_json::to_value(scores)?)
}

fn train_toy(args: &TrainToyArgs) -> Result<()> {
    let condition: Condition = args.condition.parse()?;
    let mut cfg = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::new(condition, args.seed),
    };
    if args.config.is_some() && cfg.restriction.condition != condition {
        cfg.restriction.weights = condition.weights();
        cfg.restriction.step_size = condition.default_step_size();
    }
    cfg.restriction.condition = condition;
    cfg.restriction.seed = args.seed;
    cfg.pretrain.seed = args.seed;
    if let Some(steps) = args.steps {
        cfg.restriction.steps = steps;
    }
    if let Some(step_size) = args.step_size {
        cfg.restriction.step_size = step_size;
    }
    let report = run_experiment(&cfg, args.pretrain)?;
    let bundle = emit_report(
        &ReportInput::Experiment {
            report: &report,
            config: Some(&cfg),
        },
        &args.out,
    )?;
    print_json(&bundle.summary)
}

fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    let r = check_gradients(
        args.seed,
        args.batches,
        args.n,
        args.d,
        args.step,
        &HistogramSpec::default(),
    )?;
    print_json(&serde_json::to_value(r)?)
}

fn report(args: &ReportArgs) -> Result<()> {
    let value: Value = read_json(&args.input)?;
    let bundle = if value.get("stats").is_some() {
        let r: ExperimentReport = serde_json::from_value(value)?;
        emit_report(
            &ReportInput::Experiment {
                report: &r,
                config: None,
            },
            &args.out,
        )?
    } else {
        let s: PrdcScores = serde_json::from_value(value)?;
        emit_report(&ReportInput::Prdc(&s), &args.out)?
    };
    print_json(&bundle.summary)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Losses(LossesCommand::Eval(a)) => losses_eval(&a),
        Command::Losses(LossesCommand::Total(a)) => losses_total(&a),
        Command::Prdc(a) => prdc(&a),
        Command::TrainToy(a) => train_toy(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::Report(a) => report(&a),
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                Error::Io { .. } => "io",
                Error::Parse { .. } | Error::Json(_) => "parse",
                Error::Diverged { .. } => "diverged",
                _ => "invalid",
            };
            fail(kind, e.to_string())
        }
    }
}
