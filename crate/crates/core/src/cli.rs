//! The `csaug` command line.
//!
//! Exit codes: 0 success, 1 data error, 2 translation provider failure,
//! 64 usage or configuration error. Data goes to stdout, diagnostics to
//! stderr.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::augment::{augment_dataset_with, plan_dataset, write_audit, AugmentationConfig, Level, FAMILIES};
use crate::chunker::slot_chunks;
use crate::corpus::{compute_stats, read_dataset, render_dataset, Dataset, Format, ReadOptions, Split};
use crate::error::{Error, Result};
use crate::toymodel::{
    load_model, run_zero_shot, save_model, FeatureExtractor, JointTrainingConfig, SyntheticCorpus, SyntheticCorpusSpec,
    ToyJointModel, ZeroShotConfig,
};
use crate::translate::open_provider;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "csaug",
    version,
    about = "Code-switching augmentation for intent/slot corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write k code-switched copies of every utterance.
    Augment(AugmentArgs),
    /// Print corpus statistics as TSV.
    Stats(InputArgs),
    /// Check that a dataset parses and is BIO-valid.
    Validate(InputArgs),
    /// Print the chunk decomposition of every utterance.
    Chunks(ChunksArgs),
    /// Print the language family presets.
    Families,
    /// Train the toy joint model.
    ToyTrain(ToyTrainArgs),
    /// Evaluate a trained toy model.
    ToyEval(ToyEvalArgs),
    /// Write a synthetic multilingual corpus and its lexicons.
    ToyGenerate(ToyGenerateArgs),
    /// Run the zero-shot transfer experiment on synthetic corpora.
    ToyExperiment(ToyExperimentArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    path: PathBuf,
    #[arg(long, default_value = "multiatis-tsv")]
    format: String,
    /// Rewrite dangling I- tags to B- instead of rejecting them.
    #[arg(long)]
    repair: bool,
}

#[derive(Debug, Args)]
struct ChunksArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Only show this utterance.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Debug, Args, Default)]
struct AugmentArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Source language of the input.
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// `lex:<dir>` or `http:<base-url>`.
    #[arg(long)]
    provider: Option<String>,
    /// Comma-separated sampling pool.
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// Comma-separated languages never sampled.
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    #[arg(long)]
    family: Option<String>,
    /// Leave the original utterances out of the output.
    #[arg(long)]
    no_original: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// JSON-lines audit log path.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Print the language plan without translating.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    repair: bool,
    /// TOML config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    format: Option<String>,
    lang: Option<String>,
    level: Option<String>,
    k: Option<usize>,
    provider: Option<String>,
    languages: Option<Vec<String>>,
    exclude: Option<Vec<String>>,
    family: Option<String>,
    include_original: Option<bool>,
    seed: Option<u64>,
    workers: Option<usize>,
    audit: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    repair: Option<bool>,
}

/// Fully resolved `augment` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub language: String,
    pub provider: Option<String>,
    pub augmentation: AugmentationConfig,
    pub workers: usize,
    pub audit: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub repair: bool,
}

impl CliConfig {
    fn describe(&self) -> String {
        let list = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let a = &self.augmentation;
        [
            format!("input = {}", self.input.display()),
            format!("output = {}", opt(&self.output)),
            format!("format = {}", self.format),
            format!("lang = {}", self.language),
            format!("level = {}", a.level),
            format!("k = {}", a.k),
            format!("provider = {}", self.provider.as_deref().unwrap_or("-")),
            format!("languages = {}", list(&a.allowed_languages)),
            format!("exclude = {}", list(&a.excluded_languages)),
            format!("family = {}", a.family.as_deref().unwrap_or("-")),
            format!("include_original = {}", a.include_original),
            format!("seed = {}", a.seed),
            format!("workers = {}", self.workers),
            format!("audit = {}", opt(&self.audit)),
            format!("cache_dir = {}", opt(&self.cache_dir)),
            format!("repair = {}", self.repair),
        ]
        .join("\n")
    }
}

fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))
}

fn resolve_augment(args: AugmentArgs) -> Result<CliConfig> {
    let file = match &args.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| Error::Configuration("no input file (use -i or `input` in the config file)".into()))?;
    let format: Format = args
        .format
        .or(file.format)
        .as_deref()
        .unwrap_or("multiatis-tsv")
        .parse()?;
    let level: Level = args.level.or(file.level).as_deref().unwrap_or("chunk").parse()?;
    let k = args.k.or(file.k).unwrap_or(5);
    if k == 0 {
        return Err(Error::Configuration("k must be positive".into()));
    }
    let workers = args.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::Configuration("workers must be positive".into()));
    }
    let set = |v: Option<Vec<String>>| -> BTreeSet<String> {
        v.unwrap_or_default()
            .into_iter()
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect()
    };
    let include_original = if args.no_original {
        false
    } else {
        file.include_original.unwrap_or(true)
    };
    Ok(CliConfig {
        input,
        output: args.output.or(file.output),
        format,
        language: args.lang.or(file.lang).unwrap_or_else(|| "en".into()),
        provider: args.provider.or(file.provider),
        augmentation: AugmentationConfig {
            level,
            k,
            allowed_languages: set(args.languages.or(file.languages)),
            excluded_languages: set(args.exclude.or(file.exclude)),
            family: args.family.or(file.family),
            include_original,
            seed: args.seed.or(file.seed).unwrap_or(0),
        },
        workers,
        audit: args.audit.or(file.audit),
        cache_dir: args.cache_dir.or(file.cache_dir),
        repair: args.repair || file.repair.unwrap_or(false),
    })
}

fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_provider_failure() => EXIT_PROVIDER,
        Error::Configuration(_) | Error::UnknownFormat(_) | Error::UnknownFamily(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = dispatch(cli.command, &mut out).and_then(|()| out.flush().map_err(|e| Error::io("<stdout>", e)));
    match result {
        Ok(()) => EXIT_OK,
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("csaug: error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Augment(args) => cmd_augment(args, out),
        Command::Stats(args) => cmd_stats(&args, out),
        Command::Validate(args) => cmd_validate(&args),
        Command::Chunks(args) => cmd_chunks(&args, out),
        Command::Families => cmd_families(out),
        Command::ToyTrain(args) => cmd_toy_train(&args, out),
        Command::ToyEval(args) => cmd_toy_eval(&args, out),
        Command::ToyGenerate(args) => cmd_toy_generate(&args),
        Command::ToyExperiment(args) => cmd_toy_experiment(&args, out),
    }
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn read_input(args: &InputArgs) -> Result<Dataset> {
    let opts = ReadOptions {
        format: args.format.parse()?,
        repair: args.repair,
        ..ReadOptions::default()
    };
    read_dataset(&args.path, &opts)
}

fn cmd_augment(args: AugmentArgs, out: &mut dyn Write) -> Result<()> {
    let dry_run = args.dry_run;
    let cfg = resolve_augment(args)?;
    eprintln!("{}", cfg.describe());
    let ds = read_dataset(
        &cfg.input,
        &ReadOptions {
            format: cfg.format,
            repair: cfg.repair,
            language: cfg.language.clone(),
            split: Split::Train,
        },
    )?;

    if dry_run {
        let languages = match cfg.augmentation.effective_languages() {
            Ok(langs) => langs,
            Err(_) if cfg.provider.is_some() => {
                let provider = open_provider(cfg.provider.as_deref().unwrap(), None)?;
                cfg.augmentation.resolve_languages(provider.as_ref())?
            }
            Err(e) => return Err(e),
        };
        let plans = plan_dataset(&ds, &cfg.augmentation, &languages)?;
        let mut requests = 0;
        for (id, segments) in &plans {
            let plan: Vec<String> = segments
                .iter()
                .map(|s| format!("{}..{}:{}", s.chunk.start, s.chunk.end, s.language))
                .collect();
            requests += segments.iter().filter(|s| s.language != cfg.language).count();
            writeln!(out, "{id}\t{}", plan.join(" ")).map_err(stdout_err)?;
        }
        eprintln!(
            "dry run: {} copies, {} translation requests before caching",
            plans.len(),
            requests
        );
        return Ok(());
    }

    let spec = cfg
        .provider
        .as_deref()
        .ok_or_else(|| Error::Configuration("no provider (use --provider lex:<dir> or http:<url>)".into()))?;
    let provider = open_provider(spec, cfg.cache_dir.as_deref())?;
    let augmented = augment_dataset_with(&ds, &cfg.augmentation, provider.as_ref(), cfg.workers)?;
    let rendered = render_dataset(&augmented.dataset, cfg.format);
    match &cfg.output {
        Some(path) => fs::write(path, rendered).map_err(|e| Error::io(path, e))?,
        None => out.write_all(rendered.as_bytes()).map_err(stdout_err)?,
    }
    if let Some(path) = &cfg.audit {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_audit(&mut w, &ds, &augmented, cfg.augmentation.include_original)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    eprintln!(
        "augmented {} utterances into {} rows",
        ds.len(),
        augmented.dataset.len()
    );
    Ok(())
}

fn cmd_stats(args: &InputArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_input(args)?;
    let s = compute_stats(&ds);
    writeln!(out, "utterances\ttokens\tintents\tslot_types\tslot_tags").map_err(stdout_err)?;
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}",
        s.utterance_count, s.token_count, s.intent_count, s.slot_type_count, s.slot_tag_count
    )
    .map_err(stdout_err)?;
    eprintln!(
        "{}: {} utterances, {} tokens, {} intents, {} slot types ({} B-/I- tags)",
        args.path.display(),
        s.utterance_count,
        s.token_count,
        s.intent_count,
        s.slot_type_count,
        s.slot_tag_count
    );
    Ok(())
}

fn cmd_validate(args: &InputArgs) -> Result<()> {
    let ds = read_input(args)?;
    eprintln!("{}: ok, {} utterances", args.path.display(), ds.len());
    Ok(())
}

fn cmd_chunks(args: &ChunksArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_input(&args.input)?;
    let mut shown = 0;
    for u in ds.iter().filter(|u| args.id.as_deref().is_none_or(|id| id == u.id())) {
        writeln!(out, "# {}", u.id()).map_err(stdout_err)?;
        for c in slot_chunks(u)? {
            writeln!(
                out,
                "{}..{}\t{}\t{}",
                c.start,
                c.end,
                c.slot_type.as_deref().unwrap_or("O"),
                c.text()
            )
            .map_err(stdout_err)?;
        }
        shown += 1;
    }
    if let (Some(id), 0) = (&args.id, shown) {
        return Err(Error::MalformedRecord {
            location: args.input.path.display().to_string(),
            reason: format!("no utterance with id `{id}`"),
        });
    }
    Ok(())
}

fn cmd_families(out: &mut dyn Write) -> Result<()> {
    for family in FAMILIES {
        let codes: Vec<&str> = family.members.iter().map(|(code, _)| *code).collect();
        writeln!(out, "{}\t{}", family.name, codes.join(",")).map_err(stdout_err)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
struct ToyTrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Where to write the trained model.
    #[arg(short, long)]
    model: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Use equal task weights (alpha = beta = 1).
    #[arg(long)]
    slot_focused: bool,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4096)]
    dim: usize,
}

fn cmd_toy_train(args: &ToyTrainArgs, out: &mut dyn Write) -> Result<()> {
    if args.dim == 0 {
        return Err(Error::Configuration("feature dimension must be positive".into()));
    }
    let ds = read_input(&args.input)?;
    let base = if args.slot_focused {
        JointTrainingConfig::slot_focused()
    } else {
        JointTrainingConfig::default()
    };
    let cfg = JointTrainingConfig {
        alpha: args.alpha.unwrap_or(base.alpha),
        beta: args.beta.unwrap_or(base.beta),
        learning_rate: args.learning_rate.unwrap_or(base.learning_rate),
        epochs: args.epochs.unwrap_or(base.epochs),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        seed: args.seed,
        patience: match args.patience {
            Some(0) => None,
            Some(p) => Some(p),
            None => base.patience,
        },
    };
    let mut model = ToyJointModel::for_dataset(FeatureExtractor::new(args.dim, 3), &ds);
    let curve = model.train(&ds, &cfg)?;
    writeln!(out, "epoch\tloss\tintent_loss\tslot_loss").map_err(stdout_err)?;
    for (epoch, loss) in curve.iter().enumerate() {
        writeln!(out, "{epoch}\t{:.6}\t{:.6}\t{:.6}", loss.total, loss.intent, loss.slot).map_err(stdout_err)?;
    }
    save_model(&model, &args.model)?;
    eprintln!(
        "trained on {} utterances for {} epochs; model written to {}",
        ds.len(),
        curve.len() - 1,
        args.model.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
struct ToyEvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long)]
    model: PathBuf,
}

fn cmd_toy_eval(args: &ToyEvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let ds = read_input(&args.input)?;
    let report = model.evaluate(&ds)?;
    let mut rows = vec![
        ("intent_accuracy".to_string(), report.intent_accuracy()),
        ("slot_span_precision".to_string(), report.slot_spans.precision()),
        ("slot_span_recall".to_string(), report.slot_spans.recall()),
        ("slot_span_f1".to_string(), report.slot_f1()),
        ("slot_token_f1".to_string(), report.slot_tokens.f1()),
    ];
    for (intent, (correct, total)) in &report.per_intent {
        rows.push((format!("intent_accuracy:{intent}"), *correct as f64 / *total as f64));
    }
    for (slot_type, counts) in &report.per_slot_type {
        rows.push((format!("slot_f1:{slot_type}"), counts.f1()));
    }
    writeln!(out, "metric\tvalue").map_err(stdout_err)?;
    for (name, value) in rows {
        writeln!(out, "{name}\t{value:.4}").map_err(stdout_err)?;
    }
    eprintln!(
        "{} utterances: intent accuracy {:.4}, slot F1 {:.4}",
        ds.len(),
        report.intent_accuracy(),
        report.slot_f1()
    );
    Ok(())
}

#[derive(Debug, Args)]
struct ToyGenerateArgs {
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    train_size: usize,
    #[arg(long, default_value_t = 200)]
    eval_size: usize,
}

fn cmd_toy_generate(args: &ToyGenerateArgs) -> Result<()> {
    let spec = SyntheticCorpusSpec {
        seed: args.seed,
        train_size: args.train_size,
        eval_size: args.eval_size,
        ..SyntheticCorpusSpec::default()
    };
    let corpus = SyntheticCorpus::generate(&spec)?;
    corpus.write(&args.output)?;
    eprintln!(
        "wrote {} languages to {} (source {})",
        corpus.languages().len(),
        args.output.display(),
        spec.source_language()
    );
    Ok(())
}

#[derive(Debug, Args)]
struct ToyExperimentArgs {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value = "chunk")]
    level: String,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

fn cmd_toy_experiment(args: &ToyExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let defaults = ZeroShotConfig::default();
    let cfg = ZeroShotConfig {
        training: JointTrainingConfig {
            learning_rate: args.learning_rate.unwrap_or(defaults.training.learning_rate),
            epochs: args.epochs.unwrap_or(defaults.training.epochs),
            batch_size: args.batch_size.unwrap_or(defaults.training.batch_size),
            ..defaults.training.clone()
        },
        seeds: args.seeds.clone(),
        k: args.k,
        level: args.level.parse()?,
        ..defaults
    };
    let report = run_zero_shot(&cfg)?;
    writeln!(
        out,
        "seed\ttarget\tbaseline_intent\taugmented_intent\tbaseline_slot_f1\taugmented_slot_f1"
    )
    .map_err(stdout_err)?;
    for s in &report.scores {
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            s.seed, s.target, s.baseline_intent, s.augmented_intent, s.baseline_slot_f1, s.augmented_slot_f1
        )
        .map_err(stdout_err)?;
    }
    eprintln!(
        "mean target intent accuracy: baseline {:.4}, augmented {:.4} (margin {:+.4})",
        report.baseline_intent(),
        report.augmented_intent(),
        report.intent_margin()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_augment(args: &[&str]) -> Result<CliConfig> {
        let cli = Cli::try_parse_from(["csaug", "augment"].iter().chain(args)).unwrap();
        match cli.command {
            Command::Augment(a) => resolve_augment(a),
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, "input = \"a.tsv\"\nk = 3\nseed = 7\nexclude = [\"hi\"]\n").unwrap();
        let cfg = parse_augment(&["--config", path.to_str().unwrap(), "--k", "4"]).unwrap();
        assert_eq!(cfg.input, PathBuf::from("a.tsv"));
        assert_eq!(cfg.augmentation.k, 4);
        assert_eq!(cfg.augmentation.seed, 7);
        assert!(cfg.augmentation.excluded_languages.contains("hi"));
    }

    #[test]
    fn k_zero_is_a_usage_error() {
        let err = parse_augment(&["-i", "x.tsv", "--k", "0"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, "kk = 3\n").unwrap();
        assert!(matches!(
            parse_augment(&["--config", path.to_str().unwrap()]),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn comma_lists() {
        let cfg = parse_augment(&["-i", "x", "--exclude", "hi,tr", "--languages", "de, es"]).unwrap();
        assert_eq!(cfg.augmentation.excluded_languages.len(), 2);
        assert!(cfg.augmentation.allowed_languages.contains("es"));
    }

    #[test]
    fn bad_flag_exit_code() {
        assert_eq!(run(["csaug", "augment", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["csaug", "--help"]), EXIT_OK);
    }
}
