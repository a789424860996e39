use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use infgen::corpus::{
    compute_stats, compute_stats_with_bin_width, consolidate, filter_by_form_count, format_inflection_file,
    read_inflection_file, read_text_lines, stratified_split, InflectionEntry,
};
use infgen::encoder::{build_vocab, encode_entries};
use infgen::evaluator::{evaluate, run_ablation, AblationGrid};
use infgen::generator::{generate, GenConfig};
use infgen::manifest::RunManifest;
use infgen::model::{init_model, CharModel, ModelConfig};
use infgen::trainer::{TrainConfig, Trainer};
use infgen::transfer::compare_transfer;

type BoxError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "infgen", version, about = "Character-level inflection table generation")]
struct Cli {
    /// Cap on worker threads used for evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with "model", "train" and "generation" sections; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, filter and split an inflection corpus.
    Prepare(PrepareArgs),
    /// Line-length histogram and summary of an inflection corpus.
    Stats(StatsArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Generate one line from a prefix.
    Generate(GenerateArgs),
    /// Exact-match evaluation on a test file.
    Eval(EvalArgs),
    /// Run an experiment grid.
    Ablate(AblateArgs),
    /// Compare pretrain-then-finetune against training from scratch.
    PretrainFinetune(PretrainArgs),
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Require a class label on every line and keep it in the output.
    #[arg(long)]
    labels: bool,
    #[arg(long)]
    filter_forms: Option<usize>,
    /// Test fraction for a stratified split.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dev file appended to the input before splitting.
    #[arg(long)]
    consolidate: Option<PathBuf>,
    #[arg(long, default_value = "prepared")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    bin_width: usize,
    /// Also write stats.tsv, stats.json and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    lstm_units: Option<usize>,
    #[arg(long)]
    lstm_layers: Option<usize>,
    #[arg(long)]
    unidirectional: bool,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_parser = ["adam", "rmsprop"])]
    optimizer: Option<String>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long, value_parser = ["f32", "f64"])]
    precision: Option<String>,
    /// Record per-epoch wall-clock times (reports are then not byte-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Seeds weight init and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    training: TrainFlags,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct GenFlags {
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_chars: Option<usize>,
    /// Seed generation with "lemma, " instead of the bare lemma.
    #[arg(long)]
    prefix_separator: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    prefix: String,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    generation: GenFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    generation: GenFlags,
    #[arg(long, default_value = "eval")]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PretrainArgs {
    /// Plain text, one line per sample.
    #[arg(long)]
    pretrain: PathBuf,
    /// Inflection corpus used for fine-tuning and for the from-scratch model.
    #[arg(long)]
    finetune: PathBuf,
    /// Entries whose lemmas seed the comparison (defaults to the fine-tuning set).
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    epochs_pre: usize,
    #[arg(long, default_value_t = 14)]
    epochs_fine: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    training: TrainFlags,
    #[command(flatten)]
    generation: GenFlags,
    #[arg(long, default_value = "transfer")]
    out: PathBuf,
}

/// Overlays `top` onto `base`, recursing into objects.
fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, t) if !t.is_null() => *b = t.clone(),
        _ => {}
    }
}

/// defaults < config file section < flags.
fn resolve<T: Serialize + DeserializeOwned>(defaults: T, file: &Value, section: &str, flags: Value) -> Result<T, BoxError> {
    let mut v = serde_json::to_value(defaults)?;
    if let Some(s) = file.get(section) {
        merge(&mut v, s);
    }
    merge(&mut v, &flags);
    Ok(serde_json::from_value(v).map_err(|e| format!("config section {section:?}: {e}"))?)
}

fn model_flags(m: &ModelFlags, seed: Option<u64>) -> Value {
    json!({
        "max_length": m.max_length,
        "embed_dim": m.embed_dim,
        "lstm_units": m.lstm_units,
        "lstm_layers": m.lstm_layers,
        "bidirectional": if m.unidirectional { Some(false) } else { None },
        "seed": seed,
    })
}

fn train_flags(t: &TrainFlags, epochs: Option<usize>, seed: Option<u64>) -> Value {
    json!({
        "epochs": epochs,
        "batch_size": t.batch_size,
        "learning_rate": t.lr,
        "optimizer": t.optimizer,
        "grad_clip_norm": t.grad_clip,
        "precision": t.precision,
        "shuffle_seed": seed,
        "deterministic": if t.timings { Some(false) } else { None },
    })
}

fn gen_flags(g: &GenFlags, seed: Option<u64>) -> Value {
    json!({
        "temperature": g.temperature,
        "max_chars": g.max_chars,
        "sample_seed": seed,
        "prefix_separator": if g.prefix_separator { Some(true) } else { None },
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), BoxError> {
    std::fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create_dir(dir: &Path) -> Result<(), BoxError> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()).into())
}

fn args_vec() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn prepare(a: &PrepareArgs) -> Result<(), BoxError> {
    let mut entries = read_inflection_file(&a.input)?;
    let mut manifest = RunManifest::start(
        "prepare",
        args_vec(),
        json!({"labels": a.labels, "filter_forms": a.filter_forms, "split": a.split}),
    );
    manifest.input(&a.input)?;
    if let Some(dev) = &a.consolidate {
        entries = consolidate(&entries, &read_inflection_file(dev)?);
        manifest.input(dev)?;
    }
    if a.labels {
        if let Some(i) = entries.iter().position(|e| e.class_label().is_none()) {
            return Err(format!("entry {} ({}) has no class label", i + 1, entries[i].lemma()).into());
        }
    } else {
        entries = entries
            .iter()
            .map(|e| InflectionEntry::new(e.forms(), None))
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = a.filter_forms {
        entries = filter_by_form_count(&entries, n);
    }
    create_dir(&a.out)?;
    match a.split {
        Some(fraction) => {
            let split = stratified_split(&entries, fraction, a.seed)?;
            write(&a.out.join("train.txt"), format_inflection_file(&split.train))?;
            write(&a.out.join("test.txt"), format_inflection_file(&split.test))?;
            manifest.seed("split", a.seed);
            eprintln!("train {} / test {}", split.train.len(), split.test.len());
        }
        None => {
            write(&a.out.join("all.txt"), format_inflection_file(&entries))?;
            eprintln!("{} entries", entries.len());
        }
    }
    manifest.finish(&a.out)?;
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<(), BoxError> {
    let entries = read_inflection_file(&a.input)?;
    let s = compute_stats_with_bin_width(&entries, a.bin_width);
    print!("{}", s.to_tsv());
    eprintln!(
        "entries {}  mean length {:.2}  max length {}  form counts {:?}",
        s.entry_count, s.mean_line_length, s.max_line_length, s.form_count_distribution
    );
    if let Some(out) = &a.out {
        create_dir(out)?;
        write(&out.join("stats.tsv"), s.to_tsv())?;
        write(&out.join("stats.json"), serde_json::to_string_pretty(&s)?)?;
        let mut manifest = RunManifest::start("stats", args_vec(), json!({"bin_width": a.bin_width}));
        manifest.input(&a.input)?;
        manifest.finish(out)?;
    }
    Ok(())
}

fn train(a: &TrainArgs, file: &Value) -> Result<(), BoxError> {
    let entries = read_inflection_file(&a.train)?;
    let vocab = build_vocab(&entries);
    let cfg = resolve(ModelConfig::new(vocab.size()), file, "model", model_flags(&a.model, a.seed))?;
    let cfg = ModelConfig { vocab_size: vocab.size(), ..cfg };
    let tc = resolve(TrainConfig::default(), file, "train", train_flags(&a.training, a.epochs, a.seed))?;
    let samples = encode_entries(&entries, &vocab, cfg.max_length)?;
    eprintln!("{} entries, {} samples, vocabulary {}", entries.len(), samples.len(), vocab.size());

    let mut manifest = RunManifest::start("train", args_vec(), json!({"model": cfg, "train": tc}));
    manifest.input(&a.train)?;
    manifest.seed("init", cfg.seed);
    manifest.seed("shuffle", tc.shuffle_seed);

    let mut progress = |epoch: usize, loss: f64| eprintln!("epoch {}/{}  loss {loss:.5}", epoch + 1, tc.epochs);
    let (params, mut report) = Trainer::new().on_epoch(&mut progress).train(init_model(&cfg)?, &cfg, &samples, &tc)?;
    create_dir(&a.out)?;
    let model = CharModel::new(cfg, vocab, params);
    model.save(&a.out.join("model.mgck"))?;
    report.checkpoint = Some("model.mgck".into());
    write(&a.out.join("train_report.json"), serde_json::to_string_pretty(&report)?)?;
    manifest.finish(&a.out)?;
    Ok(())
}

fn run_generate(a: &GenerateArgs, file: &Value) -> Result<(), BoxError> {
    let model = CharModel::load(&a.model)?;
    let gc = resolve(GenConfig::default(), file, "generation", gen_flags(&a.generation, a.seed))?;
    let prefix = infgen::corpus::normalize_text(&a.prefix);
    let prefix = infgen::generator::seed_prefix(&prefix, &gc);
    println!("{}", generate(&model, &model.vocab, &prefix, &gc)?);
    Ok(())
}

fn eval(a: &EvalArgs, file: &Value) -> Result<(), BoxError> {
    let model = CharModel::load(&a.model)?;
    let test = read_inflection_file(&a.test)?;
    let defaults = GenConfig {
        max_chars: GenConfig::max_chars_for(compute_stats(&test).mean_line_length),
        ..GenConfig::default()
    };
    let gc = resolve(defaults, file, "generation", gen_flags(&a.generation, a.seed))?;
    let report = evaluate(&model, &test, &gc, &a.test.display().to_string())?;
    create_dir(&a.out)?;
    write(&a.out.join("eval_report.json"), serde_json::to_string_pretty(&report)?)?;
    write(&a.out.join("eval_report.tsv"), report.to_tsv())?;
    let mut manifest = RunManifest::start("eval", args_vec(), json!({"generation": gc}));
    manifest.input(&a.model)?;
    manifest.input(&a.test)?;
    manifest.seed("sample", gc.sample_seed);
    manifest.finish(&a.out)?;
    println!(
        "accuracy {:.2}% ({}/{})  form-count MAE {:.3}",
        report.accuracy_percent, report.correct, report.total, report.form_count_mae
    );
    Ok(())
}

fn ablate(a: &AblateArgs) -> Result<(), BoxError> {
    let grid = AblationGrid::from_json_file(&a.grid)?;
    let corpora = grid.load_corpora()?;
    let mut manifest = RunManifest::start("ablate", args_vec(), serde_json::to_value(&grid)?);
    manifest.input(&a.grid)?;
    for files in grid.datasets.values() {
        manifest.input(&files.train)?;
        manifest.input(&files.test)?;
    }
    let rows = run_ablation(&grid, &corpora, &a.out)?;
    print!("{}", infgen::evaluator::rows_to_tsv(&rows));
    manifest.finish(&a.out)?;
    Ok(())
}

fn pretrain_finetune(a: &PretrainArgs, file: &Value) -> Result<(), BoxError> {
    let prose = read_text_lines(&a.pretrain)?;
    let fine = read_inflection_file(&a.finetune)?;
    let probes = match &a.probe {
        Some(p) => read_inflection_file(p)?,
        None => fine.clone(),
    };
    let base = resolve(ModelConfig::new(3), file, "model", model_flags(&a.model, a.seed))?;
    let tc_fine = resolve(
        TrainConfig::default(),
        file,
        "train",
        train_flags(&a.training, Some(a.epochs_fine), a.seed),
    )?;
    let tc_pre = TrainConfig { epochs: a.epochs_pre, ..tc_fine.clone() };
    let defaults = GenConfig {
        max_chars: GenConfig::max_chars_for(compute_stats(&fine).mean_line_length),
        ..GenConfig::greedy()
    };
    let gc = resolve(defaults, file, "generation", gen_flags(&a.generation, a.seed))?;

    let mut manifest = RunManifest::start(
        "pretrain-finetune",
        args_vec(),
        json!({"model": base, "pretrain": tc_pre, "finetune": tc_fine, "generation": gc}),
    );
    manifest.input(&a.pretrain)?;
    manifest.input(&a.finetune)?;
    if let Some(p) = &a.probe {
        manifest.input(p)?;
    }
    manifest.seed("init", base.seed);
    manifest.seed("shuffle", tc_fine.shuffle_seed);

    let (report, models) = compare_transfer(&base, &prose, &fine, &tc_pre, &tc_fine, &probes, &gc)?;
    create_dir(&a.out)?;
    models.pretrained.save(&a.out.join("pretrained.mgck"))?;
    models.from_scratch.save(&a.out.join("scratch.mgck"))?;
    write(&a.out.join("transfer_report.json"), serde_json::to_string_pretty(&report)?)?;
    manifest.finish(&a.out)?;
    println!("separator rate  pretrained {:.3}  from scratch {:.3}", report.pretrained.separator_rate, report.from_scratch.separator_rate);
    Ok(())
}

fn run(cli: Cli) -> Result<(), BoxError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => Value::Null,
    };
    match &cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a, &file),
        Command::Generate(a) => run_generate(a, &file),
        Command::Eval(a) => eval(a, &file),
        Command::Ablate(a) => ablate(a),
        Command::PretrainFinetune(a) => pretrain_finetune(a, &file),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
