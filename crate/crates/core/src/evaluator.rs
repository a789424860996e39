//! Whole-table exact-match scoring and the ablation grid runner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::load_checkpoint;
use crate::corpus::{compute_stats, filter_by_form_count, normalize_text, InflectionEntry};
use crate::encoder::{build_vocab, encode_entries, CharVocab};
use crate::error::EvalError;
use crate::generator::{generate_table, GenConfig};
use crate::model::{init_model, CharModel, LanguageModel, ModelConfig};
use crate::trainer::{TrainConfig, Trainer};

/// True iff both tables have the same length and every form matches after
/// normalization.
pub fn exact_match<A: AsRef<str>, B: AsRef<str>>(generated: &[A], gold: &[B]) -> bool {
    generated.len() == gold.len()
        && generated
            .iter()
            .zip(gold)
            .all(|(g, r)| normalize_text(g.as_ref()) == normalize_text(r.as_ref()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryOutcome {
    pub lemma: String,
    pub gold_form_count: usize,
    /// Zero when generation failed.
    pub generated_form_count: usize,
    pub exact_match: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub total: usize,
    pub correct: usize,
    pub accuracy_percent: f64,
    /// Mean absolute difference between generated and gold form counts.
    pub form_count_mae: f64,
    pub model: Option<ModelConfig>,
    pub generation: GenConfig,
    pub per_entry: Vec<EntryOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(
        dataset: &str,
        model: Option<ModelConfig>,
        generation: GenConfig,
        per_entry: Vec<EntryOutcome>,
    ) -> Result<Self, EvalError> {
        if per_entry.is_empty() {
            return Err(EvalError::EmptyTestSet);
        }
        let total = per_entry.len();
        let correct = per_entry.iter().filter(|o| o.exact_match).count();
        let deviation: usize = per_entry
            .iter()
            .map(|o| o.generated_form_count.abs_diff(o.gold_form_count))
            .sum();
        Ok(Self {
            dataset: dataset.to_string(),
            total,
            correct,
            accuracy_percent: 100.0 * correct as f64 / total as f64,
            form_count_mae: deviation as f64 / total as f64,
            model,
            generation,
            per_entry,
        })
    }

    /// One row per test entry.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lemma\tgold_form_count\tgenerated_form_count\texact_match\n");
        for o in &self.per_entry {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                o.lemma, o.gold_form_count, o.generated_form_count, o.exact_match
            );
        }
        out
    }
}

/// Generates a table for every test lemma and scores it against the gold
/// entry. Entries that cannot be generated (e.g. unknown characters) count
/// as failures.
pub fn evaluate_with<M: LanguageModel + Sync + ?Sized>(
    model: &M,
    vocab: &CharVocab,
    test: &[InflectionEntry],
    gc: &GenConfig,
    dataset: &str,
    model_config: Option<ModelConfig>,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    gc.validate()?;
    let outcomes: Vec<EntryOutcome> = test
        .par_iter()
        .map(|entry| {
            let gold = entry.forms();
            match generate_table(model, vocab, entry.lemma(), gc) {
                Ok(forms) => EntryOutcome {
                    lemma: entry.lemma().to_string(),
                    gold_form_count: gold.len(),
                    generated_form_count: forms.len(),
                    exact_match: exact_match(&forms, gold),
                    generated: Some(forms.join(crate::corpus::FORM_SEPARATOR)),
                    error: None,
                },
                Err(e) => EntryOutcome {
                    lemma: entry.lemma().to_string(),
                    gold_form_count: gold.len(),
                    generated_form_count: 0,
                    exact_match: false,
                    generated: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    EvalReport::from_outcomes(dataset, model_config, gc.clone(), outcomes)
}

pub fn evaluate(model: &CharModel, test: &[InflectionEntry], gc: &GenConfig, dataset: &str) -> Result<EvalReport, EvalError> {
    evaluate_with(model, &model.vocab, test, gc, dataset, Some(model.config.clone()))
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: String,
    /// Keep only entries with exactly this many forms (train and test).
    #[serde(default)]
    pub form_filter: Option<usize>,
    pub max_length: usize,
    pub epochs: usize,
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RunSpec {
    fn model_key(&self) -> String {
        let filter = self.form_filter.map_or("all".to_string(), |n| n.to_string());
        format!("{}_forms-{filter}_T{}_E{}_seed{}", self.dataset, self.max_length, self.epochs, self.seed)
    }

    fn key(&self) -> String {
        format!("{}_tau{}", self.model_key(), self.temperature)
    }
}

/// Settings shared by every run of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub lstm_layers: usize,
    pub bidirectional: bool,
    /// Epochs and shuffle seed are taken from each run.
    pub train: TrainConfig,
    /// Defaults to four times the mean training line length (min 256).
    pub max_chars: Option<usize>,
    pub prefix_separator: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        let defaults = ModelConfig::new(3);
        Self {
            embed_dim: defaults.embed_dim,
            lstm_units: defaults.lstm_units,
            lstm_layers: defaults.lstm_layers,
            bidirectional: defaults.bidirectional,
            train: TrainConfig::default(),
            max_chars: None,
            prefix_separator: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    /// Named corpora; relative paths resolve against the grid file.
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetFiles>,
    #[serde(default)]
    pub settings: GridSettings,
    pub runs: Vec<RunSpec>,
}

/// Train/test entries for one named dataset.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub train: Vec<InflectionEntry>,
    pub test: Vec<InflectionEntry>,
}

impl AblationGrid {
    /// The five Romanian noun configurations, each at every temperature given.
    pub fn romanian_nouns(dataset: &str, temperatures: &[f64], seed: u64) -> Self {
        let cells = [(None, 40, 14), (None, 90, 14), (Some(8), 40, 14), (Some(8), 90, 14), (Some(8), 90, 28)];
        let runs = cells
            .iter()
            .flat_map(|&(form_filter, max_length, epochs)| {
                temperatures.iter().map(move |&temperature| RunSpec {
                    dataset: dataset.to_string(),
                    form_filter,
                    max_length,
                    epochs,
                    temperature,
                    seed,
                })
            })
            .collect();
        Self { datasets: BTreeMap::new(), settings: GridSettings::default(), runs }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut grid: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for files in grid.datasets.values_mut() {
            for p in [&mut files.train, &mut files.test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(grid)
    }

    /// Reads every dataset listed in the grid.
    pub fn load_corpora(&self) -> Result<BTreeMap<String, Corpus>, EvalError> {
        self.datasets
            .iter()
            .map(|(name, files)| {
                Ok((
                    name.clone(),
                    Corpus {
                        train: crate::corpus::read_inflection_file(&files.train)?,
                        test: crate::corpus::read_inflection_file(&files.test)?,
                    },
                ))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    #[serde(flatten)]
    pub spec: RunSpec,
    pub accuracy: Option<f64>,
    pub form_count_mae: Option<f64>,
    pub correct: Option<usize>,
    pub total: Option<usize>,
    /// Not recorded in deterministic mode.
    pub train_minutes: Option<f64>,
    pub error: Option<String>,
}

pub const RESULTS_JSONL: &str = "results.jsonl";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_TSV: &str = "results.tsv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.to_owned(), source }
}

/// Results table with one row per spec, columns as in the JSON rows.
pub fn rows_to_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("dataset\tform_filter\tmax_length\tepochs\ttemperature\tseed\taccuracy\tform_count_mae\ttrain_minutes\terror\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.spec.dataset,
            r.spec.form_filter.map_or("all".into(), |n| n.to_string()),
            r.spec.max_length,
            r.spec.epochs,
            r.spec.temperature,
            r.spec.seed,
            opt(r.accuracy),
            opt(r.form_count_mae),
            opt(r.train_minutes),
            r.error.as_deref().unwrap_or("")
        );
    }
    out
}

fn read_completed(path: &Path) -> Result<Vec<AblationRow>, EvalError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    // a half-written trailing line from an interrupted run is ignored
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<AblationRow>(l).ok())
        .collect())
}

struct TrainedRun {
    model: CharModel,
    train_minutes: Option<f64>,
    mean_line_length: f64,
}

fn train_for_spec(
    spec: &RunSpec,
    corpus: &Corpus,
    settings: &GridSettings,
    models_dir: &Path,
) -> Result<TrainedRun, EvalError> {
    let train_set = match spec.form_filter {
        Some(n) => filter_by_form_count(&corpus.train, n),
        None => corpus.train.clone(),
    };
    let mean_line_length = compute_stats(&train_set).mean_line_length;
    let path = models_dir.join(format!("{}.mgck", spec.model_key()));
    if path.exists() {
        let model = load_checkpoint(&path)?;
        return Ok(TrainedRun { model, train_minutes: None, mean_line_length });
    }
    let vocab = build_vocab(&train_set);
    let cfg = ModelConfig {
        max_length: spec.max_length,
        embed_dim: settings.embed_dim,
        lstm_units: settings.lstm_units,
        lstm_layers: settings.lstm_layers,
        bidirectional: settings.bidirectional,
        vocab_size: vocab.size(),
        seed: spec.seed,
    };
    let samples = encode_entries(&train_set, &vocab, cfg.max_length).map_err(crate::error::TrainError::from)?;
    let tc = TrainConfig {
        epochs: spec.epochs,
        shuffle_seed: spec.seed,
        ..settings.train.clone()
    };
    let started = Instant::now();
    let params = init_model(&cfg).map_err(crate::error::TrainError::from)?;
    let (params, _) = Trainer::new().train(params, &cfg, &samples, &tc)?;
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let model = CharModel::new(cfg, vocab, params);
    model.save(&path)?;
    Ok(TrainedRun {
        model,
        train_minutes: (!tc.deterministic).then_some(minutes),
        mean_line_length,
    })
}

fn run_spec(
    spec: &RunSpec,
    corpora: &BTreeMap<String, Corpus>,
    settings: &GridSettings,
    models_dir: &Path,
) -> Result<(EvalReport, Option<f64>), EvalError> {
    let corpus = corpora
        .get(&spec.dataset)
        .ok_or_else(|| EvalError::UnknownDataset(spec.dataset.clone()))?;
    let test_set = match spec.form_filter {
        Some(n) => filter_by_form_count(&corpus.test, n),
        None => corpus.test.clone(),
    };
    if test_set.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let trained = train_for_spec(spec, corpus, settings, models_dir)?;
    let gc = GenConfig {
        temperature: spec.temperature,
        max_chars: settings
            .max_chars
            .unwrap_or_else(|| GenConfig::max_chars_for(trained.mean_line_length)),
        sample_seed: spec.seed,
        prefix_separator: settings.prefix_separator,
    };
    let report = evaluate(&trained.model, &test_set, &gc, &spec.dataset)?;
    Ok((report, trained.train_minutes))
}

/// Runs every spec not already completed in `out_dir`, appending rows to
/// `results.jsonl` as they finish, then writes the full table as JSON and TSV.
/// Failed specs produce a row with `error` set and are retried on the next run.
pub fn run_ablation(
    grid: &AblationGrid,
    corpora: &BTreeMap<String, Corpus>,
    out_dir: &Path,
) -> Result<Vec<AblationRow>, EvalError> {
    if grid.runs.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let models_dir = out_dir.join("models");
    let evals_dir = out_dir.join("evals");
    for dir in [out_dir, &models_dir, &evals_dir] {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let jsonl = out_dir.join(RESULTS_JSONL);
    let mut latest: BTreeMap<String, AblationRow> = read_completed(&jsonl)?
        .into_iter()
        .map(|r| (r.spec.key(), r))
        .collect();
    let done: BTreeSet<String> = latest
        .iter()
        .filter(|(_, r)| r.error.is_none())
        .map(|(k, _)| k.clone())
        .collect();

    for spec in &grid.runs {
        let key = spec.key();
        if done.contains(&key) {
            continue;
        }
        let row = match run_spec(spec, corpora, &grid.settings, &models_dir) {
            Ok((report, train_minutes)) => {
                let path = evals_dir.join(format!("{key}.json"));
                std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(io_err(&path))?;
                AblationRow {
                    spec: spec.clone(),
                    accuracy: Some(report.accuracy_percent),
                    form_count_mae: Some(report.form_count_mae),
                    correct: Some(report.correct),
                    total: Some(report.total),
                    train_minutes,
                    error: None,
                }
            }
            Err(e) => AblationRow {
                spec: spec.clone(),
                accuracy: None,
                form_count_mae: None,
                correct: None,
                total: None,
                train_minutes: None,
                error: Some(e.to_string()),
            },
        };
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&jsonl)
            .map_err(io_err(&jsonl))?;
        writeln!(f, "{}", serde_json::to_string(&row)?).map_err(io_err(&jsonl))?;
        latest.insert(key, row);
    }

    let rows: Vec<AblationRow> = grid
        .runs
        .iter()
        .filter_map(|s| latest.get(&s.key()).cloned())
        .collect();
    let json_path = out_dir.join(RESULTS_JSON);
    std::fs::write(&json_path, serde_json::to_string_pretty(&rows)?).map_err(io_err(&json_path))?;
    let tsv_path = out_dir.join(RESULTS_TSV);
    std::fs::write(&tsv_path, rows_to_tsv(&rows)).map_err(io_err(&tsv_path))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::NnError;

    fn entry(forms: &[&str]) -> InflectionEntry {
        InflectionEntry::new(forms, None).unwrap()
    }

    const POARTA: [&str; 8] = ["poartă", "porți", "poarta", "porții", "porți", "porți", "porțile", "porților"];

    #[test]
    fn exact_match_cases() {
        assert!(exact_match(&POARTA, &POARTA));
        let mut longer = POARTA.to_vec();
        longer.push("porți");
        assert!(!exact_match(&longer, &POARTA));
        let mut wrong = POARTA.to_vec();
        wrong[1] = "porti";
        assert!(!exact_match(&wrong, &POARTA));
        // cedilla vs comma-below is the same letter after normalization
        let mut cedilla = POARTA.to_vec();
        cedilla[1] = "porţi";
        assert!(exact_match(&cedilla, &POARTA));
    }

    fn outcome(gold: usize, generated: usize, ok: bool) -> EntryOutcome {
        EntryOutcome {
            lemma: "x".into(),
            gold_form_count: gold,
            generated_form_count: generated,
            exact_match: ok,
            generated: None,
            error: None,
        }
    }

    #[test]
    fn report_arithmetic() {
        let r = EvalReport::from_outcomes("d", None, GenConfig::default(), vec![outcome(8, 8, true), outcome(8, 10, false)])
            .unwrap();
        assert_eq!(r.accuracy_percent, 50.0);
        assert_eq!(r.form_count_mae, 1.0);
        assert_eq!(r.correct, 1);
        assert!(matches!(
            EvalReport::from_outcomes("d", None, GenConfig::default(), vec![]),
            Err(EvalError::EmptyTestSet)
        ));
    }

    /// Replays gold lines character by character.
    struct Oracle {
        vocab: CharVocab,
        lines: Vec<Vec<u32>>,
        t: usize,
    }

    impl LanguageModel for Oracle {
        fn max_length(&self) -> usize {
            self.t
        }
        fn next_distribution(&self, context: &[u32]) -> Result<Vec<f64>, NnError> {
            let seen: Vec<u32> = context.iter().copied().filter(|&c| c != 0).collect();
            let mut p = vec![0.0; self.vocab.size()];
            let next = self
                .lines
                .iter()
                .find(|l| l.len() >= seen.len() && l[..seen.len()] == seen[..])
                .map_or(1, |l| l.get(seen.len()).copied().unwrap_or(1));
            p[next as usize] = 1.0;
            Ok(p)
        }
    }

    #[test]
    fn perfect_model_scores_100() {
        let test = vec![entry(&["ab", "abx"]), entry(&["cd", "cdy", "cdz"])];
        let lines: Vec<String> = test.iter().map(crate::corpus::format_entry).collect();
        let vocab = CharVocab::from_lines(&lines);
        let oracle = Oracle {
            lines: lines.iter().map(|l| vocab.encode_str(l).unwrap()).collect(),
            vocab: vocab.clone(),
            t: 64,
        };
        let r = evaluate_with(&oracle, &vocab, &test, &GenConfig::greedy(), "toy", None).unwrap();
        assert_eq!(r.accuracy_percent, 100.0);
        assert_eq!(r.form_count_mae, 0.0);
    }

    #[test]
    fn unknown_lemma_is_a_recorded_failure() {
        let vocab = CharVocab::from_lines(["ab"]);
        let oracle = Oracle { lines: vec![], vocab: vocab.clone(), t: 4 };
        let test = vec![entry(&["zz", "zzz"])];
        let r = evaluate_with(&oracle, &vocab, &test, &GenConfig::greedy(), "toy", None).unwrap();
        assert_eq!(r.correct, 0);
        assert!(r.per_entry[0].error.is_some());
        assert_eq!(r.per_entry[0].generated_form_count, 0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let grid = AblationGrid { datasets: BTreeMap::new(), settings: GridSettings::default(), runs: vec![] };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_ablation(&grid, &BTreeMap::new(), dir.path()), Err(EvalError::EmptyGrid)));
    }

    #[test]
    fn romanian_grid_rows() {
        let grid = AblationGrid::romanian_nouns("ro", &[0.0], 1);
        let cells: Vec<_> = grid.runs.iter().map(|r| (r.form_filter, r.max_length, r.epochs)).collect();
        assert_eq!(
            cells,
            vec![(None, 40, 14), (None, 90, 14), (Some(8), 40, 14), (Some(8), 90, 14), (Some(8), 90, 28)]
        );
        assert_eq!(AblationGrid::romanian_nouns("ro", &[0.0, 0.5, 1.0], 1).runs.len(), 15);
    }

    #[test]
    fn unknown_dataset_row_records_error() {
        let grid = AblationGrid {
            datasets: BTreeMap::new(),
            settings: GridSettings::default(),
            runs: vec![RunSpec { dataset: "nope".into(), form_filter: None, max_length: 4, epochs: 1, temperature: 0.0, seed: 0 }],
        };
        let dir = tempfile::tempdir().unwrap();
        let rows = run_ablation(&grid, &BTreeMap::new(), dir.path()).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("nope"));
        assert!(dir.path().join(RESULTS_TSV).exists());
    }

    fn table() -> impl proptest::strategy::Strategy<Value = Vec<String>> {
        proptest::collection::vec("[abșşțţ]{1,4}", 1..5)
    }

    proptest::proptest! {
        #[test]
        fn exact_match_is_joined_equality(a in table(), b in table()) {
            let joined = normalize_text(&a.join(", ")) == normalize_text(&b.join(", "));
            proptest::prop_assert_eq!(exact_match(&a, &b), joined);
            proptest::prop_assert_eq!(exact_match(&a, &b), exact_match(&b, &a));
            proptest::prop_assert!(exact_match(&a, &a));
        }

        #[test]
        fn accuracy_ignores_order(flags in proptest::collection::vec((0usize..10, 0usize..10, proptest::bool::ANY), 1..30), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let outcomes: Vec<EntryOutcome> = flags.iter().map(|&(g, n, ok)| outcome(g, n, ok)).collect();
            let mut shuffled = outcomes.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = EvalReport::from_outcomes("d", None, GenConfig::default(), outcomes).unwrap();
            let b = EvalReport::from_outcomes("d", None, GenConfig::default(), shuffled).unwrap();
            proptest::prop_assert_eq!(a.accuracy_percent, b.accuracy_percent);
            proptest::prop_assert!((a.form_count_mae - b.form_count_mae).abs() < 1e-12);
        }

        #[test]
        fn perfect_accuracy_means_zero_mae(counts in proptest::collection::vec(1usize..10, 1..20)) {
            let outcomes = counts.iter().map(|&n| outcome(n, n, true)).collect();
            let r = EvalReport::from_outcomes("d", None, GenConfig::default(), outcomes).unwrap();
            proptest::prop_assert_eq!(r.accuracy_percent, 100.0);
            proptest::prop_assert_eq!(r.form_count_mae, 0.0);
        }
    }
}
