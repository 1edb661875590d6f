//! The `tokenbag` subcommands and their wiring.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or contract error. Outputs
//! are written atomically and every invocation leaves a run manifest beside
//! its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand};

use crate::checkpoint::{load_model, save_model, CheckpointMeta};
use crate::config::{
    parse_outcome, read_json_config, EvalConfig, ModelHyper, SourcesSpec, SynthConfig,
    TokenizeConfig, TrainConfig, TuneConfig,
};
use crate::formats;
use crate::ingest::{load_admissions, load_icustays, load_table, IngestCounts};
use crate::manifest::{manifest_path_for, sha256_bytes, sha256_file, write_atomic, RunManifest};
use tokenbag::dataset::{split_patients, Split, SplitAssignment};
use tokenbag::metrics::{compare, evaluate, EvalOptions};
use tokenbag::nncore::Model;
use tokenbag::schema::{
    cohort_stats, select_cohort, CohortEntry, CohortIndex, EventRecord, WindowCounts,
};
use tokenbag::synthgen::generate;
use tokenbag::tokenizer::{build_documents, AdmissionDocument, TokenizerConfig};
use tokenbag::trainer::{train_model, tune, RandomSearch};
use tokenbag::vocab::{encode, EncodedDocument, Vocabulary};
use tokenbag::SourceKind;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "tokenbag",
    version,
    about = "Admission-level outcome models over multi-source event tables",
    long_about = "Pipeline stages with file-based handoff: synth -> ingest -> tokenize -> \
                  split -> train/tune -> evaluate/compare. Each stage reads a JSON config \
                  (--config), writes its outputs atomically and drops a .manifest.json with \
                  content digests beside them."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps worker threads for stages with per-table parallelism.
    #[arg(long, global = true, default_value_t = 4)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic source tables with a planted, tunable signal.
    Synth {
        /// Generator config JSON (defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the CSV tables and the truth/ sidecar.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select the cohort (single ICU stay of >= 24 h) from admissions + icustays.
    Ingest {
        /// Directory holding admissions.csv and icustays.csv.
        #[arg(long)]
        data: PathBuf,
        /// Cohort JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream the event tables, window to the first 24 h, tokenize, and
    /// write the admission corpus.
    Tokenize {
        /// Directory holding the eight event tables.
        #[arg(long)]
        data: PathBuf,
        /// Cohort JSON from `ingest`.
        #[arg(long)]
        cohort: PathBuf,
        /// Corpus JSONL output.
        #[arg(long)]
        out: PathBuf,
        /// Tokenizer config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize a cohort and its tokenized corpus.
    Describe {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Stats JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Patient-disjoint 72/13/15 split of the cohort's patients.
    Split {
        #[arg(long)]
        cohort: PathBuf,
        /// Split JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; vocabularies are built from the training split only.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Train config JSON (defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search; writes the winning train config.
    Tune {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Tune config JSON (defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the trial count from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Best train-config JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Trial log JSONL output (default: <out>.trials.jsonl).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a model on held-out documents and write the metrics report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Test corpus JSONL (alternative to --corpus + --split).
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Report JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Also export ROC/PR/calibration points as CSV into this directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Evaluation config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate two models on one test set and test the metric differences.
    Compare {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        /// Test corpus JSONL (alternative to --corpus + --split).
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Report JSON output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Evaluation config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

pub fn run_from_args() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match cli.execute() {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

impl Cli {
    fn execute(self) -> Result<(), CliError> {
        let seed = self.seed;
        let threads = self.threads.max(1);
        match self.command {
            Command::Synth { config, out } => cmd_synth(config, out, seed),
            Command::Ingest { data, out } => cmd_ingest(data, out).map_err(Into::into),
            Command::Tokenize {
                data,
                cohort,
                out,
                config,
            } => cmd_tokenize(data, cohort, out, config, threads).map_err(Into::into),
            Command::Describe {
                cohort,
                corpus,
                out,
            } => cmd_describe(cohort, corpus, out).map_err(Into::into),
            Command::Split { cohort, out } => cmd_split(cohort, out, seed).map_err(Into::into),
            Command::Train {
                corpus,
                split,
                config,
                out,
            } => cmd_train(corpus, split, config, out, seed).map_err(Into::into),
            Command::Tune {
                corpus,
                split,
                config,
                trials,
                out,
                log,
            } => cmd_tune(corpus, split, config, trials, out, log, seed).map_err(Into::into),
            Command::Evaluate {
                model,
                test,
                corpus,
                split,
                out,
                csv_dir,
                config,
            } => {
                let docs = test_docs_source(test, corpus, split)?;
                cmd_evaluate(model, docs, out, csv_dir, config, seed).map_err(Into::into)
            }
            Command::Compare {
                model_a,
                model_b,
                test,
                corpus,
                split,
                out,
                csv_dir,
                config,
            } => {
                let docs = test_docs_source(test, corpus, split)?;
                cmd_compare(model_a, model_b, docs, out, csv_dir, config, seed).map_err(Into::into)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("synth");
    let dto: SynthConfig = match &config {
        Some(path) => {
            manifest.input(path)?;
            read_json_config(path)?
        }
        None => SynthConfig::default(),
    };
    let cfg = dto.into_generator_config(seed)?;
    manifest.seed("master", cfg.seed);
    let data = generate(&cfg).map_err(|e| CliError::Data(anyhow!(e)))?;

    for (name, contents) in &data.tables {
        let path = out.join(name);
        write_atomic(&path, contents.as_bytes())?;
        manifest.output(&path);
    }
    let truth_path = out.join("truth").join("admissions_truth.csv");
    write_atomic(&truth_path, data.truth_csv.as_bytes())?;
    manifest.output(&truth_path);
    manifest.write(&out.join("manifest.json"))?;

    let cohort_n = data
        .summary
        .admissions
        .iter()
        .filter(|a| a.excluded.is_none())
        .count();
    eprintln!(
        "synth: {} admissions ({} cohort-eligible) across {} tables -> {}",
        data.summary.admissions.len(),
        cohort_n,
        data.tables.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

fn cmd_ingest(data: PathBuf, out: PathBuf) -> Result<()> {
    let mut manifest = RunManifest::new("ingest");
    let admissions_path = data.join("admissions.csv");
    let icustays_path = data.join("icustays.csv");
    manifest.input(&admissions_path)?;
    manifest.input(&icustays_path)?;

    let (admissions, adm_counts) = load_admissions(&admissions_path)?;
    let (stays, stay_counts) = load_icustays(&icustays_path)?;
    let selection = select_cohort(&admissions, &stays);

    formats::write_cohort(&out, &selection.cohort, &selection.counts)?;
    manifest.output(&out);
    manifest.write(&manifest_path_for(&out))?;

    eprintln!(
        "ingest: {} admissions, {} stays -> cohort {} \
         (excluded: {} multi-stay, {} short-stay, {} no-stay; {} orphan stays; \
         {} malformed rows skipped)",
        selection.counts.admissions,
        selection.counts.stays,
        selection.cohort.len(),
        selection.counts.excluded_multi_stay,
        selection.counts.excluded_short_stay,
        selection.counts.excluded_no_stay,
        selection.counts.orphan_stays,
        adm_counts.malformed + stay_counts.malformed + stay_counts.bad_timestamp,
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// tokenize
// ---------------------------------------------------------------------------

struct TableResult {
    source: SourceKind,
    events: Vec<EventRecord>,
    ingest: IngestCounts,
    window: WindowCounts,
    missing_file: bool,
}

fn load_windowed_table(data: &Path, source: SourceKind, index: &CohortIndex) -> Result<TableResult> {
    let path = data.join(format!("{}.csv", source.table_name()));
    if !path.exists() {
        return Ok(TableResult {
            source,
            events: Vec::new(),
            ingest: IngestCounts::default(),
            window: WindowCounts::default(),
            missing_file: true,
        });
    }
    let mut events = Vec::new();
    let mut window = WindowCounts::default();
    let ingest = load_table(&path, source, |event| {
        let status = index.window_status(&event);
        window.record(status);
        if status == tokenbag::schema::WindowStatus::Keep {
            events.push(event);
        }
    })?;
    Ok(TableResult {
        source,
        events,
        ingest,
        window,
        missing_file: false,
    })
}

fn cmd_tokenize(
    data: PathBuf,
    cohort_path: PathBuf,
    out: PathBuf,
    config: Option<PathBuf>,
    threads: usize,
) -> Result<()> {
    let mut manifest = RunManifest::new("tokenize");
    manifest.input(&cohort_path)?;
    let tok_cfg = match &config {
        Some(path) => {
            manifest.input(path)?;
            let dto: TokenizeConfig = read_json_config(path)?;
            TokenizerConfig {
                include_label_text: dto.include_label_text.unwrap_or(true),
            }
        }
        None => TokenizerConfig::default(),
    };

    let cohort: Vec<CohortEntry> = formats::read_cohort(&cohort_path)?;
    let index = CohortIndex::new(cohort.iter().cloned());

    // tables are independent; ingest them concurrently, then merge in the
    // fixed source order so results never depend on scheduling
    let work: Mutex<Vec<SourceKind>> = Mutex::new(SourceKind::ALL.to_vec());
    let results: Mutex<Vec<Result<TableResult>>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(SourceKind::ALL.len()) {
            scope.spawn(|| loop {
                let Some(source) = work.lock().unwrap().pop() else {
                    break;
                };
                let result = load_windowed_table(&data, source, &index);
                results.lock().unwrap().push(result);
            });
        }
    });
    let mut tables: Vec<TableResult> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .collect::<Result<_>>()?;
    tables.sort_by_key(|t| t.source);

    for t in &tables {
        let path = data.join(format!("{}.csv", t.source.table_name()));
        if t.missing_file {
            eprintln!(
                "tokenize: warning: {} not found, treating as empty",
                path.display()
            );
            continue;
        }
        manifest.input(&path)?;
        eprintln!(
            "tokenize: {}: {} rows ({} events kept, {} outside window, {} not in cohort, \
             {} malformed, {} bad timestamps)",
            t.source.table_name(),
            t.ingest.rows,
            t.window.kept,
            t.window.out_of_window,
            t.window.not_in_cohort,
            t.ingest.malformed,
            t.ingest.bad_timestamp,
        );
    }

    let events = tables.into_iter().flat_map(|t| t.events);
    let docs = build_documents(events, &cohort, &tok_cfg);
    formats::write_corpus(&out, &docs)?;
    manifest.output(&out);
    manifest.write(&manifest_path_for(&out))?;

    let total_tokens: usize = docs.iter().map(AdmissionDocument::token_count).sum();
    eprintln!(
        "tokenize: wrote {} documents, {} tokens -> {}",
        docs.len(),
        total_tokens,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// describe / split
// ---------------------------------------------------------------------------

fn cmd_describe(cohort_path: PathBuf, corpus_path: PathBuf, out: PathBuf) -> Result<()> {
    let mut manifest = RunManifest::new("describe");
    manifest.input(&cohort_path)?;
    manifest.input(&corpus_path)?;
    let cohort = formats::read_cohort(&cohort_path)?;
    let docs = formats::read_corpus(&corpus_path)?;
    let stats = cohort_stats(&cohort, &docs).map_err(|e| anyhow!(e))?;
    let json = serde_json::to_string_pretty(&formats::stats_to_dto(&stats))?;
    write_atomic(&out, json.as_bytes())?;
    manifest.output(&out);
    manifest.write(&manifest_path_for(&out))?;
    eprintln!(
        "describe: {} admissions / {} patients -> {}",
        stats.n_admissions,
        stats.n_patients,
        out.display()
    );
    Ok(())
}

fn cmd_split(cohort_path: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let mut manifest = RunManifest::new("split");
    manifest.input(&cohort_path)?;
    let cohort = formats::read_cohort(&cohort_path)?;
    let mut patients: Vec<i64> = cohort.iter().map(|e| e.patient_id).collect();
    patients.sort_unstable();
    patients.dedup();
    let seed = seed.unwrap_or(0);
    manifest.seed("split", seed);
    let split = split_patients(&patients, seed).map_err(|e| anyhow!(e))?;
    formats::write_split(&out, &split)?;
    manifest.output(&out);
    manifest.write(&manifest_path_for(&out))?;
    eprintln!(
        "split: {} patients -> train {} / val {} / test {} (seed {seed})",
        patients.len(),
        split.patients_in(Split::Train).len(),
        split.patients_in(Split::Validation).len(),
        split.patients_in(Split::Test).len(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train / tune
// ---------------------------------------------------------------------------

fn partition_docs(
    docs: Vec<AdmissionDocument>,
    split: &SplitAssignment,
) -> (Vec<AdmissionDocument>, Vec<AdmissionDocument>, Vec<AdmissionDocument>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for doc in docs {
        match split.split_of(doc.patient_id) {
            Some(Split::Train) => train.push(doc),
            Some(Split::Validation) => val.push(doc),
            Some(Split::Test) => test.push(doc),
            None => {} // patients outside the split file are dropped
        }
    }
    (train, val, test)
}

fn build_vocabs(
    train_docs: &[AdmissionDocument],
    sources: &[SourceKind],
    min_count: u64,
) -> BTreeMap<SourceKind, Vocabulary> {
    sources
        .iter()
        .map(|&s| (s, Vocabulary::build(train_docs, s, min_count)))
        .collect()
}

fn encode_all(
    docs: &[AdmissionDocument],
    vocabs: &BTreeMap<SourceKind, Vocabulary>,
) -> Vec<EncodedDocument> {
    docs.iter().map(|d| encode(d, vocabs)).collect()
}

fn vocab_rows(vocabs: &BTreeMap<SourceKind, Vocabulary>) -> BTreeMap<SourceKind, usize> {
    vocabs.iter().map(|(&s, v)| (s, v.table_rows())).collect()
}

fn cmd_train(
    corpus_path: PathBuf,
    split_path: PathBuf,
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
) -> Result<()> {
    let mut manifest = RunManifest::new("train");
    manifest.input(&corpus_path)?;
    manifest.input(&split_path)?;
    let cfg: TrainConfig = match &config {
        Some(path) => {
            manifest.input(path)?;
            manifest.config_digest(&sha256_file(path)?);
            read_json_config(path)?
        }
        None => TrainConfig::default(),
    };
    let seed = seed.unwrap_or(cfg.seed);
    manifest.seed("master", seed);

    let outcome = parse_outcome(&cfg.outcome)?;
    let sources = cfg.sources.resolve()?;
    let model_cfg = cfg.model.clone().into_model_config(sources.clone());
    model_cfg
        .validate_search_bounds()
        .map_err(|e| anyhow!("train config: {e}"))?;

    let split = formats::read_split(&split_path)?;
    let docs = formats::read_corpus(&corpus_path)?;
    let (train_docs, val_docs, _) = partition_docs(docs, &split);
    if train_docs.is_empty() || val_docs.is_empty() {
        bail!("train/validation splits are empty for this corpus");
    }

    let vocabs = build_vocabs(&train_docs, &sources, cfg.min_count);
    let train_enc = encode_all(&train_docs, &vocabs);
    let val_enc = encode_all(&val_docs, &vocabs);
    let loop_cfg = cfg.loop_cfg.clone().into_loop_config(seed);

    let result = train_model(&model_cfg, outcome, &vocab_rows(&vocabs), &train_enc, &val_enc, &loop_cfg)
        .map_err(|e| anyhow!("training failed: {e}"))?;

    let model = Model {
        outcome,
        config: model_cfg,
        params: result.params.clone(),
        vocabs,
    };
    let meta = CheckpointMeta {
        seed,
        split_digest: sha256_file(&split_path)?,
        corpus_digest: sha256_file(&corpus_path)?,
        min_count: cfg.min_count,
    };
    save_model(&model, &meta, &out)?;
    manifest.output(&out);

    let history_path = out.with_extension("history.json");
    let history = serde_json::json!({
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "epochs": result
            .history
            .iter()
            .map(|e| serde_json::json!({"train_loss": e.train_loss, "val_loss": e.val_loss}))
            .collect::<Vec<_>>(),
    });
    write_atomic(&history_path, serde_json::to_string_pretty(&history)?.as_bytes())?;
    manifest.output(&history_path);
    manifest.write(&manifest_path_for(&out))?;

    eprintln!(
        "train: {} epochs, best epoch {} (val loss {:.6}) -> {}",
        result.history.len(),
        result.best_epoch,
        result.best_val_loss,
        out.display()
    );
    Ok(())
}

fn cmd_tune(
    corpus_path: PathBuf,
    split_path: PathBuf,
    config: Option<PathBuf>,
    trials_flag: Option<usize>,
    out: PathBuf,
    log: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let mut manifest = RunManifest::new("tune");
    manifest.input(&corpus_path)?;
    manifest.input(&split_path)?;
    let cfg: TuneConfig = match &config {
        Some(path) => {
            manifest.input(path)?;
            manifest.config_digest(&sha256_file(path)?);
            read_json_config(path)?
        }
        None => TuneConfig::default(),
    };
    let seed = seed.unwrap_or(cfg.seed);
    let n_trials = trials_flag.unwrap_or(cfg.trials);
    manifest.seed("master", seed);

    let outcome = parse_outcome(&cfg.outcome)?;
    let sources = cfg.sources.resolve()?;
    let split = formats::read_split(&split_path)?;
    let docs = formats::read_corpus(&corpus_path)?;
    let (train_docs, val_docs, _) = partition_docs(docs, &split);
    if train_docs.is_empty() || val_docs.is_empty() {
        bail!("train/validation splits are empty for this corpus");
    }
    let vocabs = build_vocabs(&train_docs, &sources, cfg.min_count);
    let train_enc = encode_all(&train_docs, &vocabs);
    let val_enc = encode_all(&val_docs, &vocabs);
    let loop_cfg = cfg.loop_cfg.clone().into_loop_config(seed);

    let result = tune(
        &cfg.space.clone().into_space(),
        n_trials,
        &mut RandomSearch,
        &sources,
        outcome,
        &vocab_rows(&vocabs),
        &train_enc,
        &val_enc,
        &loop_cfg,
        seed,
    )
    .map_err(|e| anyhow!("search failed: {e}"))?;

    // winning config as a ready-to-train config file
    let best = TrainConfig {
        outcome: cfg.outcome.clone(),
        sources: SourcesSpec::from_sources(&sources),
        min_count: cfg.min_count,
        model: ModelHyper::from_model_config(&result.best_config),
        loop_cfg: cfg.loop_cfg.clone(),
        seed,
    };
    write_atomic(&out, serde_json::to_string_pretty(&best)?.as_bytes())?;
    manifest.output(&out);

    let log_path = log.unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".trials.jsonl");
        out.with_file_name(name)
    });
    formats::write_trial_log(&log_path, &result.trials)?;
    manifest.output(&log_path);
    manifest.write(&manifest_path_for(&out))?;

    let ok = result
        .trials
        .iter()
        .filter(|t| t.status == tokenbag::trainer::TrialStatus::Ok)
        .count();
    eprintln!(
        "tune: {} trials ({} ok), best trial {} val loss {:.6} -> {}",
        result.trials.len(),
        ok,
        result.best_trial,
        result.trials[result.best_trial].best_val_loss,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate / compare
// ---------------------------------------------------------------------------

enum TestDocs {
    File(PathBuf),
    CorpusSplit(PathBuf, PathBuf),
}

fn test_docs_source(
    test: Option<PathBuf>,
    corpus: Option<PathBuf>,
    split: Option<PathBuf>,
) -> Result<TestDocs, CliError> {
    match (test, corpus, split) {
        (Some(t), None, None) => Ok(TestDocs::File(t)),
        (None, Some(c), Some(s)) => Ok(TestDocs::CorpusSplit(c, s)),
        _ => Err(CliError::Usage(
            "provide either --test <jsonl>, or --corpus <jsonl> with --split <json>".to_string(),
        )),
    }
}

impl TestDocs {
    fn load(
        &self,
        manifest: &mut RunManifest,
    ) -> Result<(Vec<AdmissionDocument>, Option<String>)> {
        match self {
            TestDocs::File(path) => {
                manifest.input(path)?;
                Ok((formats::read_corpus(path)?, None))
            }
            TestDocs::CorpusSplit(corpus, split_path) => {
                manifest.input(corpus)?;
                manifest.input(split_path)?;
                let split = formats::read_split(split_path)?;
                let docs = formats::read_corpus(corpus)?;
                let (_, _, test) = partition_docs(docs, &split);
                Ok((test, Some(sha256_file(split_path)?)))
            }
        }
    }
}

fn eval_options(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    manifest: &mut RunManifest,
) -> Result<EvalOptions> {
    let dto: EvalConfig = match config {
        Some(path) => {
            manifest.input(path)?;
            read_json_config(path)?
        }
        None => EvalConfig::default(),
    };
    let opts = dto.into_options(seed);
    manifest.seed("eval", opts.seed);
    Ok(opts)
}

fn finish_report(
    report: &tokenbag::metrics::EvalReport,
    out: &Path,
    csv_dir: Option<PathBuf>,
    mut manifest: RunManifest,
) -> Result<()> {
    formats::write_report(out, report)?;
    manifest.output(out);
    if let Some(dir) = csv_dir {
        for path in formats::write_curve_csvs(&dir, report)? {
            manifest.output(&path);
        }
    }
    manifest.write(&manifest_path_for(out))?;
    Ok(())
}

fn cmd_evaluate(
    model_path: PathBuf,
    docs: TestDocs,
    out: PathBuf,
    csv_dir: Option<PathBuf>,
    config: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate");
    manifest.input(&model_path)?;
    let (model, meta) = load_model(&model_path)?;
    let (test_docs, split_digest) = docs.load(&mut manifest)?;
    if let Some(digest) = &split_digest {
        if digest != &meta.split_digest {
            eprintln!(
                "evaluate: warning: split file differs from the one recorded at training time"
            );
        }
    }
    if test_docs.is_empty() {
        bail!("no test documents to score");
    }
    let opts = eval_options(&config, seed, &mut manifest)?;
    let report = evaluate(&model, &test_docs, &opts).map_err(|e| anyhow!(e))?;
    eprintln!(
        "evaluate: n={} auc_roc={:.4} pr_auc={:.4} -> {}",
        report.n,
        report.auc_roc,
        report.pr_auc,
        out.display()
    );
    finish_report(&report, &out, csv_dir, manifest)
}

fn cmd_compare(
    model_a_path: PathBuf,
    model_b_path: PathBuf,
    docs: TestDocs,
    out: PathBuf,
    csv_dir: Option<PathBuf>,
    config: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let mut manifest = RunManifest::new("compare");
    manifest.input(&model_a_path)?;
    manifest.input(&model_b_path)?;
    let (model_a, meta_a) = load_model(&model_a_path)?;
    let (model_b, meta_b) = load_model(&model_b_path)?;

    // refuse unpaired comparisons before any metric work
    if model_a.outcome != model_b.outcome {
        bail!(
            "models predict different outcomes ({} vs {})",
            model_a.outcome.name(),
            model_b.outcome.name()
        );
    }
    if meta_a.split_digest != meta_b.split_digest {
        bail!("models were trained against different split files; their test sets are not paired");
    }
    if meta_a.corpus_digest != meta_b.corpus_digest {
        bail!("models were trained against different corpora; their test sets are not paired");
    }

    let (test_docs, split_digest) = docs.load(&mut manifest)?;
    if let Some(digest) = &split_digest {
        if digest != &meta_a.split_digest {
            eprintln!(
                "compare: warning: split file differs from the one recorded at training time"
            );
        }
    }
    if test_docs.is_empty() {
        bail!("no test documents to score");
    }
    let opts = eval_options(&config, seed, &mut manifest)?;
    let label_b = model_b_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model-b".to_string());
    let report = compare(&model_a, &model_b, &label_b, &test_docs, &opts).map_err(|e| anyhow!(e))?;
    let cmp = report.comparison.as_ref().expect("compare sets the block");
    eprintln!(
        "compare: auc_roc {:.4} vs {:.4} (delta {:+.4}, p={:.4}); pr_auc {:.4} vs {:.4} (delta {:+.4}, p={:.4})",
        report.auc_roc,
        cmp.other_auc_roc,
        cmp.delta_auc_roc,
        cmp.p_auc_roc,
        report.pr_auc,
        cmp.other_pr_auc,
        cmp.delta_pr_auc,
        cmp.p_pr_auc,
    );
    finish_report(&report, &out, csv_dir, manifest)
}

// Used by integration tests to avoid reparsing argv strings.
pub fn sha256_of(bytes: &[u8]) -> String {
    sha256_bytes(bytes)
}
