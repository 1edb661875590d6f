//! Temporary calibration probe for the default generator config.

use std::collections::BTreeMap;
use std::fs;

use tokenbag::dataset::{split_patients, Outcome, Split};
use tokenbag::metrics::{permutation_test, roc_auc, MetricKind, ScoredSet};
use tokenbag::nncore::{Model, ModelConfig};
use tokenbag::schema::{select_cohort, CohortIndex, WindowStatus};
use tokenbag::synthgen::{bayes_auc, generate, GeneratorConfig};
use tokenbag::tokenizer::{build_documents, AdmissionDocument, TokenizerConfig};
use tokenbag::trainer::{train_model, TrainLoopConfig};
use tokenbag::vocab::{encode, Vocabulary};
use tokenbag::SourceKind;
use tokenbag_cli::ingest::{load_admissions, load_icustays, load_table};

fn materialize(cfg: &GeneratorConfig, dir: &std::path::Path) -> Vec<AdmissionDocument> {
    let data = generate(cfg).unwrap();
    for (name, contents) in &data.tables {
        fs::write(dir.join(name), contents).unwrap();
    }
    let (admissions, _) = load_admissions(&dir.join("admissions.csv")).unwrap();
    let (stays, _) = load_icustays(&dir.join("icustays.csv")).unwrap();
    let selection = select_cohort(&admissions, &stays);
    let index = CohortIndex::new(selection.cohort.iter().cloned());
    let mut events = Vec::new();
    for source in SourceKind::ALL {
        load_table(&dir.join(format!("{}.csv", source.table_name())), source, |e| {
            if index.window_status(&e) == WindowStatus::Keep {
                events.push(e);
            }
        })
        .unwrap();
    }
    build_documents(events, &selection.cohort, &TokenizerConfig::default())
}

fn train_and_score(
    docs: &[AdmissionDocument],
    sources: Vec<SourceKind>,
    seed: u64,
) -> (f64, ScoredSet) {
    let patients: Vec<i64> = {
        let mut p: Vec<i64> = docs.iter().map(|d| d.patient_id).collect();
        p.sort_unstable();
        p.dedup();
        p
    };
    let split = split_patients(&patients, 1234).unwrap();
    let by = |s: Split| -> Vec<AdmissionDocument> {
        docs.iter()
            .filter(|d| split.split_of(d.patient_id) == Some(s))
            .cloned()
            .collect()
    };
    let (train_docs, val_docs, test_docs) = (by(Split::Train), by(Split::Validation), by(Split::Test));
    let vocabs: BTreeMap<SourceKind, Vocabulary> = sources
        .iter()
        .map(|&s| (s, Vocabulary::build(&train_docs, s, 2)))
        .collect();
    let rows = vocabs.iter().map(|(&s, v)| (s, v.table_rows())).collect();
    let enc = |d: &[AdmissionDocument]| -> Vec<_> { d.iter().map(|x| encode(x, &vocabs)).collect() };
    let cfg = ModelConfig {
        sources,
        embedding_dim: 8,
        embedding_dropout: 0.2,
        n_dense: 2,
        neurons_per_layer: 64,
        hidden_dropout: 0.2,
        learning_rate: 0.003,
    };
    let loop_cfg = TrainLoopConfig {
        max_epochs: 40,
        patience: 5,
        batch_size: 256,
        seed,
        min_improvement: 1e-5,
    };
    let result = train_model(&cfg, Outcome::Ihm, &rows, &enc(&train_docs), &enc(&val_docs), &loop_cfg)
        .unwrap();
    let model = Model {
        outcome: Outcome::Ihm,
        config: cfg,
        params: result.params,
        vocabs,
    };
    let scores = model.score_documents(&test_docs, 256).unwrap();
    let labels: Vec<bool> = test_docs.iter().map(|d| d.label_ihm.unwrap()).collect();
    let ids: Vec<i64> = test_docs.iter().map(|d| d.admission_id).collect();
    let set = ScoredSet::new(scores, labels, ids).unwrap();
    let auc = roc_auc(&set).unwrap();
    eprintln!(
        "  trained {} epochs (best {}), n_test={}, auc={auc:.4}",
        result.history.len(),
        result.best_epoch,
        set.len()
    );
    (auc, set)
}

#[test]
fn probe_default_config_separation() {
    for chart_strength in [0.7] {
        let mut cfg = GeneratorConfig::default();
        cfg.n_patients = 2500;
        cfg.base_rate_ihm = 0.15;
        for (s, v) in [
            (SourceKind::ChartEvents, chart_strength),
            (SourceKind::InputEvents, 0.9),
            (SourceKind::OutputEvents, 0.9),
            (SourceKind::LabEvents, 0.9),
            (SourceKind::MicrobiologyEvents, 1.2),
            (SourceKind::ProcedureEvents, 1.2),
            (SourceKind::NoteEvents, 0.8),
            (SourceKind::Prescriptions, 0.9),
        ] {
            cfg.signal_strength.insert(s, v);
        }
        let bayes = bayes_auc(&cfg, Outcome::Ihm, 200_000).unwrap();
        eprintln!(
            "=== chart strength {chart_strength}: bayes ihm {:.4} (se {:.5})",
            bayes.estimate, bayes.se
        );

        let dir = tempfile::tempdir().unwrap();
        let docs = materialize(&cfg, dir.path());

        let (auc_cs, set_cs) = train_and_score(&docs, vec![SourceKind::ChartEvents], 42);
        eprintln!("CS auc {auc_cs:.4}");
        let (auc_as, set_as) = train_and_score(&docs, SourceKind::ALL.to_vec(), 43);
        eprintln!("AS auc {auc_as:.4}");

        let p = permutation_test(&set_as, &set_cs, MetricKind::RocAuc, 2000, 7).unwrap();
        eprintln!("delta {:.4}, p = {p:.4}", auc_as - auc_cs);
    }
}
