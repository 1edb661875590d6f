//! On-disk interchange formats between pipeline stages.
//!
//! - token corpus: JSON lines, one admission document per line
//! - vocabulary: one JSON object, entries `[token, id, frequency]` by id
//! - split: JSON patient-id lists per split
//! - cohort: JSON list of admissions with stay interval and outcome fields
//! - trial log: JSON lines, one record per tuning trial
//! - evaluation report: JSON, plus optional CSV point exports

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::write_atomic;
use tokenbag::dataset::SplitAssignment;
use tokenbag::metrics::{CalibrationPoint, CiEntry, Comparison, EvalReport, MetricKind};
use tokenbag::schema::{CohortCounts, CohortEntry, Timestamp};
use tokenbag::tokenizer::{AdmissionDocument, Token};
use tokenbag::trainer::{TrialRecord, TrialStatus};
use tokenbag::vocab::Vocabulary;
use tokenbag::SourceKind;

// ---------------------------------------------------------------------------
// Token corpus (JSONL)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CorpusDocDto {
    hadm_id: i64,
    subject_id: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_ihm: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_los: Option<u8>,
    tokens: BTreeMap<String, Vec<String>>,
}

fn doc_to_dto(doc: &AdmissionDocument) -> CorpusDocDto {
    CorpusDocDto {
        hadm_id: doc.admission_id,
        subject_id: doc.patient_id,
        label_ihm: doc.label_ihm.map(u8::from),
        label_los: doc.label_los.map(u8::from),
        tokens: doc
            .tokens_by_source
            .iter()
            .map(|(s, tokens)| {
                (
                    s.table_name().to_string(),
                    tokens.iter().map(|t| t.as_str().to_string()).collect(),
                )
            })
            .collect(),
    }
}

fn dto_to_doc(dto: CorpusDocDto, line: usize) -> Result<AdmissionDocument> {
    let mut doc = AdmissionDocument::empty(dto.hadm_id, dto.subject_id);
    doc.label_ihm = dto.label_ihm.map(|v| v != 0);
    doc.label_los = dto.label_los.map(|v| v != 0);
    for (name, tokens) in dto.tokens {
        let source = SourceKind::from_table_name(&name)
            .with_context(|| format!("corpus line {line}: unknown source {name:?}"))?;
        let parsed: Vec<Token> = tokens
            .into_iter()
            .map(|t| {
                Token::new(t).with_context(|| format!("corpus line {line}: invalid token"))
            })
            .collect::<Result<_>>()?;
        doc.tokens_by_source.insert(source, parsed);
    }
    Ok(doc)
}

pub fn write_corpus(path: &Path, docs: &[AdmissionDocument]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(&doc_to_dto(doc))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_corpus(path: &Path) -> Result<Vec<AdmissionDocument>> {
    let file = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dto: CorpusDocDto = serde_json::from_str(&line)
            .with_context(|| format!("corpus line {} is not valid JSON", i + 1))?;
        docs.push(dto_to_doc(dto, i + 1)?);
    }
    Ok(docs)
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct VocabDto {
    source: String,
    min_count: u64,
    /// (token, id, frequency) sorted by id.
    tokens: Vec<(String, u32, u64)>,
}

/// Canonical single-line JSON used both for files and for digesting.
pub fn vocab_to_json(vocab: &Vocabulary) -> Result<String> {
    let dto = VocabDto {
        source: vocab.source.table_name().to_string(),
        min_count: vocab.min_count,
        tokens: vocab
            .iter_by_id()
            .map(|(id, token, freq)| (token.to_string(), id, freq))
            .collect(),
    };
    Ok(serde_json::to_string(&dto)?)
}

pub fn vocab_from_json(json: &str) -> Result<Vocabulary> {
    let dto: VocabDto = serde_json::from_str(json).context("parsing vocabulary JSON")?;
    let source = SourceKind::from_table_name(&dto.source)
        .with_context(|| format!("unknown vocabulary source {:?}", dto.source))?;
    Vocabulary::from_entries(source, dto.min_count, dto.tokens)
        .map_err(|e| anyhow::anyhow!("invalid vocabulary: {e}"))
}

// ---------------------------------------------------------------------------
// Split file
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SplitDto {
    seed: u64,
    train: Vec<i64>,
    val: Vec<i64>,
    test: Vec<i64>,
}

pub fn write_split(path: &Path, split: &SplitAssignment) -> Result<()> {
    use tokenbag::dataset::Split;
    let dto = SplitDto {
        seed: split.seed,
        train: split.patients_in(Split::Train),
        val: split.patients_in(Split::Validation),
        test: split.patients_in(Split::Test),
    };
    write_atomic(path, serde_json::to_string_pretty(&dto)?.as_bytes())
}

pub fn read_split(path: &Path) -> Result<SplitAssignment> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading split {}", path.display()))?;
    let dto: SplitDto = serde_json::from_slice(&bytes).context("parsing split file")?;
    SplitAssignment::from_parts(dto.seed, dto.train, dto.val, dto.test)
        .map_err(|e| anyhow::anyhow!("invalid split file: {e}"))
}

// ---------------------------------------------------------------------------
// Cohort file
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CohortEntryDto {
    hadm_id: i64,
    subject_id: i64,
    intime: String,
    outtime: String,
    hospital_death: u8,
    icu_los_days: f64,
}

#[derive(Debug, Serialize, Deserialize, Default)]
pub struct CohortCountsDto {
    pub admissions: usize,
    pub stays: usize,
    pub orphan_stays: usize,
    pub excluded_no_stay: usize,
    pub excluded_multi_stay: usize,
    pub excluded_short_stay: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CohortFileDto {
    counts: CohortCountsDto,
    cohort: Vec<CohortEntryDto>,
}

pub fn write_cohort(path: &Path, cohort: &[CohortEntry], counts: &CohortCounts) -> Result<()> {
    let dto = CohortFileDto {
        counts: CohortCountsDto {
            admissions: counts.admissions,
            stays: counts.stays,
            orphan_stays: counts.orphan_stays,
            excluded_no_stay: counts.excluded_no_stay,
            excluded_multi_stay: counts.excluded_multi_stay,
            excluded_short_stay: counts.excluded_short_stay,
        },
        cohort: cohort
            .iter()
            .map(|e| CohortEntryDto {
                hadm_id: e.admission_id,
                subject_id: e.patient_id,
                intime: e.icu_intime.format_datetime(),
                outtime: e.icu_outtime.format_datetime(),
                hospital_death: u8::from(e.hospital_death),
                icu_los_days: e.icu_los_days,
            })
            .collect(),
    };
    write_atomic(path, serde_json::to_string_pretty(&dto)?.as_bytes())
}

pub fn read_cohort(path: &Path) -> Result<Vec<CohortEntry>> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading cohort {}", path.display()))?;
    let dto: CohortFileDto = serde_json::from_slice(&bytes).context("parsing cohort file")?;
    dto.cohort
        .into_iter()
        .map(|e| {
            let icu_intime = Timestamp::parse(&e.intime)
                .map_err(|err| anyhow::anyhow!("cohort intime: {err}"))?;
            let icu_outtime = Timestamp::parse(&e.outtime)
                .map_err(|err| anyhow::anyhow!("cohort outtime: {err}"))?;
            if icu_outtime.0 <= icu_intime.0 {
                bail!("cohort admission {}: outtime not after intime", e.hadm_id);
            }
            Ok(CohortEntry {
                admission_id: e.hadm_id,
                patient_id: e.subject_id,
                icu_intime,
                icu_outtime,
                hospital_death: e.hospital_death != 0,
                icu_los_days: e.icu_los_days,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trial log
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TrialDto {
    trial: usize,
    config: crate::config::ModelHyper,
    sources: Vec<String>,
    best_val_loss: Option<f64>,
    best_epoch: usize,
    status: String,
}

pub fn write_trial_log(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut out = String::new();
    for t in trials {
        let dto = TrialDto {
            trial: t.trial,
            config: crate::config::ModelHyper::from_model_config(&t.config),
            sources: t.config.sources.iter().map(|s| s.table_name().into()).collect(),
            best_val_loss: t.best_val_loss.is_finite().then_some(t.best_val_loss),
            best_epoch: t.best_epoch,
            status: match t.status {
                TrialStatus::Ok => "ok".to_string(),
                TrialStatus::Diverged => "diverged".to_string(),
            },
        };
        out.push_str(&serde_json::to_string(&dto)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct CiDto {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub redraws: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonDto {
    pub other_model: String,
    pub other_auc_roc: f64,
    pub other_pr_auc: f64,
    pub other_ci: BTreeMap<String, CiDto>,
    pub delta_auc_roc: f64,
    pub delta_pr_auc: f64,
    pub p_auc_roc: f64,
    pub p_pr_auc: f64,
    pub n_resamples: usize,
    pub n_permutations: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationPointDto {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDto {
    pub n: usize,
    pub n_pos: usize,
    pub auc_roc: f64,
    pub pr_auc: f64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ci: BTreeMap<String, CiDto>,
    pub roc_points: Vec<(f64, f64)>,
    pub pr_points: Vec<(f64, f64)>,
    pub calibration_points: Vec<CalibrationPointDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonDto>,
}

fn ci_map(ci: &BTreeMap<MetricKind, CiEntry>) -> BTreeMap<String, CiDto> {
    ci.iter()
        .map(|(k, v)| {
            (
                k.name().to_string(),
                CiDto {
                    lo: v.lo,
                    hi: v.hi,
                    level: v.level,
                    redraws: v.redraws,
                },
            )
        })
        .collect()
}

fn comparison_dto(c: &Comparison) -> ComparisonDto {
    ComparisonDto {
        other_model: c.other_label.clone(),
        other_auc_roc: c.other_auc_roc,
        other_pr_auc: c.other_pr_auc,
        other_ci: ci_map(&c.other_ci),
        delta_auc_roc: c.delta_auc_roc,
        delta_pr_auc: c.delta_pr_auc,
        p_auc_roc: c.p_auc_roc,
        p_pr_auc: c.p_pr_auc,
        n_resamples: c.n_resamples,
        n_permutations: c.n_permutations,
        seed: c.seed,
    }
}

pub fn report_to_dto(report: &EvalReport) -> ReportDto {
    ReportDto {
        n: report.n,
        n_pos: report.n_pos,
        auc_roc: report.auc_roc,
        pr_auc: report.pr_auc,
        threshold: report.threshold,
        precision: report.precision,
        recall: report.recall,
        f1: report.f1,
        ci: ci_map(&report.ci),
        roc_points: report.roc_points.clone(),
        pr_points: report.pr_points.clone(),
        calibration_points: report
            .calibration_points
            .iter()
            .map(|p| CalibrationPointDto {
                mean_predicted: p.mean_predicted,
                observed_rate: p.observed_rate,
                count: p.count,
            })
            .collect(),
        comparison: report.comparison.as_ref().map(comparison_dto),
    }
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let json = serde_json::to_string_pretty(&report_to_dto(report))?;
    write_atomic(path, json.as_bytes())
}

/// CSV point exports for external plotting: `roc.csv` (fpr,tpr), `pr.csv`
/// (recall,precision), `calibration.csv` (mean_pred,obs_rate,count).
pub fn write_curve_csvs(dir: &Path, report: &EvalReport) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut roc = String::from("fpr,tpr\n");
    for (x, y) in &report.roc_points {
        roc.push_str(&format!("{x},{y}\n"));
    }
    let path = dir.join("roc.csv");
    write_atomic(&path, roc.as_bytes())?;
    written.push(path);

    let mut pr = String::from("recall,precision\n");
    for (x, y) in &report.pr_points {
        pr.push_str(&format!("{x},{y}\n"));
    }
    let path = dir.join("pr.csv");
    write_atomic(&path, pr.as_bytes())?;
    written.push(path);

    let mut cal = String::from("mean_pred,obs_rate,count\n");
    for CalibrationPoint {
        mean_predicted,
        observed_rate,
        count,
    } in &report.calibration_points
    {
        cal.push_str(&format!("{mean_predicted},{observed_rate},{count}\n"));
    }
    let path = dir.join("calibration.csv");
    write_atomic(&path, cal.as_bytes())?;
    written.push(path);
    Ok(written)
}

// ---------------------------------------------------------------------------
// Stats output
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsDto {
    pub n_admissions: usize,
    pub n_patients: usize,
    pub ihm_count: usize,
    pub ihm_rate: f64,
    pub los_count: usize,
    pub los_rate: f64,
    pub los_days_median: f64,
    pub los_days_q1: f64,
    pub los_days_q3: f64,
    pub token_counts: BTreeMap<String, u64>,
}

pub fn stats_to_dto(stats: &tokenbag::schema::CohortStats) -> StatsDto {
    StatsDto {
        n_admissions: stats.n_admissions,
        n_patients: stats.n_patients,
        ihm_count: stats.ihm_count,
        ihm_rate: stats.ihm_rate,
        los_count: stats.los_count,
        los_rate: stats.los_rate,
        los_days_median: stats.los_days_median,
        los_days_q1: stats.los_days_q1,
        los_days_q3: stats.los_days_q3,
        token_counts: stats
            .token_counts
            .iter()
            .map(|(s, &c)| (s.table_name().to_string(), c))
            .collect(),
    }
}
