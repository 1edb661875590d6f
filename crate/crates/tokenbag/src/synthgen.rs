//! Seeded generator of desk-scale, schema-shaped CSV tables with a planted,
//! per-source-controllable signal, plus a Monte-Carlo ceiling on what any
//! model can score on the generated data.
//!
//! Generative model: each admission draws a latent risk z ~ N(0,1); labels
//! are Bernoulli(sigmoid(alpha + beta z)) with alpha solved so the expected
//! rate hits the configured base rate; every event picks its token from a
//! "risk" or "benign" half of the source vocabulary with probability
//! sigmoid(strength_s * z). Sources with strength 0 carry no label
//! information.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Outcome;
use crate::nncore::sigmoid;
use crate::schema::{SourceKind, Timestamp};

const BASE_INTIME: i64 = 4_133_980_800; // 2101-01-01 00:00:00
const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    /// Probability that a patient has a second admission (mean ~1 + p).
    pub extra_admission_prob: f64,
    /// Mean event count per admission and source (Poisson).
    pub events_per_source: BTreeMap<SourceKind, f64>,
    /// Token universe size per source; half benign, half risk-informative.
    pub vocab_size_per_source: BTreeMap<SourceKind, usize>,
    /// Log-odds scale tying each source's token mixture to the latent risk.
    pub signal_strength: BTreeMap<SourceKind, f64>,
    pub base_rate_ihm: f64,
    pub base_rate_los: f64,
    /// Label-model slopes on the latent risk; they set the Bayes ceiling.
    pub beta_ihm: f64,
    pub beta_los: f64,
    /// Fraction of admissions planted with two ICU stays (cohort-excluded).
    pub multi_stay_prob: f64,
    /// Fraction planted with a single sub-24 h stay (cohort-excluded).
    pub short_stay_prob: f64,
    /// Words per note event.
    pub note_words_per_event: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let per_source = |chart: f64, input: f64, output: f64, lab: f64, micro: f64,
                          proc: f64, note: f64, presc: f64|
         -> BTreeMap<SourceKind, f64> {
            [
                (SourceKind::ChartEvents, chart),
                (SourceKind::InputEvents, input),
                (SourceKind::OutputEvents, output),
                (SourceKind::LabEvents, lab),
                (SourceKind::MicrobiologyEvents, micro),
                (SourceKind::ProcedureEvents, proc),
                (SourceKind::NoteEvents, note),
                (SourceKind::Prescriptions, presc),
            ]
            .into_iter()
            .collect()
        };
        GeneratorConfig {
            n_patients: 2000,
            extra_admission_prob: 0.1,
            events_per_source: per_source(30.0, 25.0, 20.0, 40.0, 8.0, 8.0, 12.0, 25.0),
            vocab_size_per_source: SourceKind::ALL.iter().map(|&s| (s, 2000)).collect(),
            signal_strength: per_source(0.30, 0.50, 0.50, 0.50, 0.80, 0.80, 0.40, 0.50),
            base_rate_ihm: 0.12,
            base_rate_los: 0.20,
            beta_ihm: 3.0,
            beta_los: 3.0,
            multi_stay_prob: 0.04,
            short_stay_prob: 0.04,
            note_words_per_event: 6,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |name: &str, v: f64, open: bool| {
            let ok = if open {
                v > 0.0 && v < 1.0
            } else {
                (0.0..=1.0).contains(&v)
            };
            if ok {
                Ok(())
            } else {
                Err(SynthError::InvalidConfig(alloc::format!(
                    "{name} = {v} out of range"
                )))
            }
        };
        prob("base_rate_ihm", self.base_rate_ihm, true)?;
        prob("base_rate_los", self.base_rate_los, true)?;
        prob("extra_admission_prob", self.extra_admission_prob, false)?;
        prob("multi_stay_prob", self.multi_stay_prob, false)?;
        prob("short_stay_prob", self.short_stay_prob, false)?;
        if self.multi_stay_prob + self.short_stay_prob > 1.0 {
            return Err(SynthError::InvalidConfig(
                "multi_stay_prob + short_stay_prob exceeds 1".into(),
            ));
        }
        for source in SourceKind::ALL {
            let v = self
                .vocab_size_per_source
                .get(&source)
                .copied()
                .unwrap_or(0);
            if v < 2 {
                return Err(SynthError::InvalidConfig(alloc::format!(
                    "vocab size for {} must be at least 2",
                    source.table_name()
                )));
            }
            let strength = self.signal_strength.get(&source).copied().unwrap_or(0.0);
            if !strength.is_finite() || strength < 0.0 {
                return Err(SynthError::InvalidConfig(alloc::format!(
                    "signal strength for {} must be finite and >= 0",
                    source.table_name()
                )));
            }
            let mean = self.events_per_source.get(&source).copied().unwrap_or(0.0);
            if !mean.is_finite() || mean < 0.0 {
                return Err(SynthError::InvalidConfig(alloc::format!(
                    "event mean for {} must be finite and >= 0",
                    source.table_name()
                )));
            }
        }
        if !self.beta_ihm.is_finite() || !self.beta_los.is_finite() {
            return Err(SynthError::InvalidConfig("beta must be finite".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Deterministic samplers
// ---------------------------------------------------------------------------

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Box-Muller standard normal.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Product-of-uniforms Poisson; fine for desk-scale means.
fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = libm::exp(-lambda);
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

// ---------------------------------------------------------------------------
// Label model
// ---------------------------------------------------------------------------

/// E[sigmoid(alpha + beta Z)], Z ~ N(0,1), by midpoint quadrature.
fn expected_rate(alpha: f64, beta: f64) -> f64 {
    const STEPS: usize = 4000;
    const LO: f64 = -10.0;
    const HI: f64 = 10.0;
    let h = (HI - LO) / STEPS as f64;
    let norm = 1.0 / libm::sqrt(2.0 * core::f64::consts::PI);
    let mut total = 0.0;
    for i in 0..STEPS {
        let z = LO + (i as f64 + 0.5) * h;
        total += sigmoid(alpha + beta * z) * norm * libm::exp(-0.5 * z * z) * h;
    }
    total
}

/// Solves E[sigmoid(alpha + beta Z)] = target for alpha by bisection.
pub fn solve_alpha(beta: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_rate(mid, beta) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    MultiStay,
    ShortStay,
}

/// Ground truth for one generated admission.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionTruth {
    pub hadm_id: i64,
    pub patient_id: i64,
    pub z: f64,
    pub p_ihm: f64,
    pub p_los: f64,
    pub label_ihm: bool,
    pub label_los: bool,
    pub intime: Timestamp,
    pub excluded: Option<Exclusion>,
}

#[derive(Debug, Clone)]
pub struct GenSummary {
    pub alpha_ihm: f64,
    pub alpha_los: f64,
    pub admissions: Vec<AdmissionTruth>,
}

impl GenSummary {
    pub fn cohort_admission_ids(&self) -> Vec<i64> {
        self.admissions
            .iter()
            .filter(|a| a.excluded.is_none())
            .map(|a| a.hadm_id)
            .collect()
    }
}

/// Generated tables keyed by file name (`admissions.csv`, `icustays.csv`,
/// one per event source), plus the ground-truth sidecar and the in-memory
/// summary. Identical configs produce byte-identical contents.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub tables: BTreeMap<String, String>,
    /// `truth/admissions_truth.csv` sidecar; never fed to the pipeline.
    pub truth_csv: String,
    pub summary: GenSummary,
}

struct Plan {
    admissions: Vec<AdmissionTruth>,
    /// Parallel to `admissions`: ICU stays as (intime, outtime) pairs.
    stays: Vec<Vec<(Timestamp, Timestamp)>>,
}

fn build_plan(cfg: &GeneratorConfig, alpha_ihm: f64, alpha_los: f64) -> Plan {
    let mut rng = stream_rng(cfg.seed, 0);
    let mut admissions = Vec::new();
    let mut stays = Vec::new();
    let mut adm_seq = 0i64;
    for patient in 1..=cfg.n_patients as i64 {
        let n_adm = if rng.gen::<f64>() < cfg.extra_admission_prob {
            2
        } else {
            1
        };
        for _ in 0..n_adm {
            let hadm_id = 100_000 + adm_seq;
            let intime = Timestamp(BASE_INTIME + adm_seq * 3 * DAY);
            adm_seq += 1;

            let z = normal(&mut rng);
            let p_ihm = sigmoid(alpha_ihm + cfg.beta_ihm * z);
            let p_los = sigmoid(alpha_los + cfg.beta_los * z);
            let label_ihm = rng.gen::<f64>() < p_ihm;
            let label_los = rng.gen::<f64>() < p_los;

            let excl_draw: f64 = rng.gen();
            let excluded = if excl_draw < cfg.multi_stay_prob {
                Some(Exclusion::MultiStay)
            } else if excl_draw < cfg.multi_stay_prob + cfg.short_stay_prob {
                Some(Exclusion::ShortStay)
            } else {
                None
            };

            let stay_list = match excluded {
                Some(Exclusion::MultiStay) => {
                    let d1 = rng.gen_range(1.2..3.0);
                    let d2 = rng.gen_range(1.2..3.0);
                    let out1 = Timestamp(intime.0 + (d1 * DAY as f64) as i64);
                    let in2 = Timestamp(out1.0 + DAY);
                    let out2 = Timestamp(in2.0 + (d2 * DAY as f64) as i64);
                    alloc::vec![(intime, out1), (in2, out2)]
                }
                Some(Exclusion::ShortStay) => {
                    let days = rng.gen_range(0.2..0.9);
                    alloc::vec![(intime, Timestamp(intime.0 + (days * DAY as f64) as i64))]
                }
                None => {
                    // stay length encodes the LOS label with safety margins
                    // around the 1-day and 7-day boundaries
                    let days = if label_los {
                        rng.gen_range(7.5..20.0)
                    } else {
                        rng.gen_range(1.05..6.5)
                    };
                    alloc::vec![(intime, Timestamp(intime.0 + (days * DAY as f64) as i64))]
                }
            };

            admissions.push(AdmissionTruth {
                hadm_id,
                patient_id: patient,
                z,
                p_ihm,
                p_los,
                label_ihm,
                label_los,
                intime,
                excluded,
            });
            stays.push(stay_list);
        }
    }
    Plan { admissions, stays }
}

fn push_row(out: &mut String, fields: &[&str]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f);
    }
    out.push('\n');
}

fn event_table(cfg: &GeneratorConfig, plan: &Plan, source: SourceKind, stream: u64) -> String {
    let mut rng = stream_rng(cfg.seed, stream);
    let mean = cfg.events_per_source.get(&source).copied().unwrap_or(0.0);
    let vocab = cfg.vocab_size_per_source[&source];
    let pool = vocab / 2;
    let strength = cfg.signal_strength.get(&source).copied().unwrap_or(0.0);

    let mut out = String::new();
    let mut header = alloc::vec!["ROW_ID"];
    header.extend_from_slice(source.required_columns());
    push_row(&mut out, &header);

    let mut row_id = 0i64;
    for adm in &plan.admissions {
        let n_events = poisson(&mut rng, mean);
        let subject = alloc::format!("{}", adm.patient_id);
        let hadm = alloc::format!("{}", adm.hadm_id);
        for _ in 0..n_events {
            let t = Timestamp(adm.intime.0 + rng.gen_range(0..DAY));
            let p_risk = sigmoid(strength * adm.z);
            let base = if rng.gen::<f64>() < p_risk { pool } else { 0 };
            let tok = base + rng.gen_range(0..pool);
            row_id += 1;
            let row_id_s = alloc::format!("{row_id}");
            let item = alloc::format!("{}", 1000 + tok);
            match source {
                SourceKind::ChartEvents => {
                    let chart = Timestamp(t.0 - 300).format_datetime();
                    let store = t.format_datetime();
                    push_row(
                        &mut out,
                        &[&row_id_s, &subject, &hadm, &item, &chart, &store, "1", "u"],
                    );
                }
                SourceKind::InputEvents => {
                    let store = t.format_datetime();
                    push_row(&mut out, &[&row_id_s, &subject, &hadm, &item, &store, "1", "ml"]);
                }
                SourceKind::OutputEvents => {
                    let store = t.format_datetime();
                    push_row(&mut out, &[&row_id_s, &subject, &hadm, &item, &store, "1", "ml"]);
                }
                SourceKind::LabEvents => {
                    let chart = t.format_datetime();
                    push_row(
                        &mut out,
                        &[&row_id_s, &subject, &hadm, &item, &chart, "1", "mg/dL", ""],
                    );
                }
                SourceKind::MicrobiologyEvents => {
                    let chart = t.format_datetime();
                    push_row(&mut out, &[&row_id_s, &subject, &hadm, &chart, &item, "1", "S"]);
                }
                SourceKind::ProcedureEvents => {
                    let store = t.format_datetime();
                    push_row(&mut out, &[&row_id_s, &subject, &hadm, &item, &store, "1", "min"]);
                }
                SourceKind::NoteEvents => {
                    let store = t.format_datetime();
                    let mut text = String::new();
                    for w in 0..cfg.note_words_per_event {
                        if w > 0 {
                            text.push(' ');
                        }
                        // each word is its own mixture draw
                        let p = sigmoid(strength * adm.z);
                        let b = if rng.gen::<f64>() < p { pool } else { 0 };
                        let word = b + rng.gen_range(0..pool);
                        text.push_str(&alloc::format!("w{word:05}"));
                    }
                    push_row(
                        &mut out,
                        &[&row_id_s, &subject, &hadm, &store, "Nursing", "Progress Note", &text],
                    );
                }
                SourceKind::Prescriptions => {
                    let date = adm.intime.format_date();
                    let drug = alloc::format!("drug{tok:05}");
                    push_row(&mut out, &[&row_id_s, &subject, &hadm, &date, &drug, "1", "mg"]);
                }
            }
        }
    }
    out
}

/// Generates the full table set. Ten tables: `admissions`, `icustays`, and
/// one per event source, plus the `truth/admissions_truth.csv` sidecar.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedData, SynthError> {
    cfg.validate()?;
    let alpha_ihm = solve_alpha(cfg.beta_ihm, cfg.base_rate_ihm);
    let alpha_los = solve_alpha(cfg.beta_los, cfg.base_rate_los);
    let plan = build_plan(cfg, alpha_ihm, alpha_los);

    let mut tables = BTreeMap::new();

    let mut admissions = String::new();
    push_row(
        &mut admissions,
        &["ROW_ID", "SUBJECT_ID", "HADM_ID", "HOSPITAL_EXPIRE_FLAG"],
    );
    for (i, adm) in plan.admissions.iter().enumerate() {
        push_row(
            &mut admissions,
            &[
                &alloc::format!("{}", i + 1),
                &alloc::format!("{}", adm.patient_id),
                &alloc::format!("{}", adm.hadm_id),
                if adm.label_ihm { "1" } else { "0" },
            ],
        );
    }
    tables.insert(String::from("admissions.csv"), admissions);

    let mut icustays = String::new();
    push_row(
        &mut icustays,
        &["ROW_ID", "SUBJECT_ID", "HADM_ID", "ICUSTAY_ID", "INTIME", "OUTTIME"],
    );
    let mut stay_id = 0i64;
    for (adm, stays) in plan.admissions.iter().zip(&plan.stays) {
        for &(stay_in, stay_out) in stays {
            stay_id += 1;
            push_row(
                &mut icustays,
                &[
                    &alloc::format!("{stay_id}"),
                    &alloc::format!("{}", adm.patient_id),
                    &alloc::format!("{}", adm.hadm_id),
                    &alloc::format!("{}", 200_000 + stay_id),
                    &stay_in.format_datetime(),
                    &stay_out.format_datetime(),
                ],
            );
        }
    }
    tables.insert(String::from("icustays.csv"), icustays);

    for (idx, source) in SourceKind::ALL.into_iter().enumerate() {
        let table = event_table(cfg, &plan, source, 10 + idx as u64);
        tables.insert(alloc::format!("{}.csv", source.table_name()), table);
    }

    let mut truth = String::new();
    push_row(&mut truth, &["HADM_ID", "Z", "P_IHM", "P_LOS"]);
    for adm in &plan.admissions {
        push_row(
            &mut truth,
            &[
                &alloc::format!("{}", adm.hadm_id),
                &alloc::format!("{}", adm.z),
                &alloc::format!("{}", adm.p_ihm),
                &alloc::format!("{}", adm.p_los),
            ],
        );
    }

    Ok(GeneratedData {
        tables,
        truth_csv: truth,
        summary: GenSummary {
            alpha_ihm,
            alpha_los,
            admissions: plan.admissions,
        },
    })
}

// ---------------------------------------------------------------------------
// Bayes ceiling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesAuc {
    pub estimate: f64,
    pub se: f64,
}

const BAYES_REPLICATES: usize = 20;

/// Monte-Carlo AUC of the true latent risk against labels drawn from the
/// configured label model — the ceiling no token-based model can beat in
/// expectation. The standard error comes from replicate spread.
pub fn bayes_auc(cfg: &GeneratorConfig, outcome: Outcome, n_mc: usize) -> Result<BayesAuc, SynthError> {
    cfg.validate()?;
    if n_mc < 10_000 {
        return Err(SynthError::InvalidConfig(
            "bayes_auc needs n_mc >= 10000".into(),
        ));
    }
    let (beta, rate) = match outcome {
        Outcome::Ihm => (cfg.beta_ihm, cfg.base_rate_ihm),
        Outcome::Los => (cfg.beta_los, cfg.base_rate_los),
    };
    let alpha = solve_alpha(beta, rate);
    let mut rng = stream_rng(cfg.seed, 40 + outcome as u64);
    let per_rep = n_mc / BAYES_REPLICATES;
    let mut rep_aucs = Vec::with_capacity(BAYES_REPLICATES);
    let mut all_z = Vec::with_capacity(n_mc);
    let mut all_y = Vec::with_capacity(n_mc);
    for _ in 0..BAYES_REPLICATES {
        loop {
            let mut zs = Vec::with_capacity(per_rep);
            let mut ys = Vec::with_capacity(per_rep);
            let mut pos = 0usize;
            for _ in 0..per_rep {
                let z = normal(&mut rng);
                let y = rng.gen::<f64>() < sigmoid(alpha + beta * z);
                pos += y as usize;
                zs.push(z);
                ys.push(y);
            }
            if pos == 0 || pos == per_rep {
                continue; // degenerate replicate: redraw
            }
            rep_aucs.push(auc_of_scores(&zs, &ys));
            all_z.extend(zs);
            all_y.extend(ys);
            break;
        }
    }
    let estimate = auc_of_scores(&all_z, &all_y);
    let mean = rep_aucs.iter().sum::<f64>() / rep_aucs.len() as f64;
    let var = rep_aucs
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / (rep_aucs.len() - 1) as f64;
    let se = libm::sqrt(var / rep_aucs.len() as f64);
    Ok(BayesAuc { estimate, se })
}

// rank-based AUC over raw (unbounded) scores; ties get 0.5 credit
fn auc_of_scores(scores: &[f64], labels: &[bool]) -> f64 {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = n - n_pos;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_solver_hits_target_rate() {
        for (beta, rate) in [(0.0, 0.5), (2.0, 0.1), (3.0, 0.2), (1.0, 0.03)] {
            let alpha = solve_alpha(beta, rate);
            assert!(
                (expected_rate(alpha, beta) - rate).abs() < 1e-9,
                "beta={beta} rate={rate}"
            );
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GeneratorConfig {
            n_patients: 30,
            ..GeneratorConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.truth_csv, b.truth_csv);
    }

    #[test]
    fn zero_patients_yields_headers_only() {
        let cfg = GeneratorConfig {
            n_patients: 0,
            ..GeneratorConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.tables.len(), 10);
        for (name, table) in &data.tables {
            assert_eq!(table.lines().count(), 1, "{name} should be header-only");
        }
        assert_eq!(data.truth_csv.lines().count(), 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.base_rate_ihm = 0.0;
        assert!(generate(&cfg).is_err());
        let mut cfg = GeneratorConfig::default();
        cfg.vocab_size_per_source.insert(SourceKind::ChartEvents, 1);
        assert!(generate(&cfg).is_err());
        let mut cfg = GeneratorConfig::default();
        cfg.multi_stay_prob = 0.7;
        cfg.short_stay_prob = 0.7;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn bayes_auc_zero_beta_is_chance() {
        let cfg = GeneratorConfig {
            beta_ihm: 0.0,
            ..GeneratorConfig::default()
        };
        let b = bayes_auc(&cfg, Outcome::Ihm, 40_000).unwrap();
        assert!(
            (b.estimate - 0.5).abs() <= 2.0 * b.se + 1e-3,
            "estimate {} se {}",
            b.estimate,
            b.se
        );
    }

    #[test]
    fn bayes_auc_saturates_for_huge_beta() {
        let cfg = GeneratorConfig {
            beta_ihm: 50.0,
            ..GeneratorConfig::default()
        };
        let b = bayes_auc(&cfg, Outcome::Ihm, 40_000).unwrap();
        assert!(b.estimate > 0.99, "estimate {}", b.estimate);
    }

    #[test]
    fn bayes_auc_monotone_in_beta() {
        let mut last = 0.0;
        for beta in [0.5, 1.5, 3.0, 6.0] {
            let cfg = GeneratorConfig {
                beta_ihm: beta,
                ..GeneratorConfig::default()
            };
            let b = bayes_auc(&cfg, Outcome::Ihm, 40_000).unwrap();
            assert!(
                b.estimate > last - 3.0 * b.se,
                "beta {beta}: {} after {last}",
                b.estimate
            );
            last = b.estimate;
        }
    }

    #[test]
    fn rejects_small_mc_budget() {
        let cfg = GeneratorConfig::default();
        assert!(bayes_auc(&cfg, Outcome::Ihm, 5000).is_err());
    }
}
