//! Patient-disjoint splitting, outcome labels, and mini-batch assembly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::schema::{CohortEntry, SourceKind};
use crate::vocab::EncodedDocument;

/// ICU stays of at least this many days set the long-stay label.
pub const LOS_THRESHOLD_DAYS: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    /// In-hospital mortality.
    Ihm,
    /// ICU length of stay >= 7 days.
    Los,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Ihm => "ihm",
            Outcome::Los => "los",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ihm" => Some(Outcome::Ihm),
            "los" => Some(Outcome::Los),
            _ => None,
        }
    }

    pub fn label_of(self, doc: &EncodedDocument) -> Option<bool> {
        match self {
            Outcome::Ihm => doc.label_ihm,
            Outcome::Los => doc.label_los,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("need at least 3 patients to populate all splits, got {0}")]
    TooFewPatients(usize),
    #[error("patient ids must be unique")]
    DuplicatePatients,
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("document {admission_id} is missing the {outcome} label")]
    MissingLabel {
        admission_id: i64,
        outcome: &'static str,
    },
}

/// Patient -> split map. All admissions of one patient share one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    assign: BTreeMap<i64, Split>,
}

impl SplitAssignment {
    pub fn split_of(&self, patient_id: i64) -> Option<Split> {
        self.assign.get(&patient_id).copied()
    }

    pub fn patients_in(&self, split: Split) -> Vec<i64> {
        self.assign
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn from_parts(
        seed: u64,
        train: impl IntoIterator<Item = i64>,
        val: impl IntoIterator<Item = i64>,
        test: impl IntoIterator<Item = i64>,
    ) -> Result<Self, DatasetError> {
        let mut assign = BTreeMap::new();
        let mut insert = |ids: &mut dyn Iterator<Item = i64>, split| {
            for id in ids {
                if assign.insert(id, split).is_some() {
                    return Err(DatasetError::DuplicatePatients);
                }
            }
            Ok(())
        };
        insert(&mut train.into_iter(), Split::Train)?;
        insert(&mut val.into_iter(), Split::Validation)?;
        insert(&mut test.into_iter(), Split::Test)?;
        Ok(SplitAssignment { seed, assign })
    }
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Shuffles patients with a seeded generator and carves off 15% for test,
/// then 15% of the remainder for validation, clamping every split to at
/// least one patient.
pub fn split_patients(patient_ids: &[i64], seed: u64) -> Result<SplitAssignment, DatasetError> {
    let mut ids: Vec<i64> = patient_ids.to_vec();
    ids.sort_unstable();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(DatasetError::DuplicatePatients);
    }
    let n = ids.len();
    if n < 3 {
        return Err(DatasetError::TooFewPatients(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n_test = round_half_up(0.15 * n as f64).clamp(1, n - 2);
    let m = n - n_test;
    let n_val = round_half_up(0.15 * m as f64).clamp(1, m - 1);

    let test = ids.split_off(n - n_test);
    let val = ids.split_off(ids.len() - n_val);
    SplitAssignment::from_parts(seed, ids, val, test)
}

/// Derives both outcome labels from a cohort entry: in-hospital mortality
/// and ICU stay >= 7 days (inclusive).
pub fn label_outcomes(entry: &CohortEntry) -> (bool, bool) {
    (
        entry.hospital_death,
        entry.icu_los_days >= LOS_THRESHOLD_DAYS,
    )
}

/// A mini-batch of encoded documents with labels for one outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBatch {
    /// Ragged per-source id lists; every outer list has length `n`.
    pub ids_by_source: BTreeMap<SourceKind, Vec<Vec<u32>>>,
    pub labels: Vec<bool>,
    pub admission_ids: Vec<i64>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Splits documents into batches of `batch_size` (last one may be smaller),
/// optionally shuffling first with a seeded generator. Every document
/// appears exactly once.
pub fn make_batches(
    docs: &[EncodedDocument],
    batch_size: usize,
    shuffle_seed: Option<u64>,
    outcome: Outcome,
) -> Result<Vec<EncodedBatch>, DatasetError> {
    if batch_size == 0 {
        return Err(DatasetError::ZeroBatchSize);
    }
    if docs.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let sources: Vec<SourceKind> = docs[0].ids_by_source.keys().copied().collect();
    let mut batches = Vec::with_capacity(docs.len().div_ceil(batch_size));
    for chunk in order.chunks(batch_size) {
        let mut ids_by_source: BTreeMap<SourceKind, Vec<Vec<u32>>> = sources
            .iter()
            .map(|&s| (s, Vec::with_capacity(chunk.len())))
            .collect();
        let mut labels = Vec::with_capacity(chunk.len());
        let mut admission_ids = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let doc = &docs[i];
            let label = outcome
                .label_of(doc)
                .ok_or(DatasetError::MissingLabel {
                    admission_id: doc.admission_id,
                    outcome: outcome.name(),
                })?;
            for (&source, lists) in ids_by_source.iter_mut() {
                lists.push(doc.ids_by_source.get(&source).cloned().unwrap_or_default());
            }
            labels.push(label);
            admission_ids.push(doc.admission_id);
        }
        batches.push(EncodedBatch {
            ids_by_source,
            labels,
            admission_ids,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Timestamp;
    use alloc::vec;

    #[test]
    fn split_sizes_match_rounding_rule() {
        let ids: Vec<i64> = (1..=100).collect();
        let split = split_patients(&ids, 7).unwrap();
        assert_eq!(split.patients_in(Split::Test).len(), 15);
        assert_eq!(split.patients_in(Split::Validation).len(), 13);
        assert_eq!(split.patients_in(Split::Train).len(), 72);
    }

    #[test]
    fn tiny_cohort_keeps_every_split_non_empty() {
        let split = split_patients(&[10, 20, 30], 0).unwrap();
        assert_eq!(split.patients_in(Split::Test).len(), 1);
        assert_eq!(split.patients_in(Split::Validation).len(), 1);
        assert_eq!(split.patients_in(Split::Train).len(), 1);
        assert_eq!(
            split_patients(&[1, 2], 0),
            Err(DatasetError::TooFewPatients(2))
        );
        assert_eq!(
            split_patients(&[1, 1, 2], 0),
            Err(DatasetError::DuplicatePatients)
        );
    }

    #[test]
    fn same_seed_same_assignment() {
        let ids: Vec<i64> = (1..=50).collect();
        assert_eq!(split_patients(&ids, 42), split_patients(&ids, 42));
        // input order must not matter
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(split_patients(&ids, 42), split_patients(&rev, 42));
    }

    fn entry(days: f64, died: bool) -> CohortEntry {
        CohortEntry {
            admission_id: 1,
            patient_id: 1,
            icu_intime: Timestamp(0),
            icu_outtime: Timestamp((days * 86_400.0) as i64),
            hospital_death: died,
            icu_los_days: days,
        }
    }

    #[test]
    fn los_threshold_is_inclusive() {
        assert_eq!(label_outcomes(&entry(7.0, false)), (false, true));
        assert_eq!(label_outcomes(&entry(6.99, true)), (true, false));
        assert_eq!(label_outcomes(&entry(10.0, false)), (false, true));
    }

    fn encoded(hadm: i64) -> EncodedDocument {
        EncodedDocument {
            admission_id: hadm,
            patient_id: hadm,
            ids_by_source: SourceKind::ALL.iter().map(|&s| (s, vec![2u32])).collect(),
            label_ihm: Some(hadm % 2 == 0),
            label_los: Some(false),
        }
    }

    #[test]
    fn batches_cover_every_document_once() {
        let docs: Vec<EncodedDocument> = (1..=10).map(encoded).collect();
        let batches = make_batches(&docs, 4, None, Outcome::Ihm).unwrap();
        assert_eq!(
            batches.iter().map(EncodedBatch::len).collect::<Vec<_>>(),
            vec![4, 4, 2]
        );
        // unshuffled batches preserve input order
        assert_eq!(batches[0].admission_ids, vec![1, 2, 3, 4]);
        let mut seen: Vec<i64> = batches
            .iter()
            .flat_map(|b| b.admission_ids.iter().copied())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn shuffled_batches_are_deterministic_and_a_permutation() {
        let docs: Vec<EncodedDocument> = (1..=10).map(encoded).collect();
        let a = make_batches(&docs, 3, Some(99), Outcome::Ihm).unwrap();
        let b = make_batches(&docs, 3, Some(99), Outcome::Ihm).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<i64> = a
            .iter()
            .flat_map(|b| b.admission_ids.iter().copied())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn batch_errors() {
        let docs: Vec<EncodedDocument> = (1..=3).map(encoded).collect();
        assert_eq!(
            make_batches(&docs, 0, None, Outcome::Ihm),
            Err(DatasetError::ZeroBatchSize)
        );
        assert_eq!(
            make_batches(&[], 4, None, Outcome::Ihm),
            Err(DatasetError::EmptyDataset)
        );
        let mut unlabeled = docs.clone();
        unlabeled[1].label_ihm = None;
        assert!(matches!(
            make_batches(&unlabeled, 4, None, Outcome::Ihm),
            Err(DatasetError::MissingLabel { admission_id: 2, .. })
        ));
    }
}
