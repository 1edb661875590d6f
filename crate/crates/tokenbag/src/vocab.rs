//! Per-source vocabularies and integer encoding.
//!
//! Ids 0 and 1 are reserved (padding, out-of-vocabulary). Tokens seen at
//! least `min_count` times in the build corpus get ids 2.. in descending
//! frequency order, ties broken lexicographically. Singletons and tokens
//! unseen at build time encode to the OOV id.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::schema::SourceKind;
use crate::tokenizer::AdmissionDocument;

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;

/// Default frequency threshold: a token must occur more than once.
pub const DEFAULT_MIN_COUNT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub source: SourceKind,
    pub min_count: u64,
    token_to_id: BTreeMap<String, u32>,
    /// In-vocabulary tokens ordered by id; index 0 holds id 2.
    id_to_token: Vec<String>,
    /// Counts over the build corpus for all tokens, singletons included.
    pub frequencies: BTreeMap<String, u64>,
}

impl Vocabulary {
    /// Counts token frequencies for `source` over the corpus (the TRAINING
    /// split only — encoding any other split with this vocabulary maps its
    /// unseen tokens to OOV) and assigns ids.
    pub fn build(corpus: &[AdmissionDocument], source: SourceKind, min_count: u64) -> Self {
        let mut frequencies: BTreeMap<String, u64> = BTreeMap::new();
        for doc in corpus {
            if let Some(tokens) = doc.tokens_by_source.get(&source) {
                for token in tokens {
                    *frequencies.entry(token.as_str().into()).or_insert(0) += 1;
                }
            }
        }
        let mut eligible: Vec<(&String, &u64)> = frequencies
            .iter()
            .filter(|(_, &count)| count >= min_count)
            .collect();
        eligible.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

        let mut token_to_id = BTreeMap::new();
        let mut id_to_token = Vec::with_capacity(eligible.len());
        for (i, (token, _)) in eligible.into_iter().enumerate() {
            token_to_id.insert(token.clone(), 2 + i as u32);
            id_to_token.push(token.clone());
        }
        Vocabulary {
            source,
            min_count,
            token_to_id,
            id_to_token,
            frequencies,
        }
    }

    /// Restores a vocabulary from (token, id, frequency) entries sorted by id.
    /// Entries must be contiguous from id 2.
    pub fn from_entries(
        source: SourceKind,
        min_count: u64,
        entries: impl IntoIterator<Item = (String, u32, u64)>,
    ) -> Result<Self, String> {
        let mut token_to_id = BTreeMap::new();
        let mut id_to_token = Vec::new();
        let mut frequencies = BTreeMap::new();
        for (token, id, freq) in entries {
            if id != 2 + id_to_token.len() as u32 {
                return Err(alloc::format!("non-contiguous vocabulary id {id}"));
            }
            if token_to_id.insert(token.clone(), id).is_some() {
                return Err(alloc::format!("duplicate vocabulary token {token:?}"));
            }
            frequencies.insert(token.clone(), freq);
            id_to_token.push(token);
        }
        Ok(Vocabulary {
            source,
            min_count,
            token_to_id,
            id_to_token,
            frequencies,
        })
    }

    /// Id for a token: its assigned id, or OOV for singletons and unseen tokens.
    pub fn id_of(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn token_for_id(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id.checked_sub(2)? as usize).map(String::as_str)
    }

    /// Number of in-vocabulary tokens (excludes the two reserved ids).
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Embedding-table row count: vocabulary size plus pad and OOV rows.
    pub fn table_rows(&self) -> usize {
        self.len() + 2
    }

    /// (id, token, frequency) in id order.
    pub fn iter_by_id(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.id_to_token.iter().enumerate().map(|(i, token)| {
            (
                2 + i as u32,
                token.as_str(),
                self.frequencies.get(token).copied().unwrap_or(0),
            )
        })
    }
}

/// A document with every token replaced by its per-source integer id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDocument {
    pub admission_id: i64,
    pub patient_id: i64,
    pub ids_by_source: BTreeMap<SourceKind, Vec<u32>>,
    pub label_ihm: Option<bool>,
    pub label_los: Option<bool>,
}

/// Encodes one document against one vocabulary per configured source.
/// List lengths are preserved; sources without a vocabulary are dropped.
pub fn encode(
    doc: &AdmissionDocument,
    vocabs: &BTreeMap<SourceKind, Vocabulary>,
) -> EncodedDocument {
    let ids_by_source = vocabs
        .iter()
        .map(|(&source, vocab)| {
            let ids = doc
                .tokens_by_source
                .get(&source)
                .map(|tokens| tokens.iter().map(|t| vocab.id_of(t.as_str())).collect())
                .unwrap_or_default();
            (source, ids)
        })
        .collect();
    EncodedDocument {
        admission_id: doc.admission_id,
        patient_id: doc.patient_id,
        ids_by_source,
        label_ihm: doc.label_ihm,
        label_los: doc.label_los,
    }
}
