//! Event-to-token conversion and per-admission document assembly.
//!
//! Structured events become one joined `code-value-unit` token (missing
//! values become the literal `NaN`); free-text fields are split on runs of
//! whitespace with no further normalization — no lowercasing, no punctuation
//! stripping, no stemming.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::dataset::label_outcomes;
use crate::schema::{effective_timestamp, CohortEntry, EventRecord, SourceKind, Timestamp};

/// An opaque vocabulary key: non-empty, free of whitespace, never re-parsed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid token {0:?}: tokens must be non-empty and whitespace-free")]
pub struct InvalidToken(pub String);

impl Token {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidToken> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(InvalidToken(value));
        }
        Ok(Token(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl core::fmt::Display for Token {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    /// Also tokenize label-like free-text fields (chart LABEL, lab FLAG) of
    /// structured events. Note TEXT is payload and is always tokenized.
    pub include_label_text: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            include_label_text: true,
        }
    }
}

/// Splits on any run of Unicode whitespace; emits no empty tokens, keeps
/// case and punctuation untouched.
pub fn tokenize_text(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|w| Token(String::from(w)))
        .collect()
}

fn join_component(value: Option<&str>) -> String {
    match value {
        None => String::from("NaN"),
        // A component may contain whitespace (multi-word drug names, free-ish
        // values); fold it to `_` so the joined token stays one token.
        Some(v) => v
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect(),
    }
}

/// Tokenizes one event: the source's designated join fields become a single
/// `-`-joined token, then any free-text fields are whitespace-split and
/// appended (label-like ones only when configured).
pub fn tokenize_structured(event: &EventRecord, cfg: &TokenizerConfig) -> Vec<Token> {
    let mut joined = String::new();
    for (i, field) in event.source.join_fields().iter().enumerate() {
        if i > 0 {
            joined.push('-');
        }
        let value = event
            .structured_fields
            .iter()
            .find(|(name, _)| name == field)
            .and_then(|(_, v)| v.as_deref());
        joined.push_str(&join_component(value));
    }
    let mut tokens = Vec::with_capacity(1);
    tokens.push(Token(joined));

    let label_fields = event.source.label_text_fields();
    let payload_fields = event.source.payload_text_fields();
    for (name, text) in &event.text_fields {
        let is_payload = payload_fields.iter().any(|f| f == name);
        let is_label = label_fields.iter().any(|f| f == name);
        if is_payload || (is_label && cfg.include_label_text) {
            tokens.extend(tokenize_text(text));
        }
    }
    tokens
}

/// Per-admission, per-source ordered token lists plus outcome labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionDocument {
    pub admission_id: i64,
    pub patient_id: i64,
    /// One entry per source, possibly empty; tokens ordered by effective
    /// timestamp with arrival order breaking ties.
    pub tokens_by_source: BTreeMap<SourceKind, Vec<Token>>,
    pub label_ihm: Option<bool>,
    pub label_los: Option<bool>,
}

impl AdmissionDocument {
    pub fn empty(admission_id: i64, patient_id: i64) -> Self {
        AdmissionDocument {
            admission_id,
            patient_id,
            tokens_by_source: SourceKind::ALL.iter().map(|&s| (s, Vec::new())).collect(),
            label_ihm: None,
            label_los: None,
        }
    }

    pub fn token_count(&self) -> usize {
        self.tokens_by_source.values().map(Vec::len).sum()
    }
}

/// Builds exactly one document per cohort admission from windowed events.
///
/// Within each (admission, source) bucket events are sorted by effective
/// timestamp, ties broken by arrival order, then tokenized and concatenated.
/// Admissions with no events get all-empty token lists. Labels come from the
/// cohort entry.
pub fn build_documents(
    events: impl IntoIterator<Item = EventRecord>,
    cohort: &[CohortEntry],
    cfg: &TokenizerConfig,
) -> Vec<AdmissionDocument> {
    let mut docs: BTreeMap<i64, AdmissionDocument> = cohort
        .iter()
        .map(|entry| {
            let mut doc = AdmissionDocument::empty(entry.admission_id, entry.patient_id);
            let (ihm, los) = label_outcomes(entry);
            doc.label_ihm = Some(ihm);
            doc.label_los = Some(los);
            (entry.admission_id, doc)
        })
        .collect();

    let mut buckets: BTreeMap<(i64, SourceKind), Vec<(Timestamp, usize, EventRecord)>> =
        BTreeMap::new();
    for (arrival, event) in events.into_iter().enumerate() {
        if !docs.contains_key(&event.admission_id) {
            continue; // events are pre-windowed; drop strays defensively
        }
        let Ok(t) = effective_timestamp(&event) else {
            continue;
        };
        buckets
            .entry((event.admission_id, event.source))
            .or_default()
            .push((t, arrival, event));
    }

    for ((admission_id, source), mut bucket) in buckets {
        bucket.sort_by_key(|(t, arrival, _)| (*t, *arrival));
        let list = docs
            .get_mut(&admission_id)
            .expect("bucket admissions come from docs")
            .tokens_by_source
            .get_mut(&source)
            .expect("documents carry all sources");
        for (_, _, event) in &bucket {
            list.extend(tokenize_structured(event, cfg));
        }
    }

    docs.into_values().collect()
}
