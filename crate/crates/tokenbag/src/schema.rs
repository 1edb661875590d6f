//! Source-table formats, event records, cohort selection and the 24 h window.
//!
//! Eight event tables feed the pipeline. Each row becomes an [`EventRecord`];
//! admissions with exactly one ICU stay of at least 24 hours form the cohort,
//! and only events inside `[intime, intime + 24 h)` survive windowing.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::tokenizer::AdmissionDocument;

/// Seconds in the observation window (first 24 hours of the ICU stay).
pub const WINDOW_SECONDS: i64 = 86_400;

/// Minimum ICU stay length for cohort inclusion, in days.
pub const MIN_STAY_DAYS: f64 = 1.0;

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

/// Seconds since the epoch in the dataset's single implicit timezone.
///
/// Source files carry `YYYY-MM-DD HH:MM:SS` or bare `YYYY-MM-DD` (treated as
/// midnight). No timezone math is applied anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparsable timestamp: {text}")]
pub struct ParseTimestampError {
    pub text: String,
}

impl Timestamp {
    /// Parses `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DD`.
    pub fn parse(text: &str) -> Result<Self, ParseTimestampError> {
        let err = || ParseTimestampError {
            text: text.to_string(),
        };
        let text = text.trim();
        let (date, time) = match text.len() {
            10 => (text, None),
            19 => {
                let (d, t) = text.split_at(10);
                let t = t.strip_prefix(' ').ok_or_else(err)?;
                (d, Some(t))
            }
            _ => return Err(err()),
        };
        let mut date_parts = date.split('-');
        let year: i64 = next_num(&mut date_parts).ok_or_else(err)?;
        let month: i64 = next_num(&mut date_parts).ok_or_else(err)?;
        let day: i64 = next_num(&mut date_parts).ok_or_else(err)?;
        if date_parts.next().is_some() || !valid_civil(year, month, day) {
            return Err(err());
        }
        let (h, m, s) = match time {
            None => (0, 0, 0),
            Some(t) => {
                let mut time_parts = t.split(':');
                let h: i64 = next_num(&mut time_parts).ok_or_else(err)?;
                let m: i64 = next_num(&mut time_parts).ok_or_else(err)?;
                let s: i64 = next_num(&mut time_parts).ok_or_else(err)?;
                if time_parts.next().is_some() || h > 23 || m > 59 || s > 59 {
                    return Err(err());
                }
                (h, m, s)
            }
        };
        Ok(Timestamp(
            days_from_civil(year, month, day) * 86_400 + h * 3600 + m * 60 + s,
        ))
    }

    pub fn format_datetime(self) -> String {
        let (y, mo, d, h, mi, s) = self.civil();
        alloc::format!("{y:04}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}")
    }

    pub fn format_date(self) -> String {
        let (y, mo, d, _, _, _) = self.civil();
        alloc::format!("{y:04}-{mo:02}-{d:02}")
    }

    fn civil(self) -> (i64, i64, i64, i64, i64, i64) {
        let days = self.0.div_euclid(86_400);
        let secs = self.0.rem_euclid(86_400);
        let (y, m, d) = civil_from_days(days);
        (y, m, d, secs / 3600, (secs / 60) % 60, secs % 60)
    }
}

fn next_num<'a>(parts: &mut impl Iterator<Item = &'a str>) -> Option<i64> {
    let p = parts.next()?;
    if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    p.parse().ok()
}

fn valid_civil(y: i64, m: i64, d: i64) -> bool {
    if !(1..=12).contains(&m) || d < 1 {
        return false;
    }
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let dim = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            if leap {
                29
            } else {
                28
            }
        }
    };
    d <= dim
}

// Proleptic Gregorian day counts relative to 1970-01-01 (Hinnant's algorithm).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if m > 2 { m - 3 } else { m + 9 };
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m, d)
}

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

/// The eight event tables feeding one admission document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    ChartEvents,
    InputEvents,
    OutputEvents,
    LabEvents,
    MicrobiologyEvents,
    ProcedureEvents,
    NoteEvents,
    Prescriptions,
}

struct SourceSpec {
    table: &'static str,
    required: &'static [&'static str],
    /// Structured columns joined (in order) into one token per event.
    join: &'static [&'static str],
    /// Label-like free-text columns, split on whitespace when enabled.
    label_text: &'static [&'static str],
    /// Free-text payload columns, always split on whitespace.
    payload_text: &'static [&'static str],
    store_col: Option<&'static str>,
    chart_col: Option<&'static str>,
    start_col: Option<&'static str>,
}

const fn spec(kind: SourceKind) -> &'static SourceSpec {
    match kind {
        SourceKind::ChartEvents => &SourceSpec {
            table: "chartevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "ITEMID",
                "CHARTTIME",
                "STORETIME",
                "VALUE",
                "VALUEUOM",
            ],
            join: &["ITEMID", "VALUE", "VALUEUOM"],
            label_text: &["LABEL"],
            payload_text: &[],
            store_col: Some("STORETIME"),
            chart_col: Some("CHARTTIME"),
            start_col: None,
        },
        SourceKind::InputEvents => &SourceSpec {
            table: "inputevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "ITEMID",
                "STORETIME",
                "AMOUNT",
                "AMOUNTUOM",
            ],
            join: &["ITEMID", "AMOUNT", "AMOUNTUOM"],
            label_text: &[],
            payload_text: &[],
            store_col: Some("STORETIME"),
            chart_col: None,
            start_col: None,
        },
        SourceKind::OutputEvents => &SourceSpec {
            table: "outputevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "ITEMID",
                "STORETIME",
                "VALUE",
                "VALUEUOM",
            ],
            join: &["ITEMID", "VALUE", "VALUEUOM"],
            label_text: &[],
            payload_text: &[],
            store_col: Some("STORETIME"),
            chart_col: None,
            start_col: None,
        },
        SourceKind::LabEvents => &SourceSpec {
            table: "labevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "ITEMID",
                "CHARTTIME",
                "VALUE",
                "VALUEUOM",
                "FLAG",
            ],
            join: &["ITEMID", "VALUE", "VALUEUOM"],
            label_text: &["FLAG"],
            payload_text: &[],
            store_col: None,
            chart_col: Some("CHARTTIME"),
            start_col: None,
        },
        SourceKind::MicrobiologyEvents => &SourceSpec {
            table: "microbiologyevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "CHARTTIME",
                "SPEC_ITEMID",
                "ORG_ITEMID",
                "INTERPRETATION",
            ],
            join: &["SPEC_ITEMID", "ORG_ITEMID", "INTERPRETATION"],
            label_text: &[],
            payload_text: &[],
            store_col: None,
            chart_col: Some("CHARTTIME"),
            start_col: None,
        },
        SourceKind::ProcedureEvents => &SourceSpec {
            table: "procedureevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "ITEMID",
                "STORETIME",
                "VALUE",
                "VALUEUOM",
            ],
            join: &["ITEMID", "VALUE", "VALUEUOM"],
            label_text: &[],
            payload_text: &[],
            store_col: Some("STORETIME"),
            chart_col: None,
            start_col: None,
        },
        SourceKind::NoteEvents => &SourceSpec {
            table: "noteevents",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "STORETIME",
                "CATEGORY",
                "DESCRIPTION",
                "TEXT",
            ],
            join: &["CATEGORY", "DESCRIPTION"],
            label_text: &[],
            payload_text: &["TEXT"],
            store_col: Some("STORETIME"),
            chart_col: None,
            start_col: None,
        },
        SourceKind::Prescriptions => &SourceSpec {
            table: "prescriptions",
            required: &[
                "SUBJECT_ID",
                "HADM_ID",
                "STARTDATE",
                "DRUG",
                "DOSE_VAL_RX",
                "DOSE_UNIT_RX",
            ],
            join: &["DRUG", "DOSE_VAL_RX", "DOSE_UNIT_RX"],
            label_text: &[],
            payload_text: &[],
            store_col: None,
            chart_col: None,
            start_col: Some("STARTDATE"),
        },
    }
}

impl SourceKind {
    pub const ALL: [SourceKind; 8] = [
        SourceKind::ChartEvents,
        SourceKind::InputEvents,
        SourceKind::OutputEvents,
        SourceKind::LabEvents,
        SourceKind::MicrobiologyEvents,
        SourceKind::ProcedureEvents,
        SourceKind::NoteEvents,
        SourceKind::Prescriptions,
    ];

    /// Lowercase table/file name, also the key used in all serialized formats.
    pub fn table_name(self) -> &'static str {
        spec(self).table
    }

    pub fn from_table_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.table_name() == name)
    }

    pub fn required_columns(self) -> &'static [&'static str] {
        spec(self).required
    }

    pub fn join_fields(self) -> &'static [&'static str] {
        spec(self).join
    }

    pub fn label_text_fields(self) -> &'static [&'static str] {
        spec(self).label_text
    }

    pub fn payload_text_fields(self) -> &'static [&'static str] {
        spec(self).payload_text
    }

    /// Optional columns captured when present even though not required.
    pub fn optional_columns(self) -> &'static [&'static str] {
        spec(self).label_text
    }
}

// ---------------------------------------------------------------------------
// Event records
// ---------------------------------------------------------------------------

/// One row from one source table, normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub patient_id: i64,
    pub admission_id: i64,
    pub source: SourceKind,
    pub store_time: Option<Timestamp>,
    pub chart_time: Option<Timestamp>,
    pub start_date: Option<Timestamp>,
    /// The source's designated join columns, in fixed order; empty cells are `None`.
    pub structured_fields: Vec<(String, Option<String>)>,
    /// Free-text columns present on this row (label-like and payload).
    pub text_fields: Vec<(String, String)>,
}

/// Why a single data row was rejected. Rows failing with these are skipped
/// and counted, never fatal for the table.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RowError {
    #[error("malformed row: bad or missing {0}")]
    Malformed(&'static str),
    #[error("unparsable timestamp in column {0}")]
    BadTimestamp(&'static str),
    #[error("row has no usable timestamp")]
    NoTimestamp,
}

/// Builds an [`EventRecord`] from one data row.
///
/// `get` must return the cell for a column name, `None` when the column is
/// absent from the file or the cell is empty.
pub fn event_from_fields<'a>(
    source: SourceKind,
    get: impl Fn(&str) -> Option<&'a str>,
) -> Result<EventRecord, RowError> {
    let id = |col: &'static str| -> Result<i64, RowError> {
        let v: i64 = get(col)
            .and_then(|v| v.trim().parse().ok())
            .ok_or(RowError::Malformed(col))?;
        if v <= 0 {
            return Err(RowError::Malformed(col));
        }
        Ok(v)
    };
    let patient_id = id("SUBJECT_ID")?;
    let admission_id = id("HADM_ID")?;

    let ts = |col: Option<&'static str>| -> Result<Option<Timestamp>, RowError> {
        match col.and_then(&get) {
            None => Ok(None),
            Some(raw) => Timestamp::parse(raw)
                .map(Some)
                .map_err(|_| RowError::BadTimestamp(col.unwrap())),
        }
    };
    let s = spec(source);
    let store_time = ts(s.store_col)?;
    let chart_time = ts(s.chart_col)?;
    let start_date = ts(s.start_col)?;
    if store_time.is_none() && chart_time.is_none() && start_date.is_none() {
        return Err(RowError::NoTimestamp);
    }

    let structured_fields = s
        .join
        .iter()
        .map(|col| ((*col).to_string(), get(col).map(|v| v.to_string())))
        .collect();
    let text_fields = s
        .label_text
        .iter()
        .chain(s.payload_text)
        .filter_map(|col| get(col).map(|v| ((*col).to_string(), v.to_string())))
        .collect();

    Ok(EventRecord {
        patient_id,
        admission_id,
        source,
        store_time,
        chart_time,
        start_date,
        structured_fields,
        text_fields,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("record for admission {admission_id} has no timestamp")]
    NoTimestamp { admission_id: i64 },
    #[error("cohort is empty")]
    EmptyCohort,
}

/// STORETIME when present, then CHARTTIME, then STARTDATE.
pub fn effective_timestamp(e: &EventRecord) -> Result<Timestamp, SchemaError> {
    e.store_time
        .or(e.chart_time)
        .or(e.start_date)
        .ok_or(SchemaError::NoTimestamp {
            admission_id: e.admission_id,
        })
}

// ---------------------------------------------------------------------------
// Cohort
// ---------------------------------------------------------------------------

/// Raw `admissions` table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionRow {
    pub subject_id: i64,
    pub hadm_id: i64,
    pub hospital_expire_flag: bool,
}

/// Raw `icustays` table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcuStayRow {
    pub subject_id: i64,
    pub hadm_id: i64,
    pub icustay_id: i64,
    pub intime: Timestamp,
    pub outtime: Timestamp,
}

/// One cohort admission: exactly one ICU stay of at least 24 h.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortEntry {
    pub admission_id: i64,
    pub patient_id: i64,
    pub icu_intime: Timestamp,
    pub icu_outtime: Timestamp,
    pub hospital_death: bool,
    pub icu_los_days: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortCounts {
    pub admissions: usize,
    pub stays: usize,
    pub orphan_stays: usize,
    pub excluded_no_stay: usize,
    pub excluded_multi_stay: usize,
    pub excluded_short_stay: usize,
}

#[derive(Debug, Clone)]
pub struct CohortSelection {
    pub cohort: Vec<CohortEntry>,
    pub counts: CohortCounts,
}

/// Selects admissions having exactly one ICU stay of >= 24 h. Stays that
/// reference an unknown admission are counted as orphans and dropped.
pub fn select_cohort(admissions: &[AdmissionRow], icustays: &[IcuStayRow]) -> CohortSelection {
    let mut counts = CohortCounts {
        admissions: admissions.len(),
        stays: icustays.len(),
        ..CohortCounts::default()
    };
    let by_hadm: BTreeMap<i64, &AdmissionRow> =
        admissions.iter().map(|a| (a.hadm_id, a)).collect();

    let mut stays_by_hadm: BTreeMap<i64, Vec<&IcuStayRow>> = BTreeMap::new();
    for stay in icustays {
        if by_hadm.contains_key(&stay.hadm_id) {
            stays_by_hadm.entry(stay.hadm_id).or_default().push(stay);
        } else {
            counts.orphan_stays += 1;
        }
    }

    let mut cohort = Vec::new();
    for (&hadm_id, adm) in &by_hadm {
        match stays_by_hadm.get(&hadm_id).map(Vec::as_slice) {
            None => counts.excluded_no_stay += 1,
            Some([stay]) => {
                let los_days = (stay.outtime.0 - stay.intime.0) as f64 / 86_400.0;
                if los_days >= MIN_STAY_DAYS {
                    cohort.push(CohortEntry {
                        admission_id: hadm_id,
                        patient_id: adm.subject_id,
                        icu_intime: stay.intime,
                        icu_outtime: stay.outtime,
                        hospital_death: adm.hospital_expire_flag,
                        icu_los_days: los_days,
                    });
                } else {
                    counts.excluded_short_stay += 1;
                }
            }
            Some(_) => counts.excluded_multi_stay += 1,
        }
    }
    CohortSelection { cohort, counts }
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

/// Immutable admission -> cohort entry lookup, shareable across threads.
#[derive(Debug, Clone)]
pub struct CohortIndex {
    by_admission: BTreeMap<i64, CohortEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowStatus {
    Keep,
    NotInCohort,
    OutOfWindow,
    MissingTimestamp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowCounts {
    pub kept: usize,
    pub not_in_cohort: usize,
    pub out_of_window: usize,
    pub missing_timestamp: usize,
}

impl WindowCounts {
    pub fn record(&mut self, status: WindowStatus) {
        match status {
            WindowStatus::Keep => self.kept += 1,
            WindowStatus::NotInCohort => self.not_in_cohort += 1,
            WindowStatus::OutOfWindow => self.out_of_window += 1,
            WindowStatus::MissingTimestamp => self.missing_timestamp += 1,
        }
    }
}

impl CohortIndex {
    pub fn new(cohort: impl IntoIterator<Item = CohortEntry>) -> Self {
        CohortIndex {
            by_admission: cohort.into_iter().map(|e| (e.admission_id, e)).collect(),
        }
    }

    pub fn get(&self, admission_id: i64) -> Option<&CohortEntry> {
        self.by_admission.get(&admission_id)
    }

    pub fn contains(&self, admission_id: i64) -> bool {
        self.by_admission.contains_key(&admission_id)
    }

    pub fn len(&self) -> usize {
        self.by_admission.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_admission.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CohortEntry> {
        self.by_admission.values()
    }

    /// Half-open window check: keep iff `intime <= t < intime + 24 h`.
    pub fn window_status(&self, event: &EventRecord) -> WindowStatus {
        let Some(entry) = self.get(event.admission_id) else {
            return WindowStatus::NotInCohort;
        };
        let Ok(t) = effective_timestamp(event) else {
            return WindowStatus::MissingTimestamp;
        };
        if t >= entry.icu_intime && t.0 < entry.icu_intime.0 + WINDOW_SECONDS {
            WindowStatus::Keep
        } else {
            WindowStatus::OutOfWindow
        }
    }
}

/// Filters an event stream down to in-cohort, in-window events.
pub fn window_events(
    events: impl IntoIterator<Item = EventRecord>,
    index: &CohortIndex,
) -> (Vec<EventRecord>, WindowCounts) {
    let mut counts = WindowCounts::default();
    let kept = events
        .into_iter()
        .filter(|e| {
            let status = index.window_status(e);
            counts.record(status);
            status == WindowStatus::Keep
        })
        .collect();
    (kept, counts)
}

// ---------------------------------------------------------------------------
// Cohort statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CohortStats {
    pub n_admissions: usize,
    pub n_patients: usize,
    pub ihm_count: usize,
    pub ihm_rate: f64,
    pub los_count: usize,
    pub los_rate: f64,
    pub los_days_median: f64,
    pub los_days_q1: f64,
    pub los_days_q3: f64,
    /// Total token count per source across all documents.
    pub token_counts: BTreeMap<SourceKind, u64>,
}

/// Summarizes a built cohort and its tokenized documents.
pub fn cohort_stats(
    cohort: &[CohortEntry],
    documents: &[AdmissionDocument],
) -> Result<CohortStats, SchemaError> {
    if cohort.is_empty() {
        return Err(SchemaError::EmptyCohort);
    }
    let mut patients: Vec<i64> = cohort.iter().map(|e| e.patient_id).collect();
    patients.sort_unstable();
    patients.dedup();

    let ihm_count = cohort.iter().filter(|e| e.hospital_death).count();
    let los_count = cohort
        .iter()
        .filter(|e| crate::dataset::label_outcomes(e).1)
        .count();
    let n = cohort.len();

    let mut los: Vec<f64> = cohort.iter().map(|e| e.icu_los_days).collect();
    los.sort_by(|a, b| a.total_cmp(b));

    let mut token_counts: BTreeMap<SourceKind, u64> =
        SourceKind::ALL.iter().map(|&s| (s, 0)).collect();
    for doc in documents {
        for (&source, tokens) in &doc.tokens_by_source {
            *token_counts.entry(source).or_insert(0) += tokens.len() as u64;
        }
    }

    Ok(CohortStats {
        n_admissions: n,
        n_patients: patients.len(),
        ihm_count,
        ihm_rate: ihm_count as f64 / n as f64,
        los_count,
        los_rate: los_count as f64 / n as f64,
        los_days_median: quantile(&los, 0.5),
        los_days_q1: quantile(&los, 0.25),
        los_days_q3: quantile(&los, 0.75),
        token_counts,
    })
}

/// Linearly interpolated quantile (R type 7) of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn timestamp_parse_and_format_round_trip() {
        let t = ts("2101-10-20 19:10:00");
        assert_eq!(t.format_datetime(), "2101-10-20 19:10:00");
        let d = ts("2101-10-20");
        assert_eq!(d.format_date(), "2101-10-20");
        assert_eq!(t.0 - d.0, 19 * 3600 + 10 * 60);
    }

    #[test]
    fn timestamp_date_only_is_midnight() {
        assert_eq!(ts("2101-02-03").format_datetime(), "2101-02-03 00:00:00");
    }

    #[test]
    fn timestamp_rejects_garbage() {
        for bad in [
            "",
            "2101-13-01",
            "2101-02-29",
            "2101-10-20 24:00:00",
            "20011020",
            "2101-10-20T19:10:00",
            "abcd-ef-gh",
        ] {
            assert!(Timestamp::parse(bad).is_err(), "accepted {bad:?}");
        }
        // 2100 is not a leap year, 2104 is
        assert!(Timestamp::parse("2100-02-29").is_err());
        assert!(Timestamp::parse("2104-02-29").is_ok());
    }

    fn chart_row(fields: &[(&'static str, &'static str)]) -> Result<EventRecord, RowError> {
        let map: BTreeMap<&str, &str> = fields.iter().copied().collect();
        event_from_fields(SourceKind::ChartEvents, |col| {
            map.get(col).copied().filter(|v| !v.is_empty())
        })
    }

    #[test]
    fn event_from_fields_chart_example() {
        let e = chart_row(&[
            ("SUBJECT_ID", "3"),
            ("HADM_ID", "145834"),
            ("ITEMID", "211"),
            ("VALUE", "104"),
            ("VALUEUOM", "BPM"),
            ("STORETIME", "2101-10-20 19:10:00"),
        ])
        .unwrap();
        assert_eq!(e.patient_id, 3);
        assert_eq!(e.admission_id, 145834);
        assert_eq!(e.source, SourceKind::ChartEvents);
        assert!(e.store_time.is_some());
        assert!(e.chart_time.is_none());
        assert_eq!(
            e.structured_fields,
            vec![
                ("ITEMID".into(), Some("211".into())),
                ("VALUE".into(), Some("104".into())),
                ("VALUEUOM".into(), Some("BPM".into())),
            ]
        );
    }

    #[test]
    fn event_from_fields_rejects_bad_rows() {
        assert_eq!(
            chart_row(&[("SUBJECT_ID", "3"), ("STORETIME", "2101-10-20 19:10:00")]),
            Err(RowError::Malformed("HADM_ID"))
        );
        assert_eq!(
            chart_row(&[
                ("SUBJECT_ID", "3"),
                ("HADM_ID", "-4"),
                ("STORETIME", "2101-10-20 19:10:00")
            ]),
            Err(RowError::Malformed("HADM_ID"))
        );
        assert_eq!(
            chart_row(&[
                ("SUBJECT_ID", "3"),
                ("HADM_ID", "4"),
                ("STORETIME", "not a time")
            ]),
            Err(RowError::BadTimestamp("STORETIME"))
        );
        assert_eq!(
            chart_row(&[("SUBJECT_ID", "3"), ("HADM_ID", "4")]),
            Err(RowError::NoTimestamp)
        );
    }

    #[test]
    fn effective_timestamp_prefers_store_then_chart_then_start() {
        let mut e = chart_row(&[
            ("SUBJECT_ID", "3"),
            ("HADM_ID", "4"),
            ("STORETIME", "2101-10-20 19:10:00"),
            ("CHARTTIME", "2101-10-20 19:05:00"),
        ])
        .unwrap();
        assert_eq!(effective_timestamp(&e).unwrap(), ts("2101-10-20 19:10:00"));
        e.store_time = None;
        assert_eq!(effective_timestamp(&e).unwrap(), ts("2101-10-20 19:05:00"));
        e.chart_time = None;
        e.start_date = Some(ts("2101-10-20"));
        assert_eq!(effective_timestamp(&e).unwrap(), ts("2101-10-20"));
        e.start_date = None;
        assert!(matches!(
            effective_timestamp(&e),
            Err(SchemaError::NoTimestamp { admission_id: 4 })
        ));
    }

    fn adm(subject: i64, hadm: i64, died: bool) -> AdmissionRow {
        AdmissionRow {
            subject_id: subject,
            hadm_id: hadm,
            hospital_expire_flag: died,
        }
    }

    fn stay(hadm: i64, stay_id: i64, intime: &str, hours: i64) -> IcuStayRow {
        let intime = ts(intime);
        IcuStayRow {
            subject_id: 0,
            hadm_id: hadm,
            icustay_id: stay_id,
            intime,
            outtime: Timestamp(intime.0 + hours * 3600),
        }
    }

    #[test]
    fn select_cohort_applies_both_rules() {
        let admissions = vec![
            adm(1, 100, false), // two stays -> excluded
            adm(2, 200, false), // 23 h stay -> excluded
            adm(3, 300, true),  // 30 h stay -> included
            adm(4, 400, false), // no stay -> excluded
        ];
        let stays = vec![
            stay(100, 1, "2101-01-01 00:00:00", 48),
            stay(100, 2, "2101-01-05 00:00:00", 48),
            stay(200, 3, "2101-01-01 00:00:00", 23),
            stay(300, 4, "2101-01-01 08:00:00", 30),
            stay(999, 5, "2101-01-01 00:00:00", 48), // orphan
        ];
        let sel = select_cohort(&admissions, &stays);
        assert_eq!(sel.cohort.len(), 1);
        let entry = &sel.cohort[0];
        assert_eq!(entry.admission_id, 300);
        assert_eq!(entry.patient_id, 3);
        assert!(entry.hospital_death);
        assert!((entry.icu_los_days - 1.25).abs() < 1e-12);
        assert_eq!(sel.counts.excluded_multi_stay, 1);
        assert_eq!(sel.counts.excluded_short_stay, 1);
        assert_eq!(sel.counts.excluded_no_stay, 1);
        assert_eq!(sel.counts.orphan_stays, 1);
    }

    #[test]
    fn cohort_entry_los_matches_interval() {
        let sel = select_cohort(
            &[adm(1, 100, false)],
            &[stay(100, 1, "2101-01-01 06:30:00", 30)],
        );
        let e = &sel.cohort[0];
        let los = (e.icu_outtime.0 - e.icu_intime.0) as f64 / 86_400.0;
        assert!((e.icu_los_days - los).abs() < 1e-9);
    }

    fn window_fixture() -> CohortIndex {
        let sel = select_cohort(
            &[adm(1, 100, false)],
            &[stay(100, 1, "2101-01-01 00:00:00", 48)],
        );
        CohortIndex::new(sel.cohort)
    }

    fn chart_event_at(hadm: i64, when: Timestamp) -> EventRecord {
        EventRecord {
            patient_id: 1,
            admission_id: hadm,
            source: SourceKind::ChartEvents,
            store_time: Some(when),
            chart_time: None,
            start_date: None,
            structured_fields: vec![],
            text_fields: vec![],
        }
    }

    #[test]
    fn window_is_half_open() {
        let index = window_fixture();
        let intime = ts("2101-01-01 00:00:00");
        // 23 h 59 m in: retained
        let inside = chart_event_at(100, Timestamp(intime.0 + 23 * 3600 + 59 * 60));
        assert_eq!(index.window_status(&inside), WindowStatus::Keep);
        // exactly +24 h: dropped
        let boundary = chart_event_at(100, Timestamp(intime.0 + WINDOW_SECONDS));
        assert_eq!(index.window_status(&boundary), WindowStatus::OutOfWindow);
        // before intime: dropped
        let early = chart_event_at(100, Timestamp(intime.0 - 1));
        assert_eq!(index.window_status(&early), WindowStatus::OutOfWindow);
        // unknown admission: dropped
        let foreign = chart_event_at(999, intime);
        assert_eq!(index.window_status(&foreign), WindowStatus::NotInCohort);

        let (kept, counts) = window_events(vec![inside, boundary, early, foreign], &index);
        assert_eq!(kept.len(), 1);
        assert_eq!(counts.kept, 1);
        assert_eq!(counts.out_of_window, 2);
        assert_eq!(counts.not_in_cohort, 1);
    }

    #[test]
    fn quantile_median_convention() {
        let v = [1.0, 2.0, 3.0, 10.0];
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile(&v, 0.75) - 4.75).abs() < 1e-12);
    }

    #[test]
    fn cohort_stats_counts_and_rates() {
        let entries: Vec<CohortEntry> = [(100, 1, true, 1.0), (200, 2, false, 2.0),
            (300, 3, false, 3.0), (400, 4, false, 10.0)]
            .iter()
            .map(|&(hadm, subj, died, los)| CohortEntry {
                admission_id: hadm,
                patient_id: subj,
                icu_intime: Timestamp(0),
                icu_outtime: Timestamp((los * 86_400.0) as i64),
                hospital_death: died,
                icu_los_days: los,
            })
            .collect();
        let stats = cohort_stats(&entries, &[]).unwrap();
        assert_eq!(stats.n_admissions, 4);
        assert_eq!(stats.n_patients, 4);
        assert!((stats.ihm_rate - 0.25).abs() < 1e-12);
        assert_eq!(stats.los_count, 1); // only the 10-day stay
        assert!((stats.los_days_median - 2.5).abs() < 1e-12);
        assert_eq!(stats.token_counts[&SourceKind::NoteEvents], 0);
        assert!(cohort_stats(&[], &[]).is_err());
    }
}
