//! Streaming CSV ingestion for the event tables and full loads for the
//! small cohort tables.
//!
//! Event tables can be huge, so rows are handed to a sink one at a time and
//! never accumulated here. Malformed rows and unparsable timestamps are
//! skipped and counted, not fatal; a missing required column is fatal.

use std::fs::File;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord};
use thiserror::Error;

use tokenbag::schema::{
    event_from_fields, AdmissionRow, EventRecord, IcuStayRow, RowError, Timestamp,
};
use tokenbag::SourceKind;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{table}: missing required column {column}")]
    MissingColumn {
        table: String,
        column: &'static str,
    },
    #[error("opening {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("reading {path}: {source}")]
    Read { path: String, source: csv::Error },
}

/// Per-table ingestion tally. `rows == emitted + malformed + bad_timestamp`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestCounts {
    pub rows: u64,
    pub emitted: u64,
    pub malformed: u64,
    pub bad_timestamp: u64,
}

struct HeaderIndex {
    /// (column name, index) for required plus present optional columns.
    columns: Vec<(String, usize)>,
}

impl HeaderIndex {
    fn build(
        table: &str,
        headers: &StringRecord,
        required: &[&'static str],
        optional: &[&'static str],
    ) -> Result<Self, IngestError> {
        let find = |name: &str| headers.iter().position(|h| h == name);
        let mut columns = Vec::new();
        for &col in required {
            let idx = find(col).ok_or(IngestError::MissingColumn {
                table: table.to_string(),
                column: col,
            })?;
            columns.push((col.to_string(), idx));
        }
        for &col in optional {
            if let Some(idx) = find(col) {
                columns.push((col.to_string(), idx));
            }
        }
        Ok(HeaderIndex { columns })
    }

    fn get<'r>(&self, record: &'r StringRecord, name: &str) -> Option<&'r str> {
        self.columns
            .iter()
            .find(|(col, _)| col == name)
            .and_then(|(_, idx)| record.get(*idx))
            .map(str::trim)
            .filter(|v| !v.is_empty())
    }
}

/// Streams one event table into `sink`, one [`EventRecord`] per valid row in
/// file order.
pub fn load_table(
    path: &Path,
    source: SourceKind,
    mut sink: impl FnMut(EventRecord),
) -> Result<IngestCounts, IngestError> {
    let table = source.table_name();
    let file = File::open(path).map_err(|e| IngestError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Read {
            path: path.display().to_string(),
            source: e,
        })?
        .clone();
    let index = HeaderIndex::build(
        table,
        &headers,
        source.required_columns(),
        source.optional_columns(),
    )?;

    let mut counts = IngestCounts::default();
    let mut record = StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                counts.rows += 1;
                match event_from_fields(source, |col| index.get(&record, col)) {
                    Ok(event) => {
                        counts.emitted += 1;
                        sink(event);
                    }
                    Err(RowError::BadTimestamp(_)) => counts.bad_timestamp += 1,
                    Err(RowError::Malformed(_)) | Err(RowError::NoTimestamp) => {
                        counts.malformed += 1
                    }
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(IngestError::Read {
                    path: path.display().to_string(),
                    source: e,
                })
            }
            // wrong field count and similar per-record problems: skip + count
            Err(_) => {
                counts.rows += 1;
                counts.malformed += 1;
            }
        }
    }
    Ok(counts)
}

const ADMISSIONS_COLUMNS: [&str; 3] = ["SUBJECT_ID", "HADM_ID", "HOSPITAL_EXPIRE_FLAG"];
const ICUSTAYS_COLUMNS: [&str; 5] = ["SUBJECT_ID", "HADM_ID", "ICUSTAY_ID", "INTIME", "OUTTIME"];

fn small_table_reader(
    path: &Path,
    table: &str,
    required: &[&'static str],
) -> Result<(csv::Reader<File>, HeaderIndex), IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Read {
            path: path.display().to_string(),
            source: e,
        })?
        .clone();
    let index = HeaderIndex::build(table, &headers, required, &[])?;
    Ok((reader, index))
}

/// Loads the full admissions table (desk scale, held in memory).
pub fn load_admissions(path: &Path) -> Result<(Vec<AdmissionRow>, IngestCounts), IngestError> {
    let (mut reader, index) = small_table_reader(path, "admissions", &ADMISSIONS_COLUMNS)?;
    let mut rows = Vec::new();
    let mut counts = IngestCounts::default();
    let mut record = StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                counts.rows += 1;
                let parsed = (|| -> Option<AdmissionRow> {
                    let subject_id: i64 = index.get(&record, "SUBJECT_ID")?.parse().ok()?;
                    let hadm_id: i64 = index.get(&record, "HADM_ID")?.parse().ok()?;
                    if subject_id <= 0 || hadm_id <= 0 {
                        return None;
                    }
                    let flag = match index.get(&record, "HOSPITAL_EXPIRE_FLAG") {
                        Some("1") => true,
                        Some("0") | None => false,
                        Some(_) => return None,
                    };
                    Some(AdmissionRow {
                        subject_id,
                        hadm_id,
                        hospital_expire_flag: flag,
                    })
                })();
                match parsed {
                    Some(row) => {
                        counts.emitted += 1;
                        rows.push(row);
                    }
                    None => counts.malformed += 1,
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(IngestError::Read {
                    path: path.display().to_string(),
                    source: e,
                })
            }
            Err(_) => {
                counts.rows += 1;
                counts.malformed += 1;
            }
        }
    }
    Ok((rows, counts))
}

/// Loads the full icustays table (desk scale, held in memory).
pub fn load_icustays(path: &Path) -> Result<(Vec<IcuStayRow>, IngestCounts), IngestError> {
    let (mut reader, index) = small_table_reader(path, "icustays", &ICUSTAYS_COLUMNS)?;
    let mut rows = Vec::new();
    let mut counts = IngestCounts::default();
    let mut record = StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                counts.rows += 1;
                enum Parsed {
                    Row(IcuStayRow),
                    BadTime,
                    Malformed,
                }
                let parsed = (|| -> Parsed {
                    let ids = (
                        index.get(&record, "SUBJECT_ID").and_then(|v| v.parse::<i64>().ok()),
                        index.get(&record, "HADM_ID").and_then(|v| v.parse::<i64>().ok()),
                        index.get(&record, "ICUSTAY_ID").and_then(|v| v.parse::<i64>().ok()),
                    );
                    let (Some(subject_id), Some(hadm_id), Some(icustay_id)) = ids else {
                        return Parsed::Malformed;
                    };
                    if subject_id <= 0 || hadm_id <= 0 {
                        return Parsed::Malformed;
                    }
                    let (Some(in_raw), Some(out_raw)) = (
                        index.get(&record, "INTIME"),
                        index.get(&record, "OUTTIME"),
                    ) else {
                        return Parsed::Malformed;
                    };
                    let (Ok(intime), Ok(outtime)) =
                        (Timestamp::parse(in_raw), Timestamp::parse(out_raw))
                    else {
                        return Parsed::BadTime;
                    };
                    Parsed::Row(IcuStayRow {
                        subject_id,
                        hadm_id,
                        icustay_id,
                        intime,
                        outtime,
                    })
                })();
                match parsed {
                    Parsed::Row(row) => {
                        counts.emitted += 1;
                        rows.push(row);
                    }
                    Parsed::BadTime => counts.bad_timestamp += 1,
                    Parsed::Malformed => counts.malformed += 1,
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(IngestError::Read {
                    path: path.display().to_string(),
                    source: e,
                })
            }
            Err(_) => {
                counts.rows += 1;
                counts.malformed += 1;
            }
        }
    }
    Ok((rows, counts))
}
