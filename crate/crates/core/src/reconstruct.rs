//! Rebuilds the workbook at any checkpoint by undoing and replaying the
//! change log, and reads/writes the stepwise changes file.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::CellAddress;
use crate::grid::{Axis, SheetGrid};
use crate::model::{
    AcceptanceState, ChangeKind, ChangeRecord, ChangeTarget, RecordingStatus, StructuralSpan,
    Workbook,
};
use crate::odf::parse_timestamp;
use crate::value::{CachedResult, CellContent, StaticValue, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Checkpoint {
    /// Every record stamped at or before this instant.
    At(NaiveDateTime),
    /// Every record up to and including this one.
    Record(String),
}

impl FromStr for Checkpoint {
    type Err = std::convert::Infallible;

    /// Date-times (`2003-03-28T21:55:00`, `2003-03-28 21:55:00`, `2003-03-28`)
    /// become instants; anything else names a record.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let looks_like_date = s.len() >= 10 && s.as_bytes()[4] == b'-' && s.as_bytes()[7] == b'-';
        Ok(match parse_timestamp(&s.replacen(' ', "T", 1)) {
            Some(t) if looks_like_date => Checkpoint::At(t),
            _ => Checkpoint::Record(s.to_owned()),
        })
    }
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checkpoint::At(t) => write!(f, "{}", t.format("%Y-%m-%dT%H:%M:%S")),
            Checkpoint::Record(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSnapshot {
    pub sheets: Vec<SheetGrid>,
    /// `None` for the base state.
    pub as_of: Option<NaiveDateTime>,
    pub applied_count: usize,
}

impl GridSnapshot {
    pub fn sheet(&self, name: &str) -> Option<&SheetGrid> {
        self.sheets.iter().find(|s| s.name == name)
    }

    pub fn content_at(&self, address: &CellAddress) -> CellContent {
        self.sheet(&address.sheet)
            .map(|s| s.grid.get(address.row, address.column).clone())
            .unwrap_or_default()
    }

    /// Cell-content equality with another list of sheets.
    pub fn same_content(&self, sheets: &[SheetGrid]) -> bool {
        self.sheets.len() == sheets.len()
            && self
                .sheets
                .iter()
                .zip(sheets)
                .all(|(a, b)| a.name == b.name && a.grid.same_content(&b.grid))
    }
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("the document has no change history")]
    NoHistory,
    #[error("change {id} cannot be replayed: {reason}")]
    UnreplayableRecord {
        id: String,
        reason: String,
        /// Earliest instant whose state is still reachable from the current grid.
        earliest_reachable: Option<NaiveDateTime>,
    },
    #[error("checkpoint {0} does not name a change record")]
    CheckpointNotFound(String),
    #[error("changes file line {line}: {message}")]
    BadChangesLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A record's target in the layout right after it was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Native {
    Cell { row: u32, column: u32 },
    Span { at: u32, count: u32 },
}

fn unreplayable(record: &ChangeRecord, reason: String) -> ReconstructError {
    ReconstructError::UnreplayableRecord {
        id: record.id.clone(),
        reason,
        earliest_reachable: None,
    }
}

// Maps index `x` on `axis` back across `later`, a structural record made
// after the one being mapped, whose native span is `at..at + count`.
fn undo_shift(x: u32, later: &ChangeRecord, (at, count): (u32, u32), axis: Axis) -> Option<u32> {
    if later.kind.axis() != Some(axis) {
        return Some(x);
    }
    Some(if later.kind.is_insertion() {
        if x < at {
            x
        } else if x < at + count {
            return None;
        } else {
            x - count
        }
    } else if x < at {
        x
    } else {
        x + count
    })
}

/// Native coordinates for every record, oldest first.
fn native_targets(records: &[&ChangeRecord]) -> Result<Vec<Native>, ReconstructError> {
    let mut out = vec![Native::Span { at: 0, count: 0 }; records.len()];
    // Structural records made after the current one with their native spans, newest first.
    let mut later: Vec<(&ChangeRecord, (u32, u32))> = Vec::new();
    for (k, record) in records.iter().enumerate().rev() {
        let sheet = record.sheet();
        let map = |x: u32, axis: Axis| -> Result<u32, ReconstructError> {
            later
                .iter()
                .filter(|(l, _)| l.sheet() == sheet)
                .try_fold(x, |x, (l, span)| {
                    undo_shift(x, l, *span, axis).ok_or_else(|| {
                        unreplayable(
                            record,
                            format!("its target lies inside lines inserted later by {}", l.id),
                        )
                    })
                })
        };
        out[k] = match &record.target {
            ChangeTarget::Cell(a) => Native::Cell {
                row: map(a.row, Axis::Row)?,
                column: map(a.column, Axis::Column)?,
            },
            ChangeTarget::Span(s) => {
                let axis = record.kind.axis().expect("span records have an axis");
                Native::Span {
                    at: map(s.position, axis)?,
                    count: s.count,
                }
            }
        };
        if let Native::Span { at, count } = out[k] {
            later.push((record, (at, count)));
        }
    }
    Ok(out)
}

fn sheet_mut<'a>(
    sheets: &'a mut [SheetGrid],
    record: &ChangeRecord,
) -> Result<&'a mut SheetGrid, ReconstructError> {
    sheets
        .iter_mut()
        .find(|s| s.name == record.sheet())
        .ok_or_else(|| unreplayable(record, format!("no sheet named {:?}", record.sheet())))
}

// Records that took effect, with their index in `records`.
fn effective(records: &[ChangeRecord]) -> (Vec<usize>, Vec<&ChangeRecord>) {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.state != AcceptanceState::Rejected)
        .unzip()
}

/// Undoes `records` (sorted, final-layout coordinates) starting from `sheets`.
pub fn revert_records(
    sheets: &[SheetGrid],
    records: &[ChangeRecord],
) -> Result<GridSnapshot, ReconstructError> {
    let (_, live) = effective(records);
    let targets = native_targets(&live)?;
    let mut sheets = sheets.to_vec();
    for (record, native) in live.iter().zip(&targets).rev() {
        let sheet = sheet_mut(&mut sheets, record)?;
        match (*native, record.kind.axis()) {
            (Native::Cell { row, column }, _) => sheet.grid.set(row, column, record.before.clone()),
            (Native::Span { at, count }, Some(axis)) => {
                if record.kind.is_insertion() {
                    sheet.grid.remove(axis, at, count);
                } else {
                    sheet.grid.insert(axis, at, count);
                    sheet.grid.mark_unrecoverable(axis, at, count);
                }
            }
            (Native::Span { .. }, None) => unreachable!("span records have an axis"),
        }
    }
    Ok(GridSnapshot {
        sheets,
        as_of: None,
        applied_count: 0,
    })
}

/// The state before the first tracked change.
pub fn revert_all(workbook: &Workbook) -> Result<GridSnapshot, ReconstructError> {
    if workbook.recording == RecordingStatus::NoHistoryFound {
        return Err(ReconstructError::NoHistory);
    }
    if let Some(last) = workbook
        .opaque_changes
        .iter()
        .max_by_key(|o| (o.timestamp, o.sequence))
    {
        return Err(ReconstructError::UnreplayableRecord {
            id: last.id.clone(),
            reason: format!("{} changes are not interpreted", last.element),
            earliest_reachable: last.timestamp,
        });
    }
    revert_records(&workbook.sheets, &workbook.changes)
}

/// Number of leading records covered by `checkpoint`.
pub fn checkpoint_prefix(
    records: &[ChangeRecord],
    checkpoint: &Checkpoint,
) -> Result<usize, ReconstructError> {
    match checkpoint {
        Checkpoint::At(t) => Ok(records.iter().take_while(|r| r.timestamp <= *t).count()),
        Checkpoint::Record(id) => records
            .iter()
            .position(|r| r.id == *id)
            .map(|i| i + 1)
            .ok_or_else(|| ReconstructError::CheckpointNotFound(id.clone())),
    }
}

/// Replays `records` onto `base` up to and including `checkpoint`.
pub fn replay_records(
    base: &GridSnapshot,
    records: &[ChangeRecord],
    checkpoint: &Checkpoint,
) -> Result<GridSnapshot, ReconstructError> {
    let prefix = checkpoint_prefix(records, checkpoint)?;
    let (indices, live) = effective(records);
    let targets = native_targets(&live)?;
    let mut sheets = base.sheets.clone();
    for ((index, record), native) in indices.iter().zip(&live).zip(&targets) {
        if *index >= prefix {
            break;
        }
        let sheet = sheet_mut(&mut sheets, record)?;
        match (*native, record.kind.axis()) {
            (Native::Cell { row, column }, _) => sheet.grid.set(row, column, record.after.clone()),
            (Native::Span { at, count }, Some(axis)) => {
                if record.kind.is_insertion() {
                    sheet.grid.insert(axis, at, count);
                } else {
                    let blank = (at..at + count).all(|i| match axis {
                        Axis::Row => sheet.grid.row_is_blank(i),
                        Axis::Column => sheet.grid.column_is_blank(i),
                    });
                    if !blank {
                        return Err(unreplayable(
                            record,
                            "deleted lines still hold content during replay".into(),
                        ));
                    }
                    sheet.grid.remove(axis, at, count);
                }
            }
            (Native::Span { .. }, None) => unreachable!("span records have an axis"),
        }
    }
    let as_of = match checkpoint {
        Checkpoint::At(t) => Some(*t),
        Checkpoint::Record(_) => records.get(prefix.wrapping_sub(1)).map(|r| r.timestamp),
    };
    Ok(GridSnapshot {
        sheets,
        as_of,
        applied_count: prefix,
    })
}

pub fn replay_to(
    base: &GridSnapshot,
    workbook: &Workbook,
    checkpoint: &Checkpoint,
) -> Result<GridSnapshot, ReconstructError> {
    replay_records(base, &workbook.changes, checkpoint)
}

/// `revert_all` followed by `replay_to`.
pub fn snapshot_at(
    workbook: &Workbook,
    checkpoint: &Checkpoint,
) -> Result<GridSnapshot, ReconstructError> {
    let base = revert_all(workbook)?;
    replay_to(&base, workbook, checkpoint)
}

/// One cell's content in the changes file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentLine {
    pub kind: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<ValueType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Box<ContentLine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ContentLine {
    fn bare(kind: &str) -> Self {
        ContentLine {
            kind: kind.into(),
            value_type: None,
            lexical: None,
            numeric: None,
            currency: None,
            formula: None,
            result: None,
            error: None,
        }
    }

    fn value(v: &StaticValue, kind: &str) -> Self {
        ContentLine {
            value_type: Some(v.value_type),
            lexical: Some(v.lexical.clone()),
            numeric: v.numeric,
            currency: v.currency_code.clone(),
            ..ContentLine::bare(kind)
        }
    }

    pub fn from_content(c: &CellContent) -> Self {
        match c {
            CellContent::Empty => ContentLine::bare("empty"),
            CellContent::Static { value } => ContentLine::value(value, "static"),
            CellContent::Formula { source, cached } => {
                let mut line = ContentLine {
                    formula: Some(source.clone()),
                    ..ContentLine::bare("formula")
                };
                match cached {
                    Some(CachedResult::Value(v)) => {
                        line.result = Some(Box::new(ContentLine::value(v, "value")))
                    }
                    Some(CachedResult::Error { token }) => line.error = Some(token.clone()),
                    None => {}
                }
                line
            }
        }
    }

    fn static_value(&self) -> Result<StaticValue, String> {
        Ok(StaticValue {
            value_type: self.value_type.ok_or("missing type")?,
            lexical: self.lexical.clone().ok_or("missing lexical")?,
            numeric: self.numeric,
            currency_code: self.currency.clone(),
        })
    }

    pub fn to_content(&self) -> Result<CellContent, String> {
        Ok(match self.kind.as_str() {
            "empty" => CellContent::Empty,
            "static" => CellContent::static_value(self.static_value()?),
            "formula" => {
                let cached = match (&self.result, &self.error) {
                    (Some(r), _) => Some(CachedResult::Value(r.static_value()?)),
                    (None, Some(token)) => Some(CachedResult::Error {
                        token: token.clone(),
                    }),
                    (None, None) => None,
                };
                CellContent::formula(self.formula.clone().ok_or("missing formula")?, cached)
            }
            other => return Err(format!("unknown content kind {other:?}")),
        })
    }
}

/// One line of the changes file. Field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeLine {
    pub id: String,
    pub kind: ChangeKind,
    pub sheet: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    pub author: String,
    pub timestamp: String,
    pub state: AcceptanceState,
    pub before: ContentLine,
    pub after: ContentLine,
}

impl ChangeLine {
    pub fn from_record(r: &ChangeRecord) -> Self {
        let (address, position, count) = match &r.target {
            ChangeTarget::Cell(a) => (Some(a.a1()), None, None),
            ChangeTarget::Span(s) => (None, Some(s.position), Some(s.count)),
        };
        ChangeLine {
            id: r.id.clone(),
            kind: r.kind,
            sheet: r.sheet().to_owned(),
            address,
            position,
            count,
            author: r.author.clone(),
            timestamp: r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            state: r.state,
            before: ContentLine::from_content(&r.before),
            after: ContentLine::from_content(&r.after),
        }
    }

    pub fn to_record(&self, sequence: usize) -> Result<ChangeRecord, String> {
        let target = if self.kind == ChangeKind::CellContent {
            let a1 = self
                .address
                .as_deref()
                .ok_or("cell change without address")?;
            ChangeTarget::Cell(
                CellAddress::parse_a1(&self.sheet, a1)
                    .ok_or_else(|| format!("bad address {a1:?}"))?,
            )
        } else {
            ChangeTarget::Span(StructuralSpan {
                sheet: self.sheet.clone(),
                position: self.position.ok_or("structural change without position")?,
                count: self.count.unwrap_or(1),
            })
        };
        Ok(ChangeRecord {
            id: self.id.clone(),
            kind: self.kind,
            target,
            author: self.author.clone(),
            timestamp: parse_timestamp(&self.timestamp)
                .ok_or_else(|| format!("bad timestamp {:?}", self.timestamp))?,
            state: self.state,
            before: self.before.to_content()?,
            after: self.after.to_content()?,
            sequence,
            captured_entries: 0,
        })
    }
}

/// Writes one line per change, oldest first.
pub fn export_changes(
    records: &[ChangeRecord],
    mut out: impl Write,
) -> Result<(), ReconstructError> {
    for r in records {
        serde_json::to_writer(&mut out, &ChangeLine::from_record(r)).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_changes_file(
    workbook: &Workbook,
    path: impl AsRef<std::path::Path>,
) -> Result<(), ReconstructError> {
    let file = std::fs::File::create(path)?;
    export_changes(&workbook.changes, io::BufWriter::new(file))
}

/// Reads a changes file back. Blank lines are ignored.
pub fn import_changes(input: impl BufRead) -> Result<Vec<ChangeRecord>, ReconstructError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ReconstructError::BadChangesLine {
            line: i + 1,
            message,
        };
        let parsed: ChangeLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        out.push(parsed.to_record(out.len()).map_err(bad)?);
    }
    Ok(out)
}
