//! Text renderings of change lists, summaries, findings and snapshots.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analyze::Finding;
use crate::filter::Summary;
use crate::grid::SheetGrid;
use crate::model::{render_change_detail, ChangeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Ndjson,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "ndjson" => Ok(Format::Ndjson),
            _ => Err(format!("unknown format {s:?} (table, csv, ndjson)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Table => "table",
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        })
    }
}

pub const CHANGE_COLUMNS: [&str; 8] = [
    "Change",
    "Sheet",
    "Address",
    "Author",
    "Date",
    "Time",
    "Status",
    "Change Details",
];

pub const FINDING_COLUMNS: [&str; 5] = ["Check", "Severity", "Location", "Message", "Sheet"];

/// One change-table row; the ndjson form uses these field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRow {
    pub change: String,
    pub sheet: String,
    pub address: String,
    pub author: String,
    pub date: String,
    pub time: String,
    pub status: String,
    pub details: String,
}

impl ChangeRow {
    pub fn from_record(r: &ChangeRecord) -> Self {
        ChangeRow {
            change: r.kind.label().to_owned(),
            sheet: r.sheet().to_owned(),
            address: r.location_label(),
            author: r.author.clone(),
            date: r.timestamp.format("%Y-%m-%d").to_string(),
            time: r.timestamp.format("%H:%M:%S").to_string(),
            status: r.state.as_str().to_owned(),
            details: render_change_detail(r),
        }
    }

    pub fn fields(&self) -> [&str; 8] {
        [
            &self.change,
            &self.sheet,
            &self.address,
            &self.author,
            &self.date,
            &self.time,
            &self.status,
            &self.details,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingRow {
    pub check: String,
    pub severity: String,
    pub location: String,
    pub message: String,
    pub sheet: String,
}

impl FindingRow {
    pub fn from_finding(f: &Finding) -> Self {
        FindingRow {
            check: f.check_id.as_str().to_owned(),
            severity: f.severity.as_str().to_owned(),
            location: f.location_label(),
            message: f.message.clone(),
            sheet: f.sheet.clone(),
        }
    }

    pub fn fields(&self) -> [&str; 5] {
        [
            &self.check,
            &self.severity,
            &self.location,
            &self.message,
            &self.sheet,
        ]
    }
}

/// Space-padded columns joined by ` | `, header first.
pub fn render_table<S: AsRef<str>>(headers: &[&str], rows: &[Vec<S>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.as_ref().chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let mut text = padded.join(" | ");
        text.truncate(text.trim_end().len());
        text.push('\n');
        text
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(AsRef::as_ref).collect()));
    }
    out
}

pub fn render_csv<S: AsRef<str>>(headers: &[&str], rows: &[Vec<S>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(headers).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn ndjson<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("serializable row"));
        out.push('\n');
    }
    out
}

pub fn render_change_table<'a>(
    records: impl IntoIterator<Item = &'a ChangeRecord>,
    format: Format,
) -> String {
    let rows: Vec<ChangeRow> = records.into_iter().map(ChangeRow::from_record).collect();
    match format {
        Format::Ndjson => ndjson(&rows),
        _ => {
            let cells: Vec<Vec<&str>> = rows.iter().map(|r| r.fields().to_vec()).collect();
            if format == Format::Csv {
                render_csv(&CHANGE_COLUMNS, &cells)
            } else {
                render_table(&CHANGE_COLUMNS, &cells)
            }
        }
    }
}

/// The footer block: header line, then type, author and date counts.
pub fn render_summary(summary: &Summary) -> String {
    let mut out = format!("{} Change Records", summary.total);
    if let (Some(first), Some(last)) = (summary.first_date, summary.last_date) {
        out.push_str(&format!(" between: {first} and {last}"));
    }
    out.push_str(&format!("\n\nof Change Types: {}\n", summary.by_kind.len()));
    for (kind, n) in &summary.by_kind {
        out.push_str(&format!("{n} {}\n", kind.long_label()));
    }
    out.push_str(&format!("\nof Authors: {}\n", summary.by_author.len()));
    for (author, n) in &summary.by_author {
        out.push_str(&format!("{n} by \"{author}\"\n"));
    }
    out.push_str(&format!("\nof Dates: {}\n", summary.by_date.len()));
    for (date, n) in &summary.by_date {
        out.push_str(&format!("{n} on \"{date}\"\n"));
    }
    out
}

/// ndjson carries full findings including evidence; table and csv carry the row fields.
pub fn render_findings(findings: &[Finding], format: Format) -> String {
    match format {
        Format::Ndjson => ndjson(findings),
        _ => {
            let rows: Vec<FindingRow> = findings.iter().map(FindingRow::from_finding).collect();
            let cells: Vec<Vec<&str>> = rows.iter().map(|r| r.fields().to_vec()).collect();
            if format == Format::Csv {
                render_csv(&FINDING_COLUMNS, &cells)
            } else {
                render_table(&FINDING_COLUMNS, &cells)
            }
        }
    }
}

/// The sheet as a rectangular csv of cell text, from A1 to its extent.
pub fn render_sheet_csv(sheet: &SheetGrid) -> String {
    let (rows, columns) = sheet.grid.extent();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in 0..rows {
        let record: Vec<String> = (0..columns)
            .map(|c| sheet.grid.get(row, c).plain_text())
            .collect();
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let text = render_table(&["A", "Long header"], &[vec!["xyz", "1"], vec!["", ""]]);
        assert_eq!(text, "A   | Long header\nxyz | 1\n    |\n");
    }

    #[test]
    fn csv_quotes() {
        let text = render_csv(&["a", "b"], &[vec!["x,y", "say \"hi\""]]);
        assert_eq!(text, "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    }

    #[test]
    fn empty_summary() {
        let text = render_summary(&Summary::default());
        assert!(text.starts_with("0 Change Records\n"));
        assert!(!text.contains("between"));
    }
}
