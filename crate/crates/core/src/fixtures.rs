//! Builds small spreadsheet archives in memory: the worked cash-flow
//! example, degenerate files, and random edit histories whose base and
//! intermediate states are known independently of the reconstructor.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Cursor, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

use crate::address::CellAddress;
use crate::grid::{Axis, Grid, SheetGrid};
use crate::model::{AcceptanceState, ChangeKind, ChangeRecord, ChangeTarget, StructuralSpan};
use crate::value::{CachedResult, CellContent, StaticValue, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UriFamily {
    Odf,
    OpenOffice1,
}

/// An untracked change element written as-is (movement, rejection...).
#[derive(Debug, Clone)]
pub struct OpaqueElement {
    pub element: String,
    pub author: String,
    pub timestamp: NaiveDateTime,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureDocument {
    pub sheets: Vec<SheetGrid>,
    /// `None` writes no tracked-changes element at all.
    pub changes: Option<Vec<ChangeRecord>>,
    pub opaque: Vec<OpaqueElement>,
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn value_attrs(v: &StaticValue, out: &mut String) {
    let _ = write!(out, r#" office:value-type="{}""#, v.value_type);
    match v.value_type {
        ValueType::Float | ValueType::Percentage => {
            let _ = write!(out, r#" office:value="{}""#, esc(&v.lexical));
        }
        ValueType::Currency => {
            let _ = write!(out, r#" office:value="{}""#, esc(&v.lexical));
            if let Some(code) = &v.currency_code {
                let _ = write!(out, r#" office:currency="{}""#, esc(code));
            }
        }
        ValueType::Boolean => {
            let _ = write!(out, r#" office:boolean-value="{}""#, v.lexical);
        }
        ValueType::Date => {
            let _ = write!(out, r#" office:date-value="{}""#, esc(&v.lexical));
        }
        ValueType::String => {}
    }
}

/// Attributes and inner XML for one cell.
fn cell_parts(content: &CellContent) -> (String, String) {
    let mut attrs = String::new();
    let text = match content {
        CellContent::Empty => return (attrs, String::new()),
        CellContent::Static { value } => {
            value_attrs(value, &mut attrs);
            value.display()
        }
        CellContent::Formula { source, cached } => {
            let _ = write!(attrs, r#" table:formula="of:{}""#, esc(source));
            match cached {
                None => return (attrs, String::new()),
                Some(CachedResult::Value(v)) => {
                    value_attrs(v, &mut attrs);
                    v.display()
                }
                Some(CachedResult::Error { token }) => {
                    attrs.push_str(r#" office:value-type="string" office:string-value="""#);
                    token.clone()
                }
            }
        }
    };
    (attrs, format!("<text:p>{}</text:p>", esc(&text)))
}

fn write_cell(out: &mut String, content: &CellContent, protected: bool, repeat: u32) {
    let (attrs, inner) = cell_parts(content);
    out.push_str("<table:table-cell");
    if protected {
        out.push_str(r#" table:style-name="ceP""#);
    }
    if repeat > 1 {
        let _ = write!(out, r#" table:number-columns-repeated="{repeat}""#);
    }
    out.push_str(&attrs);
    if inner.is_empty() {
        out.push_str("/>");
    } else {
        let _ = write!(out, ">{inner}</table:table-cell>");
    }
}

fn write_table(out: &mut String, sheet: &SheetGrid) {
    let _ = write!(out, r#"<table:table table:name="{}""#, esc(&sheet.name));
    if sheet.protected {
        out.push_str(r#" table:protected="true""#);
    }
    out.push('>');
    let grid = &sheet.grid;
    let mut rows: BTreeMap<u32, BTreeMap<u32, (&CellContent, bool)>> = BTreeMap::new();
    for ((r, c), content) in grid.iter() {
        rows.entry(r)
            .or_default()
            .insert(c, (content, grid.is_protected(r, c)));
    }
    for (r, c) in grid.protected_positions() {
        rows.entry(r)
            .or_default()
            .entry(c)
            .or_insert((grid.get(r, c), true));
    }
    let width = rows
        .values()
        .filter_map(|cells| cells.keys().next_back())
        .max()
        .map_or(1, |c| c + 1);
    let mut next_row = 0;
    for (r, cells) in &rows {
        if *r > next_row {
            let _ = write!(
                out,
                r#"<table:table-row table:number-rows-repeated="{}"><table:table-cell table:number-columns-repeated="{width}"/></table:table-row>"#,
                r - next_row
            );
        }
        out.push_str("<table:table-row>");
        let mut next_col = 0;
        for (c, (content, protected)) in cells {
            if *c > next_col {
                write_cell(out, &CellContent::Empty, false, c - next_col);
            }
            write_cell(out, content, *protected, 1);
            next_col = c + 1;
        }
        if next_col < width {
            write_cell(out, &CellContent::Empty, false, width - next_col);
        }
        out.push_str("</table:table-row>");
        next_row = r + 1;
    }
    out.push_str("</table:table>");
}

fn write_info(out: &mut String, author: &str, at: NaiveDateTime) {
    let _ = write!(
        out,
        "<office:change-info><dc:creator>{}</dc:creator><dc:date>{}</dc:date></office:change-info>",
        esc(author),
        at.format("%Y-%m-%dT%H:%M:%S")
    );
}

fn write_change(out: &mut String, record: &ChangeRecord, sheets: &[SheetGrid]) {
    let table = sheets
        .iter()
        .position(|s| s.name == record.sheet())
        .expect("record names a fixture sheet");
    let state = match record.state {
        AcceptanceState::Pending => String::new(),
        s => format!(r#" table:acceptance-state="{}""#, s.as_str()),
    };
    match &record.target {
        ChangeTarget::Cell(a) => {
            let _ = write!(
                out,
                r#"<table:cell-content-change table:id="{}"{state}><table:cell-address table:column="{}" table:row="{}" table:table="{table}"/>"#,
                esc(&record.id),
                a.column,
                a.row
            );
            write_info(out, &record.author, record.timestamp);
            let (attrs, inner) = cell_parts(&record.before);
            let _ = write!(
                out,
                "<table:previous><table:change-track-table-cell{attrs}>{inner}</table:change-track-table-cell></table:previous></table:cell-content-change>"
            );
        }
        ChangeTarget::Span(span) => {
            let element = if record.kind.is_insertion() {
                "insertion"
            } else {
                "deletion"
            };
            let axis = match record.kind.axis() {
                Some(Axis::Column) => "column",
                _ => "row",
            };
            let _ = write!(
                out,
                r#"<table:{element} table:id="{}"{state} table:type="{axis}" table:position="{}" table:table="{table}""#,
                esc(&record.id),
                span.position
            );
            if span.count > 1 {
                let _ = write!(out, r#" table:count="{}""#, span.count);
            }
            out.push('>');
            write_info(out, &record.author, record.timestamp);
            if !record.kind.is_insertion() {
                out.push_str("<table:deletions/>");
            }
            let _ = write!(out, "</table:{element}>");
        }
    }
}

fn namespaces(family: UriFamily) -> String {
    let (office, table, text, style) = match family {
        UriFamily::Odf => (
            "urn:oasis:names:tc:opendocument:xmlns:office:1.0",
            "urn:oasis:names:tc:opendocument:xmlns:table:1.0",
            "urn:oasis:names:tc:opendocument:xmlns:text:1.0",
            "urn:oasis:names:tc:opendocument:xmlns:style:1.0",
        ),
        UriFamily::OpenOffice1 => (
            "http://openoffice.org/2000/office",
            "http://openoffice.org/2000/table",
            "http://openoffice.org/2000/text",
            "http://openoffice.org/2000/style",
        ),
    };
    format!(
        r#"xmlns:office="{office}" xmlns:table="{table}" xmlns:text="{text}" xmlns:style="{style}" xmlns:dc="http://purl.org/dc/elements/1.1/""#
    )
}

pub fn content_xml(doc: &FixtureDocument, family: UriFamily) -> String {
    let mut out = format!(
        r#"<?xml version="1.0" encoding="UTF-8"?><office:document-content {}><office:automatic-styles><style:style style:name="ceP" style:family="table-cell"><style:table-cell-properties style:cell-protect="protected"/></style:style></office:automatic-styles><office:body><office:spreadsheet>"#,
        namespaces(family)
    );
    if let Some(changes) = &doc.changes {
        out.push_str("<table:tracked-changes>");
        for r in changes {
            write_change(&mut out, r, &doc.sheets);
        }
        for (i, o) in doc.opaque.iter().enumerate() {
            let _ = write!(out, r#"<table:{} table:id="op{}">"#, o.element, i + 1);
            write_info(&mut out, &o.author, o.timestamp);
            let _ = write!(out, "</table:{}>", o.element);
        }
        out.push_str("</table:tracked-changes>");
    }
    for sheet in &doc.sheets {
        write_table(&mut out, sheet);
    }
    out.push_str("</office:spreadsheet></office:body></office:document-content>");
    out
}

fn manifest_xml(family: UriFamily, mime: &str) -> String {
    let ns = match family {
        UriFamily::Odf => "urn:oasis:names:tc:opendocument:xmlns:manifest:1.0",
        UriFamily::OpenOffice1 => "http://openoffice.org/2001/manifest",
    };
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?><manifest:manifest xmlns:manifest="{ns}"><manifest:file-entry manifest:full-path="/" manifest:media-type="{mime}"/><manifest:file-entry manifest:full-path="content.xml" manifest:media-type="text/xml"/><manifest:file-entry manifest:full-path="settings.xml" manifest:media-type="text/xml"/></manifest:manifest>"#
    )
}

fn settings_xml(family: UriFamily) -> String {
    let (office, config) = match family {
        UriFamily::Odf => (
            "urn:oasis:names:tc:opendocument:xmlns:office:1.0",
            "urn:oasis:names:tc:opendocument:xmlns:config:1.0",
        ),
        UriFamily::OpenOffice1 => (
            "http://openoffice.org/2000/office",
            "http://openoffice.org/2001/config",
        ),
    };
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?><office:document-settings xmlns:office="{office}" xmlns:config="{config}"><office:settings/></office:document-settings>"#
    )
}

/// Packs raw parts into an archive, `mimetype` first and stored.
pub fn zip_parts(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let stored = SimpleFileOptions::default().compression_method(CompressionMethod::Stored);
    let deflated = SimpleFileOptions::default().compression_method(CompressionMethod::Deflated);
    for (name, bytes) in parts {
        let opts = if *name == "mimetype" {
            stored
        } else {
            deflated
        };
        zip.start_file(*name, opts).expect("zip entry");
        zip.write_all(bytes).expect("in-memory write");
    }
    zip.finish().expect("finish archive").into_inner()
}

pub fn write_ods(doc: &FixtureDocument, family: UriFamily) -> Vec<u8> {
    let mime = match family {
        UriFamily::Odf => "application/vnd.oasis.opendocument.spreadsheet",
        UriFamily::OpenOffice1 => "application/vnd.sun.xml.calc",
    };
    let content = content_xml(doc, family);
    let manifest = manifest_xml(family, mime);
    let settings = settings_xml(family);
    zip_parts(&[
        ("mimetype", mime.as_bytes()),
        ("META-INF/manifest.xml", manifest.as_bytes()),
        ("content.xml", content.as_bytes()),
        ("settings.xml", settings.as_bytes()),
    ])
}

fn at(a1: &str) -> (u32, u32) {
    let (column, row) = crate::address::parse_a1(a1).expect("fixture address");
    (row, column)
}

fn put(grid: &mut Grid, a1: &str, content: CellContent) {
    let (r, c) = at(a1);
    grid.set(r, c, content);
}

fn text(s: &str) -> CellContent {
    CellContent::static_value(StaticValue::string(s))
}

fn usd(v: f64) -> StaticValue {
    StaticValue::currency(v, "USD")
}

fn col(c: u32) -> String {
    crate::address::column_name(c)
}

const CASHFLOW_SHEET: &str = "Cash Flow";

/// The cash-flow sheet as saved: every tracked edit already applied.
fn cashflow_final_grid() -> Grid {
    let mut g = Grid::new();
    put(&mut g, "A1", text("Cash Flow Forecast 2003"));
    put(&mut g, "A5", text("Opening balance"));
    put(&mut g, "B5", CellContent::static_value(usd(100_000.0)));
    put(&mut g, "A8", text("Income"));
    put(&mut g, "A10", text("Expenses"));
    let months = [
        "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
    ];
    for (i, m) in months.iter().enumerate() {
        put(&mut g, &format!("{}10", col(1 + i as u32)), text(m));
    }
    put(&mut g, "N10", text("Total"));
    let labels = [
        "Salaries",
        "Rent",
        "Utilities",
        "Supplies",
        "Insurance",
        "Marketing",
    ];
    for (i, label) in labels.iter().enumerate() {
        put(&mut g, &format!("A{}", 11 + i), text(label));
    }
    put(&mut g, "A17", text("Travel"));
    put(&mut g, "A18", text("Total expenses"));
    put(&mut g, "A20", text("Taxes"));
    put(&mut g, "A22", text("Net cash flow"));
    for c in 1..=12u32 {
        let letter = col(c);
        let income = 20_000.0 + 500.0 * f64::from(c);
        put(
            &mut g,
            &format!("{letter}8"),
            CellContent::static_value(usd(income)),
        );
        for (i, base) in [9_000.0, 2_500.0, 400.0, 150.0, 300.0, 700.0]
            .iter()
            .enumerate()
        {
            put(
                &mut g,
                &format!("{letter}{}", 11 + i),
                CellContent::static_value(usd(*base)),
            );
        }
        put(
            &mut g,
            &format!("{letter}20"),
            CellContent::static_value(usd(1_200.0)),
        );
    }
    for r in [8u32, 11, 12, 13, 14, 15, 16, 20] {
        put(
            &mut g,
            &format!("N{r}"),
            CellContent::formula(format!("=SUM(B{r}:M{r})"), None),
        );
    }
    put(
        &mut g,
        "N17",
        CellContent::formula("=SUM(B17:M17)", Some(CachedResult::Value(usd(3_600.0)))),
    );
    for c in 1..=13u32 {
        let l = col(c);
        put(
            &mut g,
            &format!("{l}18"),
            CellContent::formula(format!("=SUM({l}11:{l}17)"), None),
        );
    }
    let cached_net = [(10u32, 5_150.0), (11, 7_650.0), (12, -139_850.0)];
    for c in 1..=9u32 {
        let l = col(c);
        put(
            &mut g,
            &format!("{l}22"),
            CellContent::formula(format!("={l}8-{l}18-{l}20"), None),
        );
    }
    for (c, v) in cached_net {
        let l = col(c);
        put(
            &mut g,
            &format!("{l}22"),
            CellContent::formula(
                format!("={l}8-{l}18-{l}20"),
                Some(CachedResult::Value(usd(v))),
            ),
        );
    }
    put(&mut g, "N22", CellContent::formula("=N8-N18-N20", None));
    g
}

fn cashflow_time(h: u32, m: u32, s: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2003, 3, 28)
        .and_then(|d| d.and_hms_opt(h, m, s))
        .expect("valid time")
}

fn zero_float() -> Option<CachedResult> {
    Some(CachedResult::Value(StaticValue::float(0.0)))
}

/// The 23 records of the cash-flow example, in listing order.
fn cashflow_changes() -> Vec<ChangeRecord> {
    let mut out = Vec::new();
    let mut push =
        |kind: ChangeKind, target: ChangeTarget, time: NaiveDateTime, before: CellContent| {
            out.push(ChangeRecord {
                id: format!("ct{}", out.len() + 1),
                kind,
                target,
                author: "Neil Smith".into(),
                timestamp: time,
                state: AcceptanceState::Pending,
                before,
                after: CellContent::Empty,
                sequence: out.len(),
                captured_entries: 0,
            });
        };
    let cell = |a1: &str| {
        ChangeTarget::Cell(CellAddress::parse_a1(CASHFLOW_SHEET, a1).expect("fixture address"))
    };
    let content = ChangeKind::CellContent;
    for a in ["K22", "L22", "M22"] {
        push(
            content,
            cell(a),
            cashflow_time(21, 51, 18),
            CellContent::Empty,
        );
    }
    push(
        content,
        cell("N22"),
        cashflow_time(21, 51, 35),
        CellContent::formula("=SUM(B22:M22)", zero_float()),
    );
    push(
        ChangeKind::RowInsertion,
        ChangeTarget::Span(StructuralSpan {
            sheet: CASHFLOW_SHEET.into(),
            position: 16,
            count: 1,
        }),
        cashflow_time(21, 52, 3),
        CellContent::Empty,
    );
    push(
        content,
        cell("A17"),
        cashflow_time(21, 52, 7),
        CellContent::Empty,
    );
    push(
        content,
        cell("N17"),
        cashflow_time(21, 52, 30),
        CellContent::Empty,
    );
    for c in 2..=14u32 {
        let l = col(c - 1);
        let time = if l == "B" {
            cashflow_time(21, 56, 57)
        } else {
            cashflow_time(21, 57, 3)
        };
        push(
            content,
            cell(&format!("{l}18")),
            time,
            CellContent::formula(format!("=SUM({l}11:{l}16)"), zero_float()),
        );
        if l == "E" || l == "F" {
            push(
                content,
                cell(&format!("{l}18")),
                cashflow_time(21, 50, 46),
                CellContent::Empty,
            );
        }
    }
    push(
        content,
        cell("B5"),
        cashflow_time(22, 0, 44),
        CellContent::Empty,
    );
    out
}

/// The cash-flow worked example: 22 content changes and one row insertion
/// by a single author on 2003-03-28.
pub fn cashflow_document() -> FixtureDocument {
    FixtureDocument {
        sheets: vec![SheetGrid {
            name: CASHFLOW_SHEET.into(),
            protected: false,
            grid: cashflow_final_grid(),
        }],
        changes: Some(cashflow_changes()),
        opaque: Vec::new(),
    }
}

pub fn cashflow_ods() -> Vec<u8> {
    write_ods(&cashflow_document(), UriFamily::Odf)
}

/// Same document spelled with the OpenOffice 1.0 namespace URIs.
pub fn cashflow_sxc() -> Vec<u8> {
    write_ods(&cashflow_document(), UriFamily::OpenOffice1)
}

/// A plain sheet with no change history.
pub fn no_history_ods() -> Vec<u8> {
    let mut grid = Grid::new();
    put(&mut grid, "A1", text("Item"));
    put(&mut grid, "B1", text("Amount"));
    put(&mut grid, "A2", text("Widgets"));
    put(
        &mut grid,
        "B2",
        CellContent::static_value(StaticValue::float(12.0)),
    );
    put(
        &mut grid,
        "B3",
        CellContent::formula("=B2*2", Some(CachedResult::Value(StaticValue::float(24.0)))),
    );
    let doc = FixtureDocument {
        sheets: vec![SheetGrid {
            name: "Sheet1".into(),
            protected: false,
            grid,
        }],
        changes: None,
        opaque: Vec::new(),
    };
    write_ods(&doc, UriFamily::Odf)
}

/// One sheet whose D4 holds `=1+2+3`.
pub fn constant_equation_ods() -> Vec<u8> {
    let mut grid = Grid::new();
    put(&mut grid, "A4", text("Total"));
    put(
        &mut grid,
        "D4",
        CellContent::formula("=1+2+3", Some(CachedResult::Value(StaticValue::float(6.0)))),
    );
    let doc = FixtureDocument {
        sheets: vec![SheetGrid {
            name: "Sheet1".into(),
            protected: false,
            grid,
        }],
        changes: Some(Vec::new()),
        opaque: Vec::new(),
    };
    write_ods(&doc, UriFamily::Odf)
}

/// A random change history together with every intermediate state, built
/// forward from a known base.
#[derive(Debug, Clone)]
pub struct EditScript {
    pub base: Vec<SheetGrid>,
    /// `states[k]` is the workbook after the first `k + 1` records.
    pub states: Vec<Vec<SheetGrid>>,
    pub document: FixtureDocument,
}

pub struct ScriptOptions {
    pub steps: usize,
    pub authors: Vec<String>,
    pub start: NaiveDateTime,
    /// Inclusive bounds for the gap between consecutive records, in seconds.
    pub gap_seconds: (i64, i64),
    pub structural: bool,
}

impl Default for ScriptOptions {
    fn default() -> Self {
        ScriptOptions {
            steps: 40,
            authors: vec!["Jane Doe".into(), "John Doe".into(), "Mary Major".into()],
            start: NaiveDate::from_ymd_opt(2003, 3, 28)
                .and_then(|d| d.and_hms_opt(9, 0, 0))
                .expect("valid"),
            gap_seconds: (0, 120),
            structural: true,
        }
    }
}

const LINE_LIMIT: usize = 120;

// Bookkeeping for one axis of one sheet, in the current layout.
#[derive(Clone)]
struct AxisState {
    /// Lines that ever held content, were touched by a record, or were inserted.
    dirty: Vec<bool>,
    /// Blocks claimed by earlier structural records; new ones keep clear of them.
    claimed: Vec<(u32, u32)>,
}

impl AxisState {
    fn new() -> Self {
        AxisState {
            dirty: vec![false; LINE_LIMIT],
            claimed: Vec::new(),
        }
    }

    fn clear_of_claims(&self, q: u32, m: u32) -> bool {
        self.claimed.iter().all(|&(p, n)| q + m < p || q > p + n)
    }

    fn insert(&mut self, q: u32, m: u32) {
        let q = q as usize;
        for _ in 0..m {
            self.dirty.insert(q, true);
        }
        self.dirty.truncate(LINE_LIMIT);
        for c in &mut self.claimed {
            if c.0 > q as u32 {
                c.0 += m;
            }
        }
        self.claimed.push((q as u32, m));
    }

    fn remove(&mut self, q: u32, m: u32) {
        self.dirty.drain(q as usize..(q + m) as usize);
        self.dirty.resize(LINE_LIMIT, false);
        for c in &mut self.claimed {
            if c.0 > q + m {
                c.0 -= m;
            }
        }
        self.claimed.push((q, 0));
    }

    /// A run of `m` never-used lines below `limit`.
    fn pristine_run(&self, rng: &mut StdRng, m: u32, limit: u32) -> Option<u32> {
        let candidates: Vec<u32> = (0..limit.saturating_sub(m))
            .filter(|&q| (q..q + m).all(|i| !self.dirty[i as usize]) && self.clear_of_claims(q, m))
            .collect();
        candidates.choose(rng).copied()
    }
}

#[derive(Clone, Copy)]
enum NativeOp {
    Cell {
        sheet: usize,
        row: u32,
        column: u32,
    },
    Insert {
        sheet: usize,
        axis: Axis,
        at: u32,
        count: u32,
    },
    Delete {
        sheet: usize,
        axis: Axis,
        at: u32,
        count: u32,
    },
}

fn random_content(rng: &mut StdRng, row: u32, column: u32) -> CellContent {
    match rng.random_range(0..10) {
        0..=3 => {
            CellContent::static_value(StaticValue::float(f64::from(rng.random_range(0..2000u32))))
        }
        4 => CellContent::static_value(usd(f64::from(rng.random_range(1..500u32)) * 10.0)),
        5 | 6 => {
            let words = ["Travel", "Rent", "Q1", "total", "n/a", "Widgets"];
            text(words.choose(rng).expect("non-empty"))
        }
        _ => {
            let r = rng.random_range(0..row.max(1) + 3) + 1;
            let c = col(rng.random_range(0..column.max(1) + 2));
            let source = match rng.random_range(0..4) {
                0 => format!("=SUM({c}1:{c}{r})"),
                1 => format!("={c}{r}*2"),
                2 => format!("={c}{r}+A1"),
                _ => format!("=1+{r}"),
            };
            let cached = rng.random_bool(0.6).then(|| {
                CachedResult::Value(StaticValue::float(f64::from(rng.random_range(0..100u32))))
            });
            CellContent::formula(source, cached)
        }
    }
}

fn shift_forward(x: u32, later: &NativeOp, sheet: usize, axis: Axis) -> u32 {
    match *later {
        NativeOp::Insert {
            sheet: s,
            axis: a,
            at,
            count,
        } if s == sheet && a == axis && x >= at => x + count,
        NativeOp::Delete {
            sheet: s,
            axis: a,
            at,
            count,
        } if s == sheet && a == axis => {
            assert!(
                !(at..at + count).contains(&x) || count == 0,
                "deleted lines are never referenced"
            );
            if x >= at + count {
                x - count
            } else {
                x
            }
        }
        _ => x,
    }
}

/// Generates a random history. Deletions only remove lines that never held
/// content, so the base can be rebuilt exactly.
pub fn random_edit_script(seed: u64, options: &ScriptOptions) -> EditScript {
    let mut rng = StdRng::seed_from_u64(seed);
    let sheet_count = rng.random_range(1..=2usize);
    let mut sheets: Vec<SheetGrid> = (0..sheet_count)
        .map(|i| SheetGrid {
            name: format!("Sheet{}", i + 1),
            protected: false,
            grid: Grid::new(),
        })
        .collect();
    let mut rows = vec![AxisState::new(); sheet_count];
    let mut cols = vec![AxisState::new(); sheet_count];
    for (s, sheet) in sheets.iter_mut().enumerate() {
        for _ in 0..rng.random_range(3..15) {
            let (r, c) = (rng.random_range(0..8u32), rng.random_range(0..5u32));
            sheet.grid.set(r, c, random_content(&mut rng, r, c));
            rows[s].dirty[r as usize] = true;
            cols[s].dirty[c as usize] = true;
        }
    }
    let base = sheets.clone();
    let row_limit = 40u32;
    let col_limit = 16u32;

    let mut ops: Vec<NativeOp> = Vec::new();
    let mut befores = Vec::new();
    let mut states = Vec::new();
    while ops.len() < options.steps {
        let s = rng.random_range(0..sheet_count);
        let roll = if options.structural {
            rng.random_range(0..100)
        } else {
            0
        };
        let op = match roll {
            0..=74 => {
                let (rows_used, cols_used) = sheets[s].grid.extent();
                let row = rng.random_range(0..(rows_used + 2).min(row_limit));
                let column = rng.random_range(0..(cols_used + 2).min(col_limit));
                let before = sheets[s].grid.get(row, column).clone();
                let after = if !before.is_empty() && rng.random_bool(0.2) {
                    CellContent::Empty
                } else {
                    random_content(&mut rng, row, column)
                };
                if after == before {
                    continue;
                }
                sheets[s].grid.set(row, column, after);
                rows[s].dirty[row as usize] = true;
                cols[s].dirty[column as usize] = true;
                befores.push(before);
                NativeOp::Cell {
                    sheet: s,
                    row,
                    column,
                }
            }
            75..=87 => {
                let axis = if roll < 83 { Axis::Row } else { Axis::Column };
                let (state, limit) = match axis {
                    Axis::Row => (&mut rows[s], row_limit),
                    Axis::Column => (&mut cols[s], col_limit),
                };
                let count = rng.random_range(1..=2u32);
                let at = rng.random_range(0..limit);
                if !state.clear_of_claims(at, count) {
                    continue;
                }
                state.insert(at, count);
                sheets[s].grid.insert(axis, at, count);
                befores.push(CellContent::Empty);
                NativeOp::Insert {
                    sheet: s,
                    axis,
                    at,
                    count,
                }
            }
            _ => {
                let axis = if roll < 94 { Axis::Row } else { Axis::Column };
                let (state, limit) = match axis {
                    Axis::Row => (&mut rows[s], row_limit),
                    Axis::Column => (&mut cols[s], col_limit),
                };
                let count = rng.random_range(1..=2u32);
                let Some(at) = state.pristine_run(&mut rng, count, limit) else {
                    continue;
                };
                state.remove(at, count);
                sheets[s].grid.remove(axis, at, count);
                befores.push(CellContent::Empty);
                NativeOp::Delete {
                    sheet: s,
                    axis,
                    at,
                    count,
                }
            }
        };
        ops.push(op);
        states.push(sheets.clone());
    }

    let mut time = options.start;
    let mut changes = Vec::with_capacity(ops.len());
    for (k, (op, before)) in ops.iter().zip(befores).enumerate() {
        let later = &ops[k + 1..];
        let forward = |x: u32, sheet: usize, axis: Axis| {
            later
                .iter()
                .fold(x, |x, l| shift_forward(x, l, sheet, axis))
        };
        let (kind, target) = match *op {
            NativeOp::Cell { sheet, row, column } => (
                ChangeKind::CellContent,
                ChangeTarget::Cell(CellAddress::new(
                    &sheets[sheet].name,
                    forward(column, sheet, Axis::Column),
                    forward(row, sheet, Axis::Row),
                )),
            ),
            NativeOp::Insert {
                sheet,
                axis,
                at,
                count,
            }
            | NativeOp::Delete {
                sheet,
                axis,
                at,
                count,
            } => {
                let insert = matches!(op, NativeOp::Insert { .. });
                let kind = match (axis, insert) {
                    (Axis::Row, true) => ChangeKind::RowInsertion,
                    (Axis::Row, false) => ChangeKind::RowDeletion,
                    (Axis::Column, true) => ChangeKind::ColumnInsertion,
                    (Axis::Column, false) => ChangeKind::ColumnDeletion,
                };
                (
                    kind,
                    ChangeTarget::Span(StructuralSpan {
                        sheet: sheets[sheet].name.clone(),
                        position: forward(at, sheet, axis),
                        count,
                    }),
                )
            }
        };
        changes.push(ChangeRecord {
            id: format!("ct{}", k + 1),
            kind,
            target,
            author: options
                .authors
                .choose(&mut rng)
                .cloned()
                .unwrap_or_default(),
            timestamp: time,
            state: if rng.random_bool(0.2) {
                AcceptanceState::Accepted
            } else {
                AcceptanceState::Pending
            },
            before,
            after: CellContent::Empty,
            sequence: k,
            captured_entries: 0,
        });
        time += Duration::seconds(rng.random_range(options.gap_seconds.0..=options.gap_seconds.1));
    }

    EditScript {
        base,
        states,
        document: FixtureDocument {
            sheets,
            changes: Some(changes),
            opaque: Vec::new(),
        },
    }
}

/// Authors and dates for filter tests: several Does, a few others, and a
/// period around the 2001/2002 new year.
pub fn multi_author_options(steps: usize) -> ScriptOptions {
    ScriptOptions {
        steps,
        authors: [
            "Jane Doe",
            "John Doe",
            "J. Doe",
            "john doe",
            "Mary Major",
            "Richard Roe",
            "Jo Dow",
        ]
        .iter()
        .map(|s| (*s).to_owned())
        .collect(),
        start: NaiveDate::from_ymd_opt(2001, 12, 18)
            .and_then(|d| d.and_hms_opt(8, 30, 0))
            .expect("valid"),
        gap_seconds: (0, 3 * 3600),
        structural: true,
    }
}

pub fn multi_author_ods(seed: u64) -> Vec<u8> {
    write_ods(
        &random_edit_script(seed, &multi_author_options(240)).document,
        UriFamily::Odf,
    )
}
