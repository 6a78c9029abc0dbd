//! Maps the spreadsheet XML vocabulary onto the workbook model.

use std::collections::HashMap;

use chrono::{NaiveDate, NaiveDateTime};

use crate::address::CellAddress;
use crate::container::{ContainerManifest, XmlElement, XmlTree};
use crate::formula::normalize_stored_formula;
use crate::grid::{Grid, SheetGrid};
use crate::model::{
    AcceptanceState, ChangeKind, ChangeRecord, ChangeTarget, ModelError, OpaqueChange,
    RecordingStatus, StructuralSpan, Workbook,
};
use crate::value::{CachedResult, CellContent, StaticValue, ValueType};

const ERROR_TOKENS: &[&str] = &[
    "#DIV/0!", "#VALUE!", "#REF!", "#NAME?", "#NUM!", "#N/A", "#NULL!",
];

fn is_error_token(text: &str) -> bool {
    ERROR_TOKENS.contains(&text)
        || text
            .strip_prefix("Err:")
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Builds a workbook from the content part.
pub fn build_workbook(
    content: &XmlTree,
    manifest: ContainerManifest,
) -> Result<Workbook, ModelError> {
    let body = content
        .root
        .child("body")
        .ok_or(ModelError::MissingElement("body"))?;
    let container = body.child("spreadsheet").unwrap_or(body);
    let protected_styles = protected_styles(&content.root);

    let mut sheets = Vec::new();
    let mut declared_cells = 0u64;
    for table in container.children_named("table") {
        let (sheet, count) = read_table(table, &protected_styles);
        declared_cells += count;
        sheets.push(sheet);
    }

    let tracked = container.child("tracked-changes");
    let recording = if tracked.is_some() {
        RecordingStatus::Enabled
    } else {
        RecordingStatus::NoHistoryFound
    };

    let mut changes = Vec::new();
    let mut opaque = Vec::new();
    if let Some(tracked) = tracked {
        let names: Vec<&str> = sheets.iter().map(|s: &SheetGrid| s.name.as_str()).collect();
        for (sequence, el) in tracked.elements().enumerate() {
            match read_change(el, sequence, &names)? {
                Parsed::Record(r) => changes.push(r),
                Parsed::Opaque(o) => opaque.push(o),
            }
        }
    }

    let mut wb = Workbook::assemble(sheets, changes, recording, manifest);
    wb.opaque_changes = opaque;
    wb.declared_cells = declared_cells;
    Ok(wb)
}

// Automatic cell styles whose protect flag includes "protected".
fn protected_styles(root: &XmlElement) -> HashMap<String, bool> {
    let mut out = HashMap::new();
    for styles in root.children_named("automatic-styles") {
        for style in styles.children_named("style") {
            let Some(name) = style.attr("name") else {
                continue;
            };
            let flag = style
                .child("table-cell-properties")
                .or_else(|| style.child("properties"))
                .and_then(|p| p.attr("cell-protect"))
                .map(|v| v.contains("protected"));
            if let Some(flag) = flag {
                out.insert(name.to_owned(), flag);
            }
        }
    }
    out
}

fn repeat(el: &XmlElement, attr: &str) -> u32 {
    el.attr(attr)
        .and_then(|v| v.parse::<u32>().ok())
        .filter(|n| *n > 0)
        .unwrap_or(1)
}

fn collect_rows<'a>(el: &'a XmlElement, out: &mut Vec<&'a XmlElement>) {
    for child in el.elements() {
        match child.name.as_str() {
            "table-row" => out.push(child),
            "table-rows" | "table-header-rows" | "table-row-group" => collect_rows(child, out),
            _ => {}
        }
    }
}

fn read_table(table: &XmlElement, protected_styles: &HashMap<String, bool>) -> (SheetGrid, u64) {
    let name = table.attr("name").unwrap_or_default().to_owned();
    let protected = table.attr("protected") == Some("true");
    let mut grid = Grid::new();
    let mut rows = Vec::new();
    collect_rows(table, &mut rows);

    let mut declared = 0u64;
    let mut row = 0u32;
    for row_el in rows {
        let row_repeat = repeat(row_el, "number-rows-repeated");
        let mut column = 0u32;
        let mut cells_in_row = 0u64;
        for cell_el in row_el.elements() {
            if cell_el.name != "table-cell" && cell_el.name != "covered-table-cell" {
                continue;
            }
            let col_repeat = repeat(cell_el, "number-columns-repeated");
            cells_in_row += u64::from(col_repeat);
            let host = CellAddress::new(&name, column, row);
            let content = read_cell(cell_el, &host);
            let locked = cell_el
                .attr("style-name")
                .and_then(|s| protected_styles.get(s))
                .copied()
                .unwrap_or(false);
            if !content.is_empty() || locked {
                for dr in 0..row_repeat {
                    for dc in 0..col_repeat {
                        let (r, c) = (row.saturating_add(dr), column.saturating_add(dc));
                        grid.set(r, c, content.clone());
                        if locked {
                            grid.set_protected(r, c, true);
                        }
                    }
                }
            }
            column = column.saturating_add(col_repeat);
        }
        declared += cells_in_row * u64::from(row_repeat);
        row = row.saturating_add(row_repeat);
    }
    (
        SheetGrid {
            name,
            protected,
            grid,
        },
        declared,
    )
}

fn paragraphs(el: &XmlElement) -> Option<String> {
    let paras: Vec<String> = el.children_named("p").map(XmlElement::text).collect();
    (!paras.is_empty()).then(|| paras.join("\n"))
}

fn number(el: &XmlElement, attr: &str) -> Option<f64> {
    el.attr(attr).and_then(|v| v.trim().parse().ok())
}

// The typed value carried by a cell element's attributes, if any.
fn typed_value(el: &XmlElement) -> Option<StaticValue> {
    let text = paragraphs(el);
    let Some(raw_type) = el.attr("value-type") else {
        return text.map(StaticValue::string);
    };
    let value_type = ValueType::from_odf(raw_type)?;
    Some(match value_type {
        ValueType::Float => StaticValue::float(number(el, "value")?),
        ValueType::Percentage => StaticValue::percentage(number(el, "value")?),
        ValueType::Currency => StaticValue::currency(
            number(el, "value")?,
            el.attr("currency").unwrap_or_default(),
        ),
        ValueType::Boolean => StaticValue::boolean(matches!(
            el.attr("boolean-value").or(el.attr("value")),
            Some("true" | "1")
        )),
        ValueType::Date => StaticValue::date(
            el.attr("date-value")
                .or(el.attr("time-value"))
                .map(str::to_owned)
                .or(text)?,
        ),
        ValueType::String => StaticValue::string(
            el.attr("string-value")
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .or(text)
                .unwrap_or_default(),
        ),
    })
}

/// Content of a `table-cell` or `change-track-table-cell` element.
pub fn read_cell(el: &XmlElement, host: &CellAddress) -> CellContent {
    if let Some(raw) = el.attr("formula") {
        let source = normalize_stored_formula(raw, host);
        let cached = match typed_value(el) {
            Some(v) if v.value_type == ValueType::String && is_error_token(&v.lexical) => {
                Some(CachedResult::Error { token: v.lexical })
            }
            Some(v) if el.attr("value-type").is_some() => Some(CachedResult::Value(v)),
            _ => None,
        };
        return CellContent::formula(source, cached);
    }
    match typed_value(el) {
        Some(v) if v.value_type == ValueType::String && v.lexical.is_empty() => CellContent::Empty,
        Some(v) => CellContent::static_value(v),
        None => CellContent::Empty,
    }
}

enum Parsed {
    Record(ChangeRecord),
    Opaque(OpaqueChange),
}

/// Accepts `2003-03-28T21:51:18`, with optional fraction or zone, or a bare date.
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Some(head) = text.get(..19) {
        if let Ok(t) = NaiveDateTime::parse_from_str(head, "%Y-%m-%dT%H:%M:%S") {
            return Some(t);
        }
    }
    NaiveDate::parse_from_str(text.get(..10)?, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn change_info(el: &XmlElement, id: &str) -> Result<(String, Option<NaiveDateTime>), ModelError> {
    let Some(info) = el.child("change-info") else {
        return Ok((String::new(), None));
    };
    let author = info
        .child("creator")
        .map(XmlElement::text)
        .or_else(|| info.attr("chg-author").map(str::to_owned))
        .unwrap_or_default();
    let date = info
        .child("date")
        .map(XmlElement::text)
        .or_else(|| info.attr("chg-date-time").map(str::to_owned));
    let timestamp = match date {
        None => None,
        Some(d) => Some(parse_timestamp(&d).ok_or_else(|| ModelError::BadTimestamp {
            id: id.to_owned(),
            value: d,
        })?),
    };
    Ok((author.trim().to_owned(), timestamp))
}

fn sheet_name(names: &[&str], index: Option<&str>, id: &str) -> Result<String, ModelError> {
    let bad = |detail: String| ModelError::BadCellAddress {
        id: id.to_owned(),
        detail,
    };
    let raw = index.unwrap_or("0");
    let i: usize = raw
        .parse()
        .map_err(|_| bad(format!("sheet index {raw:?}")))?;
    names
        .get(i)
        .map(|s| (*s).to_owned())
        .ok_or_else(|| bad(format!("no sheet at index {i}")))
}

fn read_change(el: &XmlElement, sequence: usize, sheets: &[&str]) -> Result<Parsed, ModelError> {
    let id = el
        .attr("id")
        .map(str::to_owned)
        .unwrap_or_else(|| format!("ct{}", sequence + 1));
    let (author, timestamp) = change_info(el, &id)?;
    let state = match el.attr("acceptance-state") {
        Some("accepted") => AcceptanceState::Accepted,
        Some("rejected") => AcceptanceState::Rejected,
        _ => AcceptanceState::Pending,
    };
    let opaque = |element: &str| {
        Ok(Parsed::Opaque(OpaqueChange {
            id: id.clone(),
            element: element.to_owned(),
            author: author.clone(),
            timestamp,
            sequence,
        }))
    };
    let Some(timestamp_value) = timestamp else {
        return opaque(&el.name);
    };
    let record = |kind, target, before, captured_entries| {
        Ok(Parsed::Record(ChangeRecord {
            id: id.clone(),
            kind,
            target,
            author: author.clone(),
            timestamp: timestamp_value,
            state,
            before,
            after: CellContent::Empty,
            sequence,
            captured_entries,
        }))
    };

    match el.name.as_str() {
        "cell-content-change" => {
            let addr = el
                .child("cell-address")
                .ok_or_else(|| ModelError::BadCellAddress {
                    id: id.clone(),
                    detail: "missing cell-address".into(),
                })?;
            let coord = |name: &str| -> Result<u32, ModelError> {
                addr.attr(name).and_then(|v| v.parse().ok()).ok_or_else(|| {
                    ModelError::BadCellAddress {
                        id: id.clone(),
                        detail: format!("{name} attribute"),
                    }
                })
            };
            let sheet = sheet_name(sheets, addr.attr("table"), &id)?;
            let address = CellAddress::new(sheet, coord("column")?, coord("row")?);
            let before = el
                .child("previous")
                .and_then(|p| p.child("change-track-table-cell"))
                .map(|c| read_cell(c, &address))
                .unwrap_or_default();
            record(
                ChangeKind::CellContent,
                ChangeTarget::Cell(address),
                before,
                0,
            )
        }
        "insertion" | "deletion" => {
            let insertion = el.name == "insertion";
            let kind = match (el.attr("type"), insertion) {
                (Some("row"), true) => ChangeKind::RowInsertion,
                (Some("row"), false) => ChangeKind::RowDeletion,
                (Some("column"), true) => ChangeKind::ColumnInsertion,
                (Some("column"), false) => ChangeKind::ColumnDeletion,
                _ => return opaque(&el.name),
            };
            let position = el
                .attr("position")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ModelError::BadCellAddress {
                    id: id.clone(),
                    detail: "position attribute".into(),
                })?;
            let count = repeat(el, "count");
            let sheet = sheet_name(sheets, el.attr("table"), &id)?;
            let captured = el
                .child("deletions")
                .map(|d| d.elements().count())
                .unwrap_or(0);
            record(
                kind,
                ChangeTarget::Span(StructuralSpan {
                    sheet,
                    position,
                    count,
                }),
                CellContent::Empty,
                captured,
            )
        }
        other => opaque(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: &str = r#"xmlns:office="urn:oasis:names:tc:opendocument:xmlns:office:1.0" xmlns:table="urn:oasis:names:tc:opendocument:xmlns:table:1.0" xmlns:text="urn:oasis:names:tc:opendocument:xmlns:text:1.0" xmlns:style="urn:oasis:names:tc:opendocument:xmlns:style:1.0" xmlns:dc="http://purl.org/dc/elements/1.1/""#;

    fn manifest() -> ContainerManifest {
        ContainerManifest {
            part_names: vec!["content.xml".into()],
            content_part: "content.xml".into(),
            settings_part: None,
            source_digest: String::new(),
        }
    }

    fn build(body: &str) -> Workbook {
        let xml = format!(
            r#"<office:document-content {NS}><office:automatic-styles><style:style style:name="ce1" style:family="table-cell"><style:table-cell-properties style:cell-protect="protected"/></style:style></office:automatic-styles><office:body><office:spreadsheet>{body}</office:spreadsheet></office:body></office:document-content>"#
        );
        build_workbook(&XmlTree::parse(&xml).unwrap(), manifest()).unwrap()
    }

    #[test]
    fn repeats_expand_and_conserve_count() {
        let wb = build(
            r#"<table:table table:name="S" table:protected="true">
                <table:table-row table:number-rows-repeated="3">
                  <table:table-cell table:number-columns-repeated="2" office:value-type="float" office:value="4"/>
                  <table:table-cell table:number-columns-repeated="5"/>
                </table:table-row>
                <table:table-row><table:table-cell table:style-name="ce1" office:value-type="string"><text:p>x</text:p></table:table-cell></table:table-row>
              </table:table>"#,
        );
        let sheet = &wb.sheets[0];
        assert!(sheet.protected);
        assert_eq!(wb.declared_cells, 3 * 7 + 1);
        assert_eq!(sheet.grid.len(), 7);
        assert_eq!(
            sheet.grid.get(2, 1),
            &CellContent::static_value(StaticValue::float(4.0))
        );
        assert!(sheet.grid.is_protected(3, 0));
        assert!(!sheet.grid.is_protected(0, 0));
        assert_eq!(wb.recording, RecordingStatus::NoHistoryFound);
        assert!(wb.changes.is_empty());
    }

    #[test]
    fn formula_cells_keep_cached_results() {
        let wb = build(
            r#"<table:table table:name="S"><table:table-row>
                <table:table-cell table:formula="of:=[.K8]-[.K18]-[.K20]" office:value-type="currency" office:currency="USD" office:value="5150"/>
                <table:table-cell table:formula="of:=1/0" office:value-type="string" office:string-value=""><text:p>#DIV/0!</text:p></table:table-cell>
                <table:table-cell table:formula="of:=SUM([.B1:.B3])"/>
              </table:table-row></table:table>"#,
        );
        let g = &wb.sheets[0].grid;
        assert_eq!(g.get(0, 0).render(), "=K8-K18-K20 {$5,150 (currency)}");
        assert_eq!(g.get(0, 1).render(), "=1/0 {#DIV/0! (error)}");
        assert_eq!(g.get(0, 2).render(), "=SUM(B1:B3)");
    }

    #[test]
    fn tracked_changes_are_parsed() {
        let wb = build(
            r#"<table:tracked-changes>
                <table:cell-content-change table:id="ct2">
                  <table:cell-address table:column="10" table:row="21" table:table="0"/>
                  <office:change-info><dc:creator>Neil Smith</dc:creator><dc:date>2003-03-28T21:51:18</dc:date></office:change-info>
                  <table:previous><table:change-track-table-cell/></table:previous>
                </table:cell-content-change>
                <table:insertion table:id="ct1" table:type="row" table:position="16" table:table="0" table:acceptance-state="accepted">
                  <office:change-info><dc:creator>Neil Smith</dc:creator><dc:date>2003-03-28T21:52:03</dc:date></office:change-info>
                </table:insertion>
                <table:movement table:id="ct3">
                  <office:change-info><dc:creator>Neil Smith</dc:creator><dc:date>2003-03-28T21:53:00</dc:date></office:change-info>
                </table:movement>
              </table:tracked-changes>
              <table:table table:name="Cash Flow"><table:table-row table:number-rows-repeated="21"/>
                <table:table-row><table:table-cell table:number-columns-repeated="10"/>
                  <table:table-cell table:formula="of:=[.K8]-[.K18]-[.K20]" office:value-type="currency" office:currency="USD" office:value="5150"/>
                </table:table-row></table:table>"#,
        );
        assert_eq!(wb.recording, RecordingStatus::Enabled);
        assert_eq!(wb.changes.len(), 2);
        let k22 = &wb.changes[0];
        assert_eq!(k22.author, "Neil Smith");
        assert_eq!(k22.timestamp.to_string(), "2003-03-28 21:51:18");
        assert_eq!(k22.state, AcceptanceState::Pending);
        assert_eq!(k22.location_label(), "K22");
        assert_eq!(
            crate::model::render_change_detail(k22),
            "<empty> -> =K8-K18-K20 {$5,150 (currency)}"
        );
        assert_eq!(wb.changes[1].kind, ChangeKind::RowInsertion);
        assert_eq!(wb.changes[1].state, AcceptanceState::Accepted);
        assert_eq!(wb.opaque_changes.len(), 1);
        assert_eq!(wb.opaque_changes[0].element, "movement");
    }

    #[test]
    fn bad_sheet_index_is_an_error() {
        let xml = format!(
            r#"<office:document-content {NS}><office:body><office:spreadsheet><table:tracked-changes>
                <table:cell-content-change table:id="ct1"><table:cell-address table:column="0" table:row="0" table:table="4"/>
                <office:change-info><dc:creator>a</dc:creator><dc:date>2003-03-28T00:00:00</dc:date></office:change-info></table:cell-content-change>
              </table:tracked-changes><table:table table:name="S"/></office:spreadsheet></office:body></office:document-content>"#
        );
        let err = build_workbook(&XmlTree::parse(&xml).unwrap(), manifest()).unwrap_err();
        assert!(matches!(err, ModelError::BadCellAddress { .. }));
    }

    #[test]
    fn timestamps() {
        assert_eq!(
            parse_timestamp("2003-03-28T21:51:18.120000000")
                .unwrap()
                .to_string(),
            "2003-03-28 21:51:18"
        );
        assert_eq!(
            parse_timestamp("2003-03-28").unwrap().to_string(),
            "2003-03-28 00:00:00"
        );
        assert!(parse_timestamp("yesterday").is_none());
    }
}
