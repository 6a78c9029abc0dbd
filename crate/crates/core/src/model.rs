//! The in-memory workbook: sheets, the tracked-change log and the
//! before/after content of every change.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{column_name, CellAddress};
use crate::container::{open_container, ContainerError, ContainerManifest};
use crate::grid::{Axis, SheetGrid};
use crate::value::CellContent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeKind {
    CellContent,
    RowInsertion,
    RowDeletion,
    ColumnInsertion,
    ColumnDeletion,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 5] = [
        ChangeKind::CellContent,
        ChangeKind::RowInsertion,
        ChangeKind::RowDeletion,
        ChangeKind::ColumnInsertion,
        ChangeKind::ColumnDeletion,
    ];

    /// Label used in the change table's first column.
    pub fn label(self) -> &'static str {
        match self {
            ChangeKind::CellContent => "Cell content",
            ChangeKind::RowInsertion | ChangeKind::ColumnInsertion => "Insertion",
            ChangeKind::RowDeletion | ChangeKind::ColumnDeletion => "Deletion",
        }
    }

    /// Label that keeps rows and columns apart, used in summaries.
    pub fn long_label(self) -> &'static str {
        match self {
            ChangeKind::CellContent => "Cell content",
            ChangeKind::RowInsertion => "Row insertion",
            ChangeKind::RowDeletion => "Row deletion",
            ChangeKind::ColumnInsertion => "Column insertion",
            ChangeKind::ColumnDeletion => "Column deletion",
        }
    }

    /// Short code used by the filter text form.
    pub fn code(self) -> &'static str {
        match self {
            ChangeKind::CellContent => "content",
            ChangeKind::RowInsertion => "row-insert",
            ChangeKind::RowDeletion => "row-delete",
            ChangeKind::ColumnInsertion => "col-insert",
            ChangeKind::ColumnDeletion => "col-delete",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        ChangeKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn axis(self) -> Option<Axis> {
        match self {
            ChangeKind::CellContent => None,
            ChangeKind::RowInsertion | ChangeKind::RowDeletion => Some(Axis::Row),
            ChangeKind::ColumnInsertion | ChangeKind::ColumnDeletion => Some(Axis::Column),
        }
    }

    pub fn is_structural(self) -> bool {
        self != ChangeKind::CellContent
    }

    pub fn is_insertion(self) -> bool {
        matches!(self, ChangeKind::RowInsertion | ChangeKind::ColumnInsertion)
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceState {
    #[default]
    Pending,
    Accepted,
    Rejected,
}

impl AcceptanceState {
    pub fn as_str(self) -> &'static str {
        match self {
            AcceptanceState::Pending => "pending",
            AcceptanceState::Accepted => "accepted",
            AcceptanceState::Rejected => "rejected",
        }
    }
}

/// Rows or columns touched by a structural change. `position` is 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuralSpan {
    pub sheet: String,
    pub position: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeTarget {
    Cell(CellAddress),
    Span(StructuralSpan),
}

impl ChangeTarget {
    pub fn sheet(&self) -> &str {
        match self {
            ChangeTarget::Cell(a) => &a.sheet,
            ChangeTarget::Span(s) => &s.sheet,
        }
    }
}

/// One tracked change: cell X became Y at time T by user U.
///
/// Coordinates refer to the document as saved (the final layout), which is
/// how the host application stores them. The reconstructor maps them back
/// to the layout in force when each change was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub id: String,
    pub kind: ChangeKind,
    pub target: ChangeTarget,
    pub author: String,
    pub timestamp: NaiveDateTime,
    pub state: AcceptanceState,
    pub before: CellContent,
    pub after: CellContent,
    /// Position among change elements in the file; breaks timestamp ties.
    pub sequence: usize,
    /// Number of nested entries a deletion carried (kept, not interpreted).
    #[serde(default)]
    pub captured_entries: usize,
}

impl ChangeRecord {
    pub fn address(&self) -> Option<&CellAddress> {
        match &self.target {
            ChangeTarget::Cell(a) => Some(a),
            ChangeTarget::Span(_) => None,
        }
    }

    pub fn span(&self) -> Option<&StructuralSpan> {
        match &self.target {
            ChangeTarget::Cell(_) => None,
            ChangeTarget::Span(s) => Some(s),
        }
    }

    pub fn sheet(&self) -> &str {
        self.target.sheet()
    }

    /// Total order: timestamp, then document order.
    pub fn order_key(&self) -> (NaiveDateTime, usize) {
        (self.timestamp, self.sequence)
    }

    /// `K22` for cell changes, `17` or `C` for structural ones.
    pub fn location_label(&self) -> String {
        match &self.target {
            ChangeTarget::Cell(a) => a.a1(),
            ChangeTarget::Span(s) => match self.kind.axis() {
                Some(Axis::Column) => column_name(s.position),
                _ => (s.position + 1).to_string(),
            },
        }
    }
}

/// `<before> -> <after>` for content changes, `1 row at row 17` for
/// structural ones.
pub fn render_change_detail(record: &ChangeRecord) -> String {
    match (&record.target, record.kind.axis()) {
        (ChangeTarget::Cell(_), _) => {
            format!("{} -> {}", record.before.render(), record.after.render())
        }
        (ChangeTarget::Span(s), Some(Axis::Column)) => format!(
            "{} {} at column {}",
            s.count,
            if s.count == 1 { "column" } else { "columns" },
            column_name(s.position)
        ),
        (ChangeTarget::Span(s), _) => format!(
            "{} {} at row {}",
            s.count,
            if s.count == 1 { "row" } else { "rows" },
            s.position + 1
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordingStatus {
    Enabled,
    NoHistoryFound,
}

impl RecordingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordingStatus::Enabled => "enabled",
            RecordingStatus::NoHistoryFound => "no-history-found",
        }
    }
}

/// A change element of a kind this tool does not interpret (moves,
/// rejections, sheet insertions). Kept so it can be reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaqueChange {
    pub id: String,
    pub element: String,
    pub author: String,
    pub timestamp: Option<NaiveDateTime>,
    pub sequence: usize,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("document has no {0} element")]
    MissingElement(&'static str),
    #[error("change {id}: bad cell address ({detail})")]
    BadCellAddress { id: String, detail: String },
    #[error("change {id}: cannot parse date {value:?}")]
    BadTimestamp { id: String, value: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Workbook {
    pub sheets: Vec<SheetGrid>,
    /// Sorted by [`ChangeRecord::order_key`].
    pub changes: Vec<ChangeRecord>,
    pub recording: RecordingStatus,
    pub manifest: ContainerManifest,
    pub opaque_changes: Vec<OpaqueChange>,
    /// Cell positions declared by the file after expanding repeat counts.
    pub declared_cells: u64,
}

impl Workbook {
    /// Opens, parses and builds in one step. The file is only read.
    pub fn open(path: impl AsRef<Path>) -> Result<Workbook, ModelError> {
        let container = open_container(path)?;
        Self::from_container(&container)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Workbook, ModelError> {
        let container = crate::container::Container::from_bytes(bytes)?;
        Self::from_container(&container)
    }

    pub fn from_container(container: &crate::container::Container) -> Result<Workbook, ModelError> {
        let content = container.content()?;
        crate::odf::build_workbook(&content, container.manifest().clone())
    }

    /// Sorts `changes` and fills in every content change's after-content.
    pub fn assemble(
        sheets: Vec<SheetGrid>,
        mut changes: Vec<ChangeRecord>,
        recording: RecordingStatus,
        manifest: ContainerManifest,
    ) -> Workbook {
        changes.sort_by_key(ChangeRecord::order_key);
        let mut wb = Workbook {
            sheets,
            changes,
            recording,
            manifest,
            opaque_changes: Vec::new(),
            declared_cells: 0,
        };
        let afters: Vec<CellContent> = resolve_all_after(&wb);
        for (record, after) in wb.changes.iter_mut().zip(afters) {
            record.after = after;
        }
        wb
    }

    pub fn sheet(&self, name: &str) -> Option<&SheetGrid> {
        self.sheets.iter().find(|s| s.name == name)
    }

    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name == name)
    }

    pub fn content_at(&self, address: &CellAddress) -> &CellContent {
        static EMPTY: CellContent = CellContent::Empty;
        self.sheet(&address.sheet)
            .map(|s| s.grid.get(address.row, address.column))
            .unwrap_or(&EMPTY)
    }

    pub fn record(&self, id: &str) -> Option<&ChangeRecord> {
        self.changes.iter().find(|r| r.id == id)
    }
}

/// After-content of a content change: the before-content of the next change
/// at the same address, or the current grid content when none follows.
pub fn resolve_after_content(workbook: &Workbook, record: &ChangeRecord) -> CellContent {
    let Some(address) = record.address() else {
        return CellContent::Empty;
    };
    workbook
        .changes
        .iter()
        .filter(|r| r.order_key() > record.order_key())
        .find(|r| r.address() == Some(address))
        .map(|r| r.before.clone())
        .unwrap_or_else(|| workbook.content_at(address).clone())
}

// Same rule as `resolve_after_content`, in one backward pass.
fn resolve_all_after(wb: &Workbook) -> Vec<CellContent> {
    let mut next_before: HashMap<&CellAddress, &CellContent> = HashMap::new();
    let mut out = vec![CellContent::Empty; wb.changes.len()];
    for (i, record) in wb.changes.iter().enumerate().rev() {
        if let Some(address) = record.address() {
            out[i] = next_before
                .get(address)
                .map(|c| (*c).clone())
                .unwrap_or_else(|| wb.content_at(address).clone());
            next_before.insert(address, &record.before);
        }
    }
    out
}
