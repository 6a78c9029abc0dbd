//! Read-only audit of OpenDocument spreadsheets with tracked changes.

pub mod address;
pub mod analyze;
pub mod container;
pub mod filter;
#[cfg(feature = "fixtures")]
pub mod fixtures;
pub mod formula;
pub mod grid;
pub mod model;
pub mod odf;
pub mod reconstruct;
pub mod report;
pub mod value;

pub use address::CellAddress;
pub use grid::{Axis, Grid, SheetGrid};
pub use model::{
    render_change_detail, resolve_after_content, AcceptanceState, ChangeKind, ChangeRecord,
    ChangeTarget, RecordingStatus, StructuralSpan, Workbook,
};
pub use value::{CachedResult, CellContent, StaticValue, ValueType};
