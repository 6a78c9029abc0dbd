//! Python bindings: `import calcaudit`.

use calcaudit::analyze::{scan, CheckConfig, Finding as CoreFinding};
use calcaudit::filter::{filter_records, match_wildcard as core_match, summarize, FilterSpec};
use calcaudit::formula::{parse_formula, print_canonical, relative_shape as core_shape};
use calcaudit::reconstruct::{export_changes, snapshot_at, Checkpoint};
use calcaudit::report::render_summary;
use calcaudit::{
    render_change_detail, CellAddress, ChangeRecord as CoreRecord, SheetGrid,
    Workbook as CoreWorkbook,
};
use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

#[pyclass(frozen, name = "ChangeRecord")]
struct ChangeRecord {
    #[pyo3(get)]
    id: String,
    #[pyo3(get)]
    kind: String,
    #[pyo3(get)]
    sheet: String,
    /// `K22`, or the row number / column letter for structural changes.
    #[pyo3(get)]
    location: String,
    #[pyo3(get)]
    author: String,
    /// ISO 8601 without zone.
    #[pyo3(get)]
    timestamp: String,
    #[pyo3(get)]
    state: String,
    #[pyo3(get)]
    before: String,
    #[pyo3(get)]
    after: String,
    #[pyo3(get)]
    detail: String,
}

impl ChangeRecord {
    fn from_core(r: &CoreRecord) -> Self {
        ChangeRecord {
            id: r.id.clone(),
            kind: r.kind.code().to_owned(),
            sheet: r.sheet().to_owned(),
            location: r.location_label(),
            author: r.author.clone(),
            timestamp: r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            state: r.state.as_str().to_owned(),
            before: r.before.plain_text(),
            after: r.after.plain_text(),
            detail: render_change_detail(r),
        }
    }
}

#[pymethods]
impl ChangeRecord {
    fn __repr__(&self) -> String {
        format!(
            "<ChangeRecord {} {} {}: {}>",
            self.id, self.kind, self.location, self.detail
        )
    }
}

#[pyclass(frozen, name = "Finding")]
struct Finding {
    #[pyo3(get)]
    check_id: String,
    #[pyo3(get)]
    severity: String,
    #[pyo3(get)]
    sheet: String,
    #[pyo3(get)]
    location: String,
    #[pyo3(get)]
    message: String,
    /// JSON text.
    #[pyo3(get)]
    evidence: String,
}

impl Finding {
    fn from_core(f: &CoreFinding) -> Self {
        Finding {
            check_id: f.check_id.as_str().to_owned(),
            severity: f.severity.as_str().to_owned(),
            sheet: f.sheet.clone(),
            location: f.location_label(),
            message: f.message.clone(),
            evidence: f.evidence.to_string(),
        }
    }
}

#[pymethods]
impl Finding {
    fn __repr__(&self) -> String {
        format!(
            "<Finding {} {}: {}>",
            self.check_id, self.location, self.message
        )
    }
}

/// A spreadsheet opened read-only.
#[pyclass(frozen, name = "Workbook")]
struct Workbook {
    inner: CoreWorkbook,
}

fn checkpoint_sheets(wb: &CoreWorkbook, at: Option<&str>) -> PyResult<Vec<SheetGrid>> {
    match at {
        None => Ok(wb.sheets.clone()),
        Some(text) => {
            let cp: Checkpoint = text.parse().expect("infallible");
            snapshot_at(wb, &cp)
                .map(|s| s.sheets)
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))
        }
    }
}

#[pymethods]
impl Workbook {
    #[staticmethod]
    fn open(path: &str) -> PyResult<Self> {
        CoreWorkbook::open(path)
            .map(|inner| Workbook { inner })
            .map_err(|e| PyOSError::new_err(format!("{path}: {e}")))
    }

    #[getter]
    fn recording(&self) -> &'static str {
        self.inner.recording.as_str()
    }

    #[getter]
    fn source_digest(&self) -> String {
        self.inner.manifest.source_digest.clone()
    }

    #[getter]
    fn sheet_names(&self) -> Vec<String> {
        self.inner.sheets.iter().map(|s| s.name.clone()).collect()
    }

    /// Change records, optionally narrowed by filters in text form.
    #[pyo3(signature = (filters = Vec::new()))]
    fn changes(&self, filters: Vec<String>) -> PyResult<Vec<ChangeRecord>> {
        let specs = filters
            .iter()
            .map(|f| f.parse::<FilterSpec>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let records = filter_records(&specs, &self.inner.changes)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(records.into_iter().map(ChangeRecord::from_core).collect())
    }

    fn summary(&self) -> String {
        render_summary(&summarize(&self.inner.changes))
    }

    /// Static checks on the current grid, or on the grid at `at`.
    #[pyo3(signature = (at = None, config = None))]
    fn scan(&self, at: Option<&str>, config: Option<&str>) -> PyResult<Vec<Finding>> {
        let config = match config {
            Some(text) => {
                CheckConfig::from_toml(text).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            None => CheckConfig::default(),
        };
        let sheets = checkpoint_sheets(&self.inner, at)?;
        Ok(scan(&sheets, &config)
            .iter()
            .map(Finding::from_core)
            .collect())
    }

    /// Cell text (formula source or literal) at `a1`, now or at `at`.
    #[pyo3(signature = (sheet, a1, at = None))]
    fn cell(&self, sheet: &str, a1: &str, at: Option<&str>) -> PyResult<String> {
        let address = CellAddress::parse_a1(sheet, a1)
            .ok_or_else(|| PyValueError::new_err(format!("bad cell address {a1:?}")))?;
        let sheets = checkpoint_sheets(&self.inner, at)?;
        let grid = sheets
            .iter()
            .find(|s| s.name == sheet)
            .ok_or_else(|| PyKeyError::new_err(sheet.to_owned()))?;
        Ok(grid.grid.get(address.row, address.column).plain_text())
    }

    /// Change records as newline-delimited JSON.
    fn export_changes(&self) -> PyResult<String> {
        let mut out = Vec::new();
        export_changes(&self.inner.changes, &mut out)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.changes.len()
    }
}

#[pyfunction]
#[pyo3(signature = (pattern, subject, ignore_case = false))]
fn match_wildcard(pattern: &str, subject: &str, ignore_case: bool) -> bool {
    core_match(pattern, subject, ignore_case)
}

/// Canonical text of a formula entered at `host` (A1 on a sheet named "Sheet1" by default).
#[pyfunction]
#[pyo3(signature = (text, host = "A1"))]
fn canonical_formula(text: &str, host: &str) -> PyResult<String> {
    let host = CellAddress::parse_a1("Sheet1", host)
        .ok_or_else(|| PyValueError::new_err(format!("bad host {host:?}")))?;
    parse_formula(text, &host)
        .map(|ast| print_canonical(&ast))
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn relative_shape(text: &str, host: &str) -> PyResult<String> {
    let host = CellAddress::parse_a1("Sheet1", host)
        .ok_or_else(|| PyValueError::new_err(format!("bad host {host:?}")))?;
    parse_formula(text, &host)
        .map(|ast| core_shape(&ast, &host))
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule(name = "calcaudit")]
fn calcaudit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Workbook>()?;
    m.add_class::<ChangeRecord>()?;
    m.add_class::<Finding>()?;
    m.add_function(wrap_pyfunction!(match_wildcard, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_formula, m)?)?;
    m.add_function(wrap_pyfunction!(relative_shape, m)?)?;
    Ok(())
}
