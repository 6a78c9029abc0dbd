//! Static checks over one grid snapshot.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::address::CellAddress;
use crate::formula::{
    fold_constant, parse_formula, print_expr, reference_multiset, relative_shape, Expr, FormulaAst,
    RangeAddress, Reference,
};
use crate::grid::SheetGrid;
use crate::value::{CachedResult, CellContent};

const DEFAULT_CONFIG: &str = include_str!("../config/checks.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    #[serde(rename = "SA1-constant-equation")]
    ConstantEquation,
    #[serde(rename = "SA2-error-value")]
    ErrorValue,
    #[serde(rename = "SA3-blank-reference")]
    BlankReference,
    #[serde(rename = "SA4-range-boundary")]
    RangeBoundary,
    #[serde(rename = "SA5-fill-inconsistency")]
    FillInconsistency,
    #[serde(rename = "SA6-duplicate-reference")]
    DuplicateReference,
    #[serde(rename = "SA7-overlapping-ranges")]
    OverlappingRanges,
    #[serde(rename = "SA8-protection-hole")]
    ProtectionHole,
    #[serde(rename = "SA9-literal-parameter")]
    LiteralParameter,
    #[serde(rename = "SA10-function-category")]
    FunctionCategory,
    #[serde(rename = "X1-unparsable-formula")]
    UnparsableFormula,
    #[serde(rename = "X2-external-reference")]
    ExternalReference,
}

impl CheckId {
    pub const ALL: [CheckId; 12] = [
        CheckId::ConstantEquation,
        CheckId::ErrorValue,
        CheckId::BlankReference,
        CheckId::RangeBoundary,
        CheckId::FillInconsistency,
        CheckId::DuplicateReference,
        CheckId::OverlappingRanges,
        CheckId::ProtectionHole,
        CheckId::LiteralParameter,
        CheckId::FunctionCategory,
        CheckId::UnparsableFormula,
        CheckId::ExternalReference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::ConstantEquation => "SA1-constant-equation",
            CheckId::ErrorValue => "SA2-error-value",
            CheckId::BlankReference => "SA3-blank-reference",
            CheckId::RangeBoundary => "SA4-range-boundary",
            CheckId::FillInconsistency => "SA5-fill-inconsistency",
            CheckId::DuplicateReference => "SA6-duplicate-reference",
            CheckId::OverlappingRanges => "SA7-overlapping-ranges",
            CheckId::ProtectionHole => "SA8-protection-hole",
            CheckId::LiteralParameter => "SA9-literal-parameter",
            CheckId::FunctionCategory => "SA10-function-category",
            CheckId::UnparsableFormula => "X1-unparsable-formula",
            CheckId::ExternalReference => "X2-external-reference",
        }
    }

    /// `SA4`, `X1`.
    pub fn short(self) -> &'static str {
        self.as_str().split('-').next().expect("non-empty id")
    }

    pub fn severity(self) -> Severity {
        match self {
            CheckId::ErrorValue | CheckId::ProtectionHole => Severity::Alert,
            CheckId::BlankReference
            | CheckId::RangeBoundary
            | CheckId::FillInconsistency
            | CheckId::OverlappingRanges
            | CheckId::LiteralParameter => Severity::Warn,
            _ => Severity::Info,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = String;

    /// Accepts the full id or its short form, case-insensitively.
    fn from_str(s: &str) -> Result<Self, String> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s) || c.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Alert,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::Alert => "alert",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check_id: CheckId,
    pub severity: Severity,
    pub sheet: String,
    /// `None` for sheet-level findings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<CellAddress>,
    pub message: String,
    pub evidence: serde_json::Value,
}

impl Finding {
    /// `D4`, or the sheet name for sheet-level findings.
    pub fn location_label(&self) -> String {
        match &self.address {
            Some(a) => a.a1(),
            None => self.sheet.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default)]
    pub require_protection: bool,
    #[serde(default)]
    pub aggregate_functions: Vec<String>,
    #[serde(default)]
    pub deny_categories: Vec<String>,
    /// Check id (short or full) to enabled flag; missing means enabled.
    #[serde(default)]
    pub checks: BTreeMap<String, bool>,
    #[serde(default)]
    pub reference_expected: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig::from_toml(DEFAULT_CONFIG).expect("bundled config is valid")
    }
}

impl CheckConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: CheckConfig = toml::from_str(text)?;
        for key in config.checks.keys() {
            key.parse::<CheckId>().map_err(ConfigError::Invalid)?;
        }
        if let Some((name, _)) = config
            .reference_expected
            .iter()
            .find(|(_, positions)| positions.contains(&0))
        {
            return Err(ConfigError::Invalid(format!(
                "{name}: argument positions start at 1"
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        CheckConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn is_enabled(&self, check: CheckId) -> bool {
        self.checks
            .iter()
            .filter(|(k, _)| k.parse::<CheckId>() == Ok(check))
            .all(|(_, on)| *on)
    }

    fn is_aggregate(&self, name: &str) -> bool {
        self.aggregate_functions
            .iter()
            .any(|f| f.eq_ignore_ascii_case(name))
    }

    fn denied_category(&self, name: &str) -> Option<&str> {
        self.deny_categories.iter().map(String::as_str).find(|cat| {
            self.categories
                .get(*cat)
                .is_some_and(|fs| fs.iter().any(|f| f.eq_ignore_ascii_case(name)))
        })
    }

    fn expected_references(&self, name: &str) -> Option<&[usize]> {
        self.reference_expected
            .iter()
            .find(|(f, _)| f.eq_ignore_ascii_case(name))
            .map(|(_, p)| p.as_slice())
    }
}

struct Scan<'a> {
    sheets: &'a [SheetGrid],
    config: &'a CheckConfig,
    out: Vec<Finding>,
}

impl Scan<'_> {
    fn emit(
        &mut self,
        check: CheckId,
        sheet: &str,
        address: Option<CellAddress>,
        message: String,
        evidence: serde_json::Value,
    ) {
        if !self.config.is_enabled(check) {
            return;
        }
        self.out.push(Finding {
            check_id: check,
            severity: check.severity(),
            sheet: sheet.to_owned(),
            address,
            message,
            evidence,
        });
    }

    fn cell(&self, address: &CellAddress) -> Option<&CellContent> {
        self.sheets
            .iter()
            .find(|s| s.name == address.sheet)
            .map(|s| s.grid.get(address.row, address.column))
    }

    fn label(&self, host: &CellAddress, target: &CellAddress) -> String {
        if host.sheet == target.sheet {
            target.a1()
        } else {
            target.to_string()
        }
    }

    fn range_label(&self, host: &CellAddress, range: &RangeAddress) -> String {
        if host.sheet == range.sheet {
            range.a1()
        } else {
            format!("{}.{}", range.sheet, range.a1())
        }
    }

    fn protection(&mut self, sheet: &SheetGrid) {
        if !self.config.require_protection {
            return;
        }
        if !sheet.protected {
            self.emit(
                CheckId::ProtectionHole,
                &sheet.name,
                None,
                "sheet is not protected".into(),
                json!({ "sheet_protected": false }),
            );
            return;
        }
        for ((row, column), _) in sheet.grid.iter() {
            if !sheet.grid.is_protected(row, column) {
                self.emit(
                    CheckId::ProtectionHole,
                    &sheet.name,
                    Some(CellAddress::new(&sheet.name, column, row)),
                    "cell is unprotected on a protected sheet".into(),
                    json!({ "sheet_protected": true, "cell_protected": false }),
                );
            }
        }
    }

    fn formula(
        &mut self,
        host: &CellAddress,
        source: &str,
        cached: Option<&CachedResult>,
    ) -> Option<FormulaAst> {
        if let Some(CachedResult::Error { token }) = cached {
            self.emit(
                CheckId::ErrorValue,
                &host.sheet,
                Some(host.clone()),
                format!("cached result is {token}"),
                json!({ "formula": source, "token": token }),
            );
        }
        if is_external(source) {
            self.emit(
                CheckId::ExternalReference,
                &host.sheet,
                Some(host.clone()),
                "formula refers to another file and is not analyzed".into(),
                json!({ "formula": source }),
            );
            return None;
        }
        let ast = match parse_formula(source, host) {
            Ok(ast) => ast,
            Err(e) => {
                self.emit(
                    CheckId::UnparsableFormula,
                    &host.sheet,
                    Some(host.clone()),
                    format!("formula does not parse ({e})"),
                    json!({ "formula": source, "position": e.position, "expected": e.expected }),
                );
                return None;
            }
        };
        self.constant(&ast, source);
        self.references(&ast, source);
        self.calls(&ast, source);
        Some(ast)
    }

    fn constant(&mut self, ast: &FormulaAst, source: &str) {
        if ast.root.has_reference() {
            return;
        }
        let host = &ast.host;
        let (message, value) = match fold_constant(ast) {
            Ok(v) => (
                format!("constant formula evaluates to {}", v.display()),
                json!(v.display()),
            ),
            Err(e) => match e.token() {
                Some(t) => (format!("constant formula evaluates to {t}"), json!(t)),
                None => ("constant formula".to_owned(), serde_json::Value::Null),
            },
        };
        self.emit(
            CheckId::ConstantEquation,
            &host.sheet,
            Some(host.clone()),
            message,
            json!({ "formula": source, "value": value }),
        );
    }

    fn references(&mut self, ast: &FormulaAst, source: &str) {
        let host = &ast.host;
        let refs = reference_multiset(ast);

        let mut cell_counts: BTreeMap<&CellAddress, usize> = BTreeMap::new();
        for r in &refs {
            if let Reference::Cell(c) = r {
                *cell_counts.entry(c).or_default() += 1;
            }
        }

        let blanks: Vec<String> = cell_counts
            .keys()
            .filter(|c| self.cell(c).is_some_and(CellContent::is_empty))
            .map(|c| self.label(host, c))
            .collect();
        if !blanks.is_empty() {
            let noun = if blanks.len() == 1 { "cell" } else { "cells" };
            self.emit(
                CheckId::BlankReference,
                &host.sheet,
                Some(host.clone()),
                format!("references blank {noun} {}", blanks.join(", ")),
                json!({ "formula": source, "cells": blanks }),
            );
        }

        let duplicates: Vec<(String, usize)> = cell_counts
            .iter()
            .filter(|(_, n)| **n > 1)
            .map(|(c, n)| (self.label(host, c), *n))
            .collect();
        for (cell, n) in duplicates {
            let times = if n == 2 {
                "twice".to_owned()
            } else {
                format!("{n} times")
            };
            self.emit(
                CheckId::DuplicateReference,
                &host.sheet,
                Some(host.clone()),
                format!("references {cell} {times}"),
                json!({ "formula": source, "cell": cell, "count": n }),
            );
        }

        let ranges: Vec<&RangeAddress> = refs
            .iter()
            .filter_map(|r| match r {
                Reference::Range(r) => Some(r),
                _ => None,
            })
            .collect();
        for (i, a) in ranges.iter().enumerate() {
            for b in &ranges[i + 1..] {
                if let Some(overlap) = a.intersection(b) {
                    let (la, lb, lo) = (
                        self.range_label(host, a),
                        self.range_label(host, b),
                        self.range_label(host, &overlap),
                    );
                    self.emit(
                        CheckId::OverlappingRanges,
                        &host.sheet,
                        Some(host.clone()),
                        format!("ranges {la} and {lb} overlap at {lo}"),
                        json!({ "formula": source, "ranges": [la, lb], "intersection": lo }),
                    );
                }
            }
        }
    }

    fn calls(&mut self, ast: &FormulaAst, source: &str) {
        let host = &ast.host;
        let mut calls: Vec<(&str, &[Expr])> = Vec::new();
        ast.root.walk(&mut |e| {
            if let Expr::Call(name, args) = e {
                calls.push((name, args));
            }
        });

        let mut reported_categories = BTreeSet::new();
        for (name, args) in calls {
            if self.config.is_aggregate(name) {
                for arg in args {
                    if let Expr::Range(a, b) = arg {
                        let range = RangeAddress::new(
                            a.sheet.as_deref().unwrap_or(&host.sheet),
                            (a.column, a.row),
                            (b.column, b.row),
                        );
                        self.boundary(host, name, &range, source);
                    }
                }
            }
            if let Some(positions) = self.config.expected_references(name) {
                for &p in positions {
                    if let Some(arg) = args.get(p - 1).filter(|a| is_numeric_literal(a)) {
                        let literal = print_expr(arg);
                        self.emit(
                            CheckId::LiteralParameter,
                            &host.sheet,
                            Some(host.clone()),
                            format!("{name} argument {p} is the literal {literal} where a reference is expected"),
                            json!({ "formula": source, "function": name, "position": p, "literal": literal }),
                        );
                    }
                }
            }
            if let Some(category) = self.config.denied_category(name) {
                if reported_categories.insert(name.to_owned()) {
                    let category = category.to_owned();
                    self.emit(
                        CheckId::FunctionCategory,
                        &host.sheet,
                        Some(host.clone()),
                        format!("{name} is a {category} function"),
                        json!({ "formula": source, "function": name, "category": category }),
                    );
                }
            }
        }
    }

    /// SA4: the cells just past each end of a one-row or one-column range.
    fn boundary(&mut self, host: &CellAddress, function: &str, range: &RangeAddress, source: &str) {
        let mut neighbours = Vec::new();
        if range.is_single_column() {
            if range.start_row > 0 {
                neighbours.push((range.start_row - 1, range.start_column));
            }
            neighbours.push((range.end_row + 1, range.start_column));
        }
        if range.is_single_row() {
            if range.start_column > 0 {
                neighbours.push((range.start_row, range.start_column - 1));
            }
            neighbours.push((range.start_row, range.end_column + 1));
        }
        for (row, column) in neighbours {
            let next = CellAddress::new(&range.sheet, column, row);
            if &next == host {
                continue;
            }
            let Some(content) = self.cell(&next) else {
                continue;
            };
            if content.is_empty() || !content.is_numeric_like() {
                continue;
            }
            let (lr, ln) = (self.range_label(host, range), self.label(host, &next));
            self.emit(
                CheckId::RangeBoundary,
                &host.sheet,
                Some(host.clone()),
                format!("{function}({lr}) stops next to numeric {ln}"),
                json!({ "formula": source, "range": lr, "adjacent": ln, "adjacent_content": content.plain_text() }),
            );
        }
    }

    /// SA5 over maximal horizontal and vertical runs of parsed formulas.
    fn fill(&mut self, sheet: &SheetGrid, shapes: &BTreeMap<(u32, u32), String>) {
        let mut flagged: BTreeMap<(u32, u32), serde_json::Value> = BTreeMap::new();
        let check_run =
            |run: &[(u32, u32)], flagged: &mut BTreeMap<(u32, u32), serde_json::Value>| {
                if run.len() < 3 {
                    return;
                }
                let mut votes: HashMap<&str, usize> = HashMap::new();
                for p in run {
                    *votes.entry(shapes[p].as_str()).or_default() += 1;
                }
                let top = votes.values().copied().max().unwrap_or(0);
                let leaders: Vec<&str> = votes
                    .iter()
                    .filter(|(_, n)| **n == top)
                    .map(|(s, _)| *s)
                    .collect();
                if leaders.len() != 1 {
                    return;
                }
                let majority = leaders[0];
                let first = CellAddress::new(&sheet.name, run[0].1, run[0].0);
                let last =
                    CellAddress::new(&sheet.name, run[run.len() - 1].1, run[run.len() - 1].0);
                let span = format!("{}:{}", first.a1(), last.a1());
                for p in run {
                    if shapes[p] != majority {
                        flagged.entry(*p).or_insert_with(|| {
                        json!({ "run": span, "shape": shapes[p], "majority_shape": majority, "run_length": run.len(), "majority_count": top })
                    });
                    }
                }
            };

        let mut run: Vec<(u32, u32)> = Vec::new();
        for &(row, column) in shapes.keys() {
            if run
                .last()
                .is_some_and(|&(r, c)| r != row || c + 1 != column)
            {
                check_run(&run, &mut flagged);
                run.clear();
            }
            run.push((row, column));
        }
        check_run(&run, &mut flagged);

        let mut by_column: Vec<(u32, u32)> = shapes.keys().map(|&(r, c)| (c, r)).collect();
        by_column.sort_unstable();
        run.clear();
        for (column, row) in by_column {
            if run
                .last()
                .is_some_and(|&(r, c)| c != column || r + 1 != row)
            {
                check_run(&run, &mut flagged);
                run.clear();
            }
            run.push((row, column));
        }
        check_run(&run, &mut flagged);

        for ((row, column), evidence) in flagged {
            let run = evidence["run"].as_str().unwrap_or_default().to_owned();
            self.emit(
                CheckId::FillInconsistency,
                &sheet.name,
                Some(CellAddress::new(&sheet.name, column, row)),
                format!("formula differs from the majority of run {run}"),
                evidence,
            );
        }
    }
}

fn is_external(source: &str) -> bool {
    let mut in_string = false;
    let bytes = source.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'"' => in_string = !in_string,
            b'#' if !in_string && i > 0 && bytes[i - 1] == b'\'' => return true,
            _ => {}
        }
    }
    false
}

fn is_numeric_literal(e: &Expr) -> bool {
    match e {
        Expr::Number(_) => true,
        Expr::Unary(_, inner) | Expr::Percent(inner) => is_numeric_literal(inner),
        _ => false,
    }
}

/// Runs every enabled check. Findings are sorted by sheet order, row,
/// column, check id and message.
pub fn scan(sheets: &[SheetGrid], config: &CheckConfig) -> Vec<Finding> {
    let mut scan = Scan {
        sheets,
        config,
        out: Vec::new(),
    };
    for sheet in sheets {
        scan.protection(sheet);
        let mut shapes = BTreeMap::new();
        for ((row, column), content) in sheet.grid.iter() {
            if let CellContent::Formula { source, cached } = content {
                let host = CellAddress::new(&sheet.name, column, row);
                if let Some(ast) = scan.formula(&host, source, cached.as_ref()) {
                    shapes.insert((row, column), relative_shape(&ast, &host));
                }
            }
        }
        scan.fill(sheet, &shapes);
    }

    let order: HashMap<&str, usize> = sheets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    let mut out = scan.out;
    out.sort_by(|a, b| {
        let key = |f: &Finding| {
            (
                order.get(f.sheet.as_str()).copied().unwrap_or(usize::MAX),
                f.address.as_ref().map(|a| (a.row, a.column)),
            )
        };
        key(a)
            .cmp(&key(b))
            .then(a.check_id.cmp(&b.check_id))
            .then_with(|| a.message.cmp(&b.message))
    });
    out
}
