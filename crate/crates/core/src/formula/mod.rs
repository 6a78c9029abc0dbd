//! Cell formulas: parsing, canonical printing, reference extraction,
//! constant folding and relative (R1C1-style) shapes.
//!
//! Operator precedence, lowest first: comparison, `&`, `+ -`, `* /`,
//! `^` (right-associative), unary minus, postfix `%`.

mod fold;
mod parse;
mod print;
mod refs;

use serde::Serialize;

use crate::address::CellAddress;
use crate::value::CellContent;

pub use fold::{fold_constant, FoldError};
pub use parse::{parse_formula, strip_stored_prefix, SyntaxError};
pub use print::{print_canonical, print_expr, relative_shape};
pub use refs::{extract_references, reference_multiset, RangeAddress, Reference, ReferenceSet};

/// A cell reference as written: optional sheet, coordinates and `$` markers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CellRef {
    pub sheet: Option<String>,
    pub column: u32,
    pub row: u32,
    pub col_absolute: bool,
    pub row_absolute: bool,
}

impl CellRef {
    pub fn relative(column: u32, row: u32) -> Self {
        CellRef {
            sheet: None,
            column,
            row,
            col_absolute: false,
            row_absolute: false,
        }
    }

    /// Address on the explicit sheet, or on `host_sheet` when unqualified.
    pub fn resolve(&self, host_sheet: &str) -> CellAddress {
        CellAddress::new(
            self.sheet.as_deref().unwrap_or(host_sheet),
            self.column,
            self.row,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnaryOp {
    Neg,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => PREC_CMP,
            BinaryOp::Concat => PREC_CONCAT,
            BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
            BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
            BinaryOp::Pow => PREC_POW,
        }
    }
}

pub(crate) const PREC_CMP: u8 = 1;
pub(crate) const PREC_CONCAT: u8 = 2;
pub(crate) const PREC_ADD: u8 = 3;
pub(crate) const PREC_MUL: u8 = 4;
pub(crate) const PREC_POW: u8 = 5;
pub(crate) const PREC_UNARY: u8 = 6;
pub(crate) const PREC_POSTFIX: u8 = 7;
pub(crate) const PREC_ATOM: u8 = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Number(f64),
    Text(String),
    Boolean(bool),
    /// An error literal such as `#REF!`.
    Error(String),
    Cell(CellRef),
    /// `start:end`; the end's sheet is `None` or equal to the start's.
    Range(CellRef, CellRef),
    Name(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Percent(Box<Expr>),
    /// Function name is stored uppercase.
    Call(String, Vec<Expr>),
}

impl Expr {
    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Unary(..) => PREC_UNARY,
            Expr::Percent(_) => PREC_POSTFIX,
            _ => PREC_ATOM,
        }
    }

    /// Pre-order walk over every node.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) | Expr::Percent(e) => e.walk(f),
            Expr::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    pub fn has_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Call(..)));
        found
    }

    pub fn has_reference(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Cell(_) | Expr::Range(..) | Expr::Name(_)));
        found
    }
}

/// A parsed formula together with the cell that holds it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaAst {
    pub root: Expr,
    pub host: CellAddress,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ContentClass {
    Empty,
    Static,
    ConstantFormula,
    ReferencingFormula,
    /// The formula text did not parse; it is reported, not analysed.
    UnparsedFormula(SyntaxError),
}

impl ContentClass {
    pub fn label(&self) -> &'static str {
        match self {
            ContentClass::Empty => "empty",
            ContentClass::Static => "static",
            ContentClass::ConstantFormula => "constant-formula",
            ContentClass::ReferencingFormula => "referencing-formula",
            ContentClass::UnparsedFormula(_) => "formula (unparsed)",
        }
    }
}

/// Formulas with no cell, range or name reference are constant.
pub fn classify_content(cell: &CellContent, host: &CellAddress) -> ContentClass {
    match cell {
        CellContent::Empty => ContentClass::Empty,
        CellContent::Static { .. } => ContentClass::Static,
        CellContent::Formula { source, .. } => match parse_formula(source, host) {
            Ok(ast) if ast.root.has_reference() => ContentClass::ReferencingFormula,
            Ok(_) => ContentClass::ConstantFormula,
            Err(e) => ContentClass::UnparsedFormula(e),
        },
    }
}

/// Parses and reprints stored formula text; unparsable text is kept as-is
/// (minus any stored prefix).
pub fn normalize_stored_formula(raw: &str, host: &CellAddress) -> String {
    match parse_formula(raw, host) {
        Ok(ast) => print_canonical(&ast),
        Err(_) => {
            let stripped = strip_stored_prefix(raw);
            if stripped.starts_with('=') {
                stripped.to_owned()
            } else {
                format!("={stripped}")
            }
        }
    }
}
