//! A1-style cell addressing.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Columns beyond this do not have a 1–3 letter A1 name.
pub const MAX_COLUMNS: u32 = 16384;

/// A cell on a named sheet. Row and column are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellAddress {
    pub sheet: String,
    pub row: u32,
    pub column: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, column: u32, row: u32) -> Self {
        CellAddress {
            sheet: sheet.into(),
            row,
            column,
        }
    }

    /// Parses `B5` on the given sheet.
    pub fn parse_a1(sheet: impl Into<String>, a1: &str) -> Option<Self> {
        let (column, row) = parse_a1(a1)?;
        Some(CellAddress::new(sheet, column, row))
    }

    /// `K22`, without the sheet.
    pub fn a1(&self) -> String {
        format!("{}{}", column_name(self.column), self.row + 1)
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.sheet, self.a1())
    }
}

/// `0 -> A`, `25 -> Z`, `26 -> AA`.
pub fn column_name(mut column: u32) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (column % 26) as u8);
        if column < 26 {
            break;
        }
        column = column / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`column_name`]; case-insensitive. Rejects columns past `XFD`.
pub fn parse_column(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut value: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        value = value * 26 + u32::from(b.to_ascii_uppercase() - b'A') + 1;
    }
    let column = value - 1;
    (column < MAX_COLUMNS).then_some(column)
}

/// Parses `B5` (no `$` markers) into 0-based `(column, row)`.
pub fn parse_a1(text: &str) -> Option<(u32, u32)> {
    let split = text.find(|c: char| c.is_ascii_digit())?;
    let (letters, digits) = text.split_at(split);
    let column = parse_column(letters)?;
    if !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let row: u32 = digits.parse().ok()?;
    Some((column, row.checked_sub(1)?))
}
