use std::collections::BTreeSet;

use serde::Serialize;

use super::{Expr, FormulaAst};
use crate::address::CellAddress;

/// A rectangle on one sheet, normalized so start <= end on both axes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RangeAddress {
    pub sheet: String,
    pub start_row: u32,
    pub start_column: u32,
    pub end_row: u32,
    pub end_column: u32,
}

impl RangeAddress {
    pub fn new(sheet: impl Into<String>, a: (u32, u32), b: (u32, u32)) -> Self {
        let ((c1, r1), (c2, r2)) = (a, b);
        RangeAddress {
            sheet: sheet.into(),
            start_row: r1.min(r2),
            start_column: c1.min(c2),
            end_row: r1.max(r2),
            end_column: c1.max(c2),
        }
    }

    pub fn contains(&self, cell: &CellAddress) -> bool {
        cell.sheet == self.sheet
            && (self.start_row..=self.end_row).contains(&cell.row)
            && (self.start_column..=self.end_column).contains(&cell.column)
    }

    pub fn intersection(&self, other: &RangeAddress) -> Option<RangeAddress> {
        if self.sheet != other.sheet {
            return None;
        }
        let start_row = self.start_row.max(other.start_row);
        let end_row = self.end_row.min(other.end_row);
        let start_column = self.start_column.max(other.start_column);
        let end_column = self.end_column.min(other.end_column);
        (start_row <= end_row && start_column <= end_column).then(|| RangeAddress {
            sheet: self.sheet.clone(),
            start_row,
            start_column,
            end_row,
            end_column,
        })
    }

    pub fn is_single_column(&self) -> bool {
        self.start_column == self.end_column
    }

    pub fn is_single_row(&self) -> bool {
        self.start_row == self.end_row
    }

    /// `A3:A5` (sheet omitted).
    pub fn a1(&self) -> String {
        let start = CellAddress::new(&self.sheet, self.start_column, self.start_row);
        let end = CellAddress::new(&self.sheet, self.end_column, self.end_row);
        format!("{}:{}", start.a1(), end.a1())
    }
}

/// One reference occurrence, resolved against the host sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Reference {
    Cell(CellAddress),
    Range(RangeAddress),
    Name(String),
}

/// Distinct reference targets of one formula.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReferenceSet {
    pub cells: BTreeSet<CellAddress>,
    pub ranges: BTreeSet<RangeAddress>,
    pub names: BTreeSet<String>,
}

impl ReferenceSet {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.ranges.is_empty() && self.names.is_empty()
    }
}

/// Every reference node in pre-order, duplicates kept.
pub fn reference_multiset(ast: &FormulaAst) -> Vec<Reference> {
    let host_sheet = ast.host.sheet.as_str();
    let mut out = Vec::new();
    ast.root.walk(&mut |e| match e {
        Expr::Cell(r) => out.push(Reference::Cell(r.resolve(host_sheet))),
        Expr::Range(a, b) => out.push(Reference::Range(RangeAddress::new(
            a.sheet.as_deref().unwrap_or(host_sheet),
            (a.column, a.row),
            (b.column, b.row),
        ))),
        Expr::Name(n) => out.push(Reference::Name(n.clone())),
        _ => {}
    });
    out
}

pub fn extract_references(ast: &FormulaAst) -> ReferenceSet {
    let mut set = ReferenceSet::default();
    for r in reference_multiset(ast) {
        match r {
            Reference::Cell(c) => {
                set.cells.insert(c);
            }
            Reference::Range(r) => {
                set.ranges.insert(r);
            }
            Reference::Name(n) => {
                set.names.insert(n);
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    #[test]
    fn cells_of_difference() {
        let host = CellAddress::parse_a1("Cash Flow", "K22").unwrap();
        let refs = extract_references(&parse_formula("=K8-K18-K20", &host).unwrap());
        let expected: BTreeSet<_> = ["K8", "K18", "K20"]
            .iter()
            .map(|a| CellAddress::parse_a1("Cash Flow", a).unwrap())
            .collect();
        assert_eq!(refs.cells, expected);
        assert!(refs.ranges.is_empty() && refs.names.is_empty());
    }

    #[test]
    fn constants_have_no_references() {
        let host = CellAddress::new("S", 0, 0);
        assert!(extract_references(&parse_formula("=1+2+3", &host).unwrap()).is_empty());
    }

    #[test]
    fn ranges_are_normalized() {
        let host = CellAddress::new("S", 0, 0);
        let refs = extract_references(&parse_formula("=SUM(C5:A1)+Other.B2", &host).unwrap());
        let r = refs.ranges.iter().next().unwrap();
        assert_eq!(r.a1(), "A1:C5");
        assert!(refs.cells.contains(&CellAddress::new("Other", 1, 1)));
    }

    #[test]
    fn duplicates_counted_in_multiset() {
        let host = CellAddress::new("S", 0, 0);
        let ast = parse_formula("=A2+A2", &host).unwrap();
        assert_eq!(reference_multiset(&ast).len(), 2);
        assert_eq!(extract_references(&ast).cells.len(), 1);
    }

    #[test]
    fn intersection() {
        let a = RangeAddress::new("S", (0, 0), (0, 4));
        let b = RangeAddress::new("S", (0, 2), (0, 7));
        assert_eq!(a.intersection(&b).unwrap().a1(), "A3:A5");
        let c = RangeAddress::new("S", (1, 0), (1, 9));
        assert_eq!(a.intersection(&c), None);
    }
}
