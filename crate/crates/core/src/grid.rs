//! Sparse cell grid with row/column shifting.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::value::CellContent;

static EMPTY: CellContent = CellContent::Empty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Column,
}

/// Cells keyed by `(row, column)`. Empty content is never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Grid {
    cells: BTreeMap<(u32, u32), CellContent>,
    /// Cells whose style carries an explicit protect flag.
    protected_cells: BTreeSet<(u32, u32)>,
    /// Rows re-inserted as blanks when undoing a deletion whose content is unknown.
    unrecoverable_rows: BTreeSet<u32>,
    unrecoverable_columns: BTreeSet<u32>,
}

impl Grid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, row: u32, column: u32) -> &CellContent {
        self.cells.get(&(row, column)).unwrap_or(&EMPTY)
    }

    pub fn set(&mut self, row: u32, column: u32, content: CellContent) {
        if content.is_empty() {
            self.cells.remove(&(row, column));
        } else {
            self.cells.insert((row, column), content);
        }
    }

    pub fn set_protected(&mut self, row: u32, column: u32, protected: bool) {
        if protected {
            self.protected_cells.insert((row, column));
        } else {
            self.protected_cells.remove(&(row, column));
        }
    }

    pub fn is_protected(&self, row: u32, column: u32) -> bool {
        self.protected_cells.contains(&(row, column))
    }

    /// Positions carrying an explicit protect flag, row-major.
    pub fn protected_positions(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.protected_cells.iter().copied()
    }

    /// Non-empty cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), &CellContent)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// One past the last used row and column.
    pub fn extent(&self) -> (u32, u32) {
        self.cells.keys().fold((0, 0), |(r, c), (row, col)| {
            (r.max(row + 1), c.max(col + 1))
        })
    }

    pub fn unrecoverable(&self, axis: Axis) -> &BTreeSet<u32> {
        match axis {
            Axis::Row => &self.unrecoverable_rows,
            Axis::Column => &self.unrecoverable_columns,
        }
    }

    pub fn row_is_blank(&self, row: u32) -> bool {
        !self.cells.keys().any(|(r, _)| *r == row)
    }

    pub fn column_is_blank(&self, column: u32) -> bool {
        !self.cells.keys().any(|(_, c)| *c == column)
    }

    /// Opens `count` blank lines at `at`; later lines move away.
    pub fn insert(&mut self, axis: Axis, at: u32, count: u32) {
        let shift = |i: u32| if i >= at { i + count } else { i };
        self.remap(axis, |i| Some(shift(i)));
    }

    /// Drops lines `at..at+count`; later lines move back.
    pub fn remove(&mut self, axis: Axis, at: u32, count: u32) {
        self.remap(axis, |i| {
            if i < at {
                Some(i)
            } else if i < at + count {
                None
            } else {
                Some(i - count)
            }
        });
    }

    pub fn mark_unrecoverable(&mut self, axis: Axis, at: u32, count: u32) {
        let set = match axis {
            Axis::Row => &mut self.unrecoverable_rows,
            Axis::Column => &mut self.unrecoverable_columns,
        };
        set.extend(at..at + count);
    }

    fn remap(&mut self, axis: Axis, f: impl Fn(u32) -> Option<u32>) {
        let key = |(r, c): (u32, u32)| -> Option<(u32, u32)> {
            match axis {
                Axis::Row => f(r).map(|r| (r, c)),
                Axis::Column => f(c).map(|c| (r, c)),
            }
        };
        self.cells = std::mem::take(&mut self.cells)
            .into_iter()
            .filter_map(|(k, v)| key(k).map(|k| (k, v)))
            .collect();
        self.protected_cells = std::mem::take(&mut self.protected_cells)
            .into_iter()
            .filter_map(key)
            .collect();
        let lines = match axis {
            Axis::Row => &mut self.unrecoverable_rows,
            Axis::Column => &mut self.unrecoverable_columns,
        };
        *lines = std::mem::take(lines).into_iter().filter_map(&f).collect();
    }

    /// Content equality, ignoring protection and placeholder marks.
    pub fn same_content(&self, other: &Grid) -> bool {
        self.cells == other.cells
    }
}

/// One sheet of a workbook or snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetGrid {
    pub name: String,
    pub protected: bool,
    pub grid: Grid,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::StaticValue;

    fn s(t: &str) -> CellContent {
        CellContent::static_value(StaticValue::string(t))
    }

    #[test]
    fn insert_then_remove_rows_is_identity() {
        let mut g = Grid::new();
        g.set(0, 0, s("a"));
        g.set(5, 2, s("b"));
        g.set_protected(5, 2, true);
        let before = g.clone();
        g.insert(Axis::Row, 3, 2);
        assert_eq!(g.get(7, 2), &s("b"));
        assert!(g.is_protected(7, 2));
        assert!(g.get(5, 2).is_empty());
        g.remove(Axis::Row, 3, 2);
        assert_eq!(g, before);
    }

    #[test]
    fn removing_columns_drops_cells() {
        let mut g = Grid::new();
        g.set(0, 1, s("gone"));
        g.set(0, 3, s("kept"));
        g.remove(Axis::Column, 1, 1);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(0, 2), &s("kept"));
    }

    #[test]
    fn empty_content_is_not_stored() {
        let mut g = Grid::new();
        g.set(1, 1, s("x"));
        g.set(1, 1, CellContent::Empty);
        assert!(g.is_empty());
        assert_eq!(g.extent(), (0, 0));
    }
}
