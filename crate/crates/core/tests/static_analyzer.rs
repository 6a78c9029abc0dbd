use std::collections::BTreeSet;

use calcaudit::address::{column_name, parse_a1};
use calcaudit::analyze::{scan, CheckConfig, CheckId, Finding};
use calcaudit::fixtures;
use calcaudit::reconstruct::{revert_all, snapshot_at, Checkpoint};
use calcaudit::{CellContent, Grid, SheetGrid, StaticValue, Workbook};
use chrono::NaiveDate;
use proptest::prelude::*;

fn one_sheet(cells: &[(&str, CellContent)]) -> Vec<SheetGrid> {
    let mut grid = Grid::new();
    for (a1, c) in cells {
        let (column, row) = parse_a1(a1).unwrap();
        grid.set(row, column, c.clone());
    }
    vec![SheetGrid {
        name: "Sheet1".into(),
        protected: false,
        grid,
    }]
}

fn num(v: f64) -> CellContent {
    CellContent::static_value(StaticValue::float(v))
}

fn with(findings: &[Finding], id: CheckId) -> Vec<&Finding> {
    findings.iter().filter(|f| f.check_id == id).collect()
}

#[test]
fn constant_equation() {
    let wb = Workbook::from_bytes(fixtures::constant_equation_ods()).unwrap();
    let found = scan(&wb.sheets, &CheckConfig::default());
    assert_eq!(found.len(), 1);
    let f = &found[0];
    assert_eq!(f.check_id, CheckId::ConstantEquation);
    assert_eq!(f.location_label(), "D4");
    assert_eq!(f.message, "constant formula evaluates to 6");
    assert_eq!(f.evidence["value"], "6");
    assert_eq!(f.severity.as_str(), "info");
}

/// Row-18 sums over x11:x16 whose row-17 cell holds numeric content,
/// read straight off the snapshot text.
fn sum_columns_with_row17_data(sheet: &SheetGrid) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for column in 0..30 {
        let name = column_name(column);
        let expected = format!("=SUM({name}11:{name}16)");
        if sheet.grid.get(17, column).plain_text() == expected
            && sheet.grid.get(16, column).is_numeric_like()
        {
            out.insert(format!("{name}18"));
        }
    }
    out
}

#[test]
fn cashflow_boundary_at_2155() {
    let wb = Workbook::from_bytes(fixtures::cashflow_ods()).unwrap();
    let at = NaiveDate::from_ymd_opt(2003, 3, 28)
        .unwrap()
        .and_hms_opt(21, 55, 0)
        .unwrap();
    let snap = snapshot_at(&wb, &Checkpoint::At(at)).unwrap();
    let found = scan(&snap.sheets, &CheckConfig::default());
    let sa4: BTreeSet<String> = with(&found, CheckId::RangeBoundary)
        .iter()
        .map(|f| f.location_label())
        .collect();
    let oracle = sum_columns_with_row17_data(&snap.sheets[0]);
    assert_eq!(sa4, oracle);
    assert_eq!(oracle.into_iter().collect::<Vec<_>>(), ["N18"]);
    let n18 = with(&found, CheckId::RangeBoundary)[0];
    assert_eq!(n18.message, "SUM(N11:N16) stops next to numeric N17");
    assert_eq!(n18.evidence["adjacent"], "N17");

    // Once the sums cover row 17, and before row 17 existed, nothing is flagged.
    assert!(with(
        &scan(&wb.sheets, &CheckConfig::default()),
        CheckId::RangeBoundary
    )
    .is_empty());
    let base = revert_all(&wb).unwrap();
    assert!(with(
        &scan(&base.sheets, &CheckConfig::default()),
        CheckId::RangeBoundary
    )
    .is_empty());
}

#[test]
fn findings_exist_in_snapshot_and_are_sorted() {
    let wb = Workbook::from_bytes(fixtures::cashflow_ods()).unwrap();
    let found = scan(&wb.sheets, &CheckConfig::default());
    for f in &found {
        if let Some(a) = &f.address {
            assert!(!wb.content_at(a).is_empty(), "{f:?}");
        }
    }
    let keys: Vec<_> = found
        .iter()
        .map(|f| (f.address.clone().map(|a| (a.row, a.column)), f.check_id))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(found, scan(&wb.sheets, &CheckConfig::default()));
}

#[test]
fn protection_required() {
    let mut sheets = one_sheet(&[("A1", num(1.0))]);
    assert!(scan(&sheets, &CheckConfig::default()).is_empty());
    let strict = CheckConfig::from_toml("require_protection = true").unwrap();
    let found = scan(&sheets, &strict);
    assert_eq!(found.len(), 1);
    assert_eq!(
        (found[0].check_id, found[0].address.is_none()),
        (CheckId::ProtectionHole, true)
    );
    assert_eq!(found[0].location_label(), "Sheet1");

    sheets[0].protected = true;
    sheets[0].grid.set(0, 1, num(2.0));
    sheets[0].grid.set_protected(0, 1, true);
    let found = scan(&sheets, &strict);
    assert_eq!(
        found
            .iter()
            .map(Finding::location_label)
            .collect::<Vec<_>>(),
        ["A1"]
    );
}

#[test]
fn duplicate_and_overlap() {
    let sheets = one_sheet(&[
        ("A1", num(1.0)),
        ("B1", CellContent::formula("=A1+A1", None)),
    ]);
    let found = scan(&sheets, &CheckConfig::default());
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].check_id, CheckId::DuplicateReference);
    assert_eq!(found[0].message, "references A1 twice");

    let sheets = one_sheet(&[("C1", CellContent::formula("=SUM(A1:A5)+SUM(A3:A8)", None))]);
    let found = scan(&sheets, &CheckConfig::default());
    let sa7 = with(&found, CheckId::OverlappingRanges);
    assert_eq!(sa7.len(), 1);
    assert_eq!(sa7[0].evidence["intersection"], "A3:A5");
}

#[test]
fn empty_workbook_has_no_findings() {
    assert!(scan(&[], &CheckConfig::default()).is_empty());
    let sheets = one_sheet(&[]);
    let strict = CheckConfig::from_toml("require_protection = false").unwrap();
    assert!(scan(&sheets, &strict).is_empty());
}

#[derive(Debug, Clone)]
struct Rect {
    c1: u32,
    r1: u32,
    c2: u32,
    r2: u32,
}

impl Rect {
    fn a1(&self) -> String {
        format!(
            "{}{}:{}{}",
            column_name(self.c1),
            self.r1 + 1,
            column_name(self.c2),
            self.r2 + 1
        )
    }

    fn has(&self, c: u32, r: u32) -> bool {
        (self.c1..=self.c2).contains(&c) && (self.r1..=self.r2).contains(&r)
    }
}

fn rect() -> impl Strategy<Value = Rect> {
    (0u32..20, 0u32..20, 0u32..20, 0u32..20).prop_map(|(a, b, c, d)| Rect {
        c1: a.min(c),
        r1: b.min(d),
        c2: a.max(c),
        r2: b.max(d),
    })
}

/// A one-column or one-row range inside 20x20.
fn line() -> impl Strategy<Value = Rect> {
    (any::<bool>(), 0u32..20, 0u32..20, 0u32..20).prop_map(|(vertical, fixed, a, b)| {
        let (lo, hi) = (a.min(b), a.max(b));
        if vertical {
            Rect {
                c1: fixed,
                r1: lo,
                c2: fixed,
                r2: hi,
            }
        } else {
            Rect {
                c1: lo,
                r1: fixed,
                c2: hi,
                r2: fixed,
            }
        }
    })
}

fn cells() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 400)
}

fn grid_of(kinds: &[u8]) -> Grid {
    let mut grid = Grid::new();
    for (i, k) in kinds.iter().enumerate() {
        let (r, c) = (i as u32 / 20, i as u32 % 20);
        match k {
            1 => grid.set(r, c, num(i as f64)),
            2 => grid.set(r, c, CellContent::static_value(StaticValue::string("x"))),
            _ => {}
        }
    }
    grid
}

proptest! {
    #[test]
    fn overlap_matches_enumeration(a in rect(), b in rect(), kinds in cells()) {
        let mut grid = grid_of(&kinds);
        grid.set(25, 0, CellContent::formula(format!("=SUM({})+SUM({})", a.a1(), b.a1()), None));
        let sheets = vec![SheetGrid { name: "S".into(), protected: false, grid }];
        let found = scan(&sheets, &CheckConfig::default());
        let sa7 = with(&found, CheckId::OverlappingRanges);

        let both: Vec<(u32, u32)> = (0..20).flat_map(|c| (0..20).map(move |r| (c, r))).filter(|&(c, r)| a.has(c, r) && b.has(c, r)).collect();
        if both.is_empty() {
            prop_assert!(sa7.is_empty());
        } else {
            let bound = Rect {
                c1: both.iter().map(|p| p.0).min().unwrap(),
                r1: both.iter().map(|p| p.1).min().unwrap(),
                c2: both.iter().map(|p| p.0).max().unwrap(),
                r2: both.iter().map(|p| p.1).max().unwrap(),
            };
            // The overlap of two rectangles fills its bounding box.
            let area = (bound.c2 - bound.c1 + 1) * (bound.r2 - bound.r1 + 1);
            prop_assert_eq!(area as usize, both.len());
            prop_assert_eq!(sa7.len(), 1);
            prop_assert_eq!(sa7[0].evidence["intersection"].as_str().unwrap(), bound.a1());
        }
    }

    #[test]
    fn boundary_matches_enumeration(range in line(), kinds in cells(), host in (0u32..20, 0u32..20)) {
        let mut grid = grid_of(&kinds);
        let (hc, hr) = host;
        grid.set(hr, hc, CellContent::formula(format!("=SUM({})", range.a1()), None));
        let sheets = vec![SheetGrid { name: "S".into(), protected: false, grid: grid.clone() }];
        let found = scan(&sheets, &CheckConfig::default());
        let got: BTreeSet<String> = with(&found, CheckId::RangeBoundary)
            .iter()
            .map(|f| f.evidence["adjacent"].as_str().unwrap().to_owned())
            .collect();

        let mut want = BTreeSet::new();
        for c in 0..22u32 {
            for r in 0..22u32 {
                if range.has(c, r) || (c, r) == (hc, hr) || !grid.get(r, c).is_numeric_like() {
                    continue;
                }
                let vertical = range.c1 == range.c2 && c == range.c1
                    && ((r > 0 && range.has(c, r - 1)) || range.has(c, r + 1));
                let horizontal = range.r1 == range.r2 && r == range.r1
                    && ((c > 0 && range.has(c - 1, r)) || range.has(c + 1, r));
                if vertical || horizontal {
                    want.insert(format!("{}{}", column_name(c), r + 1));
                }
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn fill_findings_translate(
        offsets in prop::collection::vec(0usize..3, 3..8),
        vertical in any::<bool>(),
        shift in (0u32..10, 0u32..10),
    ) {
        let run = |dc: u32, dr: u32| {
            let mut grid = Grid::new();
            for (i, &o) in offsets.iter().enumerate() {
                let (r, c) = if vertical { (3 + dr + i as u32, 3 + dc) } else { (3 + dr, 3 + dc + i as u32) };
                let target = match o {
                    0 => format!("{}{}", column_name(c - 1), r + 1),
                    1 => format!("{}{}", column_name(c), r - 1),
                    _ => format!("{}{}", column_name(c - 2), r - 1),
                };
                grid.set(r, c, CellContent::formula(format!("={target}*2"), None));
            }
            let sheets = vec![SheetGrid { name: "S".into(), protected: false, grid }];
            scan(&sheets, &CheckConfig::default())
                .into_iter()
                .filter(|f| f.check_id == CheckId::FillInconsistency)
                .map(|f| {
                    let a = f.address.unwrap();
                    (a.row - dr, a.column - dc, f.evidence["shape"].clone(), f.evidence["majority_shape"].clone())
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(0, 0), run(shift.0, shift.1));
    }
}
