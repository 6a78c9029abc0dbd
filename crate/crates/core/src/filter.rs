//! Change-record filters: author/date/range/content predicates combined
//! conjunctively, with include and exclude actions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::address::{column_name, parse_a1};
use crate::model::{ChangeKind, ChangeRecord, Workbook};
use crate::value::CellContent;

/// `*` matches any run (possibly empty), `?` exactly one character.
pub fn match_wildcard(pattern: &str, subject: &str, ignore_case: bool) -> bool {
    if !ignore_case && pattern.is_ascii() && subject.is_ascii() {
        return glob(pattern.as_bytes(), subject.as_bytes(), b'*', b'?');
    }
    let fold = |s: &str| -> Vec<char> {
        if ignore_case {
            s.to_lowercase().chars().collect()
        } else {
            s.chars().collect()
        }
    };
    glob(&fold(pattern), &fold(subject), '*', '?')
}

fn glob<T: Copy + PartialEq>(p: &[T], s: &[T], many: T, one: T) -> bool {
    let (mut pi, mut si) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() && (p[pi] == one || (p[pi] != many && p[pi] == s[si])) {
            pi += 1;
            si += 1;
        } else if pi < p.len() && p[pi] == many {
            star = Some((pi, si));
            pi += 1;
        } else if let Some((sp, ss)) = star {
            pi = sp + 1;
            si = ss + 1;
            star = Some((sp, ss + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|c| *c == many)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterAction {
    Include,
    Exclude,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentKind {
    Empty,
    Static,
    Formula,
    DontCare,
}

impl ContentKind {
    pub fn matches(self, content: &CellContent) -> bool {
        match self {
            ContentKind::DontCare => true,
            ContentKind::Empty => matches!(content, CellContent::Empty),
            ContentKind::Static => matches!(content, CellContent::Static { .. }),
            ContentKind::Formula => matches!(content, CellContent::Formula { .. }),
        }
    }

    fn token(self) -> &'static str {
        match self {
            ContentKind::Empty => "empty",
            ContentKind::Static => "static",
            ContentKind::Formula => "formula",
            ContentKind::DontCare => "any",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "empty" => ContentKind::Empty,
            "static" => ContentKind::Static,
            "formula" => ContentKind::Formula,
            "any" | "dont-care" => ContentKind::DontCare,
            _ => return None,
        })
    }
}

/// Inclusive rectangle, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Rect {
    pub start_column: u32,
    pub start_row: u32,
    pub end_column: u32,
    pub end_row: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "field", rename_all = "kebab-case")]
pub enum Predicate {
    Author {
        pattern: String,
        ignore_case: bool,
    },
    DateRange {
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    },
    CellRange {
        sheet: Option<String>,
        rect: Rect,
    },
    ContentTransition {
        before: ContentKind,
        after: ContentKind,
    },
    KindIs {
        kind: ChangeKind,
    },
}

impl Predicate {
    /// Whether the predicate holds for `record`. Cell-range and content
    /// predicates never hold for structural records.
    pub fn holds(&self, record: &ChangeRecord) -> bool {
        match self {
            Predicate::Author {
                pattern,
                ignore_case,
            } => match_wildcard(pattern, &record.author, *ignore_case),
            Predicate::DateRange { from, to } => {
                let day = record.timestamp.date();
                from.is_none_or(|f| day >= f) && to.is_none_or(|t| day <= t)
            }
            Predicate::CellRange { sheet, rect } => record.address().is_some_and(|a| {
                sheet
                    .as_deref()
                    .is_none_or(|p| match_wildcard(p, &a.sheet, false))
                    && (rect.start_column..=rect.end_column).contains(&a.column)
                    && (rect.start_row..=rect.end_row).contains(&a.row)
            }),
            Predicate::ContentTransition { before, after } => {
                record.kind == ChangeKind::CellContent
                    && before.matches(&record.before)
                    && after.matches(&record.after)
            }
            Predicate::KindIs { kind } => record.kind == *kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterSpec {
    pub action: FilterAction,
    #[serde(flatten)]
    pub predicate: Predicate,
}

impl FilterSpec {
    pub fn include(predicate: Predicate) -> Self {
        FilterSpec {
            action: FilterAction::Include,
            predicate,
        }
    }

    pub fn exclude(predicate: Predicate) -> Self {
        FilterSpec {
            action: FilterAction::Exclude,
            predicate,
        }
    }

    pub fn disabled(mut self) -> Self {
        self.action = FilterAction::Disabled;
        self
    }

    /// The "initial entries" filter: anything typed into a blank cell.
    pub fn exclude_initial_entries() -> Self {
        FilterSpec::exclude(Predicate::ContentTransition {
            before: ContentKind::Empty,
            after: ContentKind::DontCare,
        })
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        match &self.predicate {
            Predicate::DateRange {
                from: Some(f),
                to: Some(t),
            } if f > t => Err(FilterError::Invalid(format!(
                "date range {f}..{t} is reversed"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("invalid filter: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> FilterError {
    FilterError::Invalid(msg.into())
}

/// Whether `spec`'s predicate holds for `record` (action is not applied).
pub fn eval_filter(spec: &FilterSpec, record: &ChangeRecord) -> bool {
    spec.predicate.holds(record)
}

/// Records passing every enabled include and no enabled exclude, in order.
pub fn apply_filters<'a>(
    specs: &[FilterSpec],
    workbook: &'a Workbook,
) -> Result<Vec<&'a ChangeRecord>, FilterError> {
    filter_records(specs, &workbook.changes)
}

pub fn filter_records<'a>(
    specs: &[FilterSpec],
    records: &'a [ChangeRecord],
) -> Result<Vec<&'a ChangeRecord>, FilterError> {
    for spec in specs {
        spec.validate()?;
    }
    Ok(records
        .iter()
        .filter(|r| {
            specs.iter().all(|s| match s.action {
                FilterAction::Include => s.predicate.holds(r),
                FilterAction::Exclude => !s.predicate.holds(r),
                FilterAction::Disabled => true,
            })
        })
        .collect())
}

fn parse_date(s: &str) -> Result<Option<NaiveDate>, FilterError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(Some)
        .map_err(|_| invalid(format!("bad date {s:?}, expected YYYY-MM-DD")))
}

fn parse_rect(s: &str) -> Result<Rect, FilterError> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let bad = || invalid(format!("bad cell range {s:?}"));
    let strip = |t: &str| t.trim().replace('$', "");
    let (c1, r1) = parse_a1(&strip(a)).ok_or_else(bad)?;
    let (c2, r2) = parse_a1(&strip(b)).ok_or_else(bad)?;
    Ok(Rect {
        start_column: c1.min(c2),
        start_row: r1.min(r2),
        end_column: c1.max(c2),
        end_row: r1.max(r2),
    })
}

impl FromStr for FilterSpec {
    type Err = FilterError;

    /// `+author=J* Doe,ci`, `-transition=empty->any`, `+date=2001-12-24..2002-01-01`,
    /// `+range=Cash Flow!B11:N18`, `+kind=row-insert`; a leading `~` disables.
    fn from_str(text: &str) -> Result<Self, FilterError> {
        let text = text.trim();
        let mut chars = text.chars();
        let action = match chars.next() {
            Some('+') => FilterAction::Include,
            Some('-') => FilterAction::Exclude,
            Some('~') => FilterAction::Disabled,
            _ => return Err(invalid(format!("{text:?} must start with '+' or '-'"))),
        };
        let body = chars.as_str();
        let (field, value) = body
            .split_once('=')
            .ok_or_else(|| invalid(format!("{text:?} has no '='")))?;
        let predicate = match field.trim() {
            "author" => {
                let (pattern, ignore_case) = match value.strip_suffix(",ci") {
                    Some(p) => (p, true),
                    None => (value, false),
                };
                Predicate::Author {
                    pattern: pattern.to_owned(),
                    ignore_case,
                }
            }
            "date" => {
                let (from, to) = value.split_once("..").unwrap_or((value, value));
                Predicate::DateRange {
                    from: parse_date(from)?,
                    to: parse_date(to)?,
                }
            }
            "range" => {
                let (sheet, cells) = match value.rsplit_once('!') {
                    Some((s, c)) => (Some(s.trim_matches('\'').to_owned()), c),
                    None => (None, value),
                };
                Predicate::CellRange {
                    sheet,
                    rect: parse_rect(cells)?,
                }
            }
            "transition" => {
                let (b, a) = value
                    .split_once("->")
                    .ok_or_else(|| invalid(format!("transition {value:?} needs '->'")))?;
                let kind = |t: &str| {
                    ContentKind::from_token(t.trim())
                        .ok_or_else(|| invalid(format!("unknown content kind {t:?}")))
                };
                Predicate::ContentTransition {
                    before: kind(b)?,
                    after: kind(a)?,
                }
            }
            "kind" => Predicate::KindIs {
                kind: ChangeKind::from_code(value.trim())
                    .ok_or_else(|| invalid(format!("unknown change kind {value:?}")))?,
            },
            other => return Err(invalid(format!("unknown filter field {other:?}"))),
        };
        let spec = FilterSpec { action, predicate };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.action {
            FilterAction::Include => "+",
            FilterAction::Exclude => "-",
            FilterAction::Disabled => "~",
        })?;
        match &self.predicate {
            Predicate::Author {
                pattern,
                ignore_case,
            } => write!(
                f,
                "author={pattern}{}",
                if *ignore_case { ",ci" } else { "" }
            ),
            Predicate::DateRange { from, to } => {
                let d = |d: &Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
                write!(f, "date={}..{}", d(from), d(to))
            }
            Predicate::CellRange { sheet, rect } => {
                f.write_str("range=")?;
                if let Some(s) = sheet {
                    write!(f, "{s}!")?;
                }
                write!(
                    f,
                    "{}{}:{}{}",
                    column_name(rect.start_column),
                    rect.start_row + 1,
                    column_name(rect.end_column),
                    rect.end_row + 1
                )
            }
            Predicate::ContentTransition { before, after } => {
                write!(f, "transition={}->{}", before.token(), after.token())
            }
            Predicate::KindIs { kind } => write!(f, "kind={}", kind.code()),
        }
    }
}

/// Counts over a record list.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub by_kind: BTreeMap<ChangeKind, usize>,
    pub by_author: BTreeMap<String, usize>,
    pub by_date: BTreeMap<NaiveDate, usize>,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
}

pub fn summarize<'a>(records: impl IntoIterator<Item = &'a ChangeRecord>) -> Summary {
    let mut s = Summary::default();
    for r in records {
        s.total += 1;
        *s.by_kind.entry(r.kind).or_default() += 1;
        *s.by_author.entry(r.author.clone()).or_default() += 1;
        *s.by_date.entry(r.timestamp.date()).or_default() += 1;
    }
    s.first_date = s.by_date.keys().next().copied();
    s.last_date = s.by_date.keys().next_back().copied();
    s
}
