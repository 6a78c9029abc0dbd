//! Cell content as stored in the document: empty, a typed static value, or a
//! formula with its last cached result.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Float,
    Currency,
    Percentage,
    String,
    Date,
    Boolean,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Float => "float",
            ValueType::Currency => "currency",
            ValueType::Percentage => "percentage",
            ValueType::String => "string",
            ValueType::Date => "date",
            ValueType::Boolean => "boolean",
        }
    }

    /// Maps an ODF `value-type`. `time` values are kept with dates.
    pub fn from_odf(s: &str) -> Option<Self> {
        Some(match s {
            "float" => ValueType::Float,
            "currency" => ValueType::Currency,
            "percentage" => ValueType::Percentage,
            "string" => ValueType::String,
            "date" | "time" => ValueType::Date,
            "boolean" => ValueType::Boolean,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ValueType::Float | ValueType::Currency | ValueType::Percentage
        )
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed literal. `numeric` is set exactly for the numeric value types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticValue {
    pub value_type: ValueType,
    pub lexical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency_code: Option<String>,
}

impl StaticValue {
    pub fn float(v: f64) -> Self {
        StaticValue {
            value_type: ValueType::Float,
            lexical: format_number(v),
            numeric: Some(v),
            currency_code: None,
        }
    }

    pub fn currency(v: f64, code: impl Into<String>) -> Self {
        StaticValue {
            value_type: ValueType::Currency,
            lexical: format_number(v),
            numeric: Some(v),
            currency_code: Some(code.into()),
        }
    }

    pub fn percentage(v: f64) -> Self {
        StaticValue {
            value_type: ValueType::Percentage,
            lexical: format_number(v),
            numeric: Some(v),
            currency_code: None,
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        StaticValue {
            value_type: ValueType::String,
            lexical: s.into(),
            numeric: None,
            currency_code: None,
        }
    }

    pub fn boolean(b: bool) -> Self {
        StaticValue {
            value_type: ValueType::Boolean,
            lexical: if b { "true" } else { "false" }.into(),
            numeric: None,
            currency_code: None,
        }
    }

    pub fn date(lexical: impl Into<String>) -> Self {
        StaticValue {
            value_type: ValueType::Date,
            lexical: lexical.into(),
            numeric: None,
            currency_code: None,
        }
    }

    /// Human form: `$5,150`, `5%`, `Travel`.
    pub fn display(&self) -> String {
        match (self.value_type, self.numeric) {
            (ValueType::Currency, Some(v)) => format_currency(v, self.currency_code.as_deref()),
            (ValueType::Percentage, Some(v)) => {
                format!("{}%", format_number((v * 100.0 * 1e9).round() / 1e9))
            }
            _ => self.lexical.clone(),
        }
    }
}

/// A formula's last computed value as saved by the host application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CachedResult {
    Value(StaticValue),
    Error { token: String },
}

impl CachedResult {
    pub fn is_numeric(&self) -> bool {
        matches!(self, CachedResult::Value(v) if v.numeric.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CellContent {
    #[default]
    Empty,
    Static {
        value: StaticValue,
    },
    Formula {
        /// Canonical source, always starting with `=`.
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cached: Option<CachedResult>,
    },
}

impl CellContent {
    pub fn static_value(value: StaticValue) -> Self {
        CellContent::Static { value }
    }

    pub fn formula(source: impl Into<String>, cached: Option<CachedResult>) -> Self {
        CellContent::Formula {
            source: source.into(),
            cached,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellContent::Empty)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CellContent::Empty => "empty",
            CellContent::Static { .. } => "static",
            CellContent::Formula { .. } => "formula",
        }
    }

    /// Numeric static value, or a formula whose cached result is numeric or unknown.
    pub fn is_numeric_like(&self) -> bool {
        match self {
            CellContent::Empty => false,
            CellContent::Static { value } => value.numeric.is_some(),
            CellContent::Formula { cached, .. } => cached.as_ref().is_none_or(|c| c.is_numeric()),
        }
    }

    /// Plain text of the cell: formula source or the literal's lexical form.
    pub fn plain_text(&self) -> String {
        match self {
            CellContent::Empty => String::new(),
            CellContent::Static { value } => value.lexical.clone(),
            CellContent::Formula { source, .. } => source.clone(),
        }
    }

    /// `<empty>`, `Travel (string)`, `=K8-K18-K20 {$5,150 (currency)}`.
    pub fn render(&self) -> String {
        match self {
            CellContent::Empty => "<empty>".into(),
            CellContent::Static { value } => format!("{} ({})", value.display(), value.value_type),
            CellContent::Formula { source, cached } => match cached {
                None => source.clone(),
                Some(CachedResult::Value(v)) => {
                    format!("{source} {{{} ({})}}", v.display(), v.value_type)
                }
                Some(CachedResult::Error { token }) => format!("{source} {{{token} (error)}}"),
            },
        }
    }
}

/// Shortest round-tripping decimal form, never in exponent notation.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

fn currency_symbol(code: &str) -> Option<&'static str> {
    Some(match code {
        "USD" | "CAD" | "AUD" | "NZD" => "$",
        "EUR" => "\u{20ac}",
        "GBP" => "\u{a3}",
        "JPY" => "\u{a5}",
        _ => return None,
    })
}

fn group_thousands(digits: &str) -> String {
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// `-$139,850`; unknown codes render as `CHF 12.50`.
pub fn format_currency(v: f64, code: Option<&str>) -> String {
    let negative = v < 0.0;
    let abs = v.abs();
    let amount = if abs.fract() == 0.0 && abs < 1e15 {
        group_thousands(&format!("{abs:.0}"))
    } else {
        let text = format!("{abs:.2}");
        let (int, frac) = text.split_once('.').expect("fixed precision");
        format!("{}.{frac}", group_thousands(int))
    };
    let sign = if negative { "-" } else { "" };
    match code.and_then(currency_symbol) {
        Some(sym) => format!("{sign}{sym}{amount}"),
        None => match code {
            Some(code) => format!("{code} {sign}{amount}"),
            None => format!("{sign}{amount}"),
        },
    }
}
