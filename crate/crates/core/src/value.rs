//! Typed attribute/qualifier values and their total comparison semantics.
//!
//! A value is one of four types: string, quantity (number plus unit), calendar
//! date, or year. Comparisons never fail; pairs that cannot be meaningfully
//! compared simply yield `false`.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};

/// The dimensionless unit. A bare number is a quantity with this unit.
pub const UNITLESS: &str = "1";

/// Comparison operator usable on any pair of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CompareOp {
    /// The token used in program text and SPARQL filters.
    pub fn token(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok.trim() {
            "=" => Some(CompareOp::Eq),
            "!=" | "\u{2260}" => Some(CompareOp::Ne),
            "<" => Some(CompareOp::Lt),
            ">" => Some(CompareOp::Gt),
            _ => None,
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A typed literal value.
#[derive(Debug, Clone)]
pub enum Value {
    String(String),
    Quantity { magnitude: f64, unit: String },
    Date(NaiveDate),
    Year(i64),
}

impl Value {
    pub fn quantity(magnitude: f64, unit: impl Into<String>) -> Self {
        Value::Quantity {
            magnitude,
            unit: unit.into(),
        }
    }

    pub fn number(magnitude: f64) -> Self {
        Value::quantity(magnitude, UNITLESS)
    }

    pub fn string(s: impl Into<String>) -> Self {
        Value::String(s.into())
    }

    pub fn date(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(Value::Date)
    }

    pub fn type_name(&self) -> ValueType {
        match self {
            Value::String(_) => ValueType::String,
            Value::Quantity { .. } => ValueType::Quantity,
            Value::Date(_) => ValueType::Date,
            Value::Year(_) => ValueType::Year,
        }
    }

    pub fn as_quantity(&self) -> Option<(f64, &str)> {
        match self {
            Value::Quantity { magnitude, unit } => Some((*magnitude, unit)),
            _ => None,
        }
    }

    /// Canonical text form: what answers, choices, and program arguments use.
    /// Quantities render as `magnitude unit` with the unitless unit omitted;
    /// dates are ISO; no digit grouping anywhere.
    pub fn render(&self) -> String {
        match self {
            Value::String(s) => s.clone(),
            Value::Quantity { magnitude, unit } => {
                if unit == UNITLESS {
                    render_number(*magnitude)
                } else {
                    format!("{} {}", render_number(*magnitude), unit)
                }
            }
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::Year(y) => y.to_string(),
        }
    }

    /// Display form for canonical question text: integer magnitudes of five or
    /// more digits gain thousands separators and units are pluralized, e.g.
    /// `3,000,000` and `206 centimetres`.
    pub fn render_surface(&self) -> String {
        match self {
            Value::Quantity { magnitude, unit } => {
                let num = group_digits(&render_number(*magnitude));
                if unit == UNITLESS {
                    num
                } else {
                    format!("{} {}", num, pluralize_unit(unit, *magnitude))
                }
            }
            other => other.render(),
        }
    }

    /// Total order used for deterministic sorting (not for semantics).
    pub fn sort_key_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::String(_) => 0,
                Value::Quantity { .. } => 1,
                Value::Year(_) => 2,
                Value::Date(_) => 3,
            }
        }
        rank(self).cmp(&rank(other)).then_with(|| match (self, other) {
            (Value::String(a), Value::String(b)) => a.cmp(b),
            (
                Value::Quantity {
                    magnitude: m1,
                    unit: u1,
                },
                Value::Quantity {
                    magnitude: m2,
                    unit: u2,
                },
            ) => u1.cmp(u2).then(m1.total_cmp(m2)),
            (Value::Year(a), Value::Year(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => Ordering::Equal,
        })
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.sort_key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key_cmp(other)
    }
}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Value::String(s) => {
                0u8.hash(state);
                s.hash(state);
            }
            Value::Quantity { magnitude, unit } => {
                1u8.hash(state);
                magnitude.to_bits().hash(state);
                unit.hash(state);
            }
            Value::Date(d) => {
                2u8.hash(state);
                d.hash(state);
            }
            Value::Year(y) => {
                3u8.hash(state);
                y.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Value kinds, used to index which types a key has been seen with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    String,
    Quantity,
    Date,
    Year,
}

/// Total comparison of two values.
///
/// - strings: trimmed exact equality; `<`/`>` are always false
/// - quantities: magnitudes compared only under identical units; on a unit
///   mismatch `=`/`<`/`>` are false and `!=` is true
/// - date vs date: calendar order; year vs year: numeric
/// - year vs date (either side): the date's year component is compared
/// - any other cross-type pair: false for every operator
pub fn compare(a: &Value, b: &Value, op: CompareOp) -> bool {
    use CompareOp::*;
    use Value::*;
    match (a, b) {
        (String(x), String(y)) => {
            let eq = x.trim() == y.trim();
            match op {
                Eq => eq,
                Ne => !eq,
                Lt | Gt => false,
            }
        }
        (
            Quantity {
                magnitude: m1,
                unit: u1,
            },
            Quantity {
                magnitude: m2,
                unit: u2,
            },
        ) => {
            if u1 != u2 {
                return op == Ne;
            }
            cmp_ordering(m1.partial_cmp(m2), op)
        }
        (Date(d1), Date(d2)) => cmp_ordering(Some(d1.cmp(d2)), op),
        (Year(y1), Year(y2)) => cmp_ordering(Some(y1.cmp(y2)), op),
        (Year(y), Date(d)) => cmp_ordering(Some(y.cmp(&i64::from(d.year()))), op),
        (Date(d), Year(y)) => cmp_ordering(Some(i64::from(d.year()).cmp(y)), op),
        _ => false,
    }
}

fn cmp_ordering(ord: Option<Ordering>, op: CompareOp) -> bool {
    match ord {
        None => false,
        Some(o) => match op {
            CompareOp::Eq => o == Ordering::Equal,
            CompareOp::Ne => o != Ordering::Equal,
            CompareOp::Lt => o == Ordering::Less,
            CompareOp::Gt => o == Ordering::Greater,
        },
    }
}

/// Error raised when a textual value cannot be read as the requested type.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("cannot parse {text:?} as {expected}")]
pub struct ValueParseError {
    pub text: String,
    pub expected: &'static str,
}

fn parse_err(text: &str, expected: &'static str) -> ValueParseError {
    ValueParseError {
        text: text.to_string(),
        expected,
    }
}

/// Parses a decimal number, accepting thousands separators (`199,110`).
pub fn parse_number(s: &str) -> Result<f64, ValueParseError> {
    let cleaned: String = s.trim().chars().filter(|c| *c != ',').collect();
    if cleaned.is_empty() {
        return Err(parse_err(s, "number"));
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(s, "number")),
    }
}

/// Parses `magnitude unit`; a missing unit means unitless. Multi-word units
/// are kept intact (`20000 United States dollars`).
pub fn parse_quantity(s: &str) -> Result<Value, ValueParseError> {
    let t = s.trim();
    let (num_part, unit_part) = match t.find(char::is_whitespace) {
        Some(ix) => (&t[..ix], t[ix..].trim()),
        None => (t, ""),
    };
    let magnitude = parse_number(num_part)?;
    let unit = if unit_part.is_empty() {
        UNITLESS.to_string()
    } else {
        unit_part.to_string()
    };
    Ok(Value::Quantity { magnitude, unit })
}

pub fn parse_year(s: &str) -> Result<Value, ValueParseError> {
    s.trim()
        .parse::<i64>()
        .map(Value::Year)
        .map_err(|_| parse_err(s, "year"))
}

pub fn parse_date(s: &str) -> Result<Value, ValueParseError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map(Value::Date)
        .map_err(|_| parse_err(s, "date"))
}

/// Best-effort parse for positions whose expected type is unknown:
/// ISO date, then bare (signed) integer as a year, then number-with-unit,
/// then plain string.
pub fn parse_untyped(s: &str) -> Value {
    let t = s.trim();
    if let Ok(v) = parse_date(t) {
        return v;
    }
    if !t.contains(',') && t.parse::<i64>().is_ok() {
        return Value::Year(t.parse().unwrap());
    }
    if let Ok(v) = parse_quantity(t) {
        return v;
    }
    Value::String(t.to_string())
}

/// Renders a magnitude: integral values print without a decimal point.
pub fn render_number(m: f64) -> String {
    if m == m.trunc() && m.abs() < 1e15 {
        format!("{}", m as i64)
    } else {
        format!("{}", m)
    }
}

/// Inserts thousands separators into a plain integer rendering of five or
/// more digits; anything else passes through unchanged.
pub fn group_digits(num: &str) -> String {
    let (sign, digits) = match num.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", num),
    };
    if digits.len() < 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return num.to_string();
    }
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    format!("{sign}{out}")
}

/// Naive plural for unit surface text: `centimetre` -> `centimetres` when the
/// magnitude is not exactly one.
pub fn pluralize_unit(unit: &str, magnitude: f64) -> String {
    if magnitude == 1.0 || unit.ends_with('s') {
        unit.to_string()
    } else {
        format!("{unit}s")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(m: f64) -> Value {
        Value::quantity(m, "centimetre")
    }

    #[test]
    fn compare_quantities_same_unit() {
        assert!(compare(&cm(206.0), &cm(180.0), CompareOp::Gt));
        assert!(!compare(&cm(180.0), &cm(206.0), CompareOp::Gt));
        assert!(compare(&cm(206.0), &cm(206.0), CompareOp::Eq));
    }

    #[test]
    fn compare_unit_mismatch_never_orders() {
        let two_m = Value::quantity(2.0, "metre");
        assert!(!compare(&cm(206.0), &two_m, CompareOp::Gt));
        assert!(!compare(&cm(206.0), &two_m, CompareOp::Lt));
        assert!(!compare(&cm(206.0), &two_m, CompareOp::Eq));
        assert!(compare(&cm(206.0), &two_m, CompareOp::Ne));
    }

    #[test]
    fn compare_year_against_date_uses_year_component() {
        let d = parse_date("1980-06-01").unwrap();
        assert!(compare(&d, &Value::Year(1980), CompareOp::Eq));
        assert!(compare(&Value::Year(1980), &d, CompareOp::Eq));
        assert!(compare(&d, &Value::Year(1979), CompareOp::Gt));
        assert!(compare(&Value::Year(1981), &d, CompareOp::Gt));
    }

    #[test]
    fn compare_strings_trims_and_never_orders() {
        let a = Value::string(" male ");
        let b = Value::string("male");
        assert!(compare(&a, &b, CompareOp::Eq));
        assert!(!compare(&a, &b, CompareOp::Lt));
        assert!(!compare(&a, &b, CompareOp::Gt));
    }

    #[test]
    fn compare_cross_type_is_false_for_all_ops() {
        let s = Value::string("2010");
        let y = Value::Year(2010);
        for op in [CompareOp::Eq, CompareOp::Ne, CompareOp::Lt, CompareOp::Gt] {
            assert!(!compare(&s, &y, op), "{op:?}");
        }
    }

    #[test]
    fn compare_is_exclusive_on_orderings() {
        let pairs = [
            (cm(1.0), cm(2.0)),
            (Value::Year(1999), Value::Year(1999)),
            (parse_date("2001-02-03").unwrap(), Value::Year(2001)),
            (Value::string("a"), Value::string("b")),
        ];
        for (a, b) in pairs {
            assert!(
                !(compare(&a, &b, CompareOp::Lt) && compare(&a, &b, CompareOp::Gt)),
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn numbers_ingest_thousands_separators() {
        assert_eq!(parse_number("199,110").unwrap(), 199110.0);
        assert_eq!(parse_number("3,000,000").unwrap(), 3000000.0);
        assert_eq!(render_number(199110.0), "199110");
    }

    #[test]
    fn quantity_parsing_and_rendering() {
        let v = parse_quantity("206 centimetres").unwrap();
        assert_eq!(v, Value::quantity(206.0, "centimetres"));
        assert_eq!(Value::quantity(206.0, "centimetre").render(), "206 centimetre");
        assert_eq!(Value::number(3500000.0).render(), "3500000");
        assert_eq!(Value::number(3500000.0).render_surface(), "3,500,000");
        assert_eq!(
            Value::quantity(206.0, "centimetre").render_surface(),
            "206 centimetres"
        );
        assert_eq!(
            parse_quantity("20000 United States dollars").unwrap(),
            Value::quantity(20000.0, "United States dollars")
        );
    }

    #[test]
    fn untyped_parse_prefers_date_then_year() {
        assert_eq!(parse_untyped("1980-06-01"), parse_date("1980-06-01").unwrap());
        assert_eq!(parse_untyped("1980"), Value::Year(1980));
        assert_eq!(parse_untyped("-500"), Value::Year(-500));
        assert_eq!(parse_untyped("199,110"), Value::number(199110.0));
        assert_eq!(parse_untyped("206.5"), Value::number(206.5));
        assert_eq!(parse_untyped("male"), Value::string("male"));
    }

    #[test]
    fn invalid_dates_rejected() {
        assert!(parse_date("1980-02-30").is_err());
        assert!(parse_date("1980-13-01").is_err());
        assert!(parse_date("1980-2-3").is_ok());
    }

    #[test]
    fn digit_grouping_threshold() {
        assert_eq!(group_digits("1980"), "1980");
        assert_eq!(group_digits("19801"), "19,801");
        assert_eq!(group_digits("199110"), "199,110");
        assert_eq!(group_digits("-123456"), "-123,456");
    }
}
