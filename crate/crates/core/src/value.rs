//! Cell values and semantic column types.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A single cell value. `Missing` is a first-class variant: it is distinct
/// from the empty string and from NaN-as-a-number (NaN and non-finite
/// numbers normalize to `Missing` on input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Missing,
    Number(f64),
    Text(String),
    Bool(bool),
}

/// Column-level feature type, in the machine-learning sense. Mixed-type
/// columns are textual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SemanticType {
    Numeric,
    Categorical,
    Textual,
}

impl Value {
    /// Parse a raw CSV cell. Empty cells and NaN spellings become `Missing`;
    /// numbers must be finite; `true`/`false` become booleans.
    pub fn parse_cell(s: &str) -> Value {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("nan") {
            return Value::Missing;
        }
        if let Ok(n) = t.parse::<f64>() {
            return if n.is_finite() { Value::Number(n) } else { Value::Missing };
        }
        if t.eq_ignore_ascii_case("true") {
            return Value::Bool(true);
        }
        if t.eq_ignore_ascii_case("false") {
            return Value::Bool(false);
        }
        Value::Text(s.to_string())
    }

    /// Render for CSV output. Inverse of `parse_cell` for loader-produced
    /// values (`Missing` round-trips through the empty cell).
    pub fn render_cell(&self) -> String {
        match self {
            Value::Missing => String::new(),
            Value::Number(n) => fmt_f64(*n),
            Value::Text(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Text rendering for string-program input: numbers and bools stringify,
    /// `Missing` stays `None`.
    pub fn to_text_cell(&self) -> Option<String> {
        match self {
            Value::Missing => None,
            Value::Text(s) => Some(s.clone()),
            Value::Number(n) => Some(fmt_f64(*n)),
            Value::Bool(b) => Some(b.to_string()),
        }
    }

    /// Hashable key for grouping and dependency checks. Missing keys are
    /// equal to each other; `-0.0` normalizes to `0.0`.
    pub fn key(&self) -> ValueKey {
        match self {
            Value::Missing => ValueKey::Missing,
            Value::Number(n) => {
                let n = if *n == 0.0 { 0.0 } else { *n };
                ValueKey::Number(n.to_bits())
            }
            Value::Text(s) => ValueKey::Text(s.clone()),
            Value::Bool(b) => ValueKey::Bool(*b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render_cell())
    }
}

/// Canonical hashable form of a `Value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueKey {
    Missing,
    Number(u64),
    Text(String),
    Bool(bool),
}

/// Shortest round-trip rendering of an f64 (Rust's `Display` guarantees
/// the shortest string that parses back to the same bits).
pub fn fmt_f64(n: f64) -> String {
    format!("{n}")
}

/// Round to `sig` significant decimal digits. Used for human-readable
/// rendering only; evaluation always uses full precision.
pub fn round_sig(n: f64, sig: u32) -> f64 {
    if n == 0.0 || !n.is_finite() {
        return n;
    }
    let mag = n.abs().log10().floor() as i32;
    let factor = 10f64.powi(sig as i32 - 1 - mag);
    (n * factor).round() / factor
}

/// Tolerance-based numeric equality against a goal value `y`:
/// `|pred - y| <= max(1e-6, 1e-6 * |y|)`.
pub fn numbers_match(pred: f64, goal: f64) -> bool {
    (pred - goal).abs() <= 1e-6f64.max(1e-6 * goal.abs())
}

/// Value equality as used by the validity metric: Missing equals Missing,
/// numbers compare with tolerance relative to the goal, everything else is
/// exact and type-strict.
pub fn values_match(pred: &Value, goal: &Value) -> bool {
    match (pred, goal) {
        (Value::Missing, Value::Missing) => true,
        (Value::Number(p), Value::Number(g)) => numbers_match(*p, *g),
        (Value::Text(p), Value::Text(g)) => p == g,
        (Value::Bool(p), Value::Bool(g)) => p == g,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_and_empty_normalize_to_missing() {
        assert_eq!(Value::parse_cell("NaN"), Value::Missing);
        assert_eq!(Value::parse_cell("nan"), Value::Missing);
        assert_eq!(Value::parse_cell(""), Value::Missing);
        assert_eq!(Value::parse_cell("  "), Value::Missing);
        assert_eq!(Value::parse_cell("1e999"), Value::Missing);
    }

    #[test]
    fn numbers_and_bools_parse() {
        assert_eq!(Value::parse_cell("7.6"), Value::Number(7.6));
        assert_eq!(Value::parse_cell("-3"), Value::Number(-3.0));
        assert_eq!(Value::parse_cell("True"), Value::Bool(true));
        assert_eq!(Value::parse_cell("Drama"), Value::Text("Drama".into()));
    }

    #[test]
    fn cell_round_trip() {
        for v in [
            Value::Missing,
            Value::Number(0.016666666666666666),
            Value::Number(1.0),
            Value::Bool(false),
            Value::Text("Moana (U)".into()),
        ] {
            assert_eq!(Value::parse_cell(&v.render_cell()), v);
        }
    }

    #[test]
    fn tolerance_equality_is_relative_to_goal() {
        assert!(values_match(&Value::Number(1.0 + 5e-7), &Value::Number(1.0)));
        assert!(!values_match(&Value::Number(1.01), &Value::Number(1.0)));
        assert!(values_match(&Value::Missing, &Value::Missing));
        assert!(!values_match(&Value::Text("1".into()), &Value::Number(1.0)));
    }

    #[test]
    fn sig_rounding() {
        assert_eq!(round_sig(0.016666666666666666, 6), 0.0166667);
        assert_eq!(round_sig(123456789.0, 6), 123457000.0);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }
}
