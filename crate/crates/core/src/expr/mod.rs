//! Transformation expressions: the `P` in an explanation `(origin, P)`.
//!
//! Five families cover everything the explainers produce: linear models over
//! (possibly extended) features, decision trees, row-removal predicates,
//! string programs, and rule markers. Expressions evaluate over a table,
//! serialize to a canonical text grammar (see `docs/expression-grammar.md`),
//! and render in a compact human-readable form.

mod eval;
mod metrics;
mod parse;
mod render;

pub use eval::{apply_string_op, eval_expr, eval_feature, eval_predicate, eval_program, program_columns};
pub use metrics::{concentration, conciseness, total_explainability};
pub use parse::parse_expr;
pub use render::{pretty_feature, render_expr, ser_feature, serialize_expr};

use crate::value::Value;
use serde::{Deserialize, Serialize};

/// Whole-column aggregate operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggOp {
    Sum,
    Mean,
    Max,
    Min,
    /// max − min; lets min-max normalization stay symbolic.
    Range,
    Count,
}

impl AggOp {
    pub const ALL: [AggOp; 6] = [AggOp::Sum, AggOp::Mean, AggOp::Max, AggOp::Min, AggOp::Range, AggOp::Count];

    pub fn name(&self) -> &'static str {
        match self {
            AggOp::Sum => "sum",
            AggOp::Mean => "mean",
            AggOp::Max => "max",
            AggOp::Min => "min",
            AggOp::Range => "range",
            AggOp::Count => "count",
        }
    }

    pub fn apply(&self, xs: &[f64]) -> Option<f64> {
        if xs.is_empty() {
            return if *self == AggOp::Count { Some(0.0) } else { None };
        }
        Some(match self {
            AggOp::Sum => xs.iter().sum(),
            AggOp::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            AggOp::Max => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            AggOp::Min => xs.iter().cloned().fold(f64::INFINITY, f64::min),
            AggOp::Range => {
                let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                mx - mn
            }
            AggOp::Count => xs.len() as f64,
        })
    }
}

/// Unary mathematical operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MathOp {
    Log,
    Sqrt,
    Reciprocal,
    Exp,
}

impl MathOp {
    pub const ALL: [MathOp; 4] = [MathOp::Log, MathOp::Sqrt, MathOp::Reciprocal, MathOp::Exp];

    pub fn name(&self) -> &'static str {
        match self {
            MathOp::Log => "log",
            MathOp::Sqrt => "sqrt",
            MathOp::Reciprocal => "reciprocal",
            MathOp::Exp => "exp",
        }
    }

    /// Out-of-domain inputs yield `None` (becomes `Missing`).
    pub fn apply(&self, x: f64) -> Option<f64> {
        let y = match self {
            MathOp::Log => {
                if x <= 0.0 {
                    return None;
                }
                x.ln()
            }
            MathOp::Sqrt => {
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            MathOp::Reciprocal => {
                if x == 0.0 {
                    return None;
                }
                1.0 / x
            }
            MathOp::Exp => x.exp(),
        };
        y.is_finite().then_some(y)
    }
}

/// A text pattern for count/contains features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// Non-overlapping substring occurrences.
    Literal(String),
    /// Number of ASCII digit characters.
    Digits,
}

impl Pattern {
    pub fn count_in(&self, s: &str) -> usize {
        match self {
            Pattern::Literal(p) => {
                if p.is_empty() {
                    0
                } else {
                    s.matches(p.as_str()).count()
                }
            }
            Pattern::Digits => s.chars().filter(|c| c.is_ascii_digit()).count(),
        }
    }
}

/// A derived feature: a base attribute plus an extension chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureRef {
    Attr(String),
    Pow(Box<FeatureRef>, u32),
    Product(Box<FeatureRef>, Box<FeatureRef>),
    Quotient(Box<FeatureRef>, Box<FeatureRef>),
    Math(MathOp, Box<FeatureRef>),
    /// Aggregate over the whole column, broadcast to every tuple.
    Agg(AggOp, Box<FeatureRef>),
    /// Aggregate within groups keyed by `by` attributes, broadcast to
    /// group members.
    GroupAgg(AggOp, Box<FeatureRef>, Vec<String>),
    /// Indicator: 1 when `attr` equals `category`, else 0.
    OneHot(String, String),
    CountPat(String, Pattern),
    ContainsPat(String, Pattern),
    Length(String),
}

impl FeatureRef {
    pub fn attr(id: impl Into<String>) -> FeatureRef {
        FeatureRef::Attr(id.into())
    }

    /// Base attributes this feature reads.
    pub fn base_attrs(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out.dedup();
        out
    }

    fn collect_attrs(&self, out: &mut Vec<String>) {
        match self {
            FeatureRef::Attr(a) | FeatureRef::OneHot(a, _) | FeatureRef::Length(a) => {
                out.push(a.clone())
            }
            FeatureRef::CountPat(a, _) | FeatureRef::ContainsPat(a, _) => out.push(a.clone()),
            FeatureRef::Pow(f, _) | FeatureRef::Math(_, f) | FeatureRef::Agg(_, f) => {
                f.collect_attrs(out)
            }
            FeatureRef::GroupAgg(_, f, by) => {
                f.collect_attrs(out);
                out.extend(by.iter().cloned());
            }
            FeatureRef::Product(a, b) | FeatureRef::Quotient(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
        }
    }

    /// Nesting depth of the extension chain (a raw attribute is 0).
    pub fn depth(&self) -> usize {
        match self {
            FeatureRef::Attr(_) => 0,
            FeatureRef::OneHot(..)
            | FeatureRef::CountPat(..)
            | FeatureRef::ContainsPat(..)
            | FeatureRef::Length(_) => 1,
            FeatureRef::Pow(f, _) | FeatureRef::Math(_, f) | FeatureRef::Agg(_, f) => 1 + f.depth(),
            FeatureRef::GroupAgg(_, f, _) => 1 + f.depth(),
            FeatureRef::Product(a, b) | FeatureRef::Quotient(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// A sparse linear model over features. Terms are `(coefficient, feature)`;
/// coefficients are finite by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LinearExpr {
    pub terms: Vec<(f64, FeatureRef)>,
    pub intercept: f64,
}

impl LinearExpr {
    pub fn single(coef: f64, feature: FeatureRef) -> LinearExpr {
        LinearExpr { terms: vec![(coef, feature)], intercept: 0.0 }
    }
}

/// Leaf label of a row-removal predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowAction {
    Remove,
    Maintain,
}

/// A binary decision tree; `L` is the leaf label type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<L> {
    Leaf(L),
    /// `le` is taken when `feature ≤ threshold`, `gt` otherwise.
    SplitNum { feature: FeatureRef, threshold: f64, le: Box<TreeNode<L>>, gt: Box<TreeNode<L>> },
    /// `eq` is taken when `attr = category`, `ne` otherwise.
    SplitEq { attr: String, category: String, eq: Box<TreeNode<L>>, ne: Box<TreeNode<L>> },
}

impl<L> TreeNode<L> {
    pub fn n_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::SplitNum { le, gt, .. } => 1 + le.n_nodes() + gt.n_nodes(),
            TreeNode::SplitEq { eq, ne, .. } => 1 + eq.n_nodes() + ne.n_nodes(),
        }
    }

    pub fn n_internal(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::SplitNum { le, gt, .. } => 1 + le.n_internal() + gt.n_internal(),
            TreeNode::SplitEq { eq, ne, .. } => 1 + eq.n_internal() + ne.n_internal(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_nodes() - self.n_internal()
    }
}

/// One step of a string program. Column indices refer to the current state;
/// indices shift after drops and merges. All ops pass `Missing` through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StringOp {
    /// Replace column `col` with (text before first `delim`, text after).
    Split { col: usize, delim: String },
    /// Concatenate column `col` and `col + 1` with `sep`.
    Merge { col: usize, sep: String },
    Drop { col: usize },
    /// Character slice `[start, end)`, clamped.
    Substring { col: usize, start: usize, end: usize },
    Lower { col: usize },
    Upper { col: usize },
    StripPunct { col: usize },
    StripDigits { col: usize },
    StripHtml { col: usize },
    RemoveStopwords { col: usize },
    Stem { col: usize },
    Trim { col: usize },
}

/// An ordered list of string ops applied to the origin column(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StringProgram {
    pub steps: Vec<StringOp>,
}

/// Rule kinds for marker explanations (removals, additions, outliers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerKind {
    ContainsMissing,
    DuplicateOf,
    OverlapsWith,
    DeterminedBy,
    OutlierZ,
    OutlierIqr,
    BootstrappedFrom,
}

impl MarkerKind {
    pub fn name(&self) -> &'static str {
        match self {
            MarkerKind::ContainsMissing => "contains-missing",
            MarkerKind::DuplicateOf => "duplicate-of",
            MarkerKind::OverlapsWith => "overlaps-with",
            MarkerKind::DeterminedBy => "determined-by",
            MarkerKind::OutlierZ => "outlier-z",
            MarkerKind::OutlierIqr => "outlier-iqr",
            MarkerKind::BootstrappedFrom => "bootstrapped-from",
        }
    }
}

/// A rule-based explanation: the kind plus the attributes/tuples it refers
/// to and an optional threshold parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub refs: Vec<String>,
    pub param: Option<f64>,
}

impl Marker {
    pub fn new(kind: MarkerKind) -> Marker {
        Marker { kind, refs: vec![], param: None }
    }

    pub fn with_refs(kind: MarkerKind, refs: Vec<String>) -> Marker {
        Marker { kind, refs, param: None }
    }
}

/// A transformation expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformExpr {
    Linear(LinearExpr),
    Tree(TreeNode<Value>),
    Predicate(TreeNode<RowAction>),
    Program(StringProgram),
    Marker(Marker),
}

impl TransformExpr {
    pub fn is_marker(&self) -> bool {
        matches!(self, TransformExpr::Marker(_))
    }
}
