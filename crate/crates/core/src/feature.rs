//! Feature matrices: named numeric columns derived from a table, grown by
//! extension families (polynomial, inter-relation, math, aggregate). The
//! explainers fit over these and keep the [`FeatureRef`]s for rendering.

use crate::expr::{eval_feature, AggOp, FeatureRef, MathOp};
use crate::table::Table;

/// One derived column: its symbolic form and its evaluated values.
#[derive(Debug, Clone)]
pub struct FeatureCol {
    pub feature: FeatureRef,
    pub values: Vec<Option<f64>>,
    /// Set when every present value is identical. Constant columns stay
    /// symbolic: aggregate features are constant on the fit table but
    /// re-evaluate on other tables.
    pub constant: Option<f64>,
}

impl FeatureCol {
    pub fn new(feature: FeatureRef, values: Vec<Option<f64>>) -> FeatureCol {
        let mut constant = None;
        let mut present = values.iter().flatten();
        if let Some(&first) = present.next() {
            if present.all(|&v| v == first) {
                constant = Some(first);
            }
        }
        FeatureCol { feature, values, constant }
    }

    pub fn missing_ratio(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        self.values.iter().filter(|v| v.is_none()).count() as f64 / self.values.len() as f64
    }
}

/// The extension families applicable to a numeric origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Poly,
    Inter,
    Math,
    Agg,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Poly, Family::Inter, Family::Math, Family::Agg];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Poly => "poly",
            Family::Inter => "inter",
            Family::Math => "math",
            Family::Agg => "agg",
        }
    }
}

/// An ordered sequence of at most two distinct families. Later families see
/// the columns produced by earlier ones, so `[agg, inter]` contains
/// `A ÷ sum(A)` and `[poly, inter]` contains `A ÷ B²`.
pub type ExtensionSet = Vec<Family>;

/// All extension sets in search order: the bare origin first, then single
/// families, then ordered pairs of distinct families.
pub fn extension_sets() -> Vec<ExtensionSet> {
    let mut out: Vec<ExtensionSet> = vec![vec![]];
    for f in Family::ALL {
        out.push(vec![f]);
    }
    for a in Family::ALL {
        for b in Family::ALL {
            if a != b {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

pub fn extension_set_name(ext: &ExtensionSet) -> String {
    if ext.is_empty() {
        return "baseline".to_string();
    }
    // Composition reads outside-in: the last-applied family wraps the rest.
    let mut name = String::from("O");
    for f in ext {
        name = format!("{}({name})", f.name());
    }
    name
}

/// Bound on feature-count blowup per extension set; inter-relation over a
/// wide accumulated set is quadratic.
const MAX_FEATURES: usize = 600;

/// A named feature matrix over a fixed row count.
#[derive(Debug, Clone, Default)]
pub struct FeatureMatrix {
    pub cols: Vec<FeatureCol>,
    pub n_rows: usize,
}

impl FeatureMatrix {
    pub fn with_rows(n_rows: usize) -> FeatureMatrix {
        FeatureMatrix { cols: vec![], n_rows }
    }

    /// Raw numeric columns of `attrs`, evaluated over `t`.
    pub fn from_attrs(t: &Table, attrs: &[String]) -> FeatureMatrix {
        let mut fm = FeatureMatrix::with_rows(t.n_rows());
        for a in attrs {
            let f = FeatureRef::attr(a.clone());
            if let Ok(values) = eval_feature(&f, t) {
                fm.push(FeatureCol::new(f, values));
            }
        }
        fm
    }

    pub fn push(&mut self, col: FeatureCol) {
        if col.values.len() == self.n_rows && !self.contains(&col.feature) {
            self.cols.push(col);
        }
    }

    pub fn contains(&self, f: &FeatureRef) -> bool {
        self.cols.iter().any(|c| c.feature == *f)
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Apply one extension family over the current columns, appending the
    /// new features. Features that are mostly missing are skipped, as are
    /// duplicates-by-value of an existing column.
    pub fn extend_family(&mut self, family: Family, poly_degree: u32) {
        let base: Vec<FeatureRef> = self.cols.iter().map(|c| c.feature.clone()).collect();
        let mut new_feats: Vec<FeatureRef> = Vec::new();
        match family {
            Family::Poly => {
                for f in &base {
                    for k in 2..=poly_degree.max(2) {
                        new_feats.push(FeatureRef::Pow(Box::new(f.clone()), k));
                    }
                }
            }
            Family::Math => {
                for f in &base {
                    for op in MathOp::ALL {
                        new_feats.push(FeatureRef::Math(op, Box::new(f.clone())));
                    }
                }
            }
            Family::Agg => {
                for f in &base {
                    for op in [AggOp::Sum, AggOp::Mean, AggOp::Max, AggOp::Min, AggOp::Range] {
                        new_feats.push(FeatureRef::Agg(op, Box::new(f.clone())));
                    }
                }
            }
            Family::Inter => {
                for (i, a) in base.iter().enumerate() {
                    for (j, b) in base.iter().enumerate() {
                        if i < j {
                            new_feats.push(FeatureRef::Product(
                                Box::new(a.clone()),
                                Box::new(b.clone()),
                            ));
                        }
                        if i != j {
                            new_feats.push(FeatureRef::Quotient(
                                Box::new(a.clone()),
                                Box::new(b.clone()),
                            ));
                        }
                    }
                }
            }
        }
        self.append_evaluated(new_feats);
    }

    fn append_evaluated(&mut self, feats: Vec<FeatureRef>) {
        for f in feats {
            if self.cols.len() >= MAX_FEATURES {
                return;
            }
            if self.contains(&f) {
                continue;
            }
            let values = match eval_values(&f, &self.cols, self.n_rows) {
                Some(v) => v,
                None => continue,
            };
            let col = FeatureCol::new(f, values);
            if col.missing_ratio() > 0.5 {
                continue;
            }
            if self.duplicate_by_value(&col) {
                continue;
            }
            self.cols.push(col);
        }
    }

    fn duplicate_by_value(&self, col: &FeatureCol) -> bool {
        self.cols.iter().any(|c| c.values == col.values)
    }

    /// Columns usable for regularized fitting (non-constant on this table).
    pub fn varying(&self) -> Vec<&FeatureCol> {
        self.cols.iter().filter(|c| c.constant.is_none()).collect()
    }

    /// Constant-on-this-table columns (aggregates and their arithmetic).
    pub fn constants(&self) -> Vec<&FeatureCol> {
        self.cols.iter().filter(|c| c.constant.is_some()).collect()
    }
}

/// Evaluate a derived feature from already-evaluated parents, avoiding a
/// second pass over the table. Aggregates recompute from the parent column.
fn eval_values(f: &FeatureRef, cols: &[FeatureCol], n_rows: usize) -> Option<Vec<Option<f64>>> {
    let lookup = |g: &FeatureRef| cols.iter().find(|c| c.feature == *g).map(|c| &c.values);
    let fin = |x: f64| x.is_finite().then_some(x);
    match f {
        FeatureRef::Pow(inner, k) => {
            let xs = lookup(inner)?;
            Some(xs.iter().map(|x| x.and_then(|x| fin(x.powi(*k as i32)))).collect())
        }
        FeatureRef::Math(op, inner) => {
            let xs = lookup(inner)?;
            Some(xs.iter().map(|x| x.and_then(|x| op.apply(x))).collect())
        }
        FeatureRef::Agg(op, inner) => {
            let xs = lookup(inner)?;
            let present: Vec<f64> = xs.iter().flatten().copied().collect();
            let agg = op.apply(&present).and_then(fin);
            Some(vec![agg; n_rows])
        }
        FeatureRef::Product(a, b) => {
            let xs = lookup(a)?;
            let ys = lookup(b)?;
            Some(
                xs.iter()
                    .zip(ys)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => fin(x * y),
                        _ => None,
                    })
                    .collect(),
            )
        }
        FeatureRef::Quotient(a, b) => {
            let xs = lookup(a)?;
            let ys = lookup(b)?;
            Some(
                xs.iter()
                    .zip(ys)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) if *y != 0.0 => fin(x / y),
                        _ => None,
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn t(attrs: &[&str], rows: &[&[f64]]) -> Table {
        Table::from_rows(
            "t",
            attrs.iter().map(|s| s.to_string()).collect(),
            (0..rows.len()).map(|i| format!("m{}", i + 1)).collect(),
            rows.iter().map(|r| r.iter().map(|x| Value::Number(*x)).collect()).collect(),
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    #[test]
    fn agg_then_inter_contains_sum_normalization_feature() {
        let table = t(&["a3"], &[&[7.6], &[8.2], &[9.0], &[8.6]]);
        let mut fm = FeatureMatrix::from_attrs(&table, &["a3".into()]);
        fm.extend_family(Family::Agg, 2);
        fm.extend_family(Family::Inter, 2);
        let want = FeatureRef::Quotient(
            Box::new(FeatureRef::attr("a3")),
            Box::new(FeatureRef::Agg(AggOp::Sum, Box::new(FeatureRef::attr("a3")))),
        );
        assert!(fm.contains(&want), "features: {}", fm.len());
    }

    #[test]
    fn poly_then_inter_contains_ratio_with_square() {
        let table = t(&["a", "b"], &[&[1.0, 2.0], &[2.0, 3.0], &[3.0, 5.0], &[4.0, 7.0]]);
        let mut fm = FeatureMatrix::from_attrs(&table, &["a".into(), "b".into()]);
        fm.extend_family(Family::Poly, 2);
        fm.extend_family(Family::Inter, 2);
        let want = FeatureRef::Quotient(
            Box::new(FeatureRef::attr("a")),
            Box::new(FeatureRef::Pow(Box::new(FeatureRef::attr("b")), 2)),
        );
        assert!(fm.contains(&want));
    }

    #[test]
    fn poly_with_degree_two_adds_one_column_per_attr() {
        let table = t(&["a"], &[&[1.0], &[2.0], &[3.0]]);
        let mut fm = FeatureMatrix::from_attrs(&table, &["a".into()]);
        let before = fm.len();
        fm.extend_family(Family::Poly, 2);
        assert_eq!(fm.len(), before + 1);
    }

    #[test]
    fn min_max_features_present_for_normalization() {
        let table = t(&["a"], &[&[1.0], &[5.0], &[9.0]]);
        let mut fm = FeatureMatrix::from_attrs(&table, &["a".into()]);
        fm.extend_family(Family::Agg, 2);
        fm.extend_family(Family::Inter, 2);
        let a = FeatureRef::attr("a");
        let range = FeatureRef::Agg(AggOp::Range, Box::new(a.clone()));
        let want = FeatureRef::Quotient(Box::new(a.clone()), Box::new(range.clone()));
        assert!(fm.contains(&want));
        let min_over_range = FeatureRef::Quotient(
            Box::new(FeatureRef::Agg(AggOp::Min, Box::new(a))),
            Box::new(range),
        );
        assert!(fm.contains(&min_over_range));
    }

    #[test]
    fn extension_sets_are_ordered_by_size() {
        let sets = extension_sets();
        assert_eq!(sets[0].len(), 0);
        assert!(sets.iter().take(5).all(|s| s.len() <= 1));
        assert_eq!(sets.len(), 1 + 4 + 12);
        assert_eq!(extension_set_name(&vec![Family::Agg, Family::Inter]), "inter(agg(O))");
    }
}
