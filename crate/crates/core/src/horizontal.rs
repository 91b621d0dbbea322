//! Explanations for removed and added tuples.
//!
//! Each removed tuple is first tried independently: missing values,
//! duplication against the revision, and z/IQR outliers. Whatever remains
//! unexplained is labeled `remove`, the kept tuples `maintain`, and a
//! predicate tree is fitted over numeric plus one-hot-encoded features.
//! Tuples the predicate still misclassifies are idiopathic. Reconstruction
//! applies every produced rule back to the original table and scores the
//! overlap with the actually-removed set.

use crate::categorical::TreeParams;
use crate::encode;
use crate::error::Result;
use crate::expr::{eval_predicate, Marker, MarkerKind, RowAction, TransformExpr, TreeNode};
use crate::feature::{FeatureCol, FeatureMatrix};
use crate::table::{projected_rows_equal, AttributeMatch, ChangeSets, Table};
use crate::value::{SemanticType, Value};
use std::collections::HashSet;

#[derive(Debug, Clone)]
pub struct HorizontalParams {
    pub z_threshold: f64,
    pub iqr_factor: f64,
    pub tree: TreeParams,
    pub onehot_max: usize,
}

impl Default for HorizontalParams {
    fn default() -> Self {
        HorizontalParams {
            z_threshold: 3.0,
            iqr_factor: 1.5,
            tree: TreeParams::default(),
            onehot_max: 20,
        }
    }
}

/// Explanations for one version pair's removed tuples.
#[derive(Debug, Clone, Default)]
pub struct TupleRemovalResult {
    /// Tuple id → first satisfied marker rule.
    pub per_tuple: Vec<(String, Marker)>,
    /// Joint predicate for the tuples no marker covered.
    pub predicate: Option<TransformExpr>,
    /// Removed ids the predicate classifies as `remove`.
    pub predicate_covered: Vec<String>,
    /// Removed ids no rule explains.
    pub idiopathic: Vec<String>,
}

/// Per-column means and population standard deviations over non-missing
/// values of the numeric columns.
fn numeric_stats(t: &Table) -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for c in t.columns() {
        if c.sem_type != SemanticType::Numeric {
            continue;
        }
        let xs: Vec<f64> = t
            .col(&c.id)
            .expect("listed column")
            .iter()
            .filter_map(Value::as_number)
            .collect();
        if xs.len() < 2 {
            continue;
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        out.push((c.id.clone(), mean, var.sqrt()));
    }
    out
}

/// Quartiles by linear interpolation over the sorted non-missing values.
fn quartiles(xs: &mut Vec<f64>) -> Option<(f64, f64)> {
    if xs.len() < 4 {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let idx = p * (xs.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        if lo == hi {
            xs[lo]
        } else {
            xs[lo] + (idx - lo as f64) * (xs[hi] - xs[lo])
        }
    };
    Some((q(0.25), q(0.75)))
}

fn iqr_fences(t: &Table, factor: f64) -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for c in t.columns() {
        if c.sem_type != SemanticType::Numeric {
            continue;
        }
        let mut xs: Vec<f64> = t
            .col(&c.id)
            .expect("listed column")
            .iter()
            .filter_map(Value::as_number)
            .collect();
        if let Some((q1, q3)) = quartiles(&mut xs) {
            let iqr = q3 - q1;
            out.push((c.id.clone(), q1 - factor * iqr, q3 + factor * iqr));
        }
    }
    out
}

fn row_has_missing(t: &Table, row: usize) -> bool {
    t.row(row).iter().any(|v| v.is_missing())
}

/// First marker that explains the removal of `row`, following the fixed
/// order: missing value, surviving duplicate, z outlier, IQR outlier.
fn tuple_marker(
    t: &Table,
    row: usize,
    t2: &Table,
    m: &AttributeMatch,
    stats: &[(String, f64, f64)],
    fences: &[(String, f64, f64)],
    params: &HorizontalParams,
) -> Option<Marker> {
    if row_has_missing(t, row) {
        return Some(Marker::new(MarkerKind::ContainsMissing));
    }
    // A surviving tuple with a different id but identical matched values.
    let own_id = &t.tuple_ids()[row];
    for ri in 0..t2.n_rows() {
        if t2.tuple_ids()[ri] != *own_id && projected_rows_equal(t, row, t2, ri, m) {
            return Some(Marker::with_refs(
                MarkerKind::DuplicateOf,
                vec![t2.tuple_ids()[ri].clone()],
            ));
        }
    }
    for (attr, mean, sd) in stats {
        if *sd <= 0.0 {
            continue;
        }
        if let Some(x) = t.col(attr).ok().and_then(|c| c[row].as_number()) {
            if ((x - mean) / sd).abs() > params.z_threshold {
                return Some(Marker {
                    kind: MarkerKind::OutlierZ,
                    refs: vec![attr.clone()],
                    param: Some(params.z_threshold),
                });
            }
        }
    }
    for (attr, lo, hi) in fences {
        if let Some(x) = t.col(attr).ok().and_then(|c| c[row].as_number()) {
            if x < *lo || x > *hi {
                return Some(Marker {
                    kind: MarkerKind::OutlierIqr,
                    refs: vec![attr.clone()],
                    param: Some(params.iqr_factor),
                });
            }
        }
    }
    None
}

/// Numeric + one-hot feature matrix over all of `t`'s columns, used by the
/// predicate fit and by reconstruction.
fn predicate_features(t: &Table, onehot_max: usize) -> FeatureMatrix {
    let mut fm = FeatureMatrix::with_rows(t.n_rows());
    for c in t.columns() {
        match c.sem_type {
            SemanticType::Numeric => {
                let f = crate::expr::FeatureRef::attr(c.id.clone());
                if let Ok(values) = crate::expr::eval_feature(&f, t) {
                    fm.push(FeatureCol::new(f, values));
                }
            }
            SemanticType::Categorical => {
                if let Ok(cols) = encode::one_hot_features(t, &c.id, onehot_max) {
                    for col in cols {
                        fm.push(col);
                    }
                }
            }
            SemanticType::Textual => {}
        }
    }
    fm
}

/// Explain every removed tuple. Marker-explained tuples never enter the
/// predicate's training set.
pub fn explain_tuple_removal(
    cs: &ChangeSets,
    t: &Table,
    t2: &Table,
    m: &AttributeMatch,
    params: &HorizontalParams,
) -> Result<TupleRemovalResult> {
    let mut result = TupleRemovalResult::default();
    if cs.left_delta_tuples.is_empty() {
        return Ok(result);
    }
    let stats = numeric_stats(t);
    let fences = iqr_fences(t, params.iqr_factor);

    let mut unexplained: Vec<usize> = Vec::new();
    for id in &cs.left_delta_tuples {
        let Some(row) = t.row_index(id) else { continue };
        match tuple_marker(t, row, t2, m, &stats, &fences, params) {
            Some(marker) => result.per_tuple.push((id.clone(), marker)),
            None => unexplained.push(row),
        }
    }
    if unexplained.is_empty() {
        return Ok(result);
    }

    // Joint predicate: unexplained removals vs all kept tuples.
    let kept: Vec<usize> = cs
        .left_nabla_tuples
        .iter()
        .filter_map(|id| t.row_index(id))
        .collect();
    let mut rows: Vec<usize> = unexplained.clone();
    rows.extend(&kept);
    let sub = t.select_rows(&rows);
    let labels: Vec<Value> = (0..rows.len())
        .map(|i| {
            Value::Text(if i < unexplained.len() { "remove" } else { "maintain" }.into())
        })
        .collect();
    let fm = predicate_features(&sub, params.onehot_max);
    if fm.is_empty() {
        result.idiopathic = unexplained
            .iter()
            .map(|&r| t.tuple_ids()[r].clone())
            .collect();
        return Ok(result);
    }
    let tree = crate::categorical::fit_tree(&fm, &labels, &params.tree)?;
    let predicate = to_predicate(tree);
    let decisions = eval_predicate(&predicate, &sub)?;
    for (i, &row) in unexplained.iter().enumerate() {
        let id = t.tuple_ids()[row].clone();
        if decisions[i] == Some(RowAction::Remove) {
            result.predicate_covered.push(id);
        } else {
            result.idiopathic.push(id);
        }
    }
    if !result.predicate_covered.is_empty() {
        result.predicate = Some(TransformExpr::Predicate(predicate));
    }
    Ok(result)
}

fn to_predicate(tree: TreeNode<Value>) -> TreeNode<RowAction> {
    match tree {
        TreeNode::Leaf(v) => TreeNode::Leaf(if v.to_text_cell().as_deref() == Some("remove") {
            RowAction::Remove
        } else {
            RowAction::Maintain
        }),
        TreeNode::SplitNum { feature, threshold, le, gt } => TreeNode::SplitNum {
            feature,
            threshold,
            le: Box::new(to_predicate(*le)),
            gt: Box::new(to_predicate(*gt)),
        },
        TreeNode::SplitEq { attr, category, eq, ne } => TreeNode::SplitEq {
            attr,
            category,
            eq: Box::new(to_predicate(*eq)),
            ne: Box::new(to_predicate(*ne)),
        },
    }
}

/// Explain added tuples: `bootstrapped-from` when an identical original
/// tuple exists (on matched attributes), otherwise idiopathic (`None`).
pub fn explain_tuple_addition(
    cs: &ChangeSets,
    t: &Table,
    t2: &Table,
    m: &AttributeMatch,
) -> Vec<(String, Option<Marker>)> {
    let mut out = Vec::new();
    for id in &cs.right_delta_tuples {
        let Some(ri) = t2.row_index(id) else { continue };
        let mut marker = None;
        for li in 0..t.n_rows() {
            if projected_rows_equal(t, li, t2, ri, m) {
                marker = Some(Marker::with_refs(
                    MarkerKind::BootstrappedFrom,
                    vec![t.tuple_ids()[li].clone()],
                ));
                break;
            }
        }
        out.push((id.clone(), marker));
    }
    out
}

/// Reconstruction score for a removal explanation set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Reconstruction {
    /// |correctly removed| / |actually removed|.
    pub validity: f64,
    /// Kept tuples the rules would also remove.
    pub false_removals: usize,
}

/// Apply every produced rule to `t` and compare the removed set against the
/// actual removals.
pub fn reconstruct_and_score(
    result: &TupleRemovalResult,
    cs: &ChangeSets,
    t: &Table,
    t2: &Table,
    m: &AttributeMatch,
    params: &HorizontalParams,
) -> Result<Reconstruction> {
    let removed_truth: HashSet<&String> = cs.left_delta_tuples.iter().collect();
    if removed_truth.is_empty() {
        return Ok(Reconstruction { validity: 1.0, false_removals: 0 });
    }
    let mut removed: HashSet<String> = HashSet::new();

    let has_missing_rule =
        result.per_tuple.iter().any(|(_, mk)| mk.kind == MarkerKind::ContainsMissing);
    let has_dup_rule =
        result.per_tuple.iter().any(|(_, mk)| mk.kind == MarkerKind::DuplicateOf);
    let z_attrs: Vec<&String> = result
        .per_tuple
        .iter()
        .filter(|(_, mk)| mk.kind == MarkerKind::OutlierZ)
        .filter_map(|(_, mk)| mk.refs.first())
        .collect();
    let iqr_attrs: Vec<&String> = result
        .per_tuple
        .iter()
        .filter(|(_, mk)| mk.kind == MarkerKind::OutlierIqr)
        .filter_map(|(_, mk)| mk.refs.first())
        .collect();

    let stats = numeric_stats(t);
    let fences = iqr_fences(t, params.iqr_factor);

    for row in 0..t.n_rows() {
        let id = &t.tuple_ids()[row];
        let mut hit = false;
        if has_missing_rule && row_has_missing(t, row) {
            hit = true;
        }
        if !hit && has_dup_rule {
            for ri in 0..t2.n_rows() {
                if t2.tuple_ids()[ri] != *id && projected_rows_equal(t, row, t2, ri, m) {
                    hit = true;
                    break;
                }
            }
        }
        if !hit {
            for attr in &z_attrs {
                if let Some((_, mean, sd)) =
                    stats.iter().find(|(a, _, _)| a == *attr)
                {
                    if *sd > 0.0 {
                        if let Some(x) = t.col(attr).ok().and_then(|c| c[row].as_number()) {
                            if ((x - mean) / sd).abs() > params.z_threshold {
                                hit = true;
                                break;
                            }
                        }
                    }
                }
            }
        }
        if !hit {
            for attr in &iqr_attrs {
                if let Some((_, lo, hi)) = fences.iter().find(|(a, _, _)| a == *attr) {
                    if let Some(x) = t.col(attr).ok().and_then(|c| c[row].as_number()) {
                        if x < *lo || x > *hi {
                            hit = true;
                            break;
                        }
                    }
                }
            }
        }
        if hit {
            removed.insert(id.clone());
        }
    }

    if let Some(TransformExpr::Predicate(tree)) = &result.predicate {
        let decisions = eval_predicate(tree, t)?;
        for (row, d) in decisions.iter().enumerate() {
            if *d == Some(RowAction::Remove) {
                removed.insert(t.tuple_ids()[row].clone());
            }
        }
    }

    let correct = removed.iter().filter(|id| removed_truth.contains(id)).count();
    let false_removals = removed.len() - correct;
    Ok(Reconstruction {
        validity: correct as f64 / removed_truth.len() as f64,
        false_removals,
    })
}
