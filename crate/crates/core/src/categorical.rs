//! Categorical goal explanation: greedy CART trees with Gini impurity and
//! axis-aligned midpoint thresholds, rendered as decision rules.

use crate::error::{Error, Result};
use crate::expr::{FeatureRef, TransformExpr, TreeNode};
use crate::feature::{FeatureCol, FeatureMatrix, Family};
use crate::value::{Value, ValueKey};

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 4, min_leaf: 1 }
    }
}

/// Distinct labels in first-appearance order paired with per-row label
/// indices. Missing goal cells are excluded by the caller.
struct Labels {
    classes: Vec<Value>,
    per_row: Vec<usize>,
}

fn label_rows(goal: &[&Value]) -> Labels {
    let mut classes: Vec<Value> = Vec::new();
    let mut keys: Vec<ValueKey> = Vec::new();
    let mut per_row = Vec::with_capacity(goal.len());
    for v in goal {
        let k = v.key();
        let idx = match keys.iter().position(|x| *x == k) {
            Some(i) => i,
            None => {
                keys.push(k);
                classes.push((*v).clone());
                classes.len() - 1
            }
        };
        per_row.push(idx);
    }
    Labels { classes, per_row }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Fit a CART classifier over numeric feature columns. Ties in split gain
/// break toward the lowest feature index, then the lowest threshold, so
/// identical input yields an identical tree. Splits on one-hot indicator
/// features canonicalize to equality conditions.
pub fn fit_tree(
    features: &FeatureMatrix,
    goal: &[Value],
    params: &TreeParams,
) -> Result<TreeNode<Value>> {
    if features.is_empty() {
        return Err(Error::fit("decision tree needs at least one feature"));
    }
    if goal.len() != features.n_rows {
        return Err(Error::fit("goal column is not aligned with the feature matrix"));
    }
    let rows: Vec<usize> = (0..goal.len()).filter(|&i| !goal[i].is_missing()).collect();
    if rows.is_empty() {
        return Err(Error::fit("all goal values are missing"));
    }
    let goal_refs: Vec<&Value> = rows.iter().map(|&i| &goal[i]).collect();
    let labels = label_rows(&goal_refs);
    // Re-index feature values onto the label rows.
    let cols: Vec<(&FeatureCol, Vec<Option<f64>>)> = features
        .cols
        .iter()
        .map(|c| (c, rows.iter().map(|&i| c.values[i]).collect()))
        .collect();
    let all: Vec<usize> = (0..rows.len()).collect();
    Ok(grow(&cols, &labels, &all, params, 0))
}

fn majority(labels: &Labels, rows: &[usize]) -> Value {
    let mut counts = vec![0usize; labels.classes.len()];
    for &r in rows {
        counts[labels.per_row[r]] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    labels.classes[best].clone()
}

fn grow(
    cols: &[(&FeatureCol, Vec<Option<f64>>)],
    labels: &Labels,
    rows: &[usize],
    params: &TreeParams,
    depth: usize,
) -> TreeNode<Value> {
    let mut counts = vec![0usize; labels.classes.len()];
    for &r in rows {
        counts[labels.per_row[r]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || rows.len() < 2 * params.min_leaf {
        return TreeNode::Leaf(majority(labels, rows));
    }
    let parent_gini = gini(&counts, rows.len());

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for (j, (_, values)) in cols.iter().enumerate() {
        // Sort present rows by feature value.
        let mut present: Vec<(f64, usize)> = rows
            .iter()
            .filter_map(|&r| values[r].map(|v| (v, r)))
            .collect();
        if present.len() < 2 * params.min_leaf {
            continue;
        }
        present.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let total = present.len();
        let mut left_counts = vec![0usize; labels.classes.len()];
        let mut right_counts = vec![0usize; labels.classes.len()];
        for &(_, r) in &present {
            right_counts[labels.per_row[r]] += 1;
        }
        let mut n_left = 0usize;
        for i in 0..total - 1 {
            let (v, r) = present[i];
            left_counts[labels.per_row[r]] += 1;
            right_counts[labels.per_row[r]] -= 1;
            n_left += 1;
            let next_v = present[i + 1].0;
            if next_v <= v {
                continue; // only between distinct values
            }
            if n_left < params.min_leaf || total - n_left < params.min_leaf {
                continue;
            }
            let w = total as f64;
            let split_gini = (n_left as f64 / w) * gini(&left_counts, n_left)
                + ((total - n_left) as f64 / w) * gini(&right_counts, total - n_left);
            let gain = parent_gini - split_gini;
            if gain <= 1e-12 {
                continue;
            }
            let threshold = (v + next_v) / 2.0;
            let better = match best {
                None => true,
                Some((bg, bj, bt)) => {
                    gain > bg + 1e-12
                        || ((gain - bg).abs() <= 1e-12 && (j < bj || (j == bj && threshold < bt)))
                }
            };
            if better {
                best = Some((gain, j, threshold));
            }
        }
    }

    let Some((_, j, threshold)) = best else {
        return TreeNode::Leaf(majority(labels, rows));
    };
    let values = &cols[j].1;
    // Rows with a missing split value follow the ≤ branch during training.
    let (le_rows, gt_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| values[r].map(|v| v <= threshold).unwrap_or(true));
    if le_rows.is_empty() || gt_rows.is_empty() {
        return TreeNode::Leaf(majority(labels, rows));
    }
    let le = grow(cols, labels, &le_rows, params, depth + 1);
    let gt = grow(cols, labels, &gt_rows, params, depth + 1);
    let feature = cols[j].0.feature.clone();
    // An indicator split at a 0/1 boundary reads better as equality.
    if let FeatureRef::OneHot(attr, cat) = &feature {
        if threshold > 0.0 && threshold < 1.0 {
            return TreeNode::SplitEq {
                attr: attr.clone(),
                category: cat.clone(),
                eq: Box::new(gt),
                ne: Box::new(le),
            };
        }
    }
    TreeNode::SplitNum { feature, threshold, le: Box::new(le), gt: Box::new(gt) }
}

/// Candidates for a categorical goal over a numeric origin: a tree on the
/// raw features and, when that misses the validity bar, a second tree over
/// math/poly-extended features.
pub struct CategoricalOutcome {
    pub candidates: Vec<(TransformExpr, f64)>,
}

pub fn explain_categorical(
    origin: &crate::table::Table,
    origin_attrs: &[String],
    goal: &[Value],
    denominator: usize,
    tree_params: &TreeParams,
    onehot_max: usize,
    early_stop_validity: f64,
) -> Result<CategoricalOutcome> {
    let mut fm = FeatureMatrix::with_rows(origin.n_rows());
    for a in origin_attrs {
        let col = origin.column(a)?;
        match col.sem_type {
            crate::value::SemanticType::Numeric => {
                let f = FeatureRef::attr(a.clone());
                fm.push(FeatureCol::new(f.clone(), crate::expr::eval_feature(&f, origin)?));
            }
            crate::value::SemanticType::Categorical => {
                for c in crate::encode::one_hot_features(origin, a, onehot_max)? {
                    fm.push(c);
                }
            }
            crate::value::SemanticType::Textual => {} // the textual path covers these
        }
    }
    if fm.is_empty() {
        return Err(Error::fit("no usable features for classification"));
    }
    let mut candidates = Vec::new();
    let tree = fit_tree(&fm, goal, tree_params)?;
    let expr = TransformExpr::Tree(tree);
    let validity = crate::evaluate::validity(&expr, origin, goal, denominator)?;
    candidates.push((expr, validity));

    if validity < early_stop_validity {
        let mut extended = fm.clone();
        extended.extend_family(Family::Math, 2);
        extended.extend_family(Family::Poly, 2);
        if extended.len() > fm.len() {
            let tree = fit_tree(&extended, goal, tree_params)?;
            let expr = TransformExpr::Tree(tree);
            let validity = crate::evaluate::validity(&expr, origin, goal, denominator)?;
            candidates.push((expr, validity));
        }
    }
    Ok(CategoricalOutcome { candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval_expr;
    use crate::table::Table;

    fn table(attrs: &[&str], rows: &[Vec<Value>]) -> Table {
        Table::from_rows(
            "t",
            attrs.iter().map(|s| s.to_string()).collect(),
            (0..rows.len()).map(|i| format!("m{}", i + 1)).collect(),
            rows.to_vec(),
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    fn rating_bucket(a3: f64) -> f64 {
        if a3 >= 9.0 {
            4.0
        } else if a3 >= 8.0 {
            3.0
        } else if a3 >= 7.0 {
            2.0
        } else {
            1.0
        }
    }

    #[test]
    fn four_way_rating_bucketing_is_reproduced_exactly() {
        let ratings = [9.3, 9.0, 8.6, 8.2, 7.7, 7.4, 7.0, 6.8, 6.1];
        let rows: Vec<Vec<Value>> = ratings.iter().map(|r| vec![Value::Number(*r)]).collect();
        let t = table(&["a3"], &rows);
        let goal: Vec<Value> = ratings.iter().map(|r| Value::Number(rating_bucket(*r))).collect();
        let fm = FeatureMatrix::from_attrs(&t, &["a3".into()]);
        let tree = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        assert_eq!(tree.n_leaves(), 4);
        let expr = TransformExpr::Tree(tree);
        let pred = eval_expr(&expr, &t).unwrap();
        assert_eq!(pred, goal);
    }

    #[test]
    fn binary_threshold_needs_exactly_three_nodes() {
        let xs = [7.0, 8.2, 9.0, 8.2, 1.0, 6.4, 8.9];
        let rows: Vec<Vec<Value>> = xs.iter().map(|x| vec![Value::Number(*x)]).collect();
        let t = table(&["a3"], &rows);
        let goal: Vec<Value> =
            xs.iter().map(|x| Value::Number(if *x > 8.0 { 1.0 } else { 0.0 })).collect();
        let fm = FeatureMatrix::from_attrs(&t, &["a3".into()]);
        let tree = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        assert_eq!(tree.n_nodes(), 3);
        let expr = TransformExpr::Tree(tree);
        assert_eq!(eval_expr(&expr, &t).unwrap(), goal);
    }

    #[test]
    fn single_class_goal_is_a_leaf() {
        let t = table(&["x"], &[vec![Value::Number(1.0)], vec![Value::Number(2.0)]]);
        let goal = vec![Value::Text("only".into()), Value::Text("only".into())];
        let fm = FeatureMatrix::from_attrs(&t, &["x".into()]);
        let tree = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        assert_eq!(tree.n_nodes(), 1);
    }

    #[test]
    fn determinism_under_refit() {
        let xs = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6, 5.3];
        let rows: Vec<Vec<Value>> = xs.iter().map(|x| vec![Value::Number(*x)]).collect();
        let t = table(&["x"], &rows);
        let goal: Vec<Value> =
            xs.iter().map(|x| Value::Number(if *x > 3.0 { 1.0 } else { 0.0 })).collect();
        let fm = FeatureMatrix::from_attrs(&t, &["x".into()]);
        let t1 = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        let t2 = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn tree_validity_beats_majority_baseline() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let rows: Vec<Vec<Value>> = xs.iter().map(|x| vec![Value::Number(*x)]).collect();
        let t = table(&["x"], &rows);
        let goal: Vec<Value> = xs
            .iter()
            .map(|x| Value::Text(if *x > 4.5 { "hi".into() } else { "lo".into() }))
            .collect();
        let fm = FeatureMatrix::from_attrs(&t, &["x".into()]);
        let tree = fit_tree(&fm, &goal, &TreeParams::default()).unwrap();
        let expr = TransformExpr::Tree(tree);
        let pred = eval_expr(&expr, &t).unwrap();
        let hits = pred.iter().zip(&goal).filter(|(p, g)| p == g).count();
        assert!(hits as f64 / 8.0 >= 0.5);
        assert_eq!(hits, 8);
    }

    #[test]
    fn onehot_split_renders_as_equality() {
        let rows = vec![
            vec![Value::Text("Drama".into()), Value::Number(1.0)],
            vec![Value::Text("Action".into()), Value::Number(0.0)],
            vec![Value::Text("Drama".into()), Value::Number(1.0)],
            vec![Value::Text("Animation".into()), Value::Number(0.0)],
        ];
        let t = table(&["a4", "z"], &rows);
        let goal: Vec<Value> = t.col("z").unwrap().to_vec();
        let out = explain_categorical(
            &t,
            &["a4".into()],
            &goal,
            4,
            &TreeParams::default(),
            20,
            0.95,
        )
        .unwrap();
        let (expr, validity) = &out.candidates[0];
        assert_eq!(*validity, 1.0);
        let text = crate::expr::serialize_expr(expr);
        assert!(text.contains("a4 = \"Drama\""), "{text}");
    }
}
