//! One-hot encoding, group-by aggregate features, and the pure-reshaping
//! case (the revision is an aggregation of the original, with no tuple
//! match).

use crate::error::{Error, Result};
use crate::evaluate;
use crate::expr::{
    eval_feature, serialize_expr, AggOp, FeatureRef, LinearExpr, TransformExpr,
};
use crate::feature::{FeatureCol, FeatureMatrix};
use crate::numeric::NumericParams;
use crate::table::{AttributeMatch, Table};
use crate::value::{SemanticType, Value, ValueKey};
use std::collections::{BTreeMap, HashMap};

/// Distinct non-missing categories of a column, in first-appearance order.
pub fn categories(t: &Table, attr: &str) -> Result<Vec<String>> {
    let col = t.col(attr)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for v in col {
        if v.is_missing() {
            continue;
        }
        let s = v.to_text_cell().unwrap_or_default();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Append one 0/1 indicator column per category of `attr`, named
/// `onehot(attr, category)`. Refuses when the cardinality exceeds
/// `max_categories` (prevents indicator blow-up).
pub fn one_hot(origin: &Table, attr: &str, max_categories: usize) -> Result<Table> {
    let col = origin.column(attr)?;
    let cats = categories(origin, attr)?;
    if cats.len() > max_categories {
        return Err(Error::fit(format!(
            "one-hot of {:?} needs {} categories, above the bound of {max_categories}",
            col.id,
            cats.len()
        )));
    }
    let mut out = origin.clone();
    for cat in cats {
        let f = FeatureRef::OneHot(attr.to_string(), cat.clone());
        let values = eval_feature(&f, origin)?
            .into_iter()
            .map(|v| v.map(Value::Number).unwrap_or(Value::Missing))
            .collect();
        out = out.with_column(
            format!("onehot({attr}, {cat})"),
            SemanticType::Numeric,
            values,
        )?;
    }
    Ok(out)
}

/// Indicator feature columns for a categorical attribute (matrix form used
/// by the explainers; the symbolic refs stay `onehot(...)`).
pub fn one_hot_features(
    t: &Table,
    attr: &str,
    max_categories: usize,
) -> Result<Vec<FeatureCol>> {
    let cats = categories(t, attr)?;
    if cats.len() > max_categories {
        return Err(Error::fit(format!(
            "one-hot of {attr:?} needs {} categories, above the bound of {max_categories}",
            cats.len()
        )));
    }
    cats.into_iter()
        .map(|cat| {
            let f = FeatureRef::OneHot(attr.to_string(), cat);
            Ok(FeatureCol::new(f.clone(), eval_feature(&f, t)?))
        })
        .collect()
}

/// Append group-by aggregate columns (`agg(of) by key`) for every numeric
/// `of` attribute, broadcast back to each tuple.
pub fn groupby_features(t: &Table, by: &[String], of: &[String]) -> Result<Table> {
    if by.is_empty() {
        return Err(Error::fit("group-by needs at least one key attribute"));
    }
    for a in by {
        t.col(a)?;
    }
    let mut out = t.clone();
    for attr in of {
        let c = t.column(attr)?;
        if c.sem_type != SemanticType::Numeric {
            return Err(Error::fit(format!("group-by measure {attr:?} is not numeric")));
        }
        for op in [AggOp::Mean, AggOp::Max, AggOp::Min, AggOp::Sum, AggOp::Count] {
            let f = FeatureRef::GroupAgg(op, Box::new(FeatureRef::attr(attr.clone())), by.to_vec());
            let values = eval_feature(&f, t)?
                .into_iter()
                .map(|v| v.map(Value::Number).unwrap_or(Value::Missing))
                .collect();
            out = out.with_column(
                format!("{}({attr}) by {}", op.name(), by.join(", ")),
                SemanticType::Numeric,
                values,
            )?;
        }
    }
    Ok(out)
}

/// Group-by feature matrix aligned to `t`'s rows (broadcast form).
pub fn groupby_feature_matrix(t: &Table, keys: &[String], of: &[String]) -> Result<FeatureMatrix> {
    let mut fm = FeatureMatrix::with_rows(t.n_rows());
    for attr in of {
        for op in [AggOp::Mean, AggOp::Max, AggOp::Min, AggOp::Sum, AggOp::Count] {
            let f = FeatureRef::GroupAgg(op, Box::new(FeatureRef::attr(attr.clone())), keys.to_vec());
            fm.push(FeatureCol::new(f.clone(), eval_feature(&f, t)?));
        }
    }
    Ok(fm)
}

/// A reshape candidate: the goal column of the revision explained as an
/// aggregate of the original grouped by key attributes.
#[derive(Debug, Clone)]
pub struct ReshapeCandidate {
    pub expr: TransformExpr,
    pub left_keys: Vec<String>,
    pub right_keys: Vec<String>,
    pub validity: f64,
}

/// Evaluate a linear-over-group-aggregates expression for reshape scoring:
/// aggregates are computed per group on `left`, then aligned to `right`
/// rows through the key columns.
pub fn eval_reshaped(
    expr: &TransformExpr,
    left: &Table,
    left_keys: &[String],
    right: &Table,
    right_keys: &[String],
) -> Result<Vec<Value>> {
    let TransformExpr::Linear(lin) = expr else {
        return Err(Error::eval("reshape expressions are linear over group aggregates"));
    };
    // Group rows of `left` by key tuple.
    let key_cols: Vec<&[Value]> = left_keys.iter().map(|a| left.col(a)).collect::<Result<_>>()?;
    let mut groups: HashMap<Vec<ValueKey>, Vec<usize>> = HashMap::new();
    for i in 0..left.n_rows() {
        let key: Vec<ValueKey> = key_cols.iter().map(|c| c[i].key()).collect();
        groups.entry(key).or_default().push(i);
    }
    // Per-term per-group aggregate values.
    let mut term_values: Vec<HashMap<Vec<ValueKey>, Option<f64>>> = Vec::new();
    for (_, f) in &lin.terms {
        let FeatureRef::GroupAgg(op, inner, _) = f else {
            return Err(Error::eval("reshape terms must be group aggregates"));
        };
        let inner_vals = eval_feature(inner, left)?;
        let mut per_group = HashMap::new();
        for (key, rows) in &groups {
            let xs: Vec<f64> = rows.iter().filter_map(|&i| inner_vals[i]).collect();
            let agg = op.apply(&xs).filter(|v| v.is_finite());
            per_group.insert(key.clone(), agg);
        }
        term_values.push(per_group);
    }
    // Align to `right` rows through its key columns.
    let rkey_cols: Vec<&[Value]> = right_keys.iter().map(|a| right.col(a)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(right.n_rows());
    for i in 0..right.n_rows() {
        let key: Vec<ValueKey> = rkey_cols.iter().map(|c| c[i].key()).collect();
        let mut acc = Some(lin.intercept);
        for ((c, _), per_group) in lin.terms.iter().zip(&term_values) {
            let x = per_group.get(&key).copied().flatten();
            acc = match (acc, x) {
                (Some(a), Some(x)) => {
                    let v = a + c * x;
                    v.is_finite().then_some(v)
                }
                _ => None,
            };
        }
        out.push(acc.map(Value::Number).unwrap_or(Value::Missing));
    }
    Ok(out)
}

/// Explain one unmatched numeric column of `right` as a group-by aggregate
/// of `left`. Key candidates are matched attribute pairs whose left side is
/// categorical (or low-cardinality), tried singly then in pairs.
pub fn explain_reshape_goal(
    left: &Table,
    right: &Table,
    m: &AttributeMatch,
    goal_attr: &str,
    params: &NumericParams,
) -> Result<Vec<ReshapeCandidate>> {
    let goal = right.col(goal_attr)?;
    let key_pairs: Vec<(String, String)> = m
        .pairs()
        .iter()
        .filter(|(l, _)| {
            left.column(l)
                .map(|c| c.sem_type == SemanticType::Categorical || c.cat_compatible)
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    if key_pairs.is_empty() {
        return Err(Error::fit("no categorical key candidates for reshaping"));
    }
    let numeric_of: Vec<String> = left
        .columns()
        .iter()
        .filter(|c| c.sem_type == SemanticType::Numeric)
        .map(|c| c.id.clone())
        .collect();

    let mut key_sets: Vec<Vec<(String, String)>> =
        key_pairs.iter().map(|p| vec![p.clone()]).collect();
    for i in 0..key_pairs.len() {
        for j in (i + 1)..key_pairs.len() {
            key_sets.push(vec![key_pairs[i].clone(), key_pairs[j].clone()]);
        }
    }

    let mut out = Vec::new();
    for key_set in key_sets {
        let left_keys: Vec<String> = key_set.iter().map(|(l, _)| l.clone()).collect();
        let right_keys: Vec<String> = key_set.iter().map(|(_, r)| r.clone()).collect();
        // Candidate features: per-group aggregates aligned to right rows.
        let mut cands: Vec<(FeatureRef, Vec<Option<f64>>)> = Vec::new();
        for attr in &numeric_of {
            for op in [AggOp::Mean, AggOp::Max, AggOp::Min, AggOp::Sum, AggOp::Count] {
                let f = FeatureRef::GroupAgg(
                    op,
                    Box::new(FeatureRef::attr(attr.clone())),
                    left_keys.clone(),
                );
                let probe = TransformExpr::Linear(LinearExpr::single(1.0, f.clone()));
                let vals = eval_reshaped(&probe, left, &left_keys, right, &right_keys)?;
                cands.push((f, vals.iter().map(Value::as_number).collect()));
            }
        }
        // Identity and scale scans against the goal column.
        let y: Vec<Option<f64>> = goal.iter().map(Value::as_number).collect();
        for (f, vals) in &cands {
            let exact = vals
                .iter()
                .zip(&y)
                .all(|(p, g)| match (p, g) {
                    (Some(p), Some(g)) => crate::value::numbers_match(*p, *g),
                    (None, None) => true,
                    _ => false,
                });
            let expr = TransformExpr::Linear(LinearExpr::single(1.0, f.clone()));
            if exact {
                out.push(ReshapeCandidate {
                    expr,
                    left_keys: left_keys.clone(),
                    right_keys: right_keys.clone(),
                    validity: 1.0,
                });
                continue;
            }
            // Scaled variant.
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            let mut n = 0;
            for (p, g) in vals.iter().zip(&y) {
                if let (Some(p), Some(g)) = (p, g) {
                    sxy += p * g;
                    sxx += p * p;
                    n += 1;
                }
            }
            if n >= 3 && sxx > 0.0 {
                let alpha = sxy / sxx;
                if alpha.is_finite() && (alpha - 1.0).abs() > 1e-12 {
                    let ok = vals.iter().zip(&y).all(|(p, g)| match (p, g) {
                        (Some(p), Some(g)) => crate::value::numbers_match(alpha * p, *g),
                        (None, None) => true,
                        _ => false,
                    });
                    if ok {
                        let expr = TransformExpr::Linear(LinearExpr::single(alpha, f.clone()));
                        out.push(ReshapeCandidate {
                            expr,
                            left_keys: left_keys.clone(),
                            right_keys: right_keys.clone(),
                            validity: 1.0,
                        });
                    }
                }
            }
        }
        if out
            .iter()
            .any(|c| c.validity >= params.early_stop_validity)
        {
            break; // ranked key order; the early candidates win anyway
        }
    }
    // Deduplicate by expression text.
    let mut seen = std::collections::HashSet::new();
    out.retain(|c| seen.insert(serialize_expr(&c.expr)));
    Ok(out)
}

/// Score a reshape candidate's validity against the goal column of `right`.
pub fn reshape_validity(
    cand: &ReshapeCandidate,
    left: &Table,
    right: &Table,
    goal_attr: &str,
) -> Result<f64> {
    let pred = eval_reshaped(&cand.expr, left, &cand.left_keys, right, &cand.right_keys)?;
    let goal = right.col(goal_attr)?;
    Ok(evaluate::column_validity(&pred, goal, right.n_rows()))
}

/// Group rows of `t` by `keys` into a table of one row per group with the
/// chosen aggregate applied to `of` (classic `SELECT key, agg(of) GROUP BY`).
/// Used by the benchmark generator; row order is first-appearance order of
/// each group, tuple ids are `g0, g1, ...`.
pub fn grouped_table(t: &Table, keys: &[String], of: &[String], op: AggOp) -> Result<Table> {
    let key_cols: Vec<&[Value]> = keys.iter().map(|a| t.col(a)).collect::<Result<_>>()?;
    let of_cols: Vec<&[Value]> = of.iter().map(|a| t.col(a)).collect::<Result<_>>()?;
    let mut order: Vec<Vec<ValueKey>> = Vec::new();
    let mut groups: BTreeMap<usize, (Vec<Value>, Vec<Vec<f64>>)> = BTreeMap::new();
    let mut index: HashMap<Vec<ValueKey>, usize> = HashMap::new();
    for i in 0..t.n_rows() {
        let key: Vec<ValueKey> = key_cols.iter().map(|c| c[i].key()).collect();
        let gi = *index.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            let key_vals: Vec<Value> = key_cols.iter().map(|c| c[i].clone()).collect();
            groups.insert(order.len() - 1, (key_vals, vec![vec![]; of.len()]));
            order.len() - 1
        });
        let entry = groups.get_mut(&gi).expect("group exists");
        for (j, c) in of_cols.iter().enumerate() {
            if let Some(x) = c[i].as_number() {
                entry.1[j].push(x);
            }
        }
    }
    let mut attr_ids: Vec<String> = keys.to_vec();
    for a in of {
        attr_ids.push(format!("{}({a})", op.name()));
    }
    let mut tuple_ids = Vec::new();
    let mut rows = Vec::new();
    for (gi, (key_vals, measures)) in groups {
        tuple_ids.push(format!("g{gi}"));
        let mut row = key_vals;
        for xs in measures {
            row.push(op.apply(&xs).map(Value::Number).unwrap_or(Value::Missing));
        }
        rows.push(row);
    }
    Table::from_rows(format!("{}_grouped", t.name), attr_ids, tuple_ids, rows)
}
