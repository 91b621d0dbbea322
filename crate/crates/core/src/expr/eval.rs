//! Expression evaluation over a table. Pure: the output is a function of
//! `(expr, table)` only. Missing inputs propagate to Missing outputs;
//! out-of-domain arithmetic (division by zero, log of a non-positive)
//! yields Missing for that tuple rather than an error.

use super::{
    FeatureRef, LinearExpr, Marker, RowAction, StringOp, StringProgram, TransformExpr,
    TreeNode,
};
use crate::error::{Error, Result};
use crate::table::Table;
use crate::value::{Value, ValueKey};
use std::collections::HashMap;

/// Evaluate a feature to one numeric (or missing) value per tuple.
pub fn eval_feature(f: &FeatureRef, t: &Table) -> Result<Vec<Option<f64>>> {
    match f {
        FeatureRef::Attr(a) => Ok(t.col(a)?.iter().map(Value::as_number).collect()),
        FeatureRef::Pow(inner, k) => {
            let xs = eval_feature(inner, t)?;
            Ok(xs
                .into_iter()
                .map(|x| x.and_then(|x| finite(x.powi(*k as i32))))
                .collect())
        }
        FeatureRef::Product(a, b) => {
            let xs = eval_feature(a, t)?;
            let ys = eval_feature(b, t)?;
            Ok(xs
                .into_iter()
                .zip(ys)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => finite(x * y),
                    _ => None,
                })
                .collect())
        }
        FeatureRef::Quotient(a, b) => {
            let xs = eval_feature(a, t)?;
            let ys = eval_feature(b, t)?;
            Ok(xs
                .into_iter()
                .zip(ys)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) if y != 0.0 => finite(x / y),
                    _ => None,
                })
                .collect())
        }
        FeatureRef::Math(op, inner) => {
            let xs = eval_feature(inner, t)?;
            Ok(xs.into_iter().map(|x| x.and_then(|x| op.apply(x))).collect())
        }
        FeatureRef::Agg(op, inner) => {
            let xs = eval_feature(inner, t)?;
            let present: Vec<f64> = xs.iter().flatten().copied().collect();
            let agg = op.apply(&present).and_then(finite);
            Ok(vec![agg; t.n_rows()])
        }
        FeatureRef::GroupAgg(op, inner, by) => {
            let xs = eval_feature(inner, t)?;
            let keys = group_keys(t, by)?;
            let mut groups: HashMap<Vec<ValueKey>, Vec<f64>> = HashMap::new();
            for (key, x) in keys.iter().zip(&xs) {
                let entry = groups.entry(key.clone()).or_default();
                if let Some(x) = x {
                    entry.push(*x);
                }
            }
            let agg: HashMap<&Vec<ValueKey>, Option<f64>> = groups
                .iter()
                .map(|(k, v)| (k, op.apply(v).and_then(finite)))
                .collect();
            Ok(keys.iter().map(|k| agg.get(k).copied().flatten()).collect())
        }
        FeatureRef::OneHot(attr, category) => {
            let col = t.col(attr)?;
            Ok(col
                .iter()
                .map(|v| match v {
                    Value::Missing => None,
                    v => Some(if cell_text(v) == *category { 1.0 } else { 0.0 }),
                })
                .collect())
        }
        FeatureRef::CountPat(attr, pat) => {
            let col = t.col(attr)?;
            Ok(col
                .iter()
                .map(|v| v.to_text_cell().map(|s| pat.count_in(&s) as f64))
                .collect())
        }
        FeatureRef::ContainsPat(attr, pat) => {
            let col = t.col(attr)?;
            Ok(col
                .iter()
                .map(|v| v.to_text_cell().map(|s| if pat.count_in(&s) > 0 { 1.0 } else { 0.0 }))
                .collect())
        }
        FeatureRef::Length(attr) => {
            let col = t.col(attr)?;
            Ok(col
                .iter()
                .map(|v| v.to_text_cell().map(|s| s.chars().count() as f64))
                .collect())
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn cell_text(v: &Value) -> String {
    v.to_text_cell().unwrap_or_default()
}

fn group_keys(t: &Table, by: &[String]) -> Result<Vec<Vec<ValueKey>>> {
    let cols: Vec<&[Value]> = by.iter().map(|a| t.col(a)).collect::<Result<_>>()?;
    Ok((0..t.n_rows())
        .map(|i| cols.iter().map(|c| c[i].key()).collect())
        .collect())
}

/// Evaluate a transformation to one output value per tuple, in tuple order.
pub fn eval_expr(e: &TransformExpr, t: &Table) -> Result<Vec<Value>> {
    match e {
        TransformExpr::Linear(lin) => eval_linear(lin, t),
        TransformExpr::Tree(root) => eval_tree(root, t, |leaf| leaf.clone()),
        TransformExpr::Predicate(root) => {
            Ok(eval_predicate(root, t)?
                .into_iter()
                .map(|a| match a {
                    Some(RowAction::Remove) => Value::Bool(true),
                    Some(RowAction::Maintain) => Value::Bool(false),
                    None => Value::Missing,
                })
                .collect())
        }
        TransformExpr::Program(prog) => {
            let state = eval_program(prog, t)?;
            if state.len() != 1 {
                return Err(Error::eval(format!(
                    "string program left {} columns, expected exactly 1",
                    state.len()
                )));
            }
            Ok(state
                .into_iter()
                .next()
                .unwrap()
                .into_iter()
                .map(|c| c.map(Value::Text).unwrap_or(Value::Missing))
                .collect())
        }
        TransformExpr::Marker(Marker { kind, .. }) => Err(Error::eval(format!(
            "{} markers are rule-based and do not evaluate to a column",
            kind.name()
        ))),
    }
}

fn eval_linear(lin: &LinearExpr, t: &Table) -> Result<Vec<Value>> {
    let n = t.n_rows();
    let mut acc: Vec<Option<f64>> = vec![Some(lin.intercept); n];
    for (coef, feature) in &lin.terms {
        let xs = eval_feature(feature, t)?;
        for (a, x) in acc.iter_mut().zip(xs) {
            *a = match (*a, x) {
                (Some(a), Some(x)) => finite(a + coef * x),
                _ => None,
            };
        }
    }
    Ok(acc
        .into_iter()
        .map(|x| x.map(Value::Number).unwrap_or(Value::Missing))
        .collect())
}

fn eval_tree<L, F: Fn(&L) -> Value>(root: &TreeNode<L>, t: &Table, leaf: F) -> Result<Vec<Value>> {
    let routed = route_rows(root, t)?;
    Ok(routed
        .into_iter()
        .map(|l| l.map(|l| leaf(l)).unwrap_or(Value::Missing))
        .collect())
}

/// Route every row to a leaf label. Rows that hit a Missing split value
/// yield `None`.
pub fn eval_predicate(root: &TreeNode<RowAction>, t: &Table) -> Result<Vec<Option<RowAction>>> {
    Ok(route_rows(root, t)?.into_iter().map(|l| l.copied()).collect())
}

fn route_rows<'e, L>(root: &'e TreeNode<L>, t: &Table) -> Result<Vec<Option<&'e L>>> {
    // Pre-evaluate every distinct split input once.
    let mut num_cache: Vec<(&FeatureRef, Vec<Option<f64>>)> = Vec::new();
    collect_split_features(root, t, &mut num_cache)?;
    let lookup = |f: &FeatureRef| -> &Vec<Option<f64>> {
        &num_cache.iter().find(|(g, _)| *g == f).expect("cached").1
    };
    let mut out = Vec::with_capacity(t.n_rows());
    for i in 0..t.n_rows() {
        let mut node = root;
        let label = loop {
            match node {
                TreeNode::Leaf(l) => break Some(l),
                TreeNode::SplitNum { feature, threshold, le, gt } => {
                    match lookup(feature)[i] {
                        Some(x) => node = if x <= *threshold { le } else { gt },
                        None => break None,
                    }
                }
                TreeNode::SplitEq { attr, category, eq, ne } => {
                    let v = t.value(i, attr)?;
                    if v.is_missing() {
                        break None;
                    }
                    node = if cell_text(v) == *category { eq } else { ne };
                }
            }
        };
        out.push(label);
    }
    Ok(out)
}

fn collect_split_features<'e, L>(
    node: &'e TreeNode<L>,
    t: &Table,
    cache: &mut Vec<(&'e FeatureRef, Vec<Option<f64>>)>,
) -> Result<()> {
    match node {
        TreeNode::Leaf(_) => Ok(()),
        TreeNode::SplitNum { feature, le, gt, .. } => {
            if !cache.iter().any(|(f, _)| *f == feature) {
                let xs = eval_feature(feature, t)?;
                cache.push((feature, xs));
            }
            collect_split_features(le, t, cache)?;
            collect_split_features(gt, t, cache)
        }
        TreeNode::SplitEq { attr, eq, ne, .. } => {
            t.col(attr)?;
            collect_split_features(eq, t, cache)?;
            collect_split_features(ne, t, cache)
        }
    }
}

/// Text-program state: the origin table's columns as optional strings.
pub fn program_columns(t: &Table) -> Vec<Vec<Option<String>>> {
    t.columns()
        .iter()
        .map(|c| {
            t.col(&c.id)
                .expect("column listed by table")
                .iter()
                .map(Value::to_text_cell)
                .collect()
        })
        .collect()
}

/// Run a string program against the origin table's columns; returns the
/// final column state.
pub fn eval_program(prog: &StringProgram, t: &Table) -> Result<Vec<Vec<Option<String>>>> {
    let mut state = program_columns(t);
    if state.is_empty() {
        return Err(Error::eval("string program needs at least one origin column"));
    }
    for step in &prog.steps {
        apply_string_op(step, &mut state)?;
    }
    Ok(state)
}

/// Apply one op in place. Column indices out of range are evaluation errors.
pub fn apply_string_op(op: &StringOp, state: &mut Vec<Vec<Option<String>>>) -> Result<()> {
    let ncols = state.len();
    let check = |col: usize| -> Result<()> {
        if col >= ncols {
            Err(Error::eval(format!("string op column {col} out of range ({ncols} columns)")))
        } else {
            Ok(())
        }
    };
    match op {
        StringOp::Split { col, delim } => {
            check(*col)?;
            let src = state.remove(*col);
            let mut before = Vec::with_capacity(src.len());
            let mut after = Vec::with_capacity(src.len());
            for cell in src {
                match cell {
                    None => {
                        before.push(None);
                        after.push(None);
                    }
                    Some(s) => match s.split_once(delim.as_str()) {
                        Some((b, a)) => {
                            before.push(Some(b.to_string()));
                            after.push(Some(a.to_string()));
                        }
                        None => {
                            before.push(Some(s));
                            after.push(Some(String::new()));
                        }
                    },
                }
            }
            state.insert(*col, after);
            state.insert(*col, before);
        }
        StringOp::Merge { col, sep } => {
            check(*col)?;
            check(col + 1)?;
            let right = state.remove(col + 1);
            let left = &mut state[*col];
            for (l, r) in left.iter_mut().zip(right) {
                *l = match (l.take(), r) {
                    (Some(a), Some(b)) => Some(format!("{a}{sep}{b}")),
                    _ => None,
                };
            }
        }
        StringOp::Drop { col } => {
            check(*col)?;
            if ncols == 1 {
                return Err(Error::eval("cannot drop the last remaining column"));
            }
            state.remove(*col);
        }
        StringOp::Substring { col, start, end } => {
            check(*col)?;
            map_col(&mut state[*col], |s| {
                let chars: Vec<char> = s.chars().collect();
                let a = (*start).min(chars.len());
                let b = (*end).min(chars.len()).max(a);
                chars[a..b].iter().collect()
            });
        }
        StringOp::Lower { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| s.to_lowercase());
        }
        StringOp::Upper { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| s.to_uppercase());
        }
        StringOp::StripPunct { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| {
                s.chars().filter(|c| !c.is_ascii_punctuation()).collect()
            });
        }
        StringOp::StripDigits { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| s.chars().filter(|c| !c.is_ascii_digit()).collect());
        }
        StringOp::StripHtml { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| strip_html(&s));
        }
        StringOp::RemoveStopwords { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| {
                s.split_whitespace()
                    .filter(|w| !crate::textual::is_stopword(w))
                    .collect::<Vec<_>>()
                    .join(" ")
            });
        }
        StringOp::Stem { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| {
                s.split_whitespace()
                    .map(crate::textual::stem_word)
                    .collect::<Vec<_>>()
                    .join(" ")
            });
        }
        StringOp::Trim { col } => {
            check(*col)?;
            map_col(&mut state[*col], |s| s.trim().to_string());
        }
    }
    Ok(())
}

fn map_col(col: &mut [Option<String>], f: impl Fn(String) -> String) {
    for cell in col.iter_mut() {
        if let Some(s) = cell.take() {
            *cell = Some(f(s));
        }
    }
}

fn strip_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            c if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{AggOp, MathOp, Pattern};
    use crate::table::Table;

    fn movie_table() -> Table {
        Table::from_rows(
            "t",
            vec!["a1".into(), "a2".into(), "a3".into(), "a4".into()],
            vec!["m1".into(), "m2".into(), "m3".into()],
            vec![
                vec![
                    Value::Text("Moana (U)".into()),
                    Value::Number(107.0),
                    Value::Number(7.6),
                    Value::Text("Animation".into()),
                ],
                vec![
                    Value::Text("Heat (15)".into()),
                    Value::Number(170.0),
                    Value::Number(8.2),
                    Value::Text("Drama".into()),
                ],
                vec![
                    Value::Text("Up (U)".into()),
                    Value::Number(96.0),
                    Value::Number(9.0),
                    Value::Text("Animation".into()),
                ],
            ],
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    #[test]
    fn runtime_minutes_to_hours() {
        let t = movie_table();
        let e = TransformExpr::Linear(LinearExpr::single(1.0 / 60.0, FeatureRef::attr("a2")));
        let out = eval_expr(&e, &t).unwrap();
        assert!(crate::value::values_match(&out[0], &Value::Number(107.0 / 60.0)));
        assert!(crate::value::values_match(&out[2], &Value::Number(1.6)));
    }

    #[test]
    fn empty_linear_is_all_intercept() {
        let t = movie_table();
        let e = TransformExpr::Linear(LinearExpr::default());
        let out = eval_expr(&e, &t).unwrap();
        assert!(out.iter().all(|v| *v == Value::Number(0.0)));
    }

    #[test]
    fn sum_normalization_matches_constant_division_on_same_table() {
        let t = movie_table();
        let sum: f64 = 7.6 + 8.2 + 9.0;
        let sym = TransformExpr::Linear(LinearExpr::single(
            1.0,
            FeatureRef::Quotient(
                Box::new(FeatureRef::attr("a3")),
                Box::new(FeatureRef::Agg(AggOp::Sum, Box::new(FeatureRef::attr("a3")))),
            ),
        ));
        let lit = TransformExpr::Linear(LinearExpr::single(1.0 / sum, FeatureRef::attr("a3")));
        let a = eval_expr(&sym, &t).unwrap();
        let b = eval_expr(&lit, &t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            match (x, y) {
                (Value::Number(x), Value::Number(y)) => assert!((x - y).abs() < 1e-12),
                _ => panic!("expected numbers"),
            }
        }
    }

    #[test]
    fn division_by_zero_and_log_domain_become_missing() {
        let t = Table::from_rows(
            "z",
            vec!["x".into(), "y".into()],
            vec!["1".into(), "2".into()],
            vec![
                vec![Value::Number(1.0), Value::Number(0.0)],
                vec![Value::Number(-2.0), Value::Number(4.0)],
            ],
        )
        .unwrap();
        let quot = FeatureRef::Quotient(
            Box::new(FeatureRef::attr("x")),
            Box::new(FeatureRef::attr("y")),
        );
        assert_eq!(eval_feature(&quot, &t).unwrap(), vec![None, Some(-0.5)]);
        let log = FeatureRef::Math(MathOp::Log, Box::new(FeatureRef::attr("x")));
        assert_eq!(eval_feature(&log, &t).unwrap(), vec![Some(0.0), None]);
    }

    #[test]
    fn group_agg_broadcasts_group_means() {
        let t = movie_table();
        let f = FeatureRef::GroupAgg(
            AggOp::Mean,
            Box::new(FeatureRef::attr("a3")),
            vec!["a4".into()],
        );
        let xs = eval_feature(&f, &t).unwrap();
        assert_eq!(xs[0], Some((7.6 + 9.0) / 2.0));
        assert_eq!(xs[1], Some(8.2));
        assert_eq!(xs[2], Some((7.6 + 9.0) / 2.0));
    }

    #[test]
    fn parenthesis_extraction_program() {
        let t = movie_table();
        let prog = TransformExpr::Program(StringProgram {
            steps: vec![
                StringOp::Split { col: 0, delim: "(".into() },
                StringOp::Split { col: 1, delim: ")".into() },
                StringOp::Drop { col: 0 },
                StringOp::Drop { col: 1 },
            ],
        });
        let origin = t.project(&["a1".into()]).unwrap();
        let out = eval_expr(&prog, &origin).unwrap();
        assert_eq!(out[0], Value::Text("U".into()));
        assert_eq!(out[1], Value::Text("15".into()));
    }

    #[test]
    fn count_and_length_features() {
        let t = movie_table();
        let len = FeatureRef::Length("a1".into());
        assert_eq!(eval_feature(&len, &t).unwrap()[0], Some(9.0));
        let spaces = FeatureRef::CountPat("a1".into(), Pattern::Literal(" ".into()));
        assert_eq!(eval_feature(&spaces, &t).unwrap()[0], Some(1.0));
        let q = FeatureRef::ContainsPat("a1".into(), Pattern::Literal("(".into()));
        assert_eq!(eval_feature(&q, &t).unwrap()[1], Some(1.0));
    }
}
