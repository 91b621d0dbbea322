//! Scoring: validity (the fraction of goal tuples the transformation
//! reproduces), generalizability (the same measure on a hold-out pair), and
//! the assembled score card.

use crate::error::Result;
use crate::expr::{concentration, conciseness, eval_expr, total_explainability, TransformExpr};
use crate::table::Table;
use crate::value::{values_match, Value};
use serde::{Deserialize, Serialize};

/// All scores for one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub validity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generalizability: Option<f64>,
    pub n_components: usize,
    pub n_chunks: usize,
    pub conciseness: f64,
    pub concentration: f64,
    pub total_explainability: f64,
}

impl ScoreCard {
    pub fn new(expr: &TransformExpr, validity: f64, generalizability: Option<f64>) -> ScoreCard {
        let (n_components, conc) = conciseness(expr);
        let (n_chunks, concn) = concentration(expr);
        ScoreCard {
            validity,
            generalizability,
            n_components,
            n_chunks,
            conciseness: conc,
            concentration: concn,
            total_explainability: total_explainability(expr),
        }
    }
}

/// Indicator mean over aligned value pairs. `denominator` is the goal
/// relation size; predictions beyond it never add hits, goal tuples without
/// a prediction count as misses.
pub fn column_validity(pred: &[Value], goal: &[Value], denominator: usize) -> f64 {
    if denominator == 0 {
        return 1.0;
    }
    let hits = pred
        .iter()
        .zip(goal)
        .filter(|(p, g)| values_match(p, g))
        .count();
    hits as f64 / denominator as f64
}

/// Evaluate `e` over the aligned origin rows and score against the goal
/// column. The origin table must already be row-aligned with `goal`;
/// `denominator` is the full goal-relation size (unmatched goal tuples
/// count as misses).
pub fn validity(
    e: &TransformExpr,
    origin: &Table,
    goal: &[Value],
    denominator: usize,
) -> Result<f64> {
    let pred = eval_expr(e, origin)?;
    Ok(column_validity(&pred, goal, denominator))
}

/// Validity computed on a hold-out pair — deliberately the same code path.
pub fn generalizability(
    e: &TransformExpr,
    origin_holdout: &Table,
    goal_holdout: &[Value],
    denominator: usize,
) -> Result<f64> {
    validity(e, origin_holdout, goal_holdout, denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, FeatureRef, LinearExpr};

    fn table(a3: &[f64]) -> Table {
        Table::from_rows(
            "t",
            vec!["a3".into()],
            (0..a3.len()).map(|i| format!("m{}", i + 1)).collect(),
            a3.iter().map(|x| vec![Value::Number(*x)]).collect(),
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    #[test]
    fn three_of_four_scores_three_quarters() {
        let pred = vec![
            Value::Number(1.0),
            Value::Number(2.0),
            Value::Number(3.0),
            Value::Number(99.0),
        ];
        let goal = vec![
            Value::Number(1.0),
            Value::Number(2.0),
            Value::Number(3.0),
            Value::Number(4.0),
        ];
        assert_eq!(column_validity(&pred, &goal, 4), 0.75);
    }

    #[test]
    fn zero_of_n_scores_zero() {
        let pred = vec![Value::Number(9.0); 5];
        let goal = vec![Value::Number(1.0); 5];
        assert_eq!(column_validity(&pred, &goal, 5), 0.0);
    }

    #[test]
    fn exact_scale_scores_one() {
        let t = table(&[120.0, 60.0, 90.0]);
        let e = TransformExpr::Linear(LinearExpr::single(1.0 / 60.0, FeatureRef::attr("a3")));
        let goal: Vec<Value> =
            [2.0, 1.0, 1.5].iter().map(|x| Value::Number(*x)).collect();
        assert_eq!(validity(&e, &t, &goal, 3).unwrap(), 1.0);
    }

    #[test]
    fn overfit_constant_fails_on_holdout_same_code_path() {
        // Fit table sums to 33.4; a3 ÷ 33.4 is valid there but not on a
        // hold-out with a different sum.
        let fit = table(&[8.2, 8.2, 9.0, 8.0]);
        let hold = table(&[9.0, 7.7, 8.3]);
        let sum_fit: f64 = 33.4;
        let hold_sum: f64 = 9.0 + 7.7 + 8.3;
        let goal_fit: Vec<Value> =
            [8.2, 8.2, 9.0, 8.0].iter().map(|x| Value::Number(*x / sum_fit)).collect();
        let goal_hold: Vec<Value> =
            [9.0, 7.7, 8.3].iter().map(|x| Value::Number(*x / hold_sum)).collect();

        let symbolic = parse_expr("a3 ÷ sum(a3)").unwrap();
        let literal = parse_expr("a3 ÷ 33.4").unwrap();

        assert_eq!(validity(&symbolic, &fit, &goal_fit, 4).unwrap(), 1.0);
        assert_eq!(validity(&literal, &fit, &goal_fit, 4).unwrap(), 1.0);
        assert_eq!(generalizability(&symbolic, &hold, &goal_hold, 3).unwrap(), 1.0);
        assert_eq!(generalizability(&literal, &hold, &goal_hold, 3).unwrap(), 0.0);
    }

    #[test]
    fn validity_is_row_order_invariant() {
        let t1 = table(&[1.0, 2.0, 3.0]);
        let t2 = table(&[3.0, 1.0, 2.0]);
        let e = TransformExpr::Linear(LinearExpr::single(2.0, FeatureRef::attr("a3")));
        let g1: Vec<Value> = [2.0, 4.0, 6.0].iter().map(|x| Value::Number(*x)).collect();
        let g2: Vec<Value> = [6.0, 2.0, 4.0].iter().map(|x| Value::Number(*x)).collect();
        assert_eq!(
            validity(&e, &t1, &g1, 3).unwrap(),
            validity(&e, &t2, &g2, 3).unwrap()
        );
    }

    #[test]
    fn missing_equals_missing_counts_as_hit() {
        let pred = vec![Value::Missing, Value::Number(1.0)];
        let goal = vec![Value::Missing, Value::Number(1.0)];
        assert_eq!(column_validity(&pred, &goal, 2), 1.0);
    }
}
