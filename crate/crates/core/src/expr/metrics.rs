//! Explainability metrics: conciseness (component count) and concentration
//! (chunk count), both reported as reciprocals in `(0, 1]`.

use super::{FeatureRef, TransformExpr};

/// Number of components `N_c` and its reciprocal score.
///
/// Linear models count coefficients, with the intercept counted only when
/// nonzero; trees and predicates count nodes; programs count lines; markers
/// count as a single component.
pub fn conciseness(e: &TransformExpr) -> (usize, f64) {
    let n = match e {
        TransformExpr::Linear(lin) => {
            lin.terms.len() + usize::from(lin.intercept != 0.0)
        }
        TransformExpr::Tree(root) => root.n_nodes(),
        TransformExpr::Predicate(root) => root.n_nodes(),
        TransformExpr::Program(p) => p.steps.len(),
        TransformExpr::Marker(_) => 1,
    }
    .max(1);
    (n, 1.0 / n as f64)
}

/// Number of chunks `N_g` and its reciprocal score.
///
/// For linear models a chunk is one distinct extension shape used by the
/// terms (the raw-attribute baseline always counts as one chunk): `exp(A)`
/// has two chunks, a degree-d polynomial has d, and a plain linear
/// combination has one. Trees and predicates count internal nodes; programs
/// count intermediate transformations (steps − 1); markers count as one.
pub fn concentration(e: &TransformExpr) -> (usize, f64) {
    let n = match e {
        TransformExpr::Linear(lin) => {
            let mut chunks: Vec<String> = Vec::new();
            for (_, f) in &lin.terms {
                if let Some(c) = extension_chunk(f) {
                    if !chunks.contains(&c) {
                        chunks.push(c);
                    }
                }
            }
            1 + chunks.len()
        }
        TransformExpr::Tree(root) => root.n_internal(),
        TransformExpr::Predicate(root) => root.n_internal(),
        TransformExpr::Program(p) => p.steps.len().saturating_sub(1),
        TransformExpr::Marker(_) => 1,
    }
    .max(1);
    (n, 1.0 / n as f64)
}

/// Uniform combination of the two reciprocal scores.
pub fn total_explainability(e: &TransformExpr) -> f64 {
    0.5 * conciseness(e).1 + 0.5 * concentration(e).1
}

/// Canonical descriptor of a feature's extension shape, ignoring which base
/// attributes it reads. Raw attributes and primitive text reads (length,
/// pattern count/containment) have no extension shape.
fn extension_chunk(f: &FeatureRef) -> Option<String> {
    let d = shape(f);
    (!d.is_empty()).then(|| d.join("∘"))
}

fn shape(f: &FeatureRef) -> Vec<String> {
    match f {
        FeatureRef::Attr(_)
        | FeatureRef::CountPat(..)
        | FeatureRef::ContainsPat(..)
        | FeatureRef::Length(_) => vec![],
        FeatureRef::Pow(inner, k) => push(shape(inner), format!("poly{k}")),
        FeatureRef::Math(op, inner) => push(shape(inner), format!("math-{}", op.name())),
        FeatureRef::Agg(op, inner) => push(shape(inner), format!("agg-{}", op.name())),
        FeatureRef::GroupAgg(op, inner, _) => push(shape(inner), format!("groupby-{}", op.name())),
        FeatureRef::OneHot(..) => vec!["onehot".into()],
        FeatureRef::Product(a, b) | FeatureRef::Quotient(a, b) => {
            let mut s = shape(a);
            for part in shape(b) {
                if !s.contains(&part) {
                    s.push(part);
                }
            }
            push(s, "inter".into())
        }
    }
}

fn push(mut v: Vec<String>, s: String) -> Vec<String> {
    if !v.contains(&s) {
        v.push(s);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{LinearExpr, MathOp, RowAction, TreeNode};
    use crate::value::Value;

    fn attr(a: &str) -> FeatureRef {
        FeatureRef::attr(a)
    }

    #[test]
    fn single_math_term_scores_one_and_half() {
        // exp(A): one coefficient, base + math chunk.
        let e = TransformExpr::Linear(LinearExpr::single(
            1.0,
            FeatureRef::Math(MathOp::Exp, Box::new(attr("a"))),
        ));
        assert_eq!(conciseness(&e), (1, 1.0));
        assert_eq!(concentration(&e), (2, 0.5));
    }

    #[test]
    fn taylor_polynomial_scores() {
        // 1 + A + A²/2 + A³/6: d = 3 → conciseness 1/(d+1), concentration 1/d.
        let d = 3u32;
        let mut terms = vec![(1.0, attr("a"))];
        for k in 2..=d {
            terms.push((1.0, FeatureRef::Pow(Box::new(attr("a")), k)));
        }
        let e = TransformExpr::Linear(LinearExpr { terms, intercept: 1.0 });
        assert_eq!(conciseness(&e).0, (d + 1) as usize);
        assert_eq!(concentration(&e).0, d as usize);
    }

    #[test]
    fn plain_sum_versus_extended_pair() {
        // A1 + A2 + 5 vs log(A1) + A2²·A1.
        let e1 = TransformExpr::Linear(LinearExpr {
            terms: vec![(1.0, attr("a1")), (1.0, attr("a2"))],
            intercept: 5.0,
        });
        let e2 = TransformExpr::Linear(LinearExpr {
            terms: vec![
                (1.0, FeatureRef::Math(MathOp::Log, Box::new(attr("a1")))),
                (
                    1.0,
                    FeatureRef::Product(
                        Box::new(FeatureRef::Pow(Box::new(attr("a2")), 2)),
                        Box::new(attr("a1")),
                    ),
                ),
            ],
            intercept: 0.0,
        });
        assert_eq!(conciseness(&e1), (3, 1.0 / 3.0));
        assert_eq!(conciseness(&e2), (2, 0.5));
        assert_eq!(concentration(&e1), (1, 1.0));
        assert_eq!(concentration(&e2), (3, 1.0 / 3.0));
    }

    #[test]
    fn trees_count_nodes_and_internal_nodes() {
        let leaf = |v: f64| Box::new(TreeNode::Leaf(Value::Number(v)));
        let tree = TransformExpr::Tree(TreeNode::SplitNum {
            feature: attr("a3"),
            threshold: 8.0,
            le: leaf(0.0),
            gt: leaf(1.0),
        });
        assert_eq!(conciseness(&tree), (3, 1.0 / 3.0));
        assert_eq!(concentration(&tree), (1, 1.0));
    }

    #[test]
    fn predicate_and_program_and_marker_metrics() {
        let pred = TransformExpr::Predicate(TreeNode::SplitNum {
            feature: attr("a3"),
            threshold: 8.5,
            le: Box::new(TreeNode::Leaf(RowAction::Remove)),
            gt: Box::new(TreeNode::Leaf(RowAction::Maintain)),
        });
        assert_eq!(conciseness(&pred).0, 3);
        assert_eq!(concentration(&pred).0, 1);

        let prog = TransformExpr::Program(crate::expr::StringProgram {
            steps: vec![
                crate::expr::StringOp::Split { col: 0, delim: "(".into() },
                crate::expr::StringOp::Split { col: 1, delim: ")".into() },
                crate::expr::StringOp::Drop { col: 0 },
                crate::expr::StringOp::Drop { col: 1 },
            ],
        });
        assert_eq!(conciseness(&prog).0, 4);
        assert_eq!(concentration(&prog).0, 3);

        let marker = TransformExpr::Marker(crate::expr::Marker::new(
            crate::expr::MarkerKind::ContainsMissing,
        ));
        assert_eq!(conciseness(&marker), (1, 1.0));
        assert_eq!(concentration(&marker), (1, 1.0));
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let e = TransformExpr::Linear(LinearExpr::default());
        let (_, c) = conciseness(&e);
        let (_, g) = concentration(&e);
        assert!(c > 0.0 && c <= 1.0);
        assert!(g > 0.0 && g <= 1.0);
        assert!(total_explainability(&e) <= 1.0);
    }
}
