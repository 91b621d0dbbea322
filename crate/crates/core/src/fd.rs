//! Origin finding through functional-dependency discovery.
//!
//! A set of attributes `S` determines a goal column when no two tuples agree
//! on `S` but disagree on the goal. Discovery builds a negative cover from
//! pairwise tuple violations (the maximal agree-sets of goal-disagreeing
//! pairs) and derives all minimal determinants up to a size bound; on large
//! tables discovery runs on a row sample and candidates are verified against
//! the full table by hashed grouping.

use crate::error::{Error, Result};
use crate::table::Table;
use crate::value::{Value, ValueKey};
use std::collections::HashMap;

/// A candidate origin: the determinant attribute set plus the ranking keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginCandidate {
    pub attrs: Vec<String>,
    pub size: usize,
    pub max_cardinality: usize,
}

/// Rows beyond this switch discovery to a sample (candidates are still
/// verified on every row).
const SAMPLE_THRESHOLD: usize = 50_000;
const SAMPLE_ROWS: usize = 10_000;
/// Pairwise negative-cover construction is quadratic; above this row count
/// the cover is built from a stride sample of rows.
const PAIRWISE_CAP: usize = 1_500;

/// Find every minimal attribute set of size ≤ `max_size` that functionally
/// determines `goal_values`. The goal column must align with `t` row for
/// row. Results are unranked; see [`rank_origins`].
pub fn discover_determinants(
    t: &Table,
    goal_values: &[Value],
    max_size: usize,
) -> Result<Vec<OriginCandidate>> {
    if goal_values.len() != t.n_rows() {
        return Err(Error::other(format!(
            "goal column has {} values for {} rows",
            goal_values.len(),
            t.n_rows()
        )));
    }
    if max_size == 0 {
        return Ok(vec![]);
    }
    let attrs = t.attr_ids();
    if attrs.is_empty() {
        return Ok(vec![]);
    }
    if attrs.len() > 64 {
        return Err(Error::other("dependency discovery supports at most 64 attributes"));
    }

    // Column keys once, goal keys once.
    let col_keys: Vec<Vec<ValueKey>> = attrs
        .iter()
        .map(|a| Ok(t.col(a)?.iter().map(Value::key).collect()))
        .collect::<Result<_>>()?;
    let goal_keys: Vec<ValueKey> = goal_values.iter().map(Value::key).collect();

    let sampled = t.n_rows() > SAMPLE_THRESHOLD;
    let rows: Vec<usize> = if sampled {
        stride_sample(t.n_rows(), SAMPLE_ROWS)
    } else {
        (0..t.n_rows()).collect()
    };
    let pair_sampled = sampled || rows.len() > PAIRWISE_CAP;

    let cover = negative_cover(&col_keys, &goal_keys, &rows);

    // Enumerate subsets in ascending size; a set is a determinant when it is
    // not contained in any agree-set of the cover. Supersets of accepted
    // determinants are skipped, which keeps the result minimal.
    let n = attrs.len();
    let mut found_masks: Vec<u64> = Vec::new();
    let mut out = Vec::new();
    let mut subset = Vec::new();
    for size in 1..=max_size.min(n) {
        enumerate_subsets(n, size, 0, &mut subset, &mut |mask: u64| {
            if found_masks.iter().any(|f| f & mask == *f) {
                return;
            }
            if cover.iter().any(|agree| mask & agree == mask) {
                return;
            }
            // Sampled covers can admit false positives; verify exactly.
            if pair_sampled && !verify_fd(&col_keys, &goal_keys, mask) {
                return;
            }
            found_masks.push(mask);
            let chosen: Vec<String> = (0..n)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| attrs[j].clone())
                .collect();
            let max_cardinality = (0..n)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| cardinality(&col_keys[j]))
                .max()
                .unwrap_or(0);
            out.push(OriginCandidate { attrs: chosen, size, max_cardinality });
        });
    }
    Ok(out)
}

/// Sort ascending by size, then by the largest distinct-value count among
/// the attributes, then lexicographically. Deterministic regardless of
/// discovery order.
pub fn rank_origins(mut cands: Vec<OriginCandidate>) -> Vec<OriginCandidate> {
    cands.sort_by(|a, b| {
        a.size
            .cmp(&b.size)
            .then(a.max_cardinality.cmp(&b.max_cardinality))
            .then_with(|| a.attrs.cmp(&b.attrs))
    });
    cands
}

fn cardinality(keys: &[ValueKey]) -> usize {
    keys.iter().collect::<std::collections::HashSet<_>>().len()
}

fn stride_sample(n: usize, want: usize) -> Vec<usize> {
    if n <= want {
        return (0..n).collect();
    }
    (0..want).map(|i| i * n / want).collect()
}

/// Maximal agree-sets (as bitmasks over columns) of row pairs that disagree
/// on the goal.
fn negative_cover(col_keys: &[Vec<ValueKey>], goal_keys: &[ValueKey], rows: &[usize]) -> Vec<u64> {
    let rows: Vec<usize> =
        if rows.len() > PAIRWISE_CAP { stride_sample_of(rows, PAIRWISE_CAP) } else { rows.to_vec() };
    let mut sets: Vec<u64> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, &ri) in rows.iter().enumerate() {
        for &rj in rows.iter().skip(i + 1) {
            if goal_keys[ri] == goal_keys[rj] {
                continue;
            }
            let mut mask = 0u64;
            for (j, col) in col_keys.iter().enumerate() {
                if col[ri] == col[rj] {
                    mask |= 1 << j;
                }
            }
            if seen.insert(mask) {
                sets.push(mask);
            }
        }
    }
    // Keep maximal sets only.
    let mut maximal: Vec<u64> = Vec::new();
    for &m in &sets {
        if sets.iter().any(|&o| o != m && o & m == m) {
            continue;
        }
        maximal.push(m);
    }
    maximal
}

fn stride_sample_of(rows: &[usize], want: usize) -> Vec<usize> {
    (0..want).map(|i| rows[i * rows.len() / want]).collect()
}

/// Exact check by hashed grouping: group rows by the values of the masked
/// columns and require one goal key per group.
fn verify_fd(col_keys: &[Vec<ValueKey>], goal_keys: &[ValueKey], mask: u64) -> bool {
    let cols: Vec<&Vec<ValueKey>> = col_keys
        .iter()
        .enumerate()
        .filter(|(j, _)| mask & (1 << j) != 0)
        .map(|(_, c)| c)
        .collect();
    let mut groups: HashMap<Vec<&ValueKey>, &ValueKey> = HashMap::new();
    for i in 0..goal_keys.len() {
        let key: Vec<&ValueKey> = cols.iter().map(|c| &c[i]).collect();
        match groups.get(&key) {
            Some(existing) => {
                if **existing != goal_keys[i] {
                    return false;
                }
            }
            None => {
                groups.insert(key, &goal_keys[i]);
            }
        }
    }
    true
}

fn enumerate_subsets(
    n: usize,
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(u64),
) {
    if current.len() == size {
        let mask = current.iter().fold(0u64, |m, &j| m | (1 << j));
        visit(mask);
        return;
    }
    for j in start..n {
        current.push(j);
        enumerate_subsets(n, size, j + 1, current, visit);
        current.pop();
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn table(attrs: &[&str], rows: &[&[&str]]) -> Table {
        Table::from_rows(
            "t",
            attrs.iter().map(|s| s.to_string()).collect(),
            (0..rows.len()).map(|i| format!("m{}", i + 1)).collect(),
            rows.iter()
                .map(|r| r.iter().map(|c| Value::parse_cell(c)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scaled_column_is_determined_by_its_source() {
        let t = table(
            &["a1", "a2", "a3"],
            &[
                &["Moana (U)", "120", "7.6"],
                &["Up (U)", "120", "8.2"],
                &["Heat (15)", "170", "9.0"],
                &["It (15)", "96", "6.1"],
            ],
        );
        let goal: Vec<Value> = t
            .col("a2")
            .unwrap()
            .iter()
            .map(|v| match v {
                Value::Number(n) => Value::Number(n / 60.0),
                other => other.clone(),
            })
            .collect();
        let found = discover_determinants(&t, &goal, 2).unwrap();
        assert!(found.iter().any(|c| c.attrs == vec!["a2".to_string()]));
        // a1 is all-distinct so it trivially determines the goal as well.
        assert!(found.iter().any(|c| c.attrs == vec!["a1".to_string()]));
        // Minimality: no returned set strictly contains another.
        for a in &found {
            for b in &found {
                if a != b {
                    assert!(!a.attrs.iter().all(|x| b.attrs.contains(x)));
                }
            }
        }
    }

    #[test]
    fn identity_dependency() {
        let t = table(&["a3", "a4"], &[&["7.6", "x"], &["8.2", "x"], &["7.6", "y"]]);
        let goal = t.col("a3").unwrap().to_vec();
        let found = discover_determinants(&t, &goal, 2).unwrap();
        assert!(found.iter().any(|c| c.attrs == vec!["a3".to_string()]));
    }

    #[test]
    fn matches_brute_force_on_a_toy_table() {
        let t = table(
            &["x", "y", "z"],
            &[&["1", "a", "0"], &["1", "b", "0"], &["2", "a", "1"], &["2", "b", "1"]],
        );
        let goal = t.col("z").unwrap().to_vec();
        let got = rank_origins(discover_determinants(&t, &goal, 2).unwrap());
        let want = rank_origins(oracle::brute_force(&t, &goal, 2));
        assert_eq!(got, want);
        assert!(got.iter().any(|c| c.attrs == vec!["x".to_string()]));
    }

    #[test]
    fn ranking_prefers_small_then_low_cardinality_then_lex() {
        let mk = |attrs: &[&str], size: usize, card: usize| OriginCandidate {
            attrs: attrs.iter().map(|s| s.to_string()).collect(),
            size,
            max_cardinality: card,
        };
        let ranked = rank_origins(vec![
            mk(&["a1", "a2"], 2, 10),
            mk(&["a3"], 1, 150),
            mk(&["a2"], 1, 3),
        ]);
        assert_eq!(ranked[0].attrs, vec!["a2"]);
        assert_eq!(ranked[1].attrs, vec!["a3"]);
        assert_eq!(ranked[2].attrs, vec!["a1", "a2"]);

        let single = rank_origins(vec![mk(&["q"], 1, 5)]);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn missing_equals_missing_in_dependency_checks() {
        let t = table(&["x"], &[&["NaN"], &["NaN"], &["3"]]);
        let goal = vec![Value::Number(1.0), Value::Number(1.0), Value::Number(2.0)];
        let found = discover_determinants(&t, &goal, 1).unwrap();
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn misaligned_goal_errors() {
        let t = table(&["x"], &[&["1"], &["2"]]);
        assert!(discover_determinants(&t, &[Value::Number(1.0)], 1).is_err());
    }
}
