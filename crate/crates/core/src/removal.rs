//! Explanations for removed attributes: missing-information, duplication,
//! value overlap, and determinacy checks, in that order. Every satisfied
//! rule is reported; the first is the primary one. A removal with no
//! satisfied rule is idiopathic.

use crate::error::Result;
use crate::expr::{Marker, MarkerKind};
use crate::fd;
use crate::table::{AttributeMatch, Table};
use crate::value::{Value, ValueKey};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct RemovalParams {
    /// NaN-ratio threshold for the missing-information rule.
    pub alpha: f64,
    /// Multiset-Jaccard threshold for the overlap rule.
    pub overlap_threshold: f64,
    pub max_determinant_size: usize,
}

impl Default for RemovalParams {
    fn default() -> Self {
        RemovalParams { alpha: 0.5, overlap_threshold: 0.9, max_determinant_size: 3 }
    }
}

/// Matched row-index pairs (left row, right row) by shared tuple id, in
/// left order.
fn matched_rows(left: &Table, right: &Table) -> Vec<(usize, usize)> {
    left.tuple_ids()
        .iter()
        .enumerate()
        .filter_map(|(li, id)| right.row_index(id).map(|ri| (li, ri)))
        .collect()
}

fn missing_ratio(col: &[Value]) -> f64 {
    if col.is_empty() {
        return 0.0;
    }
    col.iter().filter(|v| v.is_missing()).count() as f64 / col.len() as f64
}

/// Multiset Jaccard between two value collections:
/// Σ min(count) / Σ max(count).
fn multiset_jaccard(a: &[&Value], b: &[&Value]) -> f64 {
    let mut ca: HashMap<ValueKey, usize> = HashMap::new();
    let mut cb: HashMap<ValueKey, usize> = HashMap::new();
    for v in a {
        *ca.entry(v.key()).or_default() += 1;
    }
    for v in b {
        *cb.entry(v.key()).or_default() += 1;
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (k, &na) in &ca {
        let nb = cb.get(k).copied().unwrap_or(0);
        inter += na.min(nb);
        union += na.max(nb);
    }
    for (k, &nb) in &cb {
        if !ca.contains_key(k) {
            union += nb;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// All satisfied removal rules for `goal_attr` (a left attribute absent
/// from the match), in the fixed check order. Empty means idiopathic.
pub fn explain_attr_removal(
    goal_attr: &str,
    left: &Table,
    right: &Table,
    m: &AttributeMatch,
    params: &RemovalParams,
) -> Result<Vec<Marker>> {
    if m.right_for(goal_attr).is_some() {
        return Err(crate::error::Error::fit(format!(
            "attribute {goal_attr:?} is matched, not removed"
        )));
    }
    let goal_col = left.col(goal_attr)?;
    let mut out = Vec::new();

    if missing_ratio(goal_col) > params.alpha {
        out.push(Marker { kind: MarkerKind::ContainsMissing, refs: vec![], param: Some(params.alpha) });
    }

    let pairs = matched_rows(left, right);
    if !pairs.is_empty() {
        // Exact duplicate of a surviving right-hand column, compared on
        // matched tuples.
        for rc in right.columns() {
            let rcol = right.col(&rc.id)?;
            let equal = pairs
                .iter()
                .all(|&(li, ri)| goal_col[li].key() == rcol[ri].key());
            if equal {
                out.push(Marker::with_refs(MarkerKind::DuplicateOf, vec![rc.id.clone()]));
                break;
            }
        }

        // Value overlap with a right-hand column.
        let goal_vals: Vec<&Value> = pairs.iter().map(|&(li, _)| &goal_col[li]).collect();
        let mut best: Option<(f64, String)> = None;
        for rc in right.columns() {
            let rcol = right.col(&rc.id)?;
            let rvals: Vec<&Value> = pairs.iter().map(|&(_, ri)| &rcol[ri]).collect();
            let j = multiset_jaccard(&goal_vals, &rvals);
            if j >= params.overlap_threshold {
                let better = best.as_ref().map(|(bj, _)| j > *bj).unwrap_or(true);
                if better {
                    best = Some((j, rc.id.clone()));
                }
            }
        }
        if let Some((j, attr)) = best {
            // Full duplicates already reported above; overlap adds signal
            // only when it is not the same trivial column.
            if !out
                .iter()
                .any(|mk| mk.kind == MarkerKind::DuplicateOf && mk.refs == vec![attr.clone()])
            {
                out.push(Marker { kind: MarkerKind::OverlapsWith, refs: vec![attr], param: Some(j) });
            }
        }

        // Some right-hand attribute set determines the removed column.
        let right_matched_rows: Vec<usize> = pairs.iter().map(|&(_, ri)| ri).collect();
        let right_sub = right.select_rows(&right_matched_rows);
        let goal_aligned: Vec<Value> =
            pairs.iter().map(|&(li, _)| goal_col[li].clone()).collect();
        let cands = fd::discover_determinants(&right_sub, &goal_aligned, params.max_determinant_size)?;
        if let Some(best) = fd::rank_origins(cands).into_iter().next() {
            out.push(Marker::with_refs(MarkerKind::DeterminedBy, best.attrs));
        }
    }

    Ok(out)
}

/// Re-check one removal rule on a (possibly hold-out) pair. Scoring is 0/1
/// per attribute: the rule must reproduce the removal decision.
pub fn marker_holds(
    marker: &Marker,
    goal_attr: &str,
    left: &Table,
    right: &Table,
    m: &AttributeMatch,
    params: &RemovalParams,
) -> bool {
    if !left.has_attr(goal_attr) || m.right_for(goal_attr).is_some() {
        return false; // not a removal on this pair
    }
    let Ok(goal_col) = left.col(goal_attr) else { return false };
    let pairs = matched_rows(left, right);
    match marker.kind {
        MarkerKind::ContainsMissing => {
            missing_ratio(goal_col) > marker.param.unwrap_or(params.alpha)
        }
        MarkerKind::DuplicateOf => {
            let Some(attr) = marker.refs.first() else { return false };
            let Ok(rcol) = right.col(attr) else { return false };
            !pairs.is_empty()
                && pairs.iter().all(|&(li, ri)| goal_col[li].key() == rcol[ri].key())
        }
        MarkerKind::OverlapsWith => {
            let Some(attr) = marker.refs.first() else { return false };
            let Ok(rcol) = right.col(attr) else { return false };
            let goal_vals: Vec<&Value> = pairs.iter().map(|&(li, _)| &goal_col[li]).collect();
            let rvals: Vec<&Value> = pairs.iter().map(|&(_, ri)| &rcol[ri]).collect();
            multiset_jaccard(&goal_vals, &rvals) >= params.overlap_threshold
        }
        MarkerKind::DeterminedBy => {
            if pairs.is_empty() {
                return false;
            }
            for a in &marker.refs {
                if !right.has_attr(a) {
                    return false;
                }
            }
            // Group matched rows by the determinant values; the goal must
            // be constant within each group.
            let mut groups: HashMap<Vec<ValueKey>, ValueKey> = HashMap::new();
            for &(li, ri) in &pairs {
                let key: Vec<ValueKey> = marker
                    .refs
                    .iter()
                    .map(|a| right.col(a).map(|c| c[ri].key()).unwrap_or(ValueKey::Missing))
                    .collect();
                let goal_key = goal_col[li].key();
                match groups.get(&key) {
                    Some(existing) if *existing != goal_key => return false,
                    Some(_) => {}
                    None => {
                        groups.insert(key, goal_key);
                    }
                }
            }
            true
        }
        _ => false,
    }
}
