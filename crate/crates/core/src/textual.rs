//! Text explainers: A* synthesis of string programs (text → text) and
//! pattern meta-operator features (text → numeric, text → categorical).
//!
//! The search state is the current column list (evaluated on a row sample
//! for speed); operators come from the registered [`StringOp`] set, with
//! candidate split delimiters drawn from a fixed punctuation set plus
//! characters mined from the examples. Duplicate states are pruned, cost is
//! program length, and the heuristic is the mean normalized edit distance
//! of the closest column to the goal. A full-agreement program is verified
//! against every row before it is returned; at timeout the best partial
//! program is returned instead, flagged as timed out.

use crate::categorical::{fit_tree, TreeParams};
use crate::error::Result;
use crate::evaluate;
use crate::expr::{
    apply_string_op, FeatureRef, LinearExpr, Pattern, StringOp, StringProgram, TransformExpr,
};
use crate::feature::{FeatureCol, FeatureMatrix};
use crate::numeric::NumericParams;
use crate::table::Table;
use crate::value::Value;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};
use std::time::Instant;

/// Fixed English stopword list shipped with the crate (50 words).
pub const STOPWORDS: [&str; 50] = [
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "but", "by", "can", "could", "for", "from", "had", "has", "have", "he", "her", "his",
    "i", "in", "into", "is", "it", "its", "just", "my", "no", "not", "of", "on", "or", "so",
    "that", "the", "their", "then", "there", "they", "this", "to", "was", "with",
];

pub fn is_stopword(w: &str) -> bool {
    let lw = w.to_lowercase();
    STOPWORDS.contains(&lw.as_str())
}

/// Suffix-stripping stemmer in the Porter style: longest matching rule
/// wins, stems never shrink below three characters. Approximate by design.
pub fn stem_word(w: &str) -> String {
    const RULES: [(&str, &str); 16] = [
        ("ational", "ate"),
        ("ization", "ize"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("iveness", "ive"),
        ("tional", "tion"),
        ("ities", "ity"),
        ("ingly", ""),
        ("ness", ""),
        ("ment", ""),
        ("edly", ""),
        ("ing", ""),
        ("ies", "y"),
        ("ed", ""),
        ("es", ""),
        ("s", ""),
    ];
    let lower = w.to_lowercase();
    for (suffix, replacement) in RULES {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.chars().count() >= 3 && stem.chars().any(is_vowel) {
                return format!("{stem}{replacement}");
            }
        }
    }
    lower
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

const FIXED_DELIMS: [&str; 14] =
    ["(", ")", ",", ":", ";", "-", "_", "/", ".", " ", "[", "]", "@", "|"];

/// Punctuation-style literal patterns for count/contains features.
const PATTERN_CHARS: [&str; 13] =
    [" ", ",", ".", "?", "!", "%", "(", ")", ":", ";", "-", "'", "\""];

/// Search tuning.
#[derive(Debug, Clone)]
pub struct SearchParams {
    pub timeout: std::time::Duration,
    pub max_expansions: usize,
    pub sample_rows: usize,
    pub max_program_len: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            timeout: std::time::Duration::from_secs(60),
            max_expansions: 50_000,
            sample_rows: 48,
            max_program_len: 6,
        }
    }
}

/// Result of one synthesis run.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub program: StringProgram,
    /// Agreement on the full column (1.0 = every row reproduced).
    pub validity: f64,
    pub timed_out: bool,
    pub expansions: usize,
}

type State = Vec<Vec<Option<String>>>;

fn state_hash(state: &State) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    state.hash(&mut h);
    h.finish()
}

#[derive(Debug)]
struct Node {
    state: State,
    parent: Option<usize>,
    op: Option<StringOp>,
    depth: usize,
}

struct HeapItem {
    f: f64,
    seq: usize,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.seq == other.seq
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap via reversed compare; ties break on insertion order for
        // a deterministic expansion sequence.
        other
            .f
            .partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Character-level Levenshtein distance, capped for long cells.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().take(64).collect();
    let b: Vec<char> = b.chars().take(64).collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn column_distance(col: &[Option<String>], goal: &[Option<String>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (c, g) in col.iter().zip(goal) {
        match (c, g) {
            (Some(c), Some(g)) => {
                let d = edit_distance(c, g) as f64;
                let len = c.chars().count().max(g.chars().count()).max(1) as f64;
                total += d / len;
                n += 1;
            }
            (None, None) => n += 1,
            _ => {
                total += 1.0;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn heuristic(state: &State, goal: &[Option<String>]) -> f64 {
    let best = state
        .iter()
        .map(|c| column_distance(c, goal))
        .fold(f64::INFINITY, f64::min);
    best * 3.0 + 0.5 * (state.len().saturating_sub(1)) as f64
}

fn column_agreement(col: &[Option<String>], goal: &[Option<String>]) -> f64 {
    if goal.is_empty() {
        return 0.0;
    }
    let hits = col.iter().zip(goal).filter(|(c, g)| c == g).count();
    hits as f64 / goal.len() as f64
}

/// Candidate split delimiters for one column: fixed punctuation present in
/// the sample plus characters that appear in the origin but not the goal.
fn candidate_delims(col: &[Option<String>], goal: &[Option<String>]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let text: String = col.iter().flatten().cloned().collect::<Vec<_>>().join("\n");
    for d in FIXED_DELIMS {
        if text.contains(d) && !out.iter().any(|x| x == d) {
            out.push(d.to_string());
        }
    }
    let goal_text: String = goal.iter().flatten().cloned().collect::<Vec<_>>().join("\n");
    for c in text.chars() {
        if c == '\n' || c.is_alphanumeric() {
            continue;
        }
        if !goal_text.contains(c) {
            let s = c.to_string();
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

fn proposals(state: &State, goal: &[Option<String>]) -> Vec<StringOp> {
    let mut ops = Vec::new();
    let ncols = state.len();
    for col in 0..ncols {
        for d in candidate_delims(&state[col], goal) {
            ops.push(StringOp::Split { col, delim: d });
        }
        ops.push(StringOp::Lower { col });
        ops.push(StringOp::Upper { col });
        ops.push(StringOp::Trim { col });
        ops.push(StringOp::StripPunct { col });
        ops.push(StringOp::StripDigits { col });
        ops.push(StringOp::StripHtml { col });
        ops.push(StringOp::RemoveStopwords { col });
        ops.push(StringOp::Stem { col });
        if ncols > 1 {
            ops.push(StringOp::Drop { col });
        }
    }
    for col in 0..ncols.saturating_sub(1) {
        for sep in ["", " "] {
            ops.push(StringOp::Merge { col, sep: sep.to_string() });
        }
    }
    ops
}

/// Synthesize a text-to-text program mapping the (single-column) origin to
/// the goal column. Never fails: at worst returns the best partial program
/// found before the deadline.
pub fn synthesize_text_to_text(
    origin: &Table,
    origin_attr: &str,
    goal: &[Value],
    params: &SearchParams,
) -> Result<SearchOutcome> {
    let full_col: Vec<Option<String>> =
        origin.col(origin_attr)?.iter().map(Value::to_text_cell).collect();
    let full_goal: Vec<Option<String>> = goal.iter().map(Value::to_text_cell).collect();

    let n_sample = params.sample_rows.min(full_col.len());
    let sample_col: Vec<Option<String>> = full_col[..n_sample].to_vec();
    let sample_goal: Vec<Option<String>> = full_goal[..n_sample].to_vec();
    let origin_col = origin.project(&[origin_attr.to_string()])?;
    let full_validity = |program: &StringProgram| -> f64 {
        let expr = TransformExpr::Program(program.clone());
        evaluate::validity(&expr, &origin_col, goal, goal.len().max(1)).unwrap_or(0.0)
    };

    let deadline = Instant::now() + params.timeout;
    let start_state: State = vec![sample_col];

    let mut nodes: Vec<Node> = vec![Node { state: start_state, parent: None, op: None, depth: 0 }];
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(state_hash(&nodes[0].state));
    heap.push(HeapItem { f: heuristic(&nodes[0].state, &sample_goal), seq: 0, node: 0 });

    let mut best_partial: (f64, StringProgram) = (
        column_agreement(&nodes[0].state[0], &sample_goal),
        StringProgram::default(),
    );
    let mut expansions = 0usize;
    let mut seq = 0usize;
    let mut timed_out = false;
    let mut exact_misses = 0usize;

    fn reconstruct(nodes: &[Node], mut i: usize) -> StringProgram {
        let mut steps = Vec::new();
        while let Some(op) = nodes[i].op.clone() {
            steps.push(op);
            i = nodes[i].parent.expect("non-root has a parent");
        }
        steps.reverse();
        StringProgram { steps }
    }

    while let Some(item) = heap.pop() {
        if Instant::now() >= deadline || expansions >= params.max_expansions {
            timed_out = true;
            break;
        }
        expansions += 1;
        let idx = item.node;
        let depth = nodes[idx].depth;

        // Goal test on the sample, then verification on the full column.
        if nodes[idx].state.len() == 1 && nodes[idx].state[0] == sample_goal {
            let program = reconstruct(&nodes, idx);
            let validity = full_validity(&program);
            if validity >= 1.0 || n_sample == full_col.len() {
                return Ok(SearchOutcome { program, validity, timed_out: false, expansions });
            }
            if validity > best_partial.0 {
                best_partial = (validity, program);
            }
            exact_misses += 1;
            if exact_misses >= 5 {
                timed_out = true;
                break;
            }
            continue;
        }

        if depth >= params.max_program_len {
            continue;
        }
        for op in proposals(&nodes[idx].state, &sample_goal) {
            let mut next = nodes[idx].state.clone();
            if apply_string_op(&op, &mut next).is_err() {
                continue;
            }
            let h = state_hash(&next);
            if !seen.insert(h) {
                continue;
            }
            // Track the best single-column agreement for partial results.
            if next.len() == 1 {
                let agree = column_agreement(&next[0], &sample_goal);
                if agree > best_partial.0 {
                    let mut prog = reconstruct(&nodes, idx);
                    prog.steps.push(op.clone());
                    best_partial = (agree, prog);
                }
            }
            let g = (depth + 1) as f64;
            let f = g + heuristic(&next, &sample_goal);
            nodes.push(Node { state: next, parent: Some(idx), op: Some(op), depth: depth + 1 });
            seq += 1;
            heap.push(HeapItem { f, seq, node: nodes.len() - 1 });
        }
    }

    // Best-effort: re-score the best partial program on the full column.
    let (_, program) = best_partial;
    let validity = full_validity(&program);
    Ok(SearchOutcome { program, validity, timed_out, expansions })
}

/// The registered pattern library for an origin column: punctuation chars,
/// the digit class, stopwords, and literal substrings mined from the
/// example cells (longest common substrings, length ≥ 2).
pub fn pattern_library(t: &Table, attr: &str) -> Vec<Pattern> {
    let mut pats: Vec<Pattern> = PATTERN_CHARS
        .iter()
        .map(|c| Pattern::Literal(c.to_string()))
        .collect();
    pats.push(Pattern::Digits);
    for w in STOPWORDS {
        pats.push(Pattern::Literal(w.to_string()));
    }
    if let Ok(col) = t.col(attr) {
        let cells: Vec<String> = col.iter().filter_map(Value::to_text_cell).take(8).collect();
        for pair in cells.windows(2) {
            if let Some(sub) = longest_common_substring(&pair[0], &pair[1]) {
                if sub.chars().count() >= 2 && !sub.trim().is_empty() {
                    let p = Pattern::Literal(sub);
                    if !pats.contains(&p) {
                        pats.push(p);
                    }
                }
            }
        }
    }
    pats
}

fn longest_common_substring(a: &str, b: &str) -> Option<String> {
    let ac: Vec<char> = a.chars().take(48).collect();
    let bc: Vec<char> = b.chars().take(48).collect();
    let mut best: Option<(usize, usize)> = None; // (start in a, len)
    let mut dp = vec![0usize; bc.len() + 1];
    for i in 1..=ac.len() {
        let mut prev_diag = 0usize;
        for j in 1..=bc.len() {
            let tmp = dp[j];
            if ac[i - 1] == bc[j - 1] {
                dp[j] = prev_diag + 1;
                if best.map(|(_, l)| dp[j] > l).unwrap_or(true) {
                    best = Some((i - dp[j], dp[j]));
                }
            } else {
                dp[j] = 0;
            }
            prev_diag = tmp;
        }
    }
    best.map(|(s, l)| ac[s..s + l].iter().collect())
}

/// Text-to-numeric features: length plus pattern counts.
pub fn text_numeric_features(t: &Table, attr: &str) -> FeatureMatrix {
    let mut fm = FeatureMatrix::with_rows(t.n_rows());
    let len = FeatureRef::Length(attr.to_string());
    if let Ok(values) = crate::expr::eval_feature(&len, t) {
        fm.push(FeatureCol::new(len, values));
    }
    for pat in pattern_library(t, attr) {
        let f = FeatureRef::CountPat(attr.to_string(), pat);
        if let Ok(values) = crate::expr::eval_feature(&f, t) {
            fm.push(FeatureCol::new(f, values));
        }
    }
    fm
}

/// Explain a numeric goal from one textual origin column: direct identity
/// over length/count features, then the numeric fitting machinery over the
/// same features (so `count + 1` style compositions resolve).
pub fn synthesize_text_to_numeric(
    origin: &Table,
    origin_attr: &str,
    goal: &[Value],
    denominator: usize,
    params: &NumericParams,
) -> Result<Vec<(TransformExpr, f64)>> {
    let fm = text_numeric_features(origin, origin_attr);
    let y: Vec<Option<f64>> = goal.iter().map(Value::as_number).collect();
    let mut out: Vec<(TransformExpr, f64)> = Vec::new();
    let mut seen = HashSet::new();
    for expr in crate::numeric::scan_matrix(&fm, &y, params) {
        let key = crate::expr::serialize_expr(&expr);
        if !seen.insert(key) {
            continue;
        }
        let v = evaluate::validity(&expr, origin, goal, denominator)?;
        let stop = v >= params.early_stop_validity;
        out.push((expr, v));
        if stop {
            break;
        }
    }
    Ok(out)
}

/// Explain a categorical goal from one textual origin column: containment
/// features feed a decision tree; a containment feature that matches a 0/1
/// goal directly is emitted on its own as well.
pub fn synthesize_text_to_categorical(
    origin: &Table,
    origin_attr: &str,
    goal: &[Value],
    denominator: usize,
    tree_params: &TreeParams,
    early_stop_validity: f64,
) -> Result<Vec<(TransformExpr, f64)>> {
    let mut fm = FeatureMatrix::with_rows(origin.n_rows());
    for pat in pattern_library(origin, origin_attr) {
        let f = FeatureRef::ContainsPat(origin_attr.to_string(), pat);
        if let Ok(values) = crate::expr::eval_feature(&f, origin) {
            fm.push(FeatureCol::new(f, values));
        }
    }
    let len = FeatureRef::Length(origin_attr.to_string());
    if let Ok(values) = crate::expr::eval_feature(&len, origin) {
        fm.push(FeatureCol::new(len, values));
    }
    let mut out: Vec<(TransformExpr, f64)> = Vec::new();

    // Direct 0/1 matches.
    let y: Vec<Option<f64>> = goal.iter().map(Value::as_number).collect();
    if y.iter().any(|v| v.is_some()) {
        for col in &fm.cols {
            let exact = col.values.iter().zip(&y).all(|(p, g)| match (p, g) {
                (Some(p), Some(g)) => crate::value::numbers_match(*p, *g),
                (None, None) => true,
                _ => false,
            });
            if exact {
                let expr = TransformExpr::Linear(LinearExpr::single(1.0, col.feature.clone()));
                let v = evaluate::validity(&expr, origin, goal, denominator)?;
                let stop = v >= early_stop_validity;
                out.push((expr, v));
                if stop {
                    return Ok(out);
                }
            }
        }
    }

    if !fm.is_empty() {
        let tree = fit_tree(&fm, goal, tree_params)?;
        let expr = TransformExpr::Tree(tree);
        let v = evaluate::validity(&expr, origin, goal, denominator)?;
        out.push((expr, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::render_expr;

    fn text_table(attr: &str, cells: &[&str]) -> Table {
        Table::from_rows(
            "t",
            vec![attr.to_string()],
            (0..cells.len()).map(|i| format!("m{}", i + 1)).collect(),
            cells.iter().map(|c| vec![Value::parse_cell(c)]).collect(),
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    fn texts(cells: &[&str]) -> Vec<Value> {
        cells.iter().map(|c| Value::Text(c.to_string())).collect()
    }

    #[test]
    fn parenthesis_extraction_is_found() {
        let t = text_table(
            "a1",
            &["Moana (U)", "Heat (15)", "Up (U)", "Arrival (12A)", "It (15)"],
        );
        let goal = texts(&["U", "15", "U", "12A", "15"]);
        let out = synthesize_text_to_text(&t, "a1", &goal, &SearchParams::default()).unwrap();
        assert_eq!(out.validity, 1.0, "program: {:?}", out.program);
        assert!(!out.timed_out);
        assert!(out.program.steps.len() <= 4);
    }

    #[test]
    fn identity_goal_yields_empty_program() {
        let t = text_table("a1", &["x", "y", "z"]);
        let goal = texts(&["x", "y", "z"]);
        let out = synthesize_text_to_text(&t, "a1", &goal, &SearchParams::default()).unwrap();
        assert_eq!(out.validity, 1.0);
        assert!(out.program.steps.is_empty());
    }

    #[test]
    fn cleanup_pipeline_is_found() {
        let t = text_table(
            "a1",
            &["Moana (13)", "Heat (15)", "Inception (12)", "Coco (7)", "Alien 3 (18)"],
        );
        let goal = texts(&["moana", "heat", "inception", "coco", "alien"]);
        let out = synthesize_text_to_text(&t, "a1", &goal, &SearchParams::default()).unwrap();
        assert_eq!(out.validity, 1.0, "program: {:?}", out.program);
    }

    #[test]
    fn timeout_returns_best_partial_without_panicking() {
        let t = text_table("a1", &["aaa", "bbb", "ccc"]);
        let goal = texts(&["qqqq", "wwww", "eeee"]); // unreachable
        let params = SearchParams { max_expansions: 1, ..SearchParams::default() };
        let out = synthesize_text_to_text(&t, "a1", &goal, &params).unwrap();
        assert!(out.validity < 1.0);
        assert!(out.timed_out);
        // An exhausted (not truncated) search is not a timeout.
        let full = synthesize_text_to_text(&t, "a1", &goal, &SearchParams::default()).unwrap();
        assert!(full.validity < 1.0);
    }

    #[test]
    fn more_budget_never_lowers_validity() {
        let t = text_table("a1", &["Moana (U)", "Heat (15)", "Up (U)", "It (15)"]);
        let goal = texts(&["U", "15", "U", "15"]);
        let tiny = SearchParams { max_expansions: 3, ..SearchParams::default() };
        let small = synthesize_text_to_text(&t, "a1", &goal, &tiny).unwrap();
        let big = synthesize_text_to_text(&t, "a1", &goal, &SearchParams::default()).unwrap();
        assert!(big.validity >= small.validity);
    }

    #[test]
    fn title_length_found_directly() {
        let t = text_table("a1", &["Moana (U)", "Up (U)", "Arrival (12A)"]);
        let goal: Vec<Value> = [9.0, 6.0, 13.0].iter().map(|x| Value::Number(*x)).collect();
        let out =
            synthesize_text_to_numeric(&t, "a1", &goal, 3, &NumericParams::default()).unwrap();
        let (expr, v) = &out[0];
        assert_eq!(*v, 1.0);
        assert_eq!(render_expr(expr), "1·len(a1)");
    }

    #[test]
    fn word_count_is_count_separators_plus_one() {
        let t = text_table(
            "a1",
            &["Drama, Romance", "Action", "Drama, Action, Thriller", "Comedy, Drama", "Horror"],
        );
        let goal: Vec<Value> =
            [2.0, 1.0, 3.0, 2.0, 1.0].iter().map(|x| Value::Number(*x)).collect();
        let out =
            synthesize_text_to_numeric(&t, "a1", &goal, 5, &NumericParams::default()).unwrap();
        let exact = out.iter().find(|(_, v)| *v == 1.0).expect("count feature fit");
        let text = crate::expr::serialize_expr(&exact.0);
        assert!(text.contains("count"), "{text}");
    }

    #[test]
    fn contains_space_explains_multiword_flag() {
        let t = text_table("a1", &["Moana", "Star Wars", "Up", "The Lion King"]);
        let goal: Vec<Value> = [0.0, 1.0, 0.0, 1.0].iter().map(|x| Value::Number(*x)).collect();
        let out = synthesize_text_to_categorical(
            &t,
            "a1",
            &goal,
            4,
            &TreeParams::default(),
            0.95,
        )
        .unwrap();
        let (expr, v) = &out[0];
        assert_eq!(*v, 1.0);
        assert!(crate::expr::serialize_expr(expr).contains("contains(a1, \" \")"));
    }

    #[test]
    fn stemmer_and_stopwords_behave() {
        assert_eq!(stem_word("movies"), "movy");
        assert_eq!(stem_word("the"), "the");
        assert!(is_stopword("The"));
        assert!(!is_stopword("movie"));
        assert_eq!(STOPWORDS.len(), 50);
    }
}
