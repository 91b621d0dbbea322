//! Two text forms for expressions: `serialize_expr` is the canonical,
//! full-precision grammar that `parse_expr` inverts exactly; `render_expr`
//! is the compact human-readable form used in text reports (coefficients
//! snapped to 6 significant digits, reciprocal coefficients shown as
//! divisions, trees drawn as case blocks).

use super::{
    FeatureRef, LinearExpr, Marker, MarkerKind, Pattern, RowAction, StringOp, StringProgram,
    TransformExpr, TreeNode,
};
use crate::value::{fmt_f64, round_sig, Value};

/// Canonical serialization. `parse_expr(serialize_expr(e)) == e`.
pub fn serialize_expr(e: &TransformExpr) -> String {
    match e {
        TransformExpr::Linear(lin) => format!("linear: {}", ser_linear(lin)),
        TransformExpr::Tree(root) => format!("case: {}", ser_tree(root, &ser_value_leaf)),
        TransformExpr::Predicate(root) => {
            format!("predicate: {}", ser_tree(root, &ser_action_leaf))
        }
        TransformExpr::Program(p) => format!("program: {}", ser_program(p)),
        TransformExpr::Marker(m) => format!("marker: {}", ser_marker(m)),
    }
}

/// Human-readable rendering.
pub fn render_expr(e: &TransformExpr) -> String {
    match e {
        TransformExpr::Linear(lin) => pretty_linear(lin),
        TransformExpr::Tree(root) => pretty_tree(root, &|v: &Value| pretty_value(v)),
        TransformExpr::Predicate(root) => pretty_tree(root, &|a: &RowAction| {
            match a {
                RowAction::Remove => "remove",
                RowAction::Maintain => "maintain",
            }
            .to_string()
        }),
        TransformExpr::Program(p) => p
            .steps
            .iter()
            .map(|s| format!("t = {}", pretty_step(s)))
            .collect::<Vec<_>>()
            .join("\n"),
        TransformExpr::Marker(m) => pretty_marker(m),
    }
}

fn ident(s: &str) -> String {
    let bare = !s.is_empty()
        && s.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if bare {
        s.to_string()
    } else {
        quote(s)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn pattern(p: &Pattern) -> String {
    match p {
        Pattern::Literal(s) => quote(s),
        Pattern::Digits => "@digits".to_string(),
    }
}

/// Canonical feature text; full precision, fully parenthesized binaries.
pub fn ser_feature(f: &FeatureRef) -> String {
    match f {
        FeatureRef::Attr(a) => ident(a),
        FeatureRef::Pow(inner, k) => {
            let base = match **inner {
                FeatureRef::Attr(_) => ser_feature(inner),
                _ => format!("({})", ser_feature(inner)),
            };
            format!("{base}^{k}")
        }
        FeatureRef::Product(a, b) => format!("({} · {})", ser_feature(a), ser_feature(b)),
        FeatureRef::Quotient(a, b) => format!("({} ÷ {})", ser_feature(a), ser_feature(b)),
        FeatureRef::Math(op, inner) => format!("{}({})", op.name(), ser_feature(inner)),
        FeatureRef::Agg(op, inner) => format!("{}({})", op.name(), ser_feature(inner)),
        FeatureRef::GroupAgg(op, inner, by) => {
            let attrs: Vec<String> = by.iter().map(|a| ident(a)).collect();
            format!("({}({}) by {})", op.name(), ser_feature(inner), attrs.join(", "))
        }
        FeatureRef::OneHot(attr, cat) => format!("onehot({}, {})", ident(attr), quote(cat)),
        FeatureRef::CountPat(attr, p) => format!("count({}, {})", ident(attr), pattern(p)),
        FeatureRef::ContainsPat(attr, p) => format!("contains({}, {})", ident(attr), pattern(p)),
        FeatureRef::Length(attr) => format!("len({})", ident(attr)),
    }
}

fn ser_linear(lin: &LinearExpr) -> String {
    let mut parts: Vec<String> = lin
        .terms
        .iter()
        .map(|(c, f)| format!("{}·{}", fmt_f64(*c), ser_feature(f)))
        .collect();
    if lin.intercept != 0.0 || parts.is_empty() {
        parts.push(fmt_f64(lin.intercept));
    }
    parts.join(" + ")
}

fn ser_value_leaf(v: &Value) -> String {
    match v {
        Value::Missing => "missing".to_string(),
        Value::Number(n) => fmt_f64(*n),
        Value::Text(s) => quote(s),
        Value::Bool(b) => b.to_string(),
    }
}

fn ser_action_leaf(a: &RowAction) -> String {
    match a {
        RowAction::Remove => "remove".to_string(),
        RowAction::Maintain => "maintain".to_string(),
    }
}

fn ser_tree<L>(node: &TreeNode<L>, leaf: &dyn Fn(&L) -> String) -> String {
    match node {
        TreeNode::Leaf(l) => leaf(l),
        TreeNode::SplitNum { feature, threshold, le, gt } => format!(
            "if {} ≤ {} then {} else {}",
            ser_feature(feature),
            fmt_f64(*threshold),
            ser_tree(le, leaf),
            ser_tree(gt, leaf)
        ),
        TreeNode::SplitEq { attr, category, eq, ne } => format!(
            "if {} = {} then {} else {}",
            ident(attr),
            quote(category),
            ser_tree(eq, leaf),
            ser_tree(ne, leaf)
        ),
    }
}

fn ser_program(p: &StringProgram) -> String {
    p.steps.iter().map(ser_step).collect::<Vec<_>>().join("; ")
}

fn ser_step(s: &StringOp) -> String {
    match s {
        StringOp::Split { col, delim } => format!("split({col}, {})", quote(delim)),
        StringOp::Merge { col, sep } => format!("merge({col}, {})", quote(sep)),
        StringOp::Drop { col } => format!("drop({col})"),
        StringOp::Substring { col, start, end } => format!("substring({col}, {start}, {end})"),
        StringOp::Lower { col } => format!("lower({col})"),
        StringOp::Upper { col } => format!("upper({col})"),
        StringOp::StripPunct { col } => format!("strip_punct({col})"),
        StringOp::StripDigits { col } => format!("strip_digits({col})"),
        StringOp::StripHtml { col } => format!("strip_html({col})"),
        StringOp::RemoveStopwords { col } => format!("remove_stopwords({col})"),
        StringOp::Stem { col } => format!("stem({col})"),
        StringOp::Trim { col } => format!("trim({col})"),
    }
}

fn ser_marker(m: &Marker) -> String {
    let kind = match m.kind {
        MarkerKind::ContainsMissing if m.param.is_none() => "has_nan".to_string(),
        MarkerKind::ContainsMissing => "contains_missing".to_string(),
        MarkerKind::DuplicateOf => "duplicate_of".to_string(),
        MarkerKind::OverlapsWith => "overlaps_with".to_string(),
        MarkerKind::DeterminedBy => "determined_by".to_string(),
        MarkerKind::OutlierZ => "outlier_z".to_string(),
        MarkerKind::OutlierIqr => "outlier_iqr".to_string(),
        MarkerKind::BootstrappedFrom => "bootstrapped_from".to_string(),
    };
    let mut args: Vec<String> = m.refs.iter().map(|r| ident(r)).collect();
    if let Some(p) = m.param {
        args.push(fmt_f64(p));
    }
    if args.is_empty() {
        kind
    } else {
        format!("{kind}({})", args.join(", "))
    }
}

// ---- pretty forms ----

fn pretty_num(n: f64) -> String {
    fmt_f64(round_sig(n, 6))
}

fn pretty_value(v: &Value) -> String {
    match v {
        Value::Number(n) => pretty_num(*n),
        other => other.render_cell(),
    }
}

/// Pretty feature text, paper style: `count_' '(a1)`, `is_Drama?`,
/// `(mean(a3) by a4)`.
pub fn pretty_feature(f: &FeatureRef) -> String {
    match f {
        FeatureRef::Attr(a) => a.clone(),
        FeatureRef::Pow(inner, k) => {
            let base = match **inner {
                FeatureRef::Attr(_) => pretty_feature(inner),
                _ => format!("({})", pretty_feature(inner)),
            };
            format!("{base}^{k}")
        }
        FeatureRef::Product(a, b) => {
            format!("{} · {}", pretty_operand(a), pretty_operand(b))
        }
        FeatureRef::Quotient(a, b) => {
            format!("{} ÷ {}", pretty_operand(a), pretty_operand(b))
        }
        FeatureRef::Math(op, inner) => format!("{}({})", op.name(), pretty_feature(inner)),
        FeatureRef::Agg(op, inner) => format!("{}({})", op.name(), pretty_feature(inner)),
        FeatureRef::GroupAgg(op, inner, by) => {
            format!("({}({}) by {})", op.name(), pretty_feature(inner), by.join(", "))
        }
        FeatureRef::OneHot(_, cat) => format!("is_{cat}?"),
        FeatureRef::CountPat(attr, p) => format!("count_{}({attr})", pretty_pattern(p)),
        FeatureRef::ContainsPat(attr, p) => format!("contains_{}({attr})", pretty_pattern(p)),
        FeatureRef::Length(attr) => format!("len({attr})"),
    }
}

fn pretty_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Literal(s) => format!("'{s}'"),
        Pattern::Digits => "digits".to_string(),
    }
}

fn pretty_operand(f: &FeatureRef) -> String {
    match f {
        FeatureRef::Product(..) | FeatureRef::Quotient(..) => format!("({})", pretty_feature(f)),
        _ => pretty_feature(f),
    }
}

fn near_integer(x: f64) -> Option<i64> {
    let r = x.round();
    (r.abs() <= 1e9 && (x - r).abs() <= 1e-6 * r.abs().max(1.0)).then_some(r as i64)
}

fn pretty_term(coef: f64, f: &FeatureRef) -> String {
    let fs = match f {
        FeatureRef::Product(..) | FeatureRef::Quotient(..) => format!("({})", pretty_feature(f)),
        _ => pretty_feature(f),
    };
    if let Some(n) = near_integer(coef) {
        return format!("{n}·{fs}");
    }
    if coef != 0.0 {
        if let Some(n) = near_integer(1.0 / coef) {
            if n.abs() >= 2 {
                return format!("{fs} ÷ {n}");
            }
        }
    }
    format!("{}·{fs}", pretty_num(coef))
}

fn pretty_linear(lin: &LinearExpr) -> String {
    let mut out = String::new();
    for (i, (c, f)) in lin.terms.iter().enumerate() {
        let neg = *c < 0.0;
        let body = pretty_term(c.abs(), f);
        if i == 0 {
            if neg {
                out.push('−');
            }
            out.push_str(&body);
        } else {
            out.push_str(if neg { " − " } else { " + " });
            out.push_str(&body);
        }
    }
    if lin.intercept != 0.0 || lin.terms.is_empty() {
        let b = lin.intercept;
        if out.is_empty() {
            out.push_str(&pretty_num(b));
        } else {
            out.push_str(if b < 0.0 { " − " } else { " + " });
            out.push_str(&pretty_num(b.abs()));
        }
    }
    out
}

fn pretty_tree<L>(root: &TreeNode<L>, leaf: &dyn Fn(&L) -> String) -> String {
    tree_lines(root, leaf).join("\n")
}

fn tree_lines<L>(node: &TreeNode<L>, leaf: &dyn Fn(&L) -> String) -> Vec<String> {
    match node {
        TreeNode::Leaf(l) => vec![leaf(l)],
        TreeNode::SplitNum { .. } | TreeNode::SplitEq { .. } => {
            let (cond, a, b) = match node {
                TreeNode::SplitNum { feature, threshold, le, gt } => (
                    format!("{} ≤ {}", pretty_feature(feature), pretty_num(*threshold)),
                    le,
                    gt,
                ),
                TreeNode::SplitEq { attr: _, category, eq, ne } => {
                    (format!("is_{category}?"), eq, ne)
                }
                TreeNode::Leaf(_) => unreachable!(),
            };
            let mut out = Vec::new();
            let then_lines = tree_lines(a, leaf);
            if then_lines.len() == 1 {
                out.push(format!("if {cond}: {}", then_lines[0]));
            } else {
                out.push(format!("if {cond}:"));
                out.extend(then_lines.into_iter().map(|l| format!("  {l}")));
            }
            let else_lines = tree_lines(b, leaf);
            if matches!(**b, TreeNode::Leaf(_)) {
                out.push(format!("else: {}", else_lines[0]));
            } else {
                // Chain: "else if ...".
                let mut it = else_lines.into_iter();
                out.push(format!("else {}", it.next().unwrap()));
                out.extend(it);
            }
            out
        }
    }
}

fn pretty_step(s: &StringOp) -> String {
    match s {
        StringOp::Split { col, delim } => format!("split(t, {col}, '{delim}')"),
        StringOp::Merge { col, sep } => format!("merge(t, {col}, '{sep}')"),
        StringOp::Drop { col } => format!("drop(t, {col})"),
        StringOp::Substring { col, start, end } => format!("substring(t, {col}, {start}, {end})"),
        StringOp::Lower { col } => format!("lower(t, {col})"),
        StringOp::Upper { col } => format!("upper(t, {col})"),
        StringOp::StripPunct { col } => format!("strip_punct(t, {col})"),
        StringOp::StripDigits { col } => format!("strip_digits(t, {col})"),
        StringOp::StripHtml { col } => format!("strip_html(t, {col})"),
        StringOp::RemoveStopwords { col } => format!("remove_stopwords(t, {col})"),
        StringOp::Stem { col } => format!("stem(t, {col})"),
        StringOp::Trim { col } => format!("trim(t, {col})"),
    }
}

fn pretty_marker(m: &Marker) -> String {
    match m.kind {
        MarkerKind::ContainsMissing => match m.param {
            None => "has_NaN".to_string(),
            Some(a) => format!("contains missing information (NaN ratio > {})", pretty_num(a)),
        },
        MarkerKind::DuplicateOf => format!("duplicate of {}", m.refs.join(", ")),
        MarkerKind::OverlapsWith => format!("overlaps with {}", m.refs.join(", ")),
        MarkerKind::DeterminedBy => format!("determined by {{{}}}", m.refs.join(", ")),
        MarkerKind::OutlierZ => format!(
            "outlier in {} (|z| > {})",
            m.refs.join(", "),
            m.param.map(pretty_num).unwrap_or_else(|| "3".into())
        ),
        MarkerKind::OutlierIqr => format!(
            "outlier in {} (outside {}·IQR fences)",
            m.refs.join(", "),
            m.param.map(pretty_num).unwrap_or_else(|| "1.5".into())
        ),
        MarkerKind::BootstrappedFrom => format!("bootstrapped from {}", m.refs.join(", ")),
    }
}
