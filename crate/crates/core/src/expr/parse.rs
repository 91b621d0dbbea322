//! Parser for the canonical expression grammar (the inverse of
//! `serialize_expr`; also accepts the looser pretty spellings `*`, `/`,
//! `<=` and bare linear bodies without the `linear:` prefix). Errors carry
//! the byte offset of the offending token.

use super::{
    AggOp, FeatureRef, LinearExpr, Marker, MarkerKind, MathOp, Pattern, RowAction, StringOp,
    StringProgram, TransformExpr, TreeNode,
};
use crate::error::{Error, Result};
use crate::value::Value;

pub fn parse_expr(input: &str) -> Result<TransformExpr> {
    let mut p = Parser::new(input)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Sym(char),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

fn err(pos: usize, message: impl Into<String>) -> Error {
    Error::Parse { pos, message: message.into() }
}

impl Parser {
    fn new(input: &str) -> Result<Parser> {
        let mut toks = Vec::new();
        let bytes: Vec<(usize, char)> = input.char_indices().collect();
        let mut i = 0;
        while i < bytes.len() {
            let (at, c) = bytes[i];
            match c {
                c if c.is_whitespace() => i += 1,
                '"' => {
                    let mut s = String::new();
                    i += 1;
                    loop {
                        let Some(&(_, c)) = bytes.get(i) else {
                            return Err(err(at, "unterminated string"));
                        };
                        i += 1;
                        match c {
                            '"' => break,
                            '\\' => {
                                let Some(&(_, esc)) = bytes.get(i) else {
                                    return Err(err(at, "unterminated escape"));
                                };
                                i += 1;
                                s.push(match esc {
                                    'n' => '\n',
                                    't' => '\t',
                                    other => other,
                                });
                            }
                            c => s.push(c),
                        }
                    }
                    toks.push((Tok::Str(s), at));
                }
                c if c.is_ascii_digit()
                    || (c == '.'
                        && bytes.get(i + 1).map(|(_, d)| d.is_ascii_digit()).unwrap_or(false)) =>
                {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].1.is_ascii_digit() || bytes[i].1 == '.')
                    {
                        i += 1;
                    }
                    if i < bytes.len() && (bytes[i].1 == 'e' || bytes[i].1 == 'E') {
                        let mut j = i + 1;
                        if j < bytes.len() && (bytes[j].1 == '+' || bytes[j].1 == '-') {
                            j += 1;
                        }
                        if j < bytes.len() && bytes[j].1.is_ascii_digit() {
                            i = j;
                            while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                                i += 1;
                            }
                        }
                    }
                    let text: String = bytes[start..i].iter().map(|(_, c)| *c).collect();
                    let n = text
                        .parse::<f64>()
                        .map_err(|e| err(at, format!("bad number {text:?}: {e}")))?;
                    toks.push((Tok::Num(n), at));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].1.is_ascii_alphanumeric() || bytes[i].1 == '_')
                    {
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().map(|(_, c)| *c).collect();
                    toks.push((Tok::Ident(text), at));
                }
                '*' => {
                    toks.push((Tok::Sym('·'), at));
                    i += 1;
                }
                '/' => {
                    toks.push((Tok::Sym('÷'), at));
                    i += 1;
                }
                '−' => {
                    toks.push((Tok::Sym('-'), at));
                    i += 1;
                }
                '<' if bytes.get(i + 1).map(|(_, d)| *d == '=').unwrap_or(false) => {
                    toks.push((Tok::Sym('≤'), at));
                    i += 2;
                }
                '·' | '÷' | '≤' | '>' | '+' | '-' | '^' | '(' | ')' | ',' | ';' | ':' | '='
                | '@' => {
                    toks.push((Tok::Sym(c), at));
                    i += 1;
                }
                other => return Err(err(at, format!("unexpected character {other:?}"))),
            }
        }
        Ok(Parser { toks, pos: 0, end: input.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, at)| *at).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(err(self.here(), format!("expected {c:?}")))
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<()> {
        if self.eat_ident(word) {
            Ok(())
        } else {
            Err(err(self.here(), format!("expected {word:?}")))
        }
    }

    fn expect_eof(&mut self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(err(self.here(), "trailing input after expression"))
        }
    }

    fn num(&mut self) -> Result<f64> {
        let neg = self.eat_sym('-');
        match self.next() {
            Some(Tok::Num(n)) => Ok(if neg { -n } else { n }),
            _ => Err(err(self.here(), "expected a number")),
        }
    }

    fn usize_arg(&mut self) -> Result<usize> {
        let at = self.here();
        let n = self.num()?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(err(at, "expected a non-negative integer"));
        }
        Ok(n as usize)
    }

    fn attr_name(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(Tok::Str(s)) => Ok(s),
            _ => Err(err(self.here(), "expected an attribute name")),
        }
    }

    fn string_arg(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(s),
            _ => Err(err(self.here(), "expected a quoted string")),
        }
    }

    fn pattern(&mut self) -> Result<Pattern> {
        if self.eat_sym('@') {
            self.expect_ident("digits")?;
            return Ok(Pattern::Digits);
        }
        Ok(Pattern::Literal(self.string_arg()?))
    }

    fn expr(&mut self) -> Result<TransformExpr> {
        if let Some(Tok::Ident(kw)) = self.peek() {
            if self.peek2() == Some(&Tok::Sym(':')) {
                let kw = kw.clone();
                match kw.as_str() {
                    "linear" => {
                        self.pos += 2;
                        return Ok(TransformExpr::Linear(self.linear_body()?));
                    }
                    "case" => {
                        self.pos += 2;
                        return Ok(TransformExpr::Tree(self.tree_node(&value_leaf)?));
                    }
                    "predicate" => {
                        self.pos += 2;
                        return Ok(TransformExpr::Predicate(self.tree_node(&action_leaf)?));
                    }
                    "program" => {
                        self.pos += 2;
                        return Ok(TransformExpr::Program(self.program_body()?));
                    }
                    "marker" => {
                        self.pos += 2;
                        return Ok(TransformExpr::Marker(self.marker_body()?));
                    }
                    _ => {}
                }
            }
        }
        Ok(TransformExpr::Linear(self.linear_body()?))
    }

    fn linear_body(&mut self) -> Result<LinearExpr> {
        let mut lin = LinearExpr::default();
        self.linear_term(&mut lin, 1.0)?;
        loop {
            if self.eat_sym('+') {
                self.linear_term(&mut lin, 1.0)?;
            } else if self.eat_sym('-') {
                self.linear_term(&mut lin, -1.0)?;
            } else {
                break;
            }
        }
        Ok(lin)
    }

    fn linear_term(&mut self, lin: &mut LinearExpr, sign: f64) -> Result<()> {
        let mut sign = sign;
        while self.eat_sym('-') {
            sign = -sign;
        }
        if let Some(Tok::Num(n)) = self.peek() {
            let mut c = sign * *n;
            self.pos += 1;
            if self.eat_sym('·') {
                let f = self.feature_mul()?;
                c = self.trailing_divisors(c)?;
                lin.terms.push((c, f));
            } else {
                c = self.trailing_divisors(c)?;
                lin.intercept += c;
            }
            return Ok(());
        }
        let f = self.feature_mul()?;
        let c = self.trailing_divisors(sign)?;
        lin.terms.push((c, f));
        Ok(())
    }

    /// Consume `÷ <number>` suffixes (e.g. `a2 ÷ 60`), folding them into the
    /// coefficient.
    fn trailing_divisors(&mut self, mut c: f64) -> Result<f64> {
        while self.peek() == Some(&Tok::Sym('÷'))
            && matches!(self.peek2(), Some(Tok::Num(_)))
        {
            self.pos += 1;
            let at = self.here();
            let d = self.num()?;
            if d == 0.0 {
                return Err(err(at, "division by zero in coefficient"));
            }
            c /= d;
        }
        Ok(c)
    }

    fn feature_mul(&mut self) -> Result<FeatureRef> {
        let mut f = self.feature_pow()?;
        loop {
            if self.eat_sym('·') {
                let rhs = self.feature_pow()?;
                f = FeatureRef::Product(Box::new(f), Box::new(rhs));
            } else if self.peek() == Some(&Tok::Sym('÷'))
                && !matches!(self.peek2(), Some(Tok::Num(_)))
            {
                self.pos += 1;
                let rhs = self.feature_pow()?;
                f = FeatureRef::Quotient(Box::new(f), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(f)
    }

    fn feature_pow(&mut self) -> Result<FeatureRef> {
        let mut f = self.feature_atom()?;
        while self.eat_sym('^') {
            let at = self.here();
            let k = self.num()?;
            if k < 1.0 || k.fract() != 0.0 || k > 64.0 {
                return Err(err(at, "exponent must be an integer in 1..=64"));
            }
            if k >= 2.0 {
                f = FeatureRef::Pow(Box::new(f), k as u32);
            }
        }
        Ok(f)
    }

    fn feature_atom(&mut self) -> Result<FeatureRef> {
        if self.eat_sym('(') {
            let inner = self.feature_mul()?;
            if self.eat_ident("by") {
                let mut by = vec![self.attr_name()?];
                while self.eat_sym(',') {
                    by.push(self.attr_name()?);
                }
                self.expect_sym(')')?;
                return match inner {
                    FeatureRef::Agg(op, f) => Ok(FeatureRef::GroupAgg(op, f, by)),
                    _ => Err(err(self.here(), "`by` requires an aggregate on its left")),
                };
            }
            self.expect_sym(')')?;
            return Ok(inner);
        }
        if let Some(Tok::Str(s)) = self.peek() {
            let s = s.clone();
            self.pos += 1;
            return Ok(FeatureRef::Attr(s));
        }
        let at = self.here();
        let Some(Tok::Ident(name)) = self.next() else {
            return Err(err(at, "expected a feature"));
        };
        if self.peek() != Some(&Tok::Sym('(')) {
            return Ok(FeatureRef::Attr(name));
        }
        self.pos += 1; // '('
        let f = match name.as_str() {
            "log" | "sqrt" | "reciprocal" | "exp" => {
                let op = MathOp::ALL
                    .into_iter()
                    .find(|o| o.name() == name)
                    .expect("listed math op");
                let inner = self.feature_mul()?;
                self.expect_sym(')')?;
                FeatureRef::Math(op, Box::new(inner))
            }
            "sum" | "mean" | "max" | "min" | "range" => {
                let op = AggOp::ALL.into_iter().find(|o| o.name() == name).expect("listed agg");
                let inner = self.feature_mul()?;
                self.expect_sym(')')?;
                FeatureRef::Agg(op, Box::new(inner))
            }
            "count" => {
                let inner = self.feature_mul()?;
                if self.eat_sym(',') {
                    let pat = self.pattern()?;
                    self.expect_sym(')')?;
                    match inner {
                        FeatureRef::Attr(a) => FeatureRef::CountPat(a, pat),
                        _ => return Err(err(at, "count(attr, pattern) needs a plain attribute")),
                    }
                } else {
                    self.expect_sym(')')?;
                    FeatureRef::Agg(AggOp::Count, Box::new(inner))
                }
            }
            "contains" => {
                let attr = self.attr_name()?;
                self.expect_sym(',')?;
                let pat = self.pattern()?;
                self.expect_sym(')')?;
                FeatureRef::ContainsPat(attr, pat)
            }
            "len" => {
                let attr = self.attr_name()?;
                self.expect_sym(')')?;
                FeatureRef::Length(attr)
            }
            "onehot" => {
                let attr = self.attr_name()?;
                self.expect_sym(',')?;
                let cat = match self.next() {
                    Some(Tok::Str(s)) => s,
                    Some(Tok::Ident(s)) => s,
                    _ => return Err(err(self.here(), "expected a category")),
                };
                self.expect_sym(')')?;
                FeatureRef::OneHot(attr, cat)
            }
            other => return Err(err(at, format!("unknown function {other:?}"))),
        };
        Ok(f)
    }

    fn tree_node<L>(&mut self, leaf: &dyn Fn(&mut Parser) -> Result<L>) -> Result<TreeNode<L>> {
        if self.eat_ident("if") {
            let lhs = self.feature_mul()?;
            if self.eat_sym('=') {
                let attr = match lhs {
                    FeatureRef::Attr(a) => a,
                    _ => return Err(err(self.here(), "equality splits need a plain attribute")),
                };
                let category = match self.next() {
                    Some(Tok::Str(s)) => s,
                    Some(Tok::Ident(s)) => s,
                    _ => return Err(err(self.here(), "expected a category")),
                };
                self.expect_ident("then")?;
                let eq = self.tree_node(leaf)?;
                self.expect_ident("else")?;
                let ne = self.tree_node(leaf)?;
                return Ok(TreeNode::SplitEq {
                    attr,
                    category,
                    eq: Box::new(eq),
                    ne: Box::new(ne),
                });
            }
            if self.eat_sym('≤') {
                let threshold = self.num()?;
                self.expect_ident("then")?;
                let le = self.tree_node(leaf)?;
                self.expect_ident("else")?;
                let gt = self.tree_node(leaf)?;
                return Ok(TreeNode::SplitNum {
                    feature: lhs,
                    threshold,
                    le: Box::new(le),
                    gt: Box::new(gt),
                });
            }
            if self.eat_sym('>') {
                let threshold = self.num()?;
                self.expect_ident("then")?;
                let gt = self.tree_node(leaf)?;
                self.expect_ident("else")?;
                let le = self.tree_node(leaf)?;
                return Ok(TreeNode::SplitNum {
                    feature: lhs,
                    threshold,
                    le: Box::new(le),
                    gt: Box::new(gt),
                });
            }
            return Err(err(self.here(), "expected ≤, > or = in split condition"));
        }
        Ok(TreeNode::Leaf(leaf(self)?))
    }

    fn program_body(&mut self) -> Result<StringProgram> {
        let mut steps = Vec::new();
        loop {
            steps.push(self.program_step()?);
            if !self.eat_sym(';') {
                break;
            }
            if self.pos == self.toks.len() {
                break; // tolerate a trailing semicolon
            }
        }
        Ok(StringProgram { steps })
    }

    fn program_step(&mut self) -> Result<StringOp> {
        let at = self.here();
        let Some(Tok::Ident(name)) = self.next() else {
            return Err(err(at, "expected a program step"));
        };
        self.expect_sym('(')?;
        let step = match name.as_str() {
            "split" => {
                let col = self.usize_arg()?;
                self.expect_sym(',')?;
                let delim = self.string_arg()?;
                StringOp::Split { col, delim }
            }
            "merge" => {
                let col = self.usize_arg()?;
                self.expect_sym(',')?;
                let sep = self.string_arg()?;
                StringOp::Merge { col, sep }
            }
            "drop" => StringOp::Drop { col: self.usize_arg()? },
            "substring" => {
                let col = self.usize_arg()?;
                self.expect_sym(',')?;
                let start = self.usize_arg()?;
                self.expect_sym(',')?;
                let end = self.usize_arg()?;
                StringOp::Substring { col, start, end }
            }
            "lower" => StringOp::Lower { col: self.usize_arg()? },
            "upper" => StringOp::Upper { col: self.usize_arg()? },
            "strip_punct" => StringOp::StripPunct { col: self.usize_arg()? },
            "strip_digits" => StringOp::StripDigits { col: self.usize_arg()? },
            "strip_html" => StringOp::StripHtml { col: self.usize_arg()? },
            "remove_stopwords" => StringOp::RemoveStopwords { col: self.usize_arg()? },
            "stem" => StringOp::Stem { col: self.usize_arg()? },
            "trim" => StringOp::Trim { col: self.usize_arg()? },
            other => return Err(err(at, format!("unknown string op {other:?}"))),
        };
        self.expect_sym(')')?;
        Ok(step)
    }

    fn marker_body(&mut self) -> Result<Marker> {
        let at = self.here();
        let Some(Tok::Ident(kind_name)) = self.next() else {
            return Err(err(at, "expected a marker kind"));
        };
        let kind = match kind_name.as_str() {
            "has_nan" | "contains_missing" => MarkerKind::ContainsMissing,
            "duplicate_of" => MarkerKind::DuplicateOf,
            "overlaps_with" => MarkerKind::OverlapsWith,
            "determined_by" => MarkerKind::DeterminedBy,
            "outlier_z" => MarkerKind::OutlierZ,
            "outlier_iqr" => MarkerKind::OutlierIqr,
            "bootstrapped_from" => MarkerKind::BootstrappedFrom,
            other => return Err(err(at, format!("unknown marker kind {other:?}"))),
        };
        let mut marker = Marker::new(kind);
        if self.eat_sym('(') {
            loop {
                match self.peek() {
                    Some(Tok::Num(_)) | Some(Tok::Sym('-')) => {
                        marker.param = Some(self.num()?);
                    }
                    Some(Tok::Ident(_)) | Some(Tok::Str(_)) => {
                        marker.refs.push(self.attr_name()?);
                    }
                    _ => return Err(err(self.here(), "expected a marker argument")),
                }
                if !self.eat_sym(',') {
                    break;
                }
            }
            self.expect_sym(')')?;
        }
        Ok(marker)
    }
}

fn value_leaf(p: &mut Parser) -> Result<Value> {
    if p.eat_ident("missing") {
        return Ok(Value::Missing);
    }
    if p.eat_ident("true") {
        return Ok(Value::Bool(true));
    }
    if p.eat_ident("false") {
        return Ok(Value::Bool(false));
    }
    match p.peek() {
        Some(Tok::Num(_)) | Some(Tok::Sym('-')) => Ok(Value::Number(p.num()?)),
        Some(Tok::Str(_)) => Ok(Value::Text(p.string_arg()?)),
        _ => Err(err(p.here(), "expected a leaf value")),
    }
}

fn action_leaf(p: &mut Parser) -> Result<RowAction> {
    if p.eat_ident("remove") {
        return Ok(RowAction::Remove);
    }
    if p.eat_ident("maintain") {
        return Ok(RowAction::Maintain);
    }
    Err(err(p.here(), "expected `remove` or `maintain`"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{render_expr, serialize_expr};

    fn round_trip(text: &str) -> TransformExpr {
        let e = parse_expr(text).unwrap();
        let ser = serialize_expr(&e);
        let e2 = parse_expr(&ser).unwrap_or_else(|x| panic!("reparse of {ser:?}: {x}"));
        assert_eq!(e, e2, "round trip through {ser:?}");
        e
    }

    #[test]
    fn parses_minutes_to_hours_in_both_spellings() {
        let a = round_trip("a2 ÷ 60");
        let b = round_trip("linear: 0.016666666666666666·a2");
        match (&a, &b) {
            (TransformExpr::Linear(x), TransformExpr::Linear(y)) => {
                assert_eq!(x.terms.len(), 1);
                assert!((x.terms[0].0 - y.terms[0].0).abs() < 1e-18);
            }
            _ => panic!("expected linear expressions"),
        }
    }

    #[test]
    fn groupby_and_onehot_features() {
        let e = round_trip("1·(mean(a3) by a4) + 2·onehot(a4, \"Drama\")");
        if let TransformExpr::Linear(lin) = &e {
            assert!(matches!(lin.terms[0].1, FeatureRef::GroupAgg(AggOp::Mean, _, _)));
            assert!(matches!(lin.terms[1].1, FeatureRef::OneHot(_, _)));
        } else {
            panic!("expected linear");
        }
    }

    #[test]
    fn quotient_of_features_vs_constant_divisor() {
        let e = round_trip("a3 ÷ sum(a3)");
        if let TransformExpr::Linear(lin) = &e {
            assert!(matches!(lin.terms[0].1, FeatureRef::Quotient(_, _)));
            assert_eq!(lin.terms[0].0, 1.0);
        } else {
            panic!();
        }
        let e = round_trip("a3 ÷ 33.4");
        if let TransformExpr::Linear(lin) = &e {
            assert!(matches!(lin.terms[0].1, FeatureRef::Attr(_)));
            assert!((lin.terms[0].0 - 1.0 / 33.4).abs() < 1e-18);
        } else {
            panic!();
        }
    }

    #[test]
    fn case_predicate_program_marker() {
        round_trip("case: if a3 ≤ 8.95 then if a3 ≤ 7.9 then 1 else 2 else 4");
        round_trip("case: if a4 = \"Drama\" then \"yes\" else \"no\"");
        round_trip("predicate: if a3 > 8.5 then maintain else remove");
        round_trip("program: split(0, \"(\"); split(1, \")\"); drop(0); drop(1)");
        round_trip("marker: has_nan");
        round_trip("marker: contains_missing(0.5)");
        round_trip("marker: determined_by(a1, a2)");
        round_trip("marker: outlier_z(a2, 3)");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expr("1·log(").unwrap_err();
        match e {
            Error::Parse { pos, .. } => assert!(pos >= 6, "pos = {pos}"),
            other => panic!("expected parse error, got {other}"),
        }
        assert!(parse_expr("frob(a1)").is_err());
        assert!(parse_expr("case: if a3 then 1 else 2").is_err());
    }

    #[test]
    fn pretty_forms_parse_back() {
        // The renderer's division and star spellings stay parseable.
        let e = parse_expr("2·a1 − a2 ÷ 4 + 0.5").unwrap();
        let pretty = render_expr(&e);
        let back = parse_expr(&pretty).unwrap();
        assert_eq!(e, back);
    }
}
