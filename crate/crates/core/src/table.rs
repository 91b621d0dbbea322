//! Tables, attribute matches, and change sets.
//!
//! A [`Table`] is an immutable relation with typed columns and string tuple
//! ids. Loading, type inference, projection, and change-set computation are
//! all pure; tables are safe to share across concurrent explainer tasks.

use crate::error::{Error, Result};
use crate::value::{SemanticType, Value};
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// One column: id, inferred semantic type, and whether a numeric column is
/// also usable as a categorical (integer-valued, low cardinality).
#[derive(Debug, Clone)]
pub struct Column {
    pub id: String,
    pub sem_type: SemanticType,
    pub cat_compatible: bool,
}

/// An immutable relation. Values are stored column-major; row order is the
/// input order and is preserved by every operation.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    columns: Vec<Column>,
    tuple_ids: Vec<String>,
    cols: Vec<Vec<Value>>,
    id_index: HashMap<String, usize>,
}

/// How to obtain tuple ids when loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdColumn {
    /// Use the named column as the id column (it is removed from the data).
    Named(String),
    /// Tuple id is the 0-based row ordinal rendered as text.
    Synthesize,
}

/// Options for [`Table::load`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub id_column: IdColumn,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { id_column: IdColumn::Synthesize, delimiter: b',' }
    }
}

impl Table {
    /// Build a table from row-major data. Validates shape and id/attr
    /// uniqueness. Column types start as `Textual` until [`Table::infer_types`].
    pub fn from_rows(
        name: impl Into<String>,
        attr_ids: Vec<String>,
        tuple_ids: Vec<String>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Table> {
        let name = name.into();
        let mut seen = HashSet::new();
        for a in &attr_ids {
            if !seen.insert(a.clone()) {
                return Err(Error::Load {
                    path: name.clone(),
                    message: format!("duplicate attribute id {a:?}"),
                });
            }
        }
        if tuple_ids.len() != rows.len() {
            return Err(Error::Load {
                path: name.clone(),
                message: format!("{} tuple ids for {} rows", tuple_ids.len(), rows.len()),
            });
        }
        let mut id_index = HashMap::with_capacity(tuple_ids.len());
        for (i, id) in tuple_ids.iter().enumerate() {
            if id_index.insert(id.clone(), i).is_some() {
                return Err(Error::Load {
                    path: name.clone(),
                    message: format!("duplicate tuple id {id:?} at row {}", i + 1),
                });
            }
        }
        let n = attr_ids.len();
        let mut cols = vec![Vec::with_capacity(rows.len()); n];
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Load {
                    path: name.clone(),
                    message: format!("row {} has {} values, expected {n}", i + 1, row.len()),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                cols[j].push(v);
            }
        }
        let columns = attr_ids
            .into_iter()
            .map(|id| Column { id, sem_type: SemanticType::Textual, cat_compatible: false })
            .collect();
        Ok(Table { name, columns, tuple_ids, cols, id_index })
    }

    /// Load a delimited text file (RFC-4180 style, UTF-8, header row
    /// mandatory). Errors name the offending row.
    pub fn load(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Table> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(opts.delimiter)
            .flexible(false)
            .from_path(path)
            .map_err(|e| Error::Load { path: pstr.clone(), message: e.to_string() })?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Load { path: pstr.clone(), message: e.to_string() })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();

        let id_pos = match &opts.id_column {
            IdColumn::Synthesize => None,
            IdColumn::Named(c) => Some(headers.iter().position(|h| h == c).ok_or_else(|| {
                Error::Load { path: pstr.clone(), message: format!("id column {c:?} not in header") }
            })?),
        };

        let attr_ids: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != id_pos)
            .map(|(_, h)| h.clone())
            .collect();

        let mut tuple_ids = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Load {
                path: pstr.clone(),
                message: format!("row {}: {e}", i + 1),
            })?;
            let mut row = Vec::with_capacity(attr_ids.len());
            let mut id = None;
            for (j, cell) in rec.iter().enumerate() {
                if Some(j) == id_pos {
                    id = Some(cell.trim().to_string());
                } else {
                    row.push(Value::parse_cell(cell));
                }
            }
            let id = match id {
                Some(id) if !id.is_empty() => id,
                Some(_) => {
                    return Err(Error::Load {
                        path: pstr.clone(),
                        message: format!("row {}: empty tuple id", i + 1),
                    })
                }
                None => i.to_string(),
            };
            tuple_ids.push(id);
            rows.push(row);
        }

        let name = name_from_path(path);
        Table::from_rows(name, attr_ids, tuple_ids, rows).map_err(|e| match e {
            Error::Load { message, .. } => Error::Load { path: pstr.clone(), message },
            other => other,
        })
    }

    /// Write as CSV with the id column first (named `id` unless the table
    /// was loaded with a named id column tracked by the caller).
    pub fn save(&self, path: impl AsRef<Path>, id_header: &str) -> Result<()> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let mut w = csv::WriterBuilder::new()
            .from_path(path)
            .map_err(|e| Error::Io { path: pstr.clone(), source: std::io::Error::other(e) })?;
        let mut header = vec![id_header.to_string()];
        header.extend(self.attr_ids().iter().cloned());
        w.write_record(&header)
            .map_err(|e| Error::Io { path: pstr.clone(), source: std::io::Error::other(e) })?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.tuple_ids[i].clone()];
            for c in &self.cols {
                rec.push(c[i].render_cell());
            }
            w.write_record(&rec)
                .map_err(|e| Error::Io { path: pstr.clone(), source: std::io::Error::other(e) })?;
        }
        w.flush().map_err(|e| Error::Io { path: pstr, source: e })?;
        Ok(())
    }

    /// Assign semantic types: Numeric when every non-missing cell is a
    /// number; otherwise Categorical when the distinct count is within
    /// bounds and values actually repeat; otherwise Textual. Integer-valued
    /// numeric columns with few distinct values are flagged
    /// categorical-compatible for the engine's classification fallback.
    pub fn infer_types(&self, categorical_ratio: f64, categorical_max: usize) -> Table {
        let mut t = self.clone();
        for (j, col) in t.columns.iter_mut().enumerate() {
            let values = &t.cols[j];
            let non_missing: Vec<&Value> = values.iter().filter(|v| !v.is_missing()).collect();
            let n = non_missing.len();
            if n == 0 {
                col.sem_type = SemanticType::Textual;
                col.cat_compatible = false;
                continue;
            }
            let all_numeric = non_missing.iter().all(|v| matches!(v, Value::Number(_)));
            let distinct: HashSet<_> = non_missing.iter().map(|v| v.key()).collect();
            let d = distinct.len();
            let ratio = d as f64 / n as f64;
            if all_numeric {
                col.sem_type = SemanticType::Numeric;
                let all_int = non_missing
                    .iter()
                    .all(|v| v.as_number().map(|x| x.fract() == 0.0).unwrap_or(false));
                col.cat_compatible = all_int && d <= categorical_max;
            } else if d <= categorical_max && (ratio <= categorical_ratio || d < n) {
                col.sem_type = SemanticType::Categorical;
                col.cat_compatible = true;
            } else {
                col.sem_type = SemanticType::Textual;
                col.cat_compatible = false;
            }
        }
        t
    }

    /// Column subset, preserving tuple ids and row order. Column order
    /// follows `attrs`.
    pub fn project(&self, attrs: &[String]) -> Result<Table> {
        let mut columns = Vec::with_capacity(attrs.len());
        let mut cols = Vec::with_capacity(attrs.len());
        for a in attrs {
            let j = self.col_pos(a)?;
            columns.push(self.columns[j].clone());
            cols.push(self.cols[j].clone());
        }
        Ok(Table {
            name: self.name.clone(),
            columns,
            tuple_ids: self.tuple_ids.clone(),
            cols,
            id_index: self.id_index.clone(),
        })
    }

    /// Row subset by positional indices, preserving order of `keep`.
    pub fn select_rows(&self, keep: &[usize]) -> Table {
        let tuple_ids: Vec<String> = keep.iter().map(|&i| self.tuple_ids[i].clone()).collect();
        let cols: Vec<Vec<Value>> = self
            .cols
            .iter()
            .map(|c| keep.iter().map(|&i| c[i].clone()).collect())
            .collect();
        let id_index = tuple_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Table { name: self.name.clone(), columns: self.columns.clone(), tuple_ids, cols, id_index }
    }

    /// New table with an extra column appended. Fails on duplicate id or
    /// length mismatch.
    pub fn with_column(
        &self,
        id: impl Into<String>,
        sem_type: SemanticType,
        values: Vec<Value>,
    ) -> Result<Table> {
        let id = id.into();
        if self.has_attr(&id) {
            return Err(Error::other(format!("column {id:?} already exists")));
        }
        if values.len() != self.n_rows() {
            return Err(Error::other(format!(
                "column {id:?} has {} values for {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        let mut t = self.clone();
        t.columns.push(Column { id, sem_type, cat_compatible: false });
        t.cols.push(values);
        Ok(t)
    }

    /// New table without the named column.
    pub fn without_column(&self, attr: &str) -> Result<Table> {
        let j = self.col_pos(attr)?;
        let mut t = self.clone();
        t.columns.remove(j);
        t.cols.remove(j);
        Ok(t)
    }

    pub fn n_rows(&self) -> usize {
        self.tuple_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn attr_ids(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.id.clone()).collect()
    }

    pub fn tuple_ids(&self) -> &[String] {
        &self.tuple_ids
    }

    pub fn has_attr(&self, attr: &str) -> bool {
        self.columns.iter().any(|c| c.id == attr)
    }

    pub fn column(&self, attr: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.id == attr)
            .ok_or_else(|| Error::UnknownAttribute { table: self.name.clone(), attr: attr.into() })
    }

    pub fn col(&self, attr: &str) -> Result<&[Value]> {
        Ok(&self.cols[self.col_pos(attr)?])
    }

    pub fn col_pos(&self, attr: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.id == attr)
            .ok_or_else(|| Error::UnknownAttribute { table: self.name.clone(), attr: attr.into() })
    }

    pub fn row_index(&self, tuple_id: &str) -> Option<usize> {
        self.id_index.get(tuple_id).copied()
    }

    pub fn value(&self, row: usize, attr: &str) -> Result<&Value> {
        Ok(&self.cols[self.col_pos(attr)?][row])
    }

    /// The values of one row, in column order.
    pub fn row(&self, i: usize) -> Vec<&Value> {
        self.cols.iter().map(|c| &c[i]).collect()
    }
}

fn name_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// One-to-one alignment between attributes of two tables.
#[derive(Debug, Clone, Default)]
pub struct AttributeMatch {
    pairs: Vec<(String, String)>,
    left_to_right: HashMap<String, String>,
    right_to_left: HashMap<String, String>,
}

impl AttributeMatch {
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<AttributeMatch> {
        let mut m = AttributeMatch::default();
        for (l, r) in pairs {
            if m.left_to_right.contains_key(&l) {
                return Err(Error::other(format!("attribute {l:?} matched more than once")));
            }
            if m.right_to_left.contains_key(&r) {
                return Err(Error::other(format!("attribute {r:?} matched more than once")));
            }
            m.left_to_right.insert(l.clone(), r.clone());
            m.right_to_left.insert(r.clone(), l.clone());
            m.pairs.push((l, r));
        }
        Ok(m)
    }

    /// Match columns that share a header name.
    pub fn by_equal_names(left: &Table, right: &Table) -> AttributeMatch {
        let rights: HashSet<String> = right.attr_ids().into_iter().collect();
        let pairs = left
            .attr_ids()
            .into_iter()
            .filter(|a| rights.contains(a))
            .map(|a| (a.clone(), a))
            .collect();
        AttributeMatch::from_pairs(pairs).expect("equal-name pairs are one-to-one")
    }

    /// JSON array of two-element arrays: `[["left","right"], ...]`.
    pub fn from_json(text: &str) -> Result<AttributeMatch> {
        let pairs: Vec<(String, String)> = serde_json::from_str(text).map_err(|e| Error::Parse {
            pos: 0,
            message: format!("match file: {e}"),
        })?;
        AttributeMatch::from_pairs(pairs)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn right_for(&self, left: &str) -> Option<&str> {
        self.left_to_right.get(left).map(|s| s.as_str())
    }

    pub fn left_for(&self, right: &str) -> Option<&str> {
        self.right_to_left.get(right).map(|s| s.as_str())
    }

    pub fn reversed(&self) -> AttributeMatch {
        AttributeMatch::from_pairs(self.pairs.iter().map(|(l, r)| (r.clone(), l.clone())).collect())
            .expect("reverse of a one-to-one match is one-to-one")
    }
}

/// The four deltas and four matched sets computed from a version pair and an
/// attribute match. All sets are reported in input order.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ChangeSets {
    pub left_delta_attrs: Vec<String>,
    pub left_nabla_attrs: Vec<String>,
    pub right_delta_attrs: Vec<String>,
    pub right_nabla_attrs: Vec<String>,
    pub left_delta_tuples: Vec<String>,
    pub left_nabla_tuples: Vec<String>,
    pub right_delta_tuples: Vec<String>,
    pub right_nabla_tuples: Vec<String>,
}

impl ChangeSets {
    /// Partition attributes by match membership and tuples by shared id.
    pub fn compute(left: &Table, right: &Table, m: &AttributeMatch) -> Result<ChangeSets> {
        for (l, r) in m.pairs() {
            if !left.has_attr(l) {
                return Err(Error::DanglingMatch { attr: l.clone(), side: "left" });
            }
            if !right.has_attr(r) {
                return Err(Error::DanglingMatch { attr: r.clone(), side: "right" });
            }
        }
        let mut cs = ChangeSets {
            left_delta_attrs: vec![],
            left_nabla_attrs: vec![],
            right_delta_attrs: vec![],
            right_nabla_attrs: vec![],
            left_delta_tuples: vec![],
            left_nabla_tuples: vec![],
            right_delta_tuples: vec![],
            right_nabla_tuples: vec![],
        };
        for a in left.attr_ids() {
            if m.right_for(&a).is_some() {
                cs.left_nabla_attrs.push(a);
            } else {
                cs.left_delta_attrs.push(a);
            }
        }
        for a in right.attr_ids() {
            if m.left_for(&a).is_some() {
                cs.right_nabla_attrs.push(a);
            } else {
                cs.right_delta_attrs.push(a);
            }
        }
        for id in left.tuple_ids() {
            if right.row_index(id).is_some() {
                cs.left_nabla_tuples.push(id.clone());
            } else {
                cs.left_delta_tuples.push(id.clone());
            }
        }
        for id in right.tuple_ids() {
            if left.row_index(id).is_some() {
                cs.right_nabla_tuples.push(id.clone());
            } else {
                cs.right_delta_tuples.push(id.clone());
            }
        }
        Ok(cs)
    }
}

/// Do two rows agree on every matched attribute pair? Missing equals
/// Missing here (projected-tuple equality).
pub fn projected_rows_equal(
    left: &Table,
    li: usize,
    right: &Table,
    ri: usize,
    m: &AttributeMatch,
) -> bool {
    m.pairs().iter().all(|(l, r)| {
        let lv = left.col(l).map(|c| &c[li]);
        let rv = right.col(r).map(|c| &c[ri]);
        match (lv, rv) {
            (Ok(a), Ok(b)) => a.key() == b.key(),
            _ => false,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(name: &str, attrs: &[&str], ids: &[&str], rows: &[&[&str]]) -> Table {
        Table::from_rows(
            name,
            attrs.iter().map(|s| s.to_string()).collect(),
            ids.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|c| Value::parse_cell(c)).collect())
                .collect(),
        )
        .unwrap()
        .infer_types(0.1, 20)
    }

    #[test]
    fn infer_types_matches_feature_kinds() {
        let t = t(
            "x",
            &["num", "genre", "title"],
            &["m1", "m2", "m3", "m4"],
            &[
                &["7.6", "Drama", "Moana (U)"],
                &["8.2", "Action", "Up (U)"],
                &["9.0", "Drama", "Heat (15)"],
                &["6.1", "Animation", "Alien (18)"],
            ],
        );
        assert_eq!(t.column("num").unwrap().sem_type, SemanticType::Numeric);
        assert_eq!(t.column("genre").unwrap().sem_type, SemanticType::Categorical);
        assert_eq!(t.column("title").unwrap().sem_type, SemanticType::Textual);
    }

    #[test]
    fn integer_low_cardinality_numeric_is_cat_compatible() {
        let t = t("x", &["b"], &["1", "2", "3", "4"], &[&["1"], &["0"], &["1"], &["0"]]);
        let c = t.column("b").unwrap();
        assert_eq!(c.sem_type, SemanticType::Numeric);
        assert!(c.cat_compatible);
    }

    #[test]
    fn change_sets_partition_and_are_symmetric() {
        let left = t(
            "l",
            &["a1", "a2"],
            &["m1", "m2", "m3"],
            &[&["x", "1"], &["y", "2"], &["z", "3"]],
        );
        let right = t(
            "r",
            &["a1", "a2", "a5"],
            &["m1", "m3", "m9"],
            &[&["x", "1", "q"], &["z", "3", "w"], &["k", "9", "e"]],
        );
        let m = AttributeMatch::by_equal_names(&left, &right);
        let cs = ChangeSets::compute(&left, &right, &m).unwrap();
        assert_eq!(cs.left_delta_attrs, Vec::<String>::new());
        assert_eq!(cs.right_delta_attrs, vec!["a5"]);
        assert_eq!(cs.left_delta_tuples, vec!["m2"]);
        assert_eq!(cs.right_delta_tuples, vec!["m9"]);
        assert_eq!(cs.left_nabla_tuples, vec!["m1", "m3"]);

        let rcs = ChangeSets::compute(&right, &left, &m.reversed()).unwrap();
        assert_eq!(rcs.left_delta_attrs, cs.right_delta_attrs);
        assert_eq!(rcs.right_delta_tuples, cs.left_delta_tuples);
    }

    #[test]
    fn identical_tables_have_empty_deltas() {
        let a = t("a", &["x"], &["1", "2"], &[&["p"], &["q"]]);
        let m = AttributeMatch::by_equal_names(&a, &a);
        let cs = ChangeSets::compute(&a, &a, &m).unwrap();
        assert!(cs.left_delta_attrs.is_empty());
        assert!(cs.right_delta_attrs.is_empty());
        assert!(cs.left_delta_tuples.is_empty());
        assert!(cs.right_delta_tuples.is_empty());
    }

    #[test]
    fn renamed_tuple_id_lands_in_both_deltas() {
        let a = t("a", &["x"], &["m1", "m2"], &[&["p"], &["q"]]);
        let b = t("b", &["x"], &["m1", "m7"], &[&["p"], &["q"]]);
        let m = AttributeMatch::by_equal_names(&a, &b);
        let cs = ChangeSets::compute(&a, &b, &m).unwrap();
        assert_eq!(cs.left_delta_tuples, vec!["m2"]);
        assert_eq!(cs.right_delta_tuples, vec!["m7"]);
    }

    #[test]
    fn project_preserves_rows_and_errors_on_unknown() {
        let a = t("a", &["x", "y"], &["1", "2"], &[&["p", "1"], &["q", "2"]]);
        let p = a.project(&["y".into()]).unwrap();
        assert_eq!(p.n_cols(), 1);
        assert_eq!(p.tuple_ids(), a.tuple_ids());
        let empty = a.project(&[]).unwrap();
        assert_eq!(empty.n_cols(), 0);
        assert_eq!(empty.n_rows(), 2);
        assert!(a.project(&["zz".into()]).is_err());
    }

    #[test]
    fn duplicate_ids_rejected_naming_row() {
        let err = Table::from_rows(
            "d",
            vec!["x".into()],
            vec!["m1".into(), "m1".into()],
            vec![vec![Value::Missing], vec![Value::Missing]],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m1") && msg.contains("row 2"), "{msg}");
    }
}
