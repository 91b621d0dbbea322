//! Semantic diffing for tabular dataset versions.
//!
//! Given two versions of a dataset (a table `T` and a revision `T'` derived
//! from it), this crate detects what changed — added/removed attributes and
//! tuples — and synthesizes human-readable transformations (regressions,
//! decision rules, string programs, predicates) that reproduce each change.
//! Every candidate transformation is scored for validity (does it recreate
//! the change?), generalizability (does it hold on a hold-out pair?), and
//! explainability (how concise and concentrated is it?).
//!
//! The main entry point is [`engine::explain_versions`]; the `semdiff`
//! binary wraps it with `explain`, `gen-bench`, and `run-bench` subcommands.

pub mod bench;
pub mod categorical;
pub mod encode;
pub mod engine;
pub mod error;
pub mod evaluate;
pub mod expr;
pub mod fd;
pub mod feature;
pub mod horizontal;
pub mod numeric;
pub mod regress;
pub mod removal;
pub mod table;
pub mod textual;
pub mod value;

// re-exports land as modules fill in
pub use error::{Error, Result};
pub use expr::TransformExpr;
pub use table::{AttributeMatch, ChangeSets, Table};
pub use value::{SemanticType, Value};
