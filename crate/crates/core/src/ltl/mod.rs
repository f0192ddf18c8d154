//! LTL formulas: parsing, printing, negation normal form, JSON and a
//! direct semantics on lasso words that serves as the ground-truth oracle.

mod alphabet;
mod eval;
mod formula;
pub mod json;
mod parse;
pub mod random;

use thiserror::Error;

pub use alphabet::{
    is_valid_atom_name, AlphabetContext, Assignment, LassoWord, Proposition, MAX_PROPOSITIONS,
};
pub use eval::eval_lasso;
pub use formula::Formula;
pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("invalid proposition name `{0}`")]
    InvalidName(String),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("alphabet limited to {0} propositions")]
    TooManyPropositions(usize),
    #[error("lasso cycle must be nonempty")]
    EmptyCycle,
    #[error("malformed formula json: {0}")]
    Json(String),
}

/// Canonical text of a formula; the inverse of [`parse`].
pub fn format(f: &Formula) -> String {
    f.to_string()
}
