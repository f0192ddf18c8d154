//! LTL to Büchi translation: tableau expansion into a generalized automaton,
//! counting degeneralization, dead-state pruning and simulation-based
//! reduction. Guards are synthesized as small DNF formulas over the
//! propositions the formula mentions.

mod automaton;
mod guard;
mod nba;
mod tableau;

pub use automaton::{
    compile, compile_with, BuchiAutomaton, CompileOptions, StateFlags, StateSet, Transition,
};
pub use guard::{project, unproject, Guard, LetterSet};
