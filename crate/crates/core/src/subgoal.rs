//! Reach-avoid subgoals: extraction from automaton states, the training
//! universe, bitvector encoding and uniform sampling.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::buchi::{BuchiAutomaton, StateSet};
use crate::ltl::{AlphabetContext, Assignment};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubgoalError {
    #[error("no subgoals available from the current automaton states")]
    NoSubgoals,
    #[error("subgoal universe has {size} elements, above the cap of {cap}")]
    UniverseTooLarge { size: u128, cap: usize },
    #[error("no subgoal in the universe is compatible with the current label")]
    NoValidSubgoal,
}

/// Reach `alpha_plus` while never visiting a label in `avoid`.
///
/// The derived order compares the reach bitset first, then the avoid sets
/// lexicographically; executor tie-breaking relies on it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subgoal {
    pub alpha_plus: Assignment,
    pub avoid: BTreeSet<Assignment>,
}

impl Subgoal {
    pub fn new(alpha_plus: Assignment, avoid: impl IntoIterator<Item = Assignment>) -> Self {
        let avoid: BTreeSet<Assignment> = avoid.into_iter().collect();
        assert!(!avoid.contains(&alpha_plus), "reach assignment cannot be avoided");
        Self { alpha_plus, avoid }
    }

    pub fn reached(&self, label: Assignment) -> bool {
        label == self.alpha_plus
    }

    pub fn violated(&self, label: Assignment) -> bool {
        self.avoid.contains(&label)
    }

    pub fn to_json(&self, ctx: &AlphabetContext) -> Value {
        json!({
            "reach": ctx.assignment_names(self.alpha_plus),
            "avoid": self.avoid.iter().map(|&a| ctx.assignment_names(a)).collect::<Vec<_>>(),
        })
    }
}

/// A simple lasso: `path[cycle_start..]` closes back to `path[cycle_start]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LassoPath {
    pub path: Vec<usize>,
    pub cycle_start: usize,
}

/// Enumerates simple lassos from `q` whose cycle contains an accepting state.
pub fn find_lassos(b: &BuchiAutomaton, q: usize) -> Vec<LassoPath> {
    let succ: Vec<Vec<usize>> = (0..b.num_states())
        .map(|s| {
            let mut d: Vec<usize> = b.outgoing(s).map(|t| t.dst).collect();
            d.sort_unstable();
            d.dedup();
            d
        })
        .collect();
    let mut out = Vec::new();
    let mut path = vec![q];
    let mut on_path = vec![false; b.num_states()];
    on_path[q] = true;
    // (node, next successor index)
    let mut frames = vec![(q, 0usize)];
    while let Some(&mut (v, ref mut i)) = frames.last_mut() {
        if *i == succ[v].len() {
            frames.pop();
            path.pop();
            on_path[v] = false;
            continue;
        }
        let w = succ[v][*i];
        *i += 1;
        if on_path[w] {
            let start = path.iter().position(|&s| s == w).expect("on path");
            if path[start..].iter().any(|&s| b.is_accepting(s)) {
                out.push(LassoPath {
                    path: path.clone(),
                    cycle_start: start,
                });
            }
        } else {
            on_path[w] = true;
            path.push(w);
            frames.push((w, 0));
        }
    }
    out
}

/// `(state, reach assignment)` pairs marked unsatisfiable during an episode.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsatSet(BTreeSet<(usize, Assignment)>);

impl UnsatSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, q: usize, alpha_plus: Assignment) -> bool {
        self.0.insert((q, alpha_plus))
    }

    pub fn contains(&self, q: usize, alpha_plus: Assignment) -> bool {
        self.0.contains(&(q, alpha_plus))
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Assignment)> + '_ {
        self.0.iter().copied()
    }
}

/// A subgoal together with the automaton state that proposed it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub subgoal: Subgoal,
    pub state: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Allow the empty assignment as a reach target.
    pub allow_empty_reach: bool,
}

/// Reach assignments at `q`: achievable letters with a transition to a live
/// state, excluding stalling self-loops on non-accepting states.
pub fn reach_assignments(b: &BuchiAutomaton, q: usize, achievable: &[Assignment], opts: ExtractOptions) -> Vec<Assignment> {
    reach_assignments_within(b, q, &StateSet::singleton(q), achievable, opts)
}

/// Reach assignments at `q ∈ tracked`: a non-accepting `q` must move to a
/// live state outside `tracked`, so letters that only shuffle between
/// already tracked states do not count as progress.
pub fn reach_assignments_within(
    b: &BuchiAutomaton,
    q: usize,
    tracked: &StateSet,
    achievable: &[Assignment],
    opts: ExtractOptions,
) -> Vec<Assignment> {
    achievable
        .iter()
        .copied()
        .filter(|a| opts.allow_empty_reach || !a.is_empty())
        .filter(|&a| {
            b.outgoing(q)
                .any(|t| t.guard.matches(a) && b.is_live(t.dst) && (!tracked.contains(t.dst) || b.is_accepting(q)))
        })
        .collect()
}

/// Avoid assignments at `q`: achievable letters all of whose successors are
/// non-live (including letters with no successor at all).
pub fn avoid_assignments(b: &BuchiAutomaton, q: usize, achievable: &[Assignment]) -> Vec<Assignment> {
    achievable
        .iter()
        .copied()
        .filter(|&a| b.outgoing(q).all(|t| !t.guard.matches(a) || !b.is_live(t.dst)))
        .collect()
}

pub fn extract_subgoals(
    b: &BuchiAutomaton,
    states: &StateSet,
    unsat: &UnsatSet,
    achievable: &[Assignment],
) -> Result<Vec<Candidate>, SubgoalError> {
    extract_subgoals_with(b, states, unsat, achievable, ExtractOptions::default())
}

/// Candidate subgoals pooled over `states`, sorted by subgoal then state.
pub fn extract_subgoals_with(
    b: &BuchiAutomaton,
    states: &StateSet,
    unsat: &UnsatSet,
    achievable: &[Assignment],
    opts: ExtractOptions,
) -> Result<Vec<Candidate>, SubgoalError> {
    let mut out = BTreeSet::new();
    for q in states.iter() {
        let avoid: BTreeSet<Assignment> = avoid_assignments(b, q, achievable).into_iter().collect();
        for a in reach_assignments_within(b, q, states, achievable, opts) {
            if unsat.contains(q, a) {
                continue;
            }
            out.insert(Candidate {
                subgoal: Subgoal {
                    alpha_plus: a,
                    avoid: avoid.clone(),
                },
                state: q,
            });
        }
    }
    if out.is_empty() {
        return Err(SubgoalError::NoSubgoals);
    }
    Ok(out.into_iter().collect())
}

/// JSON list of `{state, reach, avoid}` with assignments as name lists.
pub fn candidates_json(ctx: &AlphabetContext, cands: &[Candidate]) -> Value {
    Value::Array(
        cands
            .iter()
            .map(|c| {
                let mut v = c.subgoal.to_json(ctx);
                v["state"] = json!(c.state);
                v
            })
            .collect(),
    )
}

/// Which assignments are incompatible with a reach target in the universe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictMode {
    /// Only the target itself.
    #[default]
    Equality,
    /// Any subset or superset of the target.
    Overlap,
}

impl ConflictMode {
    pub fn conflicts(self, a: Assignment, target: Assignment) -> bool {
        match self {
            ConflictMode::Equality => a == target,
            ConflictMode::Overlap => a.is_subset(target) || target.is_subset(a),
        }
    }
}

pub const DEFAULT_UNIVERSE_CAP: usize = 1_000_000;

/// The training subgoal set `ξ` and the achievable assignments it ranges over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalUniverse {
    pub subgoals: Vec<Subgoal>,
    pub achievable: Vec<Assignment>,
}

pub fn build_universe(achievable: &[Assignment], mode: ConflictMode, cap: usize) -> Result<SubgoalUniverse, SubgoalError> {
    build_universe_with(achievable, |a, t| mode.conflicts(a, t), cap)
}

/// Every `(α⁺, A⁻)` with `α⁺` achievable and `A⁻` any subset of the
/// achievable assignments that do not conflict with `α⁺`.
pub fn build_universe_with(
    achievable: &[Assignment],
    conflict: impl Fn(Assignment, Assignment) -> bool,
    cap: usize,
) -> Result<SubgoalUniverse, SubgoalError> {
    let mut achievable: Vec<Assignment> = achievable.to_vec();
    achievable.sort_unstable();
    achievable.dedup();
    let filtered: Vec<Vec<Assignment>> = achievable
        .iter()
        .map(|&t| {
            achievable
                .iter()
                .copied()
                .filter(|&a| a != t && !conflict(a, t))
                .collect()
        })
        .collect();
    let size: u128 = filtered
        .iter()
        .map(|f| 1u128.checked_shl(f.len() as u32).unwrap_or(u128::MAX))
        .fold(0u128, u128::saturating_add);
    if size > cap as u128 {
        return Err(SubgoalError::UniverseTooLarge { size, cap });
    }
    let mut subgoals = Vec::with_capacity(size as usize);
    for (&t, f) in achievable.iter().zip(&filtered) {
        for mask in 0u64..(1u64 << f.len()) {
            let avoid = f
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &a)| a);
            subgoals.push(Subgoal::new(t, avoid));
        }
    }
    subgoals.sort();
    Ok(SubgoalUniverse {
        subgoals,
        achievable,
    })
}

pub const MAX_ENCODED_PROPOSITIONS: usize = 20;

/// `|AP|` reach bits followed by one bit per assignment (indexed by its bitset
/// value) marking membership in the avoid set.
pub fn encode(s: &Subgoal, n_props: usize) -> Vec<bool> {
    assert!(n_props <= MAX_ENCODED_PROPOSITIONS, "bitvector encoding limited to {MAX_ENCODED_PROPOSITIONS} propositions");
    let mut bits = vec![false; n_props + (1 << n_props)];
    for p in s.alpha_plus.iter() {
        bits[p] = true;
    }
    for a in &s.avoid {
        bits[n_props + a.bits() as usize] = true;
    }
    bits
}

pub fn decode(bits: &[bool], n_props: usize) -> Subgoal {
    let alpha_plus = Assignment::from_ids((0..n_props).filter(|&p| bits[p]));
    let avoid = (0..1usize << n_props)
        .filter(|&i| bits[n_props + i])
        .map(|i| Assignment::from_bits(i as u32))
        .collect();
    Subgoal { alpha_plus, avoid }
}

const REJECTION_ATTEMPTS: usize = 64;

/// Uniform draw from `ξ`; with a current label, uniform over subgoals that
/// neither target nor avoid that label.
pub fn sample_training_subgoal<'a, R: Rng + ?Sized>(
    universe: &'a [Subgoal],
    rng: &mut R,
    current_label: Option<Assignment>,
) -> Result<&'a Subgoal, SubgoalError> {
    if universe.is_empty() {
        return Err(SubgoalError::NoValidSubgoal);
    }
    let Some(label) = current_label else {
        return Ok(&universe[rng.random_range(0..universe.len())]);
    };
    let ok = |s: &Subgoal| s.alpha_plus != label && !s.avoid.contains(&label);
    for _ in 0..REJECTION_ATTEMPTS {
        let s = &universe[rng.random_range(0..universe.len())];
        if ok(s) {
            return Ok(s);
        }
    }
    let valid: Vec<&Subgoal> = universe.iter().filter(|s| ok(s)).collect();
    if valid.is_empty() {
        return Err(SubgoalError::NoValidSubgoal);
    }
    Ok(valid[rng.random_range(0..valid.len())])
}
