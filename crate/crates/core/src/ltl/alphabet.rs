use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LtlError;

/// Upper bound on the number of atomic propositions an alphabet may hold.
/// Assignments are stored as `u32` bitsets.
pub const MAX_PROPOSITIONS: usize = 32;

/// A named atomic proposition with a dense id inside its [`AlphabetContext`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Proposition {
    id: u8,
    name: Arc<str>,
}

impl Proposition {
    pub fn id(&self) -> usize {
        self.id as usize
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The set `AP` of atomic propositions. Ids are dense `0..len()` and names unique.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlphabetContext {
    props: Vec<Proposition>,
    index: HashMap<Arc<str>, u8>,
}

impl AlphabetContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, LtlError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut ctx = Self::new();
        for name in names {
            ctx.intern(name.as_ref())?;
        }
        Ok(ctx)
    }

    /// Returns the proposition with this name, registering it if it is new.
    pub fn intern(&mut self, name: &str) -> Result<Proposition, LtlError> {
        if let Some(&id) = self.index.get(name) {
            return Ok(self.props[id as usize].clone());
        }
        if !is_valid_atom_name(name) {
            return Err(LtlError::InvalidName(name.to_string()));
        }
        if self.props.len() >= MAX_PROPOSITIONS {
            return Err(LtlError::TooManyPropositions(MAX_PROPOSITIONS));
        }
        let id = self.props.len() as u8;
        let name: Arc<str> = Arc::from(name);
        let prop = Proposition {
            id,
            name: name.clone(),
        };
        self.index.insert(name, id);
        self.props.push(prop.clone());
        Ok(prop)
    }

    pub fn get(&self, name: &str) -> Option<&Proposition> {
        self.index.get(name).map(|&id| &self.props[id as usize])
    }

    pub fn prop(&self, id: usize) -> &Proposition {
        &self.props[id]
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn props(&self) -> &[Proposition] {
        &self.props
    }

    pub fn names(&self) -> Vec<String> {
        self.props.iter().map(|p| p.name.to_string()).collect()
    }

    /// Builds an assignment from proposition names; unknown names are an error.
    pub fn assignment<S: AsRef<str>>(&self, names: &[S]) -> Result<Assignment, LtlError> {
        let mut a = Assignment::EMPTY;
        for n in names {
            let p = self
                .get(n.as_ref())
                .ok_or_else(|| LtlError::UnknownProposition(n.as_ref().to_string()))?;
            a.insert(p.id());
        }
        Ok(a)
    }

    /// Sorted proposition names that are true in `a`.
    pub fn assignment_names(&self, a: Assignment) -> Vec<String> {
        let mut names: Vec<String> = a
            .iter()
            .filter(|&id| id < self.props.len())
            .map(|id| self.props[id].name.to_string())
            .collect();
        names.sort();
        names
    }

    /// Every element of `2^AP`, in bitset order.
    pub fn all_assignments(&self) -> Vec<Assignment> {
        assert!(self.len() <= 20, "enumerating 2^{} assignments", self.len());
        (0..(1u32 << self.len())).map(Assignment).collect()
    }
}

const RESERVED: [&str; 7] = ["F", "G", "X", "U", "R", "true", "false"];

/// `[A-Za-z_][A-Za-z0-9_]*`, excluding the operator letters and boolean literals.
pub fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&name)
}

/// An element of `2^AP`: the set of propositions that hold, as a bitset over ids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(u32);

impl Assignment {
    pub const EMPTY: Assignment = Assignment(0);

    pub const fn from_bits(bits: u32) -> Self {
        Assignment(bits)
    }

    pub fn singleton(id: usize) -> Self {
        Assignment(1 << id)
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        let mut a = Assignment::EMPTY;
        for id in ids {
            a.insert(id);
        }
        a
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, id: usize) -> bool {
        id < 32 && self.0 & (1 << id) != 0
    }

    pub fn insert(&mut self, id: usize) {
        assert!(id < MAX_PROPOSITIONS);
        self.0 |= 1 << id;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: Assignment) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Assignment) -> Assignment {
        Assignment(self.0 | other.0)
    }

    /// Proposition ids in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.0 & (1 << i) != 0)
    }

    /// Applies a permutation of proposition ids.
    pub fn permute(self, perm: &[usize]) -> Assignment {
        Assignment::from_ids(self.iter().map(|i| perm[i]))
    }
}

/// An ultimately periodic word `prefix · cycle^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoWord {
    prefix: Vec<Assignment>,
    cycle: Vec<Assignment>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Assignment>, cycle: Vec<Assignment>) -> Result<Self, LtlError> {
        if cycle.is_empty() {
            return Err(LtlError::EmptyCycle);
        }
        Ok(Self { prefix, cycle })
    }

    pub fn prefix(&self) -> &[Assignment] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[Assignment] {
        &self.cycle
    }

    /// Number of distinct positions, `|prefix| + |cycle|`.
    pub fn positions(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    /// Letter at distinct position `i < positions()`.
    pub fn letter(&self, i: usize) -> Assignment {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[i - self.prefix.len()]
        }
    }

    /// Successor of distinct position `i`, folding the last cycle position back.
    pub fn successor(&self, i: usize) -> usize {
        if i + 1 < self.positions() {
            i + 1
        } else {
            self.prefix.len()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intern_is_dense_and_unique() {
        let mut ctx = AlphabetContext::new();
        let a = ctx.intern("a").unwrap();
        let b = ctx.intern("b").unwrap();
        let a2 = ctx.intern("a").unwrap();
        assert_eq!(a.id(), 0);
        assert_eq!(b.id(), 1);
        assert_eq!(a, a2);
        assert_eq!(ctx.len(), 2);
    }

    #[test]
    fn reserved_names_rejected() {
        let mut ctx = AlphabetContext::new();
        for bad in ["F", "U", "true", "1a", "a-b", ""] {
            assert!(ctx.intern(bad).is_err(), "{bad}");
        }
        assert!(ctx.intern("Fa").is_ok());
        assert!(ctx.intern("_x9").is_ok());
    }

    #[test]
    fn lasso_successor_folds_into_cycle() {
        let w = LassoWord::new(
            vec![Assignment::EMPTY],
            vec![Assignment::singleton(0), Assignment::EMPTY],
        )
        .unwrap();
        assert_eq!(w.positions(), 3);
        assert_eq!(w.successor(0), 1);
        assert_eq!(w.successor(1), 2);
        assert_eq!(w.successor(2), 1);
        assert!(LassoWord::new(vec![], vec![]).is_err());
    }

    #[test]
    fn assignment_names_sorted() {
        let ctx = AlphabetContext::from_names(["green", "blue"]).unwrap();
        let a = Assignment::from_ids([0, 1]);
        assert_eq!(ctx.assignment_names(a), vec!["blue", "green"]);
    }
}
