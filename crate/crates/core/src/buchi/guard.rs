use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::ltl::{Assignment, Formula, Proposition};

/// A set of letters over the automaton's support propositions, as a bitset
/// indexed by the projected letter value (bit `j` of a letter ↔ `support[j]`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LetterSet {
    n: usize,
    words: Vec<u64>,
}

impl LetterSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn union_with(&mut self, other: &LetterSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersects(&self, other: &LetterSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.n
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }
}

/// Projects a full assignment onto the support propositions.
pub fn project(a: Assignment, support: &[usize]) -> usize {
    support
        .iter()
        .enumerate()
        .filter(|(_, &p)| a.contains(p))
        .fold(0, |acc, (j, _)| acc | (1 << j))
}

/// Transition guard: a propositional formula together with the exact set of
/// support letters it accepts.
#[derive(Clone, Debug)]
pub struct Guard {
    expr: Formula,
    letters: LetterSet,
    support: Arc<[usize]>,
}

impl PartialEq for Guard {
    fn eq(&self, other: &Self) -> bool {
        self.letters == other.letters && self.support == other.support
    }
}

impl Eq for Guard {}

impl Guard {
    /// Builds a guard from a letter set, synthesizing a minimal-ish DNF.
    pub(crate) fn from_letters(letters: LetterSet, support: Arc<[usize]>, props: &[Proposition]) -> Self {
        let expr = synthesize(&letters, props);
        Self {
            expr,
            letters,
            support,
        }
    }

    /// Builds a guard from a propositional formula over (a subset of) the support.
    pub fn from_expr(expr: Formula, support: Arc<[usize]>) -> Self {
        assert!(expr.is_propositional(), "guard must be propositional");
        let n = 1usize << support.len();
        let mut letters = LetterSet::empty(n);
        for x in 0..n {
            if expr.holds(unproject(x, &support)) {
                letters.insert(x);
            }
        }
        Self {
            expr,
            letters,
            support,
        }
    }

    pub fn expr(&self) -> &Formula {
        &self.expr
    }

    pub fn letters(&self) -> &LetterSet {
        &self.letters
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matches(&self, a: Assignment) -> bool {
        self.letters.contains(project(a, &self.support))
    }

    pub fn is_true(&self) -> bool {
        self.letters.is_full()
    }

    pub fn is_false(&self) -> bool {
        self.letters.is_empty()
    }

    /// The members of `achievable` that satisfy the guard, in input order.
    pub fn satisfying(&self, achievable: &[Assignment]) -> Vec<Assignment> {
        achievable.iter().copied().filter(|&a| self.matches(a)).collect()
    }
}

/// Inverse of [`project`] restricted to the support.
pub fn unproject(x: usize, support: &[usize]) -> Assignment {
    Assignment::from_ids(
        support
            .iter()
            .enumerate()
            .filter(|(j, _)| x & (1 << j) != 0)
            .map(|(_, &p)| p),
    )
}

/// A product term: covers letter `x` iff `x & mask == value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cube {
    mask: usize,
    value: usize,
}

impl Cube {
    fn covers(self, x: usize) -> bool {
        x & self.mask == self.value
    }

    fn literals(self) -> u32 {
        self.mask.count_ones()
    }
}

fn prime_implicants(minterms: &[usize], vars: usize) -> Vec<Cube> {
    let all = (1usize << vars) - 1;
    let mut current: BTreeSet<Cube> = minterms
        .iter()
        .map(|&m| Cube { mask: all, value: m })
        .collect();
    let mut primes = BTreeSet::new();
    while !current.is_empty() {
        let cubes: Vec<Cube> = current.iter().copied().collect();
        let mut merged = HashSet::new();
        let mut next = BTreeSet::new();
        for (i, a) in cubes.iter().enumerate() {
            for b in &cubes[i + 1..] {
                if a.mask != b.mask {
                    continue;
                }
                let diff = a.value ^ b.value;
                if diff.count_ones() == 1 {
                    next.insert(Cube {
                        mask: a.mask & !diff,
                        value: a.value & !diff,
                    });
                    merged.insert(*a);
                    merged.insert(*b);
                }
            }
        }
        for c in cubes {
            if !merged.contains(&c) {
                primes.insert(c);
            }
        }
        current = next;
    }
    primes.into_iter().collect()
}

fn cover(minterms: &[usize], primes: &[Cube]) -> Vec<Cube> {
    let mut uncovered: BTreeSet<usize> = minterms.iter().copied().collect();
    let mut chosen = Vec::new();
    for &m in minterms {
        let covering: Vec<&Cube> = primes.iter().filter(|p| p.covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(covering[0]) {
            chosen.push(*covering[0]);
        }
    }
    for c in &chosen {
        uncovered.retain(|&m| !c.covers(m));
    }
    while !uncovered.is_empty() {
        let best = primes
            .iter()
            .filter(|p| !chosen.contains(p))
            .max_by_key(|p| {
                let gain = uncovered.iter().filter(|&&m| p.covers(m)).count();
                (gain, std::cmp::Reverse(p.literals()), std::cmp::Reverse(**p))
            })
            .copied()
            .expect("primes cover all minterms");
        uncovered.retain(|&m| !best.covers(m));
        chosen.push(best);
    }
    chosen.sort_by_key(|c| (c.literals(), c.mask, c.value));
    chosen
}

fn synthesize(letters: &LetterSet, props: &[Proposition]) -> Formula {
    if letters.is_empty() {
        return Formula::False;
    }
    if letters.is_full() {
        return Formula::True;
    }
    let minterms: Vec<usize> = letters.iter().collect();
    let primes = prime_implicants(&minterms, props.len());
    let cubes = cover(&minterms, &primes);
    let terms = cubes.into_iter().map(|c| {
        let lits = (0..props.len()).filter(|j| c.mask & (1 << j) != 0).map(|j| {
            let atom = Formula::Atom(props[j].clone());
            if c.value & (1 << j) != 0 {
                atom
            } else {
                Formula::not(atom)
            }
        });
        lits.reduce(Formula::and).unwrap_or(Formula::True)
    });
    terms.reduce(Formula::or).unwrap_or(Formula::False)
}
