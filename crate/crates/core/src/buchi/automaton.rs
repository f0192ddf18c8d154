use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ltl::{json as ltl_json, AlphabetContext, Assignment, Formula, LassoWord, Proposition};

use super::guard::Guard;
use super::nba::{tarjan, Nba};
use super::tableau::{build_gba, degeneralize};

/// A set of automaton states, stored as a bitset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct StateSet {
    words: Vec<u64>,
}

impl StateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(q: usize) -> Self {
        let mut s = Self::new();
        s.insert(q);
        s
    }

    pub fn insert(&mut self, q: usize) {
        let w = q / 64;
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (q % 64);
    }

    pub fn contains(&self, q: usize) -> bool {
        self.words.get(q / 64).is_some_and(|w| w & (1 << (q % 64)) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| i * 64 + b)
        })
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn union_with(&mut self, other: &StateSet) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.normalize();
    }

    pub fn intersects(&self, other: &StateSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<usize> for StateSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = StateSet::new();
        for q in iter {
            s.insert(q);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub src: usize,
    pub guard: Guard,
    pub dst: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFlags {
    /// Some accepting lasso starts here.
    pub live: bool,
    /// Accepting with a tautological self-loop: every continuation is accepted.
    pub accepting_sink: bool,
    /// No accepting lasso starts here.
    pub trap: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Dead-state pruning and simulation-based reduction.
    pub reduce: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { reduce: true }
    }
}

/// Nondeterministic Büchi automaton with propositional transition guards.
#[derive(Clone, Debug)]
pub struct BuchiAutomaton {
    alphabet: AlphabetContext,
    support: Arc<[usize]>,
    initial: usize,
    accepting: Vec<bool>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
    flags: Vec<StateFlags>,
}

/// Compiles `formula` (over propositions of `ctx`) with full reduction.
pub fn compile(formula: &Formula, ctx: &AlphabetContext) -> BuchiAutomaton {
    compile_with(formula, ctx, CompileOptions::default())
}

pub fn compile_with(formula: &Formula, ctx: &AlphabetContext, opts: CompileOptions) -> BuchiAutomaton {
    let support: Vec<usize> = {
        let mut ids: Vec<usize> = formula.propositions().iter().map(Proposition::id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let gba = build_gba(&formula.to_nnf(), &support);
    let nba = degeneralize(&gba).trim();
    let nba = if opts.reduce { nba.reduce() } else { nba };
    BuchiAutomaton::from_nba(&nba, ctx.clone(), support.into())
}

impl BuchiAutomaton {
    fn from_nba(nba: &Nba, alphabet: AlphabetContext, support: Arc<[usize]>) -> Self {
        let props: Vec<Proposition> = support.iter().map(|&p| alphabet.prop(p).clone()).collect();
        let mut transitions = Vec::new();
        let mut outgoing = vec![Vec::new(); nba.len()];
        for (src, succ) in nba.succ.iter().enumerate() {
            for (&dst, ls) in succ {
                outgoing[src].push(transitions.len());
                transitions.push(Transition {
                    src,
                    guard: Guard::from_letters(ls.clone(), support.clone(), &props),
                    dst,
                });
            }
        }
        let mut b = Self {
            alphabet,
            support,
            initial: nba.init,
            accepting: nba.accepting.clone(),
            transitions,
            outgoing,
            flags: Vec::new(),
        };
        b.flags = b.compute_flags();
        b
    }

    pub fn alphabet(&self) -> &AlphabetContext {
        &self.alphabet
    }

    /// Proposition ids the guards depend on.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn initial_set(&self) -> StateSet {
        StateSet::singleton(self.initial)
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_set(&self) -> StateSet {
        (0..self.num_states()).filter(|&q| self.accepting[q]).collect()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, q: usize) -> impl Iterator<Item = &Transition> {
        self.outgoing[q].iter().map(move |&i| &self.transitions[i])
    }

    /// Successor states of `q` under `a`.
    pub fn successors(&self, q: usize, a: Assignment) -> StateSet {
        self.outgoing(q)
            .filter(|t| t.guard.matches(a))
            .map(|t| t.dst)
            .collect()
    }

    pub fn step(&self, s: &StateSet, a: Assignment) -> StateSet {
        let mut out = StateSet::new();
        for q in s.iter() {
            out.union_with(&self.successors(q, a));
        }
        out
    }

    pub fn flags(&self, q: usize) -> StateFlags {
        self.flags[q]
    }

    pub fn classify_states(&self) -> &[StateFlags] {
        &self.flags
    }

    pub fn is_live(&self, q: usize) -> bool {
        self.flags[q].live
    }

    fn compute_flags(&self) -> Vec<StateFlags> {
        let n = self.num_states();
        let succ = |q: usize| self.outgoing(q).map(|t| t.dst).collect::<Vec<_>>();
        let (comp, cyclic) = tarjan(n, &succ);
        let mut good = vec![false; cyclic.len()];
        for q in 0..n {
            if self.accepting[q] && cyclic[comp[q]] {
                good[comp[q]] = true;
            }
        }
        let mut live: Vec<bool> = (0..n).map(|q| good[comp[q]]).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for q in 0..n {
                if !live[q] && self.outgoing(q).any(|t| live[t.dst]) {
                    live[q] = true;
                    changed = true;
                }
            }
        }
        (0..n)
            .map(|q| StateFlags {
                live: live[q],
                accepting_sink: self.accepting[q]
                    && self.outgoing(q).any(|t| t.dst == q && t.guard.is_true()),
                trap: !live[q],
            })
            .collect()
    }

    /// Whether some run over `prefix · cycle^ω` is accepting.
    pub fn accepts_lasso(&self, w: &LassoWord) -> bool {
        let n = self.num_states();
        let positions = w.positions();
        let node = |pos: usize, q: usize| pos * n + q;
        let succ = |v: usize| -> Vec<usize> {
            let (pos, q) = (v / n, v % n);
            let letter = w.letter(pos);
            let next = w.successor(pos);
            self.outgoing(q)
                .filter(|t| t.guard.matches(letter))
                .map(|t| node(next, t.dst))
                .collect()
        };
        let total = positions * n;
        let mut reach = vec![false; total];
        let mut stack = vec![node(0, self.initial)];
        reach[stack[0]] = true;
        while let Some(v) = stack.pop() {
            for u in succ(v) {
                if !reach[u] {
                    reach[u] = true;
                    stack.push(u);
                }
            }
        }
        let sub = |v: usize| if reach[v] { succ(v) } else { Vec::new() };
        let (comp, cyclic) = tarjan(total, &sub);
        (0..total).any(|v| reach[v] && self.accepting[v % n] && cyclic[comp[v]])
    }

    /// Graphviz rendering; accepting states are double circles.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph buchi {\n  rankdir=LR;\n  init [shape=point];\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let _ = writeln!(s, "  q{q} [shape={shape}];");
        }
        let _ = writeln!(s, "  init -> q{};", self.initial);
        for t in &self.transitions {
            let label = t.guard.expr().to_string().replace('"', "\\\"");
            let _ = writeln!(s, "  q{} -> q{} [label=\"{}\"];", t.src, t.dst, label);
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "states": self.num_states(),
            "initial": self.initial,
            "accepting": (0..self.num_states()).filter(|&q| self.accepting[q]).collect::<Vec<_>>(),
            "transitions": self.transitions.iter().map(|t| json!({
                "src": t.src,
                "guard": ltl_json::to_json(t.guard.expr()),
                "dst": t.dst,
            })).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    fn build(text: &str, names: &[&str]) -> (BuchiAutomaton, AlphabetContext) {
        let mut ctx = AlphabetContext::from_names(names).unwrap();
        let f = parse(text, &mut ctx).unwrap();
        (compile(&f, &ctx), ctx)
    }

    fn edges(b: &BuchiAutomaton) -> Vec<(usize, String, usize)> {
        b.transitions()
            .iter()
            .map(|t| (t.src, t.guard.expr().to_string(), t.dst))
            .collect()
    }

    #[test]
    fn eventually_is_canonical() {
        let (b, _) = build("F a", &["a"]);
        assert_eq!(b.num_states(), 2);
        assert_eq!(b.initial(), 0);
        assert!(!b.is_accepting(0) && b.is_accepting(1));
        assert_eq!(
            edges(&b),
            vec![(0, "!a".into(), 0), (0, "a".into(), 1), (1, "true".into(), 1)]
        );
        assert!(b.flags(1).accepting_sink);
        assert!(b.flags(0).live && !b.flags(0).accepting_sink);
    }

    #[test]
    fn until_has_stall_loop_and_sink() {
        let (b, ctx) = build("!a U b", &["a", "b"]);
        assert_eq!(
            edges(&b),
            vec![(0, "(!a & !b)".into(), 0), (0, "b".into(), 1), (1, "true".into(), 1)]
        );
        let q0 = b.initial_set();
        let sb = b.step(&q0, ctx.assignment(&["b"]).unwrap());
        assert_eq!(sb, StateSet::singleton(1));
        assert!(b.step(&q0, ctx.assignment(&["a"]).unwrap()).is_empty());
        assert_eq!(b.step(&sb, Assignment::EMPTY), sb);
    }

    #[test]
    fn recurrence_core_is_live_not_sink() {
        let (b, ctx) = build("G F a", &["a"]);
        let a = ctx.assignment(&["a"]).unwrap();
        for q in 0..b.num_states() {
            assert!(b.flags(q).live);
            assert!(!b.flags(q).accepting_sink);
        }
        for t in b.transitions() {
            if b.is_accepting(t.dst) {
                assert!(t.guard.matches(a) && !t.guard.matches(Assignment::EMPTY));
            }
        }
    }

    #[test]
    fn unreduced_automaton_exposes_traps() {
        let mut ctx = AlphabetContext::from_names(["a", "b"]).unwrap();
        let f = parse("!a U b", &mut ctx).unwrap();
        let raw = compile_with(&f, &ctx, CompileOptions { reduce: false });
        let g = parse("G !a", &mut ctx).unwrap();
        let dead = compile_with(&Formula::and(f.clone(), Formula::not(f)), &ctx, CompileOptions { reduce: false });
        assert!(raw.classify_states().iter().any(|f| f.live));
        assert!(dead.classify_states().iter().all(|f| f.trap));
        let _ = compile(&g, &ctx);
    }

    #[test]
    fn lasso_acceptance_examples() {
        let (b, ctx) = build("F a", &["a"]);
        let a = ctx.assignment(&["a"]).unwrap();
        assert!(b.accepts_lasso(&LassoWord::new(vec![], vec![a]).unwrap()));
        let (g, ctx) = build("G !a", &["a"]);
        let a = ctx.assignment(&["a"]).unwrap();
        assert!(!g.accepts_lasso(&LassoWord::new(vec![a], vec![Assignment::EMPTY]).unwrap()));
    }

    #[test]
    fn dot_and_json_shapes() {
        let (b, _) = build("F a", &["a"]);
        let dot = b.to_dot();
        assert!(dot.contains("q1 [shape=doublecircle]"));
        assert!(dot.contains("q0 -> q1 [label=\"a\"]"));
        let j = b.to_json();
        assert_eq!(j["states"], 2);
        assert_eq!(j["accepting"], json!([1]));
        assert_eq!(j["transitions"][1]["guard"], json!({"op":"ap","name":"a"}));
    }
}
