//! On-the-fly tableau expansion of an NNF formula into a generalized Büchi
//! automaton, followed by counting degeneralization.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ltl::Formula;

use super::guard::LetterSet;
use super::nba::Nba;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

/// Hash-consed subformula table.
#[derive(Default)]
struct Closure {
    nodes: Vec<Node>,
    index: HashMap<Node, u32>,
}

impl Closure {
    fn add(&mut self, n: Node) -> u32 {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.nodes.len() as u32;
        self.nodes.push(n.clone());
        self.index.insert(n, i);
        i
    }

    fn intern(&mut self, f: &Formula) -> u32 {
        use Formula::*;
        let node = match f {
            True => Node::True,
            False => Node::False,
            Atom(p) => Node::Lit(p.id(), true),
            Not(a) => match a.as_ref() {
                Atom(p) => Node::Lit(p.id(), false),
                _ => panic!("tableau input must be in negation normal form"),
            },
            And(a, b) => Node::And(self.intern(a), self.intern(b)),
            Or(a, b) => Node::Or(self.intern(a), self.intern(b)),
            Next(a) => Node::Next(self.intern(a)),
            Until(a, b) => Node::Until(self.intern(a), self.intern(b)),
            Release(a, b) => Node::Release(self.intern(a), self.intern(b)),
            Eventually(a) => {
                let t = self.add(Node::True);
                Node::Until(t, self.intern(a))
            }
            Always(a) => {
                let f = self.add(Node::False);
                Node::Release(f, self.intern(a))
            }
        };
        self.add(node)
    }

    fn negated_lit(&self, id: u32) -> Option<u32> {
        match self.nodes[id as usize] {
            Node::Lit(p, pos) => self.index.get(&Node::Lit(p, !pos)).copied(),
            _ => None,
        }
    }
}

type Set = BTreeSet<u32>;

struct Pending {
    incoming: BTreeSet<usize>,
    new: Set,
    old: Set,
    next: Set,
}

struct TabState {
    old: Set,
    incoming: BTreeSet<usize>,
}

/// Generalized Büchi automaton; state 0 is the synthetic initial state.
pub(crate) struct Gba {
    pub succ: Vec<BTreeMap<usize, LetterSet>>,
    pub sets: Vec<Vec<bool>>,
}

const INIT: usize = 0;

fn expand(cl: &Closure, root: u32) -> Vec<TabState> {
    let mut states: Vec<TabState> = Vec::new();
    let mut lookup: HashMap<(Set, Set), usize> = HashMap::new();
    let mut stack = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        new: Set::from([root]),
        old: Set::new(),
        next: Set::new(),
    }];
    while let Some(mut node) = stack.pop() {
        let Some(eta) = node.new.pop_first() else {
            let key = (node.old, node.next);
            if let Some(&i) = lookup.get(&key) {
                states[i].incoming.extend(node.incoming);
                continue;
            }
            let id = states.len() + 1;
            let (old, next) = key.clone();
            lookup.insert(key, states.len());
            states.push(TabState {
                old,
                incoming: node.incoming,
            });
            stack.push(Pending {
                incoming: BTreeSet::from([id]),
                new: next,
                old: Set::new(),
                next: Set::new(),
            });
            continue;
        };
        if node.old.contains(&eta) {
            stack.push(node);
            continue;
        }
        match cl.nodes[eta as usize] {
            Node::False => {}
            Node::True => {
                node.old.insert(eta);
                stack.push(node);
            }
            Node::Lit(..) => {
                if cl.negated_lit(eta).is_some_and(|n| node.old.contains(&n)) {
                    continue;
                }
                node.old.insert(eta);
                stack.push(node);
            }
            Node::And(a, b) => {
                node.old.insert(eta);
                for c in [a, b] {
                    if !node.old.contains(&c) {
                        node.new.insert(c);
                    }
                }
                stack.push(node);
            }
            Node::Next(a) => {
                node.old.insert(eta);
                node.next.insert(a);
                stack.push(node);
            }
            Node::Or(a, b) => split(&mut stack, node, eta, &[a], &[], &[b]),
            Node::Until(a, b) => split(&mut stack, node, eta, &[a], &[eta], &[b]),
            Node::Release(a, b) => split(&mut stack, node, eta, &[b], &[eta], &[a, b]),
        }
    }
    states
}

fn split(stack: &mut Vec<Pending>, mut node: Pending, eta: u32, new1: &[u32], next1: &[u32], new2: &[u32]) {
    node.old.insert(eta);
    let mut n2 = Pending {
        incoming: node.incoming.clone(),
        new: node.new.clone(),
        old: node.old.clone(),
        next: node.next.clone(),
    };
    for &c in new2 {
        if !n2.old.contains(&c) {
            n2.new.insert(c);
        }
    }
    for &c in new1 {
        if !node.old.contains(&c) {
            node.new.insert(c);
        }
    }
    node.next.extend(next1.iter().copied());
    stack.push(n2);
    stack.push(node);
}

/// Builds the generalized automaton for an NNF formula; `support` lists the
/// proposition ids letters are projected onto.
pub(crate) fn build_gba(nnf: &Formula, support: &[usize]) -> Gba {
    let mut cl = Closure::default();
    let root = cl.intern(nnf);
    let states = expand(&cl, root);
    let n_letters = 1usize << support.len();
    let pos: HashMap<usize, usize> = support.iter().enumerate().map(|(j, &p)| (p, j)).collect();

    let labels: Vec<LetterSet> = states
        .iter()
        .map(|s| {
            let lits: Vec<(usize, bool)> = s
                .old
                .iter()
                .filter_map(|&i| match cl.nodes[i as usize] {
                    Node::Lit(p, v) => Some((pos[&p], v)),
                    _ => None,
                })
                .collect();
            let mut ls = LetterSet::empty(n_letters);
            for x in 0..n_letters {
                if lits.iter().all(|&(j, v)| (x >> j & 1 == 1) == v) {
                    ls.insert(x);
                }
            }
            ls
        })
        .collect();

    let n = states.len() + 1;
    let mut succ = vec![BTreeMap::new(); n];
    for (i, s) in states.iter().enumerate() {
        if labels[i].is_empty() {
            continue;
        }
        for &src in &s.incoming {
            succ[src].insert(i + 1, labels[i].clone());
        }
    }

    let sets = cl
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(u, node)| match *node {
            Node::Until(_, b) => Some((u as u32, b)),
            _ => None,
        })
        .map(|(u, b)| {
            std::iter::once(false)
                .chain(states.iter().map(|s| s.old.contains(&b) || !s.old.contains(&u)))
                .collect()
        })
        .collect();
    Gba { succ, sets }
}

/// Counting degeneralization: state `(q, c)` waits for acceptance set `c`;
/// leaving a member of `F_c` advances the counter.
pub(crate) fn degeneralize(gba: &Gba) -> Nba {
    let k = gba.sets.len();
    if k == 0 {
        let n = gba.succ.len();
        return Nba {
            init: INIT,
            accepting: vec![true; n],
            succ: gba.succ.clone(),
        };
    }
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order = vec![(INIT, 0)];
    ids.insert((INIT, 0), 0);
    let mut succ: Vec<BTreeMap<usize, LetterSet>> = Vec::new();
    let mut accepting = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let (q, c) = order[i];
        let in_fc = gba.sets[c][q];
        accepting.push(c == k - 1 && in_fc);
        let c2 = if in_fc { (c + 1) % k } else { c };
        let mut out = BTreeMap::new();
        for (&dst, ls) in &gba.succ[q] {
            let key = (dst, c2);
            let id = *ids.entry(key).or_insert_with(|| {
                order.push(key);
                order.len() - 1
            });
            out.insert(id, ls.clone());
        }
        succ.push(out);
        i += 1;
    }
    Nba {
        init: 0,
        accepting,
        succ,
    }
}
