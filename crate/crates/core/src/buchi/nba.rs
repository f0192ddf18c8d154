//! Explicit state-based Büchi automata over projected letters, with the
//! language-preserving reductions used after translation.

use std::collections::{BTreeMap, VecDeque};

use super::guard::LetterSet;

/// Largest automaton on which direct simulation is computed.
pub(crate) const SIMULATION_LIMIT: usize = 400;

#[derive(Clone, Debug)]
pub(crate) struct Nba {
    pub init: usize,
    pub accepting: Vec<bool>,
    pub succ: Vec<BTreeMap<usize, LetterSet>>,
}

/// Strongly connected components (iterative Tarjan). Returns the component id
/// of every node and, per component, whether it contains a cycle.
pub(crate) fn tarjan(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> (Vec<usize>, Vec<bool>) {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut cyclic = Vec::new();
    let mut stack = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            let succs = std::mem::take(&mut frame.1);
            call.pop();
            if let Some(parent) = call.last() {
                low[parent.0] = low[parent.0].min(low[v]);
            }
            if low[v] == index[v] {
                let id = cyclic.len();
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("scc stack");
                    on_stack[w] = false;
                    comp[w] = id;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                cyclic.push(size > 1 || succs.contains(&v));
            }
        }
    }
    (comp, cyclic)
}

impl Nba {
    pub fn len(&self) -> usize {
        self.accepting.len()
    }

    fn successors(&self, q: usize) -> Vec<usize> {
        self.succ[q].keys().copied().collect()
    }

    /// States from which a cycle through an accepting state is reachable.
    pub fn live(&self) -> Vec<bool> {
        let n = self.len();
        let (comp, cyclic) = tarjan(n, &|q| self.successors(q));
        let mut good = vec![false; cyclic.len()];
        for q in 0..n {
            if self.accepting[q] && cyclic[comp[q]] {
                good[comp[q]] = true;
            }
        }
        let mut live: Vec<bool> = (0..n).map(|q| good[comp[q]]).collect();
        loop {
            let mut changed = false;
            for q in 0..n {
                if !live[q] && self.succ[q].keys().any(|&d| live[d]) {
                    live[q] = true;
                    changed = true;
                }
            }
            if !changed {
                return live;
            }
        }
    }

    /// Keeps only `keep` states (plus the initial one), renumbered in BFS order
    /// from the initial state; unreachable states are dropped.
    fn restrict(&self, keep: &[bool]) -> Nba {
        let mut new_id = vec![usize::MAX; self.len()];
        let mut order = vec![self.init];
        new_id[self.init] = 0;
        let mut queue = VecDeque::from([self.init]);
        while let Some(q) = queue.pop_front() {
            for &d in self.succ[q].keys() {
                if keep[d] && new_id[d] == usize::MAX {
                    new_id[d] = order.len();
                    order.push(d);
                    queue.push_back(d);
                }
            }
        }
        let succ = order
            .iter()
            .map(|&q| {
                self.succ[q]
                    .iter()
                    .filter(|(&d, _)| new_id[d] != usize::MAX)
                    .map(|(&d, ls)| (new_id[d], ls.clone()))
                    .collect()
            })
            .collect();
        Nba {
            init: 0,
            accepting: order.iter().map(|&q| self.accepting[q]).collect(),
            succ,
        }
    }

    pub fn trim(&self) -> Nba {
        self.restrict(&vec![true; self.len()])
    }

    /// Drops states with no accepting lasso; the initial state always stays.
    pub fn prune_dead(&self) -> Nba {
        self.restrict(&self.live())
    }

    /// Direct simulation: `sim[b][a]` iff `a` simulates `b`.
    pub fn direct_simulation(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let letters = self.succ.iter().flat_map(|m| m.values()).map(LetterSet::universe).next().unwrap_or(1);
        let words = n.div_ceil(64);
        // post[a][x]: successors of `a` on letter `x`, as a bitset
        let mut post = vec![vec![0u64; words]; n * letters];
        for a in 0..n {
            for (&d, ls) in &self.succ[a] {
                for x in ls.iter() {
                    post[a * letters + x][d / 64] |= 1 << (d % 64);
                }
            }
        }
        // simulators[b]: states that simulate `b`
        let mut simulators: Vec<Vec<u64>> = (0..n)
            .map(|b| {
                let mut row = vec![0u64; words];
                for a in 0..n {
                    if !self.accepting[b] || self.accepting[a] {
                        row[a / 64] |= 1 << (a % 64);
                    }
                }
                row
            })
            .collect();
        let intersects = |x: &[u64], y: &[u64]| x.iter().zip(y).any(|(p, q)| p & q != 0);
        loop {
            let mut changed = false;
            for b in 0..n {
                for a in 0..n {
                    if a == b || simulators[b][a / 64] & (1 << (a % 64)) == 0 {
                        continue;
                    }
                    let ok = self.succ[b].iter().all(|(&b2, lb)| {
                        lb.iter()
                            .all(|x| intersects(&post[a * letters + x], &simulators[b2]))
                    });
                    if !ok {
                        simulators[b][a / 64] &= !(1 << (a % 64));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..n)
            .map(|b| (0..n).map(|a| simulators[b][a / 64] & (1 << (a % 64)) != 0).collect())
            .collect()
    }

    /// Quotient by the coarsest strong bisimulation (signature refinement).
    fn bisimulation_quotient(&self) -> Nba {
        let n = self.len();
        let mut block: Vec<usize> = self.accepting.iter().map(|&a| a as usize).collect();
        let mut count = 0;
        loop {
            let mut ids: BTreeMap<(usize, Vec<(usize, LetterSet)>), usize> = BTreeMap::new();
            let mut next = vec![0; n];
            for q in 0..n {
                let mut sig: BTreeMap<usize, LetterSet> = BTreeMap::new();
                for (&d, ls) in &self.succ[q] {
                    sig.entry(block[d])
                        .and_modify(|e| e.union_with(ls))
                        .or_insert_with(|| ls.clone());
                }
                let key = (block[q], sig.into_iter().collect());
                let fresh = ids.len();
                next[q] = *ids.entry(key).or_insert(fresh);
            }
            let new_count = ids.len();
            block = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let rep: Vec<usize> = {
            let mut first = vec![usize::MAX; n];
            for q in 0..n {
                if first[block[q]] == usize::MAX {
                    first[block[q]] = q;
                }
            }
            (0..n).map(|q| first[block[q]]).collect()
        };
        self.merge(&rep)
    }

    /// Removes edges into a successor that a sibling on the same letter
    /// strictly dominates under `sim` (ties broken by state id).
    fn prune_little_brothers(&self, sim: &[Vec<bool>]) -> Nba {
        let beats = |a: usize, b: usize| sim[b][a] && (!sim[a][b] || a < b);
        let mut out = self.clone();
        for q in 0..self.len() {
            for (&b, lb) in &self.succ[q] {
                let mut kept = lb.clone();
                for (&a, la) in &self.succ[q] {
                    if a != b && beats(a, b) {
                        for x in la.iter() {
                            kept.remove(x);
                        }
                    }
                }
                if kept.is_empty() {
                    out.succ[q].remove(&b);
                } else {
                    out.succ[q].insert(b, kept);
                }
            }
        }
        out
    }

    /// Merges simulation-equivalent states.
    fn quotient(&self, sim: &[Vec<bool>]) -> Nba {
        let n = self.len();
        let rep: Vec<usize> = (0..n)
            .map(|q| (0..n).find(|&r| sim[q][r] && sim[r][q]).unwrap_or(q))
            .collect();
        self.merge(&rep)
    }

    /// Collapses every state onto its representative `rep[q]`.
    fn merge(&self, rep: &[usize]) -> Nba {
        let n = self.len();
        let mut succ: Vec<BTreeMap<usize, LetterSet>> = vec![BTreeMap::new(); n];
        for q in 0..n {
            for (&d, ls) in &self.succ[q] {
                succ[rep[q]]
                    .entry(rep[d])
                    .and_modify(|e: &mut LetterSet| e.union_with(ls))
                    .or_insert_with(|| ls.clone());
            }
        }
        let mut accepting = vec![false; n];
        for q in 0..n {
            accepting[rep[q]] |= self.accepting[q];
        }
        Nba {
            init: rep[self.init],
            accepting,
            succ,
        }
        .trim()
    }

    /// Clears the acceptance mark of states on no cycle; a run passes them
    /// at most once.
    fn normalize_acceptance(&self) -> Nba {
        let (comp, cyclic) = tarjan(self.len(), &|q| self.successors(q));
        let mut out = self.clone();
        for q in 0..self.len() {
            out.accepting[q] &= cyclic[comp[q]];
        }
        out
    }

    /// States accepting every word: those reaching an accepting cycle of
    /// tautological edges along such edges, closed under "every letter leads
    /// to a universal state".
    fn universal(&self) -> Vec<bool> {
        let n = self.len();
        let Some(letters) = self.succ.iter().flat_map(|m| m.values()).map(LetterSet::universe).next() else {
            return vec![false; n];
        };
        let full_succ = |q: usize| -> Vec<usize> {
            self.succ[q].iter().filter(|(_, ls)| ls.is_full()).map(|(&d, _)| d).collect()
        };
        let (comp, cyclic) = tarjan(n, &full_succ);
        let mut good = vec![false; cyclic.len()];
        for q in 0..n {
            if self.accepting[q] && cyclic[comp[q]] {
                good[comp[q]] = true;
            }
        }
        let mut uni: Vec<bool> = (0..n).map(|q| good[comp[q]]).collect();
        loop {
            let mut changed = false;
            for q in 0..n {
                if uni[q] {
                    continue;
                }
                let mut cover = LetterSet::empty(letters);
                for (&d, ls) in &self.succ[q] {
                    if uni[d] {
                        cover.union_with(ls);
                    }
                }
                if cover.is_full() {
                    uni[q] = true;
                    changed = true;
                }
            }
            if !changed {
                return uni;
            }
        }
    }

    /// Collapses all universal states into one accepting sink with a
    /// tautological self-loop.
    fn merge_universal(&self) -> Nba {
        let uni = self.universal();
        let Some(sink) = uni.iter().position(|&u| u) else {
            return self.clone();
        };
        let letters = self.succ.iter().flat_map(|m| m.values()).map(LetterSet::universe).next().expect("edges exist");
        let mut out = self.clone();
        for q in 0..self.len() {
            if uni[q] {
                out.accepting[q] = true;
                out.succ[q] = BTreeMap::from([(sink, LetterSet::full(letters))]);
            }
        }
        let rep: Vec<usize> = (0..self.len()).map(|q| if uni[q] { sink } else { q }).collect();
        out.merge(&rep)
    }

    fn signature(&self) -> (usize, usize, usize) {
        let edges = self.succ.iter().map(BTreeMap::len).sum();
        let letters = self.succ.iter().flat_map(|m| m.values()).map(LetterSet::count).sum();
        (self.len(), edges, letters)
    }

    /// Dead-state pruning, bisimulation and (below [`SIMULATION_LIMIT`]
    /// states) simulation reductions until nothing changes.
    pub fn reduce(&self) -> Nba {
        let mut cur = self.prune_dead().bisimulation_quotient();
        loop {
            let before = cur.signature();
            cur = cur.normalize_acceptance().merge_universal().prune_dead();
            if cur.len() <= SIMULATION_LIMIT {
                let sim = cur.direct_simulation();
                cur = cur.prune_little_brothers(&sim).prune_dead();
                let sim = cur.direct_simulation();
                cur = cur.quotient(&sim).prune_dead();
            }
            cur = cur.bisimulation_quotient();
            if cur.signature() == before {
                return cur;
            }
        }
    }
}
