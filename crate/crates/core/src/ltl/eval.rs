//! Direct semantics of LTL on ultimately periodic words.
//!
//! Each subformula gets a truth vector over the `|prefix| + |cycle|` distinct
//! positions of the lasso. Every position has exactly one successor, so `U` is
//! the least and `R` the greatest fixpoint of its one-step unfolding; both are
//! reached by sweeping until the vector stops changing.

use super::{Formula, LassoWord};

/// `true` iff `prefix · cycle^ω ⊨ φ` at position 0.
pub fn eval_lasso(formula: &Formula, word: &LassoWord) -> bool {
    truth(formula, word)[0]
}

fn truth(f: &Formula, w: &LassoWord) -> Vec<bool> {
    use Formula::*;
    let n = w.positions();
    match f {
        True => vec![true; n],
        False => vec![false; n],
        Atom(p) => (0..n).map(|i| w.letter(i).contains(p.id())).collect(),
        Not(a) => truth(a, w).into_iter().map(|v| !v).collect(),
        And(a, b) => zip(truth(a, w), truth(b, w), |x, y| x && y),
        Or(a, b) => zip(truth(a, w), truth(b, w), |x, y| x || y),
        Next(a) => {
            let ta = truth(a, w);
            (0..n).map(|i| ta[w.successor(i)]).collect()
        }
        Until(a, b) => fixpoint(w, &truth(a, w), &truth(b, w), false),
        Release(a, b) => fixpoint(w, &truth(a, w), &truth(b, w), true),
        Eventually(a) => fixpoint(w, &vec![true; n], &truth(a, w), false),
        Always(a) => fixpoint(w, &vec![false; n], &truth(a, w), true),
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// Until (`greatest == false`): `v = b ∨ (a ∧ X v)` from all-false.
/// Release (`greatest == true`): `v = b ∧ (a ∨ X v)` from all-true.
fn fixpoint(w: &LassoWord, a: &[bool], b: &[bool], greatest: bool) -> Vec<bool> {
    let n = w.positions();
    let mut v = vec![greatest; n];
    loop {
        let mut changed = false;
        for i in (0..n).rev() {
            let next = v[w.successor(i)];
            let new = if greatest {
                b[i] && (a[i] || next)
            } else {
                b[i] || (a[i] && next)
            };
            if new != v[i] {
                v[i] = new;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{parse, AlphabetContext, Assignment};

    fn check(text: &str, prefix: &[&[&str]], cycle: &[&[&str]]) -> bool {
        let mut ctx = AlphabetContext::from_names(["a", "b"]).unwrap();
        let f = parse(text, &mut ctx).unwrap();
        let conv = |xs: &[&[&str]]| -> Vec<Assignment> {
            xs.iter().map(|l| ctx.assignment(l).unwrap()).collect()
        };
        let w = LassoWord::new(conv(prefix), conv(cycle)).unwrap();
        eval_lasso(&f, &w)
    }

    #[test]
    fn eventually_immediately() {
        assert!(check("F a", &[], &[&["a"]]));
    }

    #[test]
    fn always_fails_in_cycle() {
        assert!(!check("G a", &[&["a"]], &[&[]]));
    }

    #[test]
    fn recurrence_with_safety() {
        assert!(check("G F a & G !b", &[&[]], &[&["a"], &[]]));
        assert!(!check("G F a & G !b", &[&[]], &[&["a"], &["b"]]));
    }

    #[test]
    fn until_needs_goal() {
        assert!(!check("!a U b", &[], &[&[]]));
        assert!(check("!a U b", &[&[], &[]], &[&["b"]]));
        assert!(!check("!a U b", &[&["a"]], &[&["b"]]));
        assert!(check("a R b", &[], &[&["b"]]));
    }

    #[test]
    fn next_reads_successor() {
        assert!(check("X a", &[&[]], &[&["a"]]));
        assert!(!check("X X a", &[&[]], &[&["a"], &[]]));
        assert!(check("X X X a", &[&[]], &[&["a"], &[]]));
    }
}
