use std::fmt;

use super::{Assignment, Proposition};

/// LTL abstract syntax tree.
///
/// `Next` and `Release` are not part of the surface grammar's core but are
/// needed internally: `X` is accepted by the parser and `R` is produced by
/// negation normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Proposition),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

#[allow(clippy::should_implement_trait)]
impl Formula {
    pub fn atom(p: Proposition) -> Self {
        Formula::Atom(p)
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Formula::Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    /// Immediate children, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            True | False | Atom(_) => vec![],
            Not(a) | Next(a) | Eventually(a) | Always(a) => vec![a],
            And(a, b) | Or(a, b) | Until(a, b) | Release(a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Propositions occurring in the formula, sorted by id and deduplicated.
    pub fn propositions(&self) -> Vec<Proposition> {
        let mut out = Vec::new();
        self.collect_props(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_props(&self, out: &mut Vec<Proposition>) {
        if let Formula::Atom(p) = self {
            out.push(p.clone());
        }
        for c in self.children() {
            c.collect_props(out);
        }
    }

    /// True if the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => true,
            Not(a) => a.is_propositional(),
            And(a, b) | Or(a, b) => a.is_propositional() && b.is_propositional(),
            _ => false,
        }
    }

    /// Evaluates a propositional formula on one letter. Temporal operators panic.
    pub fn holds(&self, letter: Assignment) -> bool {
        use Formula::*;
        match self {
            True => true,
            False => false,
            Atom(p) => letter.contains(p.id()),
            Not(a) => !a.holds(letter),
            And(a, b) => a.holds(letter) && b.holds(letter),
            Or(a, b) => a.holds(letter) || b.holds(letter),
            _ => panic!("holds() called on temporal formula {self}"),
        }
    }

    /// Top-level conjuncts, flattening nested `And`.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            f => vec![f],
        }
    }

    /// Negation normal form.
    ///
    /// `F φ` becomes `true U φ` and `G φ` becomes `false R φ`; negations are pushed
    /// to atoms through the usual dualities. The result contains no
    /// `Eventually`/`Always` nodes and `Not` only directly above `Atom`.
    pub fn to_nnf(&self) -> Formula {
        nnf(self, false)
    }

    /// True when `Not` only occurs directly above an atom and no `F`/`G` remain.
    pub fn is_nnf(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => true,
            Not(a) => matches!(**a, Atom(_)),
            Eventually(_) | Always(_) => false,
            Next(a) => a.is_nnf(),
            And(a, b) | Or(a, b) | Until(a, b) | Release(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }
}

fn nnf(f: &Formula, negate: bool) -> Formula {
    use Formula::*;
    match (f, negate) {
        (True, false) | (False, true) => True,
        (True, true) | (False, false) => False,
        (Atom(p), false) => Atom(p.clone()),
        (Atom(p), true) => Formula::not(Atom(p.clone())),
        (Not(a), n) => nnf(a, !n),
        (And(a, b), false) => Formula::and(nnf(a, false), nnf(b, false)),
        (And(a, b), true) => Formula::or(nnf(a, true), nnf(b, true)),
        (Or(a, b), false) => Formula::or(nnf(a, false), nnf(b, false)),
        (Or(a, b), true) => Formula::and(nnf(a, true), nnf(b, true)),
        (Next(a), n) => Formula::next(nnf(a, n)),
        (Until(a, b), false) => Formula::until(nnf(a, false), nnf(b, false)),
        (Until(a, b), true) => Formula::release(nnf(a, true), nnf(b, true)),
        (Release(a, b), false) => Formula::release(nnf(a, false), nnf(b, false)),
        (Release(a, b), true) => Formula::until(nnf(a, true), nnf(b, true)),
        (Eventually(a), false) => Formula::until(True, nnf(a, false)),
        (Eventually(a), true) => Formula::release(False, nnf(a, true)),
        (Always(a), false) => Formula::release(False, nnf(a, false)),
        (Always(a), true) => Formula::until(True, nnf(a, true)),
    }
}

/// Canonical rendering: binary operators are always parenthesized, unary
/// operators are prefix. `parse(format(φ)) == φ`.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self {
            True => f.write_str("true"),
            False => f.write_str("false"),
            Atom(p) => f.write_str(p.name()),
            Not(a) => write!(f, "!{a}"),
            Next(a) => write!(f, "X {a}"),
            Eventually(a) => write!(f, "F {a}"),
            Always(a) => write!(f, "G {a}"),
            And(a, b) => write!(f, "({a} & {b})"),
            Or(a, b) => write!(f, "({a} | {b})"),
            Until(a, b) => write!(f, "({a} U {b})"),
            Release(a, b) => write!(f, "({a} R {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{parse, AlphabetContext};

    fn p(text: &str) -> (Formula, AlphabetContext) {
        let mut ctx = AlphabetContext::new();
        let f = parse(text, &mut ctx).unwrap();
        (f, ctx)
    }

    #[test]
    fn nnf_until_dual() {
        let (f, ctx) = p("!(a U b)");
        let a = Formula::atom(ctx.get("a").unwrap().clone());
        let b = Formula::atom(ctx.get("b").unwrap().clone());
        assert_eq!(
            f.to_nnf(),
            Formula::release(Formula::not(a), Formula::not(b))
        );
    }

    #[test]
    fn nnf_double_negation() {
        let (f, ctx) = p("!!a");
        assert_eq!(f.to_nnf(), Formula::atom(ctx.get("a").unwrap().clone()));
    }

    #[test]
    fn nnf_not_always() {
        let (f, ctx) = p("!G a");
        let a = Formula::atom(ctx.get("a").unwrap().clone());
        assert_eq!(f.to_nnf(), Formula::until(Formula::True, Formula::not(a)));
        assert!(f.to_nnf().is_nnf());
    }

    #[test]
    fn display_is_fully_parenthesized() {
        let (f, _) = p("!a U b & c | d");
        assert_eq!(f.to_string(), "(((!a U b) & c) | d)");
        let (g, _) = p("F (a & F b)");
        assert_eq!(g.to_string(), "F (a & F b)");
    }
}
