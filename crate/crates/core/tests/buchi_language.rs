use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsltl::buchi::{compile, compile_with, CompileOptions, StateSet};
use zsltl::ltl::random::{random_formula, random_lasso};
use zsltl::ltl::{eval_lasso, AlphabetContext, Assignment};

fn ctx(n: usize) -> AlphabetContext {
    AlphabetContext::from_names(["a", "b", "c", "d"].iter().take(n)).unwrap()
}

#[test]
fn acceptance_matches_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = Vec::new();
    for _ in 0..500 {
        let n = rng.random_range(1..=4);
        let c = ctx(n);
        let f = random_formula(&mut rng, c.props(), 4);
        let b = compile(&f, &c);
        for _ in 0..200 {
            let w = random_lasso(&mut rng, n, 4, 4);
            if b.accepts_lasso(&w) != eval_lasso(&f, &w) {
                mismatches.push(format!("{f} on {w:?}"));
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches, first: {}", mismatches.len(), mismatches[0]);
}

#[test]
fn reduction_preserves_language() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let c = ctx(3);
        let f = random_formula(&mut rng, c.props(), 3);
        let raw = compile_with(&f, &c, CompileOptions { reduce: false });
        let red = compile(&f, &c);
        assert!(red.num_states() <= raw.num_states().max(1));
        for _ in 0..50 {
            let w = random_lasso(&mut rng, 3, 4, 4);
            assert_eq!(raw.accepts_lasso(&w), red.accepts_lasso(&w), "{f}");
        }
    }
}

#[test]
fn step_distributes_over_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let c = ctx(3);
        let f = random_formula(&mut rng, c.props(), 3);
        let b = compile_with(&f, &c, CompileOptions { reduce: false });
        let n = b.num_states();
        let pick = |rng: &mut ChaCha8Rng| -> StateSet { (0..n).filter(|_| rng.random_bool(0.5)).collect() };
        let s1 = pick(&mut rng);
        let s2 = pick(&mut rng);
        let a = Assignment::from_bits(rng.random_range(0..8));
        let mut rhs = b.step(&s1, a);
        rhs.union_with(&b.step(&s2, a));
        assert_eq!(b.step(&s1.union(&s2), a), rhs);
    }
}

#[test]
fn transitions_reference_valid_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let c = ctx(4);
        let f = random_formula(&mut rng, c.props(), 4);
        let b = compile(&f, &c);
        assert!(b.initial() < b.num_states());
        for t in b.transitions() {
            assert!(t.src < b.num_states() && t.dst < b.num_states());
            assert!(!t.guard.is_false());
        }
    }
}

#[test]
fn nested_until_compiles_to_a_chain_with_an_accepting_sink() {
    let mut ctx = AlphabetContext::from_names(["a", "b", "c", "d"]).unwrap();
    let f = zsltl::ltl::parse("!a U (b & (!c U (d & (!b U a))))", &mut ctx).unwrap();
    let b = compile(&f, &ctx);
    assert!(b.num_states() <= 4, "{} states", b.num_states());
    let sinks: Vec<usize> = (0..b.num_states())
        .filter(|&q| b.is_accepting(q) && b.outgoing(q).any(|t| t.dst == q && t.guard.is_true()))
        .collect();
    assert_eq!(sinks.len(), 1);
    let w = zsltl::ltl::LassoWord::new(
        ["b", "d", "a"].iter().map(|s| ctx.assignment(&[*s]).unwrap()).collect(),
        vec![Assignment::EMPTY],
    )
    .unwrap();
    assert!(b.accepts_lasso(&w));
    let mut s = b.initial_set();
    for l in w.prefix() {
        s = b.step(&s, *l);
    }
    assert!(s.contains(sinks[0]));
}

#[test]
fn acceptance_only_on_cycles() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let c = ctx(3);
    for _ in 0..100 {
        let f = random_formula(&mut rng, c.props(), 4);
        let b = compile(&f, &c);
        for q in 0..b.num_states() {
            if !b.is_accepting(q) {
                continue;
            }
            let mut seen = StateSet::new();
            let mut stack: Vec<usize> = b.outgoing(q).map(|t| t.dst).collect();
            let mut back = false;
            while let Some(x) = stack.pop() {
                if x == q {
                    back = true;
                    break;
                }
                if !seen.contains(x) {
                    seen.insert(x);
                    stack.extend(b.outgoing(x).map(|t| t.dst));
                }
            }
            assert!(back, "accepting state {q} lies on no cycle");
        }
    }
}
