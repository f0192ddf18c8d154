//! Random formulas and lasso words for property checks.

use rand::Rng;

use super::{Assignment, Formula, LassoWord, Proposition};

/// A random formula of depth at most `depth` over `props`.
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, props: &[Proposition], depth: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::Atom(props[rng.random_range(0..props.len())].clone()),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..9) {
        0 => Formula::not(random_formula(rng, props, d)),
        1 => Formula::next(random_formula(rng, props, d)),
        2 => Formula::eventually(random_formula(rng, props, d)),
        3 => Formula::always(random_formula(rng, props, d)),
        4 => Formula::and(random_formula(rng, props, d), random_formula(rng, props, d)),
        5 => Formula::or(random_formula(rng, props, d), random_formula(rng, props, d)),
        6 | 7 => Formula::until(random_formula(rng, props, d), random_formula(rng, props, d)),
        _ => Formula::release(random_formula(rng, props, d), random_formula(rng, props, d)),
    }
}

/// A random lasso with `|prefix| ≤ max_prefix` and `1 ≤ |cycle| ≤ max_cycle`
/// over the first `n_props` propositions.
pub fn random_lasso<R: Rng + ?Sized>(rng: &mut R, n_props: usize, max_prefix: usize, max_cycle: usize) -> LassoWord {
    let letter = |rng: &mut R| Assignment::from_bits(rng.random_range(0..1u32 << n_props));
    let p = rng.random_range(0..=max_prefix);
    let c = rng.random_range(1..=max_cycle);
    let prefix = (0..p).map(|_| letter(rng)).collect();
    let cycle = (0..c).map(|_| letter(rng)).collect();
    LassoWord::new(prefix, cycle).expect("cycle is nonempty")
}
