//! Zero-shot execution of LTL specifications with a single subgoal-conditioned
//! policy trained under a reachability safety constraint.
//!
//! The pipeline: [`ltl`] parses a specification, [`buchi`] compiles it to a
//! Büchi automaton, [`subgoal`] turns automaton states into reach-avoid
//! subgoals, [`env`] and [`obs`] produce subgoal-fused observations, [`train`]
//! fits policy, value and multiplier networks from [`nn`], and [`exec`] runs
//! the policy on unseen specifications with timeout-based subgoal switching.

pub mod buchi;
pub mod env;
pub mod exec;
pub mod ltl;
pub mod nn;
pub mod obs;
pub mod rng;
pub mod subgoal;
pub mod train;
