#![allow(dead_code)]

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use zsltl::env::{Action, ActionSpace, EnvError, Environment, Observation, StepResult};
use zsltl::exec::Controller;
use zsltl::ltl::{AlphabetContext, Assignment};
use zsltl::subgoal::Subgoal;

/// Emits a fixed label sequence regardless of the actions, repeating its
/// last label once the script is exhausted.
#[derive(Clone)]
pub struct ScriptedLabels {
    pub alphabet: AlphabetContext,
    pub script: Vec<Assignment>,
    pub t: usize,
    pub max_steps: usize,
}

impl ScriptedLabels {
    pub fn new(names: &[&str], script: Vec<Assignment>) -> Self {
        let max_steps = script.len();
        Self {
            alphabet: AlphabetContext::from_names(names).unwrap(),
            script,
            t: 0,
            max_steps,
        }
    }

    pub fn from_names(names: &[&str], script: &[&[&str]]) -> Self {
        let ctx = AlphabetContext::from_names(names).unwrap();
        let labels = script.iter().map(|l| ctx.assignment(l).unwrap()).collect();
        Self::new(names, labels)
    }
}

impl Environment for ScriptedLabels {
    fn alphabet(&self) -> &AlphabetContext {
        &self.alphabet
    }
    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(1)
    }
    fn reset(&mut self, _: &mut dyn RngCore) -> Result<Observation, EnvError> {
        self.t = 0;
        Ok(self.observation())
    }
    fn step(&mut self, _: &Action) -> StepResult {
        self.t += 1;
        StepResult {
            observation: self.observation(),
            label: self.label(),
            done: self.t >= self.max_steps,
        }
    }
    fn label(&self) -> Assignment {
        if self.t == 0 {
            Assignment::EMPTY
        } else {
            self.script[(self.t - 1).min(self.script.len() - 1)]
        }
    }
    fn observation(&self) -> Observation {
        Observation::Grid {
            size: 1,
            cells: vec![self.label()],
        }
    }
    fn achievable(&self) -> Vec<Assignment> {
        (0..self.alphabet.len()).map(Assignment::singleton).collect()
    }
    fn max_steps(&self) -> usize {
        self.max_steps
    }
    fn set_max_steps(&mut self, max_steps: usize) {
        self.max_steps = max_steps;
    }
    fn state_json(&self) -> Value {
        json!({ "t": self.t })
    }
}

/// Uniformly random actions and subgoal scores.
pub struct RandomController {
    pub rng: ChaCha8Rng,
    pub space: ActionSpace,
}

impl RandomController {
    pub fn new(seed: u64, space: ActionSpace) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            space,
        }
    }
}

impl Controller for RandomController {
    fn act(&mut self, _: &Observation, _: &Subgoal) -> Action {
        match self.space {
            ActionSpace::Discrete(n) => Action::Discrete(self.rng.random_range(0..n)),
            ActionSpace::Continuous(n) => Action::Continuous((0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect()),
        }
    }
    fn score(&mut self, _: &Observation, _: &Subgoal) -> f64 {
        self.rng.random()
    }
}

/// ZoneSim layouts where a blue and a green zone, disjoint from each other,
/// sit closer to the start than the single magenta zone; yellow lies off to
/// the side. Each entry is a fixed layout with a fixed start.
pub fn disjoint_pair_layouts(n: usize, seed: u64) -> Vec<zsltl::env::ZoneSimConfig> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    use zsltl::env::{Zone, ZoneSimConfig};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let start = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let bisector = rng.random_range(0.0..TAU);
            let half_gap = rng.random_range(0.4..0.7);
            let near = rng.random_range(0.9..1.1);
            let at = |angle: f64, d: f64| [start[0] + d * angle.cos(), start[1] + d * angle.sin()];
            let side = if rng.random_bool(0.5) { FRAC_PI_2 } else { -FRAC_PI_2 };
            let zones = vec![
                Zone { color: 0, center: at(bisector - half_gap, near), radius: 0.4 },
                Zone { color: 1, center: at(bisector + half_gap, near), radius: 0.4 },
                Zone { color: 2, center: at(bisector + PI, rng.random_range(1.7..2.0)), radius: 0.4 },
                Zone { color: 3, center: at(bisector + side, rng.random_range(1.8..2.1)), radius: 0.4 },
            ];
            ZoneSimConfig {
                half_extent: 3.5,
                lidar_beams: 32,
                overlap_mode: true,
                zones_per_color: 1,
                max_steps: 400,
                zones: Some(zones),
                start: Some([start[0], start[1], rng.random_range(0.0..TAU)]),
                ..Default::default()
            }
        })
        .collect()
}
