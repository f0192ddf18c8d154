use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ltl::{AlphabetContext, Assignment};

use super::{Action, ActionSpace, EnvError, Environment, Observation, StepResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LetterWorldConfig {
    pub grid_size: usize,
    pub letters: Vec<String>,
    pub copies_per_letter: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for LetterWorldConfig {
    fn default() -> Self {
        Self {
            grid_size: 7,
            letters: ('a'..='l').map(String::from).collect(),
            copies_per_letter: 2,
            max_steps: 75,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Torus grid with one letter per occupied cell.
#[derive(Clone, Debug)]
pub struct LetterWorld {
    config: LetterWorldConfig,
    alphabet: AlphabetContext,
    placement: Vec<Option<usize>>,
    agent: (usize, usize),
    step_count: usize,
}

impl LetterWorld {
    pub fn new(config: LetterWorldConfig) -> Result<Self, EnvError> {
        let n = config.grid_size;
        if n == 0 || config.letters.is_empty() || config.copies_per_letter == 0 {
            return Err(EnvError::Config("grid, letters and copies must be nonzero".into()));
        }
        if config.letters.len() * config.copies_per_letter > n * n - 1 {
            return Err(EnvError::Config(format!(
                "{} letters × {} copies do not fit a {n}×{n} grid",
                config.letters.len(),
                config.copies_per_letter
            )));
        }
        let alphabet = AlphabetContext::from_names(&config.letters)?;
        Ok(Self {
            placement: vec![None; n * n],
            agent: (0, 0),
            step_count: 0,
            alphabet,
            config,
        })
    }

    pub fn config(&self) -> &LetterWorldConfig {
        &self.config
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn letter_at(&self, row: usize, col: usize) -> Option<usize> {
        self.placement[row * self.config.grid_size + col]
    }

    /// Installs a fixed layout: `placement[row * n + col]` is a proposition id.
    pub fn set_layout(&mut self, placement: Vec<Option<usize>>, agent: (usize, usize)) {
        assert_eq!(placement.len(), self.config.grid_size.pow(2));
        self.placement = placement;
        self.agent = agent;
        self.step_count = 0;
    }

    fn cell_label(&self, row: usize, col: usize) -> Assignment {
        self.letter_at(row, col).map_or(Assignment::EMPTY, Assignment::singleton)
    }
}

impl Environment for LetterWorld {
    fn alphabet(&self) -> &AlphabetContext {
        &self.alphabet
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Observation, EnvError> {
        let n = self.config.grid_size;
        let mut cells: Vec<usize> = (0..n * n).collect();
        cells.shuffle(rng);
        self.placement = vec![None; n * n];
        let mut it = cells.iter();
        for letter in 0..self.config.letters.len() {
            for _ in 0..self.config.copies_per_letter {
                self.placement[*it.next().expect("layout fits")] = Some(letter);
            }
        }
        let empty: Vec<usize> = it.copied().collect();
        let spawn = empty[rng.random_range(0..empty.len())];
        self.agent = (spawn / n, spawn % n);
        self.step_count = 0;
        Ok(self.observation())
    }

    fn step(&mut self, action: &Action) -> StepResult {
        let n = self.config.grid_size;
        let a = match action {
            Action::Discrete(a) => *a,
            Action::Continuous(_) => panic!("LetterWorld takes discrete actions"),
        };
        let (r, c) = self.agent;
        self.agent = match Move::ALL[a] {
            Move::Up => ((r + n - 1) % n, c),
            Move::Down => ((r + 1) % n, c),
            Move::Left => (r, (c + n - 1) % n),
            Move::Right => (r, (c + 1) % n),
        };
        self.step_count += 1;
        StepResult {
            observation: self.observation(),
            label: self.label(),
            done: self.step_count >= self.config.max_steps,
        }
    }

    fn label(&self) -> Assignment {
        self.cell_label(self.agent.0, self.agent.1)
    }

    fn observation(&self) -> Observation {
        let n = self.config.grid_size;
        let (ar, ac) = self.agent;
        let half = n / 2;
        let cells = (0..n * n)
            .map(|i| {
                let (vr, vc) = (i / n, i % n);
                self.cell_label((ar + vr + n - half) % n, (ac + vc + n - half) % n)
            })
            .collect();
        Observation::Grid { size: n, cells }
    }

    fn achievable(&self) -> Vec<Assignment> {
        (0..self.config.letters.len()).map(Assignment::singleton).collect()
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn set_max_steps(&mut self, max_steps: usize) {
        self.config.max_steps = max_steps;
    }

    fn state_json(&self) -> Value {
        json!({"agent": [self.agent.0, self.agent.1], "step": self.step_count})
    }

    fn layout_json(&self) -> Value {
        let n = self.config.grid_size;
        let letters: Vec<Value> = (0..n * n)
            .filter_map(|c| self.placement[c].map(|l| json!([c / n, c % n, self.config.letters[l]])))
            .collect();
        json!({"kind": "letterworld", "grid_size": n, "letters": letters})
    }
}
