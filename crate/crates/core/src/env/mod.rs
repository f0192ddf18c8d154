//! Labeled environments: the discrete LetterWorld torus grid and the
//! kinematic ZoneSim point robot with per-color lidar.

mod letterworld;
mod zonesim;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ltl::{AlphabetContext, Assignment, LtlError};

pub use letterworld::{LetterWorld, LetterWorldConfig, Move};
pub use zonesim::{Zone, ZoneSim, ZoneSimConfig, ZoneSimState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("no feasible layout after {0} attempts")]
    LayoutInfeasible(usize),
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error(transparent)]
    Alphabet(#[from] LtlError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

/// Raw observation, split into the proposition-independent part and the
/// per-proposition part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    /// Egocentric `size × size` grid (row-major), agent at `(size/2, size/2)`;
    /// each cell holds its label.
    Grid { size: usize, cells: Vec<Assignment> },
    /// `ego` features plus one closeness array per proposition id, all from
    /// the same beam geometry.
    Lidar { ego: Vec<f64>, lidar: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub label: Assignment,
    pub done: bool,
}

pub trait Environment: Send {
    fn alphabet(&self) -> &AlphabetContext;
    fn action_space(&self) -> ActionSpace;
    /// Samples a fresh layout and returns the first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Observation, EnvError>;
    fn step(&mut self, action: &Action) -> StepResult;
    fn label(&self) -> Assignment;
    fn observation(&self) -> Observation;
    /// Labels the environment can produce, excluding the empty one.
    fn achievable(&self) -> Vec<Assignment>;
    fn max_steps(&self) -> usize;
    fn set_max_steps(&mut self, max_steps: usize);
    fn state_json(&self) -> Value;
    /// Static scene description (letters or zones) for rendering.
    fn layout_json(&self) -> Value {
        Value::Null
    }
}

/// Tagged environment config, e.g. `{"env": "letterworld", "grid_size": 5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "lowercase")]
pub enum EnvConfig {
    Letterworld(LetterWorldConfig),
    Zonesim(ZoneSimConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            EnvConfig::Letterworld(c) => Box::new(LetterWorld::new(c.clone())?),
            EnvConfig::Zonesim(c) => Box::new(ZoneSim::new(c.clone())?),
        })
    }

    pub fn max_steps(&self) -> usize {
        match self {
            EnvConfig::Letterworld(c) => c.max_steps,
            EnvConfig::Zonesim(c) => c.max_steps,
        }
    }

    /// Discount factor used for this environment family.
    pub fn default_gamma(&self) -> f64 {
        match self {
            EnvConfig::Letterworld(_) => 0.94,
            EnvConfig::Zonesim(_) => 0.998,
        }
    }
}

/// One line of a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub state: Value,
    pub action: Action,
    pub label: Vec<String>,
    pub reward: f64,
    pub h: f64,
}
