//! Run configuration: one JSON file holding the environment, trainer,
//! evaluation and artifact paths, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zsltl::env::{EnvConfig, LetterWorldConfig};
use zsltl::exec::{EvalOptions, DEFAULT_EPS_SCALE};
use zsltl::train::TrainerConfig;

use crate::CliError;

/// Environment variable that overrides the configured root seed.
pub const SEED_ENV: &str = "GENZ_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub specs: Vec<String>,
    pub episodes: usize,
    /// Number of evaluation seeds, derived from the root seed.
    pub seeds: usize,
    pub horizon_multiplier: usize,
    pub eps_scale: f64,
    pub switching: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            specs: Vec::new(),
            episodes: 100,
            seeds: 5,
            horizon_multiplier: 1,
            eps_scale: DEFAULT_EPS_SCALE,
            switching: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub report: PathBuf,
    pub trace: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            checkpoint: "runs/checkpoint.json".into(),
            train_log: "runs/train_log.jsonl".into(),
            report: "runs/report.json".into(),
            trace: "runs/trace.jsonl".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` means "the checkpoint's environment" for eval and trace, and
    /// the default LetterWorld for training.
    pub env: Option<EnvConfig>,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
    pub paths: Paths,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: None,
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
            paths: Paths::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads `path` (or defaults), then applies the seed override from the
    /// environment; flag overrides are applied by the caller afterwards.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Ok(s) = std::env::var(SEED_ENV) {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not a 64-bit unsigned integer")))?;
        }
        Ok(cfg)
    }

    pub fn training_env(&self) -> EnvConfig {
        self.env.clone().unwrap_or_else(|| EnvConfig::Letterworld(LetterWorldConfig::default()))
    }

    /// Trainer settings with the root seed installed.
    pub fn trainer(&self) -> TrainerConfig {
        TrainerConfig {
            seed: self.seed,
            ..self.trainer.clone()
        }
    }

    /// Evaluation seeds `seed, seed+1, …`.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.eval.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn eval_options(&self, mu_subgoal: Option<usize>) -> EvalOptions {
        EvalOptions {
            episodes: self.eval.episodes,
            seeds: self.eval_seeds(),
            horizon_multiplier: self.eval.horizon_multiplier,
            eps_scale: self.eval.eps_scale,
            mu_subgoal,
            switching: self.eval.switching,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"env": {"env": "letterworld", "grid_size": 5, "letters": ["a", "b"]},
                "trainer": {"total_interactions": 1000}, "eval": {"seeds": 2}, "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(cfg.trainer().seed, 7);
        assert_eq!(cfg.trainer.total_interactions, 1000);
        assert_eq!(cfg.eval_seeds(), vec![7, 8]);
        assert_eq!(cfg.training_env().max_steps(), 75);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }
}
