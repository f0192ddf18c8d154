//! Python bindings. Structured values cross the boundary as JSON strings so
//! the Python side needs nothing beyond `json`.
//!
//! Each binding wraps a plain function in [`api`] that can be tested without
//! an interpreter.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

pub mod api {
    use serde_json::{json, Value};
    use zsltl::buchi::{compile, StateSet};
    use zsltl::env::EnvConfig;
    use zsltl::exec::{evaluate, parse_for_env, EvalOptions};
    use zsltl::ltl::{parse, AlphabetContext};
    use zsltl::subgoal::{candidates_json, extract_subgoals, UnsatSet};
    use zsltl::train::{train as run_training, Checkpoint, TrainError, TrainerConfig};

    /// Bad input versus a numerical failure during training.
    #[derive(Debug, PartialEq)]
    pub enum ApiError {
        Invalid(String),
        NonFinite(String),
    }

    fn invalid(e: impl std::fmt::Display) -> ApiError {
        ApiError::Invalid(e.to_string())
    }

    fn env_from(env_json: Option<&str>) -> Result<Option<EnvConfig>, ApiError> {
        env_json.map(|s| serde_json::from_str(s).map_err(invalid)).transpose()
    }

    /// Automaton JSON, Graphviz text and the subgoals of `states` (default:
    /// the initial state). Without an environment every non-empty assignment
    /// over `props` plus the formula's atoms is achievable.
    pub fn compile_spec(spec: &str, props: &[String], env_json: Option<&str>, states: Option<&[usize]>) -> Result<String, ApiError> {
        let (b, achievable) = match env_from(env_json)? {
            Some(cfg) => {
                let env = cfg.build().map_err(invalid)?;
                let f = parse_for_env(spec, env.as_ref()).map_err(invalid)?;
                (compile(&f, env.alphabet()), env.achievable())
            }
            None => {
                let mut ctx = AlphabetContext::from_names(props).map_err(invalid)?;
                let f = parse(spec, &mut ctx).map_err(invalid)?;
                if ctx.len() > 16 {
                    return Err(ApiError::Invalid("more than 16 propositions without an environment".into()));
                }
                let all = ctx.all_assignments().into_iter().filter(|a| !a.is_empty()).collect();
                (compile(&f, &ctx), all)
            }
        };
        let tracked: StateSet = match states {
            Some(s) => {
                if let Some(q) = s.iter().find(|&&q| q >= b.num_states()) {
                    return Err(ApiError::Invalid(format!("state {q} out of range")));
                }
                s.iter().copied().collect()
            }
            None => b.initial_set(),
        };
        let cands = extract_subgoals(&b, &tracked, &UnsatSet::new(), &achievable).unwrap_or_default();
        Ok(json!({
            "automaton": b.to_json(),
            "dot": b.to_dot(),
            "propositions": b.alphabet().names(),
            "subgoals": candidates_json(b.alphabet(), &cands),
        })
        .to_string())
    }

    /// Returns `(checkpoint JSON, log as a JSON list)`.
    pub fn train(trainer_json: &str, env_json: &str) -> Result<(String, String), ApiError> {
        let cfg: TrainerConfig = serde_json::from_str(trainer_json).map_err(invalid)?;
        let env: EnvConfig = serde_json::from_str(env_json).map_err(invalid)?;
        let out = run_training(&cfg, &env, |_| {}).map_err(|e| match e {
            TrainError::NonFinite { .. } => ApiError::NonFinite(e.to_string()),
            e => invalid(e),
        })?;
        let ck = out.checkpoint.to_json().map_err(invalid)?;
        Ok((ck, serde_json::to_string(&out.log).map_err(invalid)?))
    }

    /// Report JSON for `specs`. `options_json` holds [`EvalOptions`] fields;
    /// `mu_subgoal` defaults to the checkpoint's statistic.
    pub fn evaluate_checkpoint(checkpoint_json: &str, specs: &[String], options_json: Option<&str>) -> Result<String, ApiError> {
        let ck = Checkpoint::from_json(checkpoint_json).map_err(invalid)?;
        let mut opts = EvalOptions {
            mu_subgoal: ck.mu_subgoal,
            ..EvalOptions::default()
        };
        if let Some(s) = options_json {
            let mut base = serde_json::to_value(&opts).map_err(invalid)?;
            let Value::Object(over) = serde_json::from_str::<Value>(s).map_err(invalid)? else {
                return Err(ApiError::Invalid("options must be a JSON object".into()));
            };
            for (k, v) in over {
                if base.get(&k).is_none() {
                    return Err(ApiError::Invalid(format!("unknown option {k}")));
                }
                base[k] = v;
            }
            opts = serde_json::from_value(base).map_err(invalid)?;
        }
        let mut agent = ck.agent;
        let report = evaluate(specs, &ck.env, &mut agent, &opts, |_, _, _, _| {}).map_err(invalid)?;
        serde_json::to_string(&report).map_err(invalid)
    }
}

fn to_py(e: api::ApiError) -> PyErr {
    match e {
        api::ApiError::Invalid(m) => PyValueError::new_err(m),
        api::ApiError::NonFinite(m) => PyRuntimeError::new_err(m),
    }
}

/// Compile `spec`; returns JSON with `automaton`, `dot`, `propositions` and
/// `subgoals`.
#[pyfunction]
#[pyo3(signature = (spec, props=Vec::new(), env=None, states=None))]
fn compile(spec: &str, props: Vec<String>, env: Option<&str>, states: Option<Vec<usize>>) -> PyResult<String> {
    api::compile_spec(spec, &props, env, states.as_deref()).map_err(to_py)
}

/// Train from trainer and environment config JSON; returns
/// `(checkpoint_json, log_json)`.
#[pyfunction]
fn train(py: Python<'_>, trainer: &str, env: &str) -> PyResult<(String, String)> {
    py.allow_threads(|| api::train(trainer, env)).map_err(to_py)
}

/// Evaluate a checkpoint on specifications; returns the report JSON.
#[pyfunction]
#[pyo3(signature = (checkpoint, specs, options=None))]
fn evaluate(py: Python<'_>, checkpoint: &str, specs: Vec<String>, options: Option<&str>) -> PyResult<String> {
    py.allow_threads(|| api::evaluate_checkpoint(checkpoint, &specs, options)).map_err(to_py)
}

#[pymodule]
fn zsltl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
