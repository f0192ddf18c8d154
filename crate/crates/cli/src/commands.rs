//! The five subcommands. Each returns the JSON it prints on stdout.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use zsltl::buchi::{compile, BuchiAutomaton, StateSet};
use zsltl::env::{EnvConfig, Environment};
use zsltl::exec::{
    episode_env, evaluate, parse_for_env, run_episode, Controller, EvalReport, GridGreedyController, LidarGreedyController,
    RunOptions, SpecReport, TimeoutPolicy,
};
use zsltl::ltl::{parse, AlphabetContext, Assignment, Formula};
use zsltl::subgoal::{candidates_json, extract_subgoals, Candidate, UnsatSet};
use zsltl::train::{train, write_atomic, Agent, Checkpoint};

use crate::config::RunConfig;
use crate::svg;
use crate::CliError;

/// Largest alphabet for which every assignment is enumerated when no
/// environment restricts the achievable labels.
pub const MAX_FREE_PROPS: usize = 16;

/// A path that exists is read as a file; anything else is the formula itself.
pub fn read_spec(arg: &str) -> Result<String, CliError> {
    let p = Path::new(arg);
    if p.is_file() {
        Ok(std::fs::read_to_string(p)?.trim().to_string())
    } else {
        Ok(arg.to_string())
    }
}

pub fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Automaton plus the labels subgoals may use.
pub struct Compiled {
    pub formula: Formula,
    pub automaton: BuchiAutomaton,
    pub achievable: Vec<Assignment>,
}

impl Compiled {
    pub fn ctx(&self) -> &AlphabetContext {
        self.automaton.alphabet()
    }

    pub fn candidates(&self, states: &StateSet) -> Vec<Candidate> {
        extract_subgoals(&self.automaton, states, &UnsatSet::new(), &self.achievable).unwrap_or_default()
    }
}

/// Compiles over the environment's alphabet when one is configured,
/// otherwise over `props` (or the formula's own atoms) with every non-empty
/// assignment achievable.
pub fn compile_spec(text: &str, props: &[String], env: Option<&EnvConfig>) -> Result<Compiled, CliError> {
    if let Some(cfg) = env {
        let e = cfg.build().map_err(|e| CliError::Config(e.to_string()))?;
        let formula = parse_for_env(text, e.as_ref())?;
        let automaton = compile(&formula, e.alphabet());
        return Ok(Compiled {
            formula,
            automaton,
            achievable: e.achievable(),
        });
    }
    let mut ctx = AlphabetContext::from_names(props)?;
    let formula = parse(text, &mut ctx)?;
    if ctx.len() > MAX_FREE_PROPS {
        return Err(CliError::Spec(format!(
            "{} propositions without an environment; at most {MAX_FREE_PROPS} are enumerated",
            ctx.len()
        )));
    }
    let automaton = compile(&formula, &ctx);
    let achievable = ctx.all_assignments().into_iter().filter(|a| !a.is_empty()).collect();
    Ok(Compiled {
        formula,
        automaton,
        achievable,
    })
}

pub struct CompileArgs {
    pub spec: String,
    pub props: Vec<String>,
    pub dot: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

pub fn cmd_compile(cfg: &RunConfig, args: &CompileArgs) -> Result<Value, CliError> {
    let text = read_spec(&args.spec)?;
    let c = compile_spec(&text, &args.props, cfg.env.as_ref())?;
    let b = &c.automaton;
    if let Some(p) = &args.dot {
        write_atomic(p, b.to_dot().as_bytes())?;
    }
    if let Some(p) = &args.json {
        write_json(p, &b.to_json())?;
    }
    Ok(json!({
        "spec": text,
        "propositions": c.ctx().names(),
        "states": b.num_states(),
        "initial": b.initial(),
        "accepting": b.accepting_set().iter().collect::<Vec<_>>(),
        "subgoals": candidates_json(c.ctx(), &c.candidates(&b.initial_set())),
    }))
}

/// Candidates for the tracked set `states` (the initial state by default),
/// or for each state separately with `each`.
pub fn cmd_inspect_subgoals(cfg: &RunConfig, spec: &str, props: &[String], states: Option<&[usize]>, each: bool) -> Result<Value, CliError> {
    let text = read_spec(spec)?;
    let c = compile_spec(&text, props, cfg.env.as_ref())?;
    let n = c.automaton.num_states();
    if let Some(bad) = states.into_iter().flatten().find(|&&q| q >= n) {
        return Err(CliError::Config(format!("state {bad} out of range (automaton has {n} states)")));
    }
    let sets: Vec<StateSet> = if each {
        states.map(|s| s.to_vec()).unwrap_or_else(|| (0..n).collect()).into_iter().map(StateSet::singleton).collect()
    } else {
        vec![states.map(|s| s.iter().copied().collect()).unwrap_or_else(|| c.automaton.initial_set())]
    };
    let mut out = Vec::new();
    for s in &sets {
        if let Value::Array(v) = candidates_json(c.ctx(), &c.candidates(s)) {
            out.extend(v);
        }
    }
    Ok(Value::Array(out))
}

pub fn cmd_train(cfg: &RunConfig, quiet: bool) -> Result<Value, CliError> {
    let env = cfg.training_env();
    let tcfg = cfg.trainer();
    let stderr = std::io::stderr();
    let out = train(&tcfg, &env, |l| {
        if !quiet {
            let _ = writeln!(
                stderr.lock(),
                "iter {:>5}  steps {:>9}  reward {:.3}  violation {:.3}  λ {:.3}",
                l.iter,
                l.steps,
                l.mean_reward,
                l.violation_rate,
                l.mean_lambda
            );
        }
    })?;
    let mut log = String::new();
    for l in &out.log {
        log.push_str(&serde_json::to_string(l).map_err(|e| CliError::Other(e.to_string()))?);
        log.push('\n');
    }
    write_atomic(&cfg.paths.train_log, log.as_bytes())?;
    out.checkpoint.save(&cfg.paths.checkpoint)?;
    Ok(json!({
        "checkpoint": cfg.paths.checkpoint,
        "train_log": cfg.paths.train_log,
        "iterations": out.log.len(),
        "interactions": out.checkpoint.interactions,
        "mu_subgoal": out.checkpoint.mu_subgoal,
    }))
}

/// Policy used by eval and trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ControllerKind {
    /// The trained agent from the checkpoint.
    #[default]
    Agent,
    /// Scripted shortest-path (grid) or lidar-following (zones) baseline.
    Greedy,
}

#[derive(Clone)]
pub enum AnyController {
    Agent(Box<Agent>),
    Grid(GridGreedyController),
    Lidar(LidarGreedyController),
}

impl Controller for AnyController {
    fn act(&mut self, obs: &zsltl::env::Observation, sg: &zsltl::subgoal::Subgoal) -> zsltl::env::Action {
        match self {
            AnyController::Agent(a) => a.as_mut().act(obs, sg),
            AnyController::Grid(c) => c.act(obs, sg),
            AnyController::Lidar(c) => c.act(obs, sg),
        }
    }

    fn score(&mut self, obs: &zsltl::env::Observation, sg: &zsltl::subgoal::Subgoal) -> f64 {
        match self {
            AnyController::Agent(a) => Controller::score(a.as_mut(), obs, sg),
            AnyController::Grid(c) => c.score(obs, sg),
            AnyController::Lidar(c) => c.score(obs, sg),
        }
    }
}

/// Resolved environment, controller and training statistic.
pub struct Policy {
    pub env: EnvConfig,
    pub controller: AnyController,
    pub mu_subgoal: Option<usize>,
}

/// The agent comes from the checkpoint; the environment comes from the
/// config when given, else from the checkpoint.
pub fn load_policy(cfg: &RunConfig, kind: ControllerKind) -> Result<Policy, CliError> {
    match kind {
        ControllerKind::Agent => {
            let ck = Checkpoint::load(&cfg.paths.checkpoint)
                .map_err(|e| CliError::Config(format!("{}: {e}", cfg.paths.checkpoint.display())))?;
            let env = cfg.env.clone().unwrap_or_else(|| ck.env.clone());
            Ok(Policy {
                env,
                controller: AnyController::Agent(Box::new(ck.agent)),
                mu_subgoal: ck.mu_subgoal,
            })
        }
        ControllerKind::Greedy => {
            let env = cfg.training_env();
            let controller = match env {
                EnvConfig::Letterworld(_) => AnyController::Grid(GridGreedyController),
                EnvConfig::Zonesim(_) => AnyController::Lidar(LidarGreedyController::default()),
            };
            Ok(Policy {
                env,
                controller,
                mu_subgoal: None,
            })
        }
    }
}

/// Evaluates every configured specification. Specifications are split
/// across `workers` threads; each is evaluated independently, so the report
/// does not depend on the worker count.
pub fn cmd_eval(cfg: &RunConfig, kind: ControllerKind, workers: usize) -> Result<Value, CliError> {
    if cfg.eval.specs.is_empty() {
        return Err(CliError::Config("no specifications to evaluate".into()));
    }
    let specs: Vec<String> = cfg.eval.specs.iter().map(|s| read_spec(s)).collect::<Result<_, _>>()?;
    let policy = load_policy(cfg, kind)?;
    let opts = cfg.eval_options(policy.mu_subgoal);
    let workers = workers.clamp(1, specs.len());
    let chunks: Vec<Vec<String>> = (0..workers).map(|w| specs.iter().skip(w).step_by(workers).cloned().collect()).collect();
    let results: Vec<Result<EvalReport, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                let mut ctrl = policy.controller.clone();
                let (env, opts) = (&policy.env, &opts);
                s.spawn(move || evaluate(chunk, env, &mut ctrl, opts, |_, _, _, _| {}).map_err(CliError::from))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(CliError::Other("worker panicked".into())))).collect()
    });
    let mut by_worker = Vec::new();
    for r in results {
        by_worker.push(r?.specs.into_iter());
    }
    let mut reports: Vec<SpecReport> = Vec::with_capacity(specs.len());
    for i in 0..specs.len() {
        reports.push(by_worker[i % workers].next().expect("one report per specification"));
    }
    let report = EvalReport { specs: reports };
    write_json(&cfg.paths.report, &report)?;
    serde_json::to_value(&report).map_err(|e| CliError::Other(e.to_string()))
}

pub struct TraceArgs {
    pub spec: String,
    pub episodes: usize,
    pub svg: Option<PathBuf>,
}

/// Runs episodes `0..episodes` of the first evaluation seed and writes one
/// JSONL line per step plus an `outcome` line per episode; the optional SVG
/// shows the first episode.
pub fn cmd_trace(cfg: &RunConfig, kind: ControllerKind, args: &TraceArgs) -> Result<Value, CliError> {
    let text = read_spec(&args.spec)?;
    let Policy {
        env,
        mut controller,
        mu_subgoal,
    } = load_policy(cfg, kind)?;
    let probe = env.build().map_err(|e| CliError::Config(e.to_string()))?;
    let formula = parse_for_env(&text, probe.as_ref())?;
    let b = compile(&formula, probe.alphabet());
    let horizon = env.max_steps() * cfg.eval.horizon_multiplier.max(1);
    let run = RunOptions {
        timeout: TimeoutPolicy {
            mu_subgoal,
            eps_scale: cfg.eval.eps_scale,
        }
        .threshold(horizon),
        max_steps: horizon,
        switching: cfg.eval.switching,
    };
    let seed = cfg.seed;
    let mut lines = String::new();
    let mut outcomes = Vec::new();
    let mut picture = None;
    for i in 0..args.episodes.max(1) {
        let mut e: Box<dyn Environment> = episode_env(&env, horizon, seed, i)?;
        let layout = e.layout_json();
        let start = e.state_json();
        let ep = run_episode(e.as_mut(), &b, &mut controller, &run);
        let push = |lines: &mut String, v: Value| -> Result<(), CliError> {
            lines.push_str(&serde_json::to_string(&v).map_err(|e| CliError::Other(e.to_string()))?);
            lines.push('\n');
            Ok(())
        };
        push(&mut lines, json!({"episode": i, "seed": seed, "spec": text, "layout": layout, "start": start}))?;
        for r in &ep.records {
            let mut v = serde_json::to_value(r).map_err(|e| CliError::Other(e.to_string()))?;
            v["episode"] = json!(i);
            push(&mut lines, v)?;
        }
        let outcome = json!({"episode": i, "outcome": ep.outcome, "timeouts": ep.timeouts});
        push(&mut lines, outcome.clone())?;
        outcomes.push(outcome);
        if picture.is_none() {
            let states: Vec<Value> = std::iter::once(start).chain(ep.records.iter().map(|r| r.record.state.clone())).collect();
            picture = Some(svg::render(&layout, &states));
        }
    }
    write_atomic(&cfg.paths.trace, lines.as_bytes())?;
    if let Some(p) = &args.svg {
        match picture.flatten() {
            Some(s) => write_atomic(p, s.as_bytes())?,
            None => return Err(CliError::Config("this environment has no layout to render".into())),
        }
    }
    Ok(json!({"trace": cfg.paths.trace, "episodes": outcomes}))
}
