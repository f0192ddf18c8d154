//! Zero-shot execution of LTL specifications: automaton state-set tracking,
//! value-guided subgoal selection, timeout-based switching, outcome
//! classification and evaluation metrics.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::buchi::{compile, BuchiAutomaton, StateSet};
use crate::env::{Action, EnvConfig, EnvError, Environment, Observation, TrajectoryRecord};
use crate::ltl::{parse, Assignment, Formula, LtlError};
use crate::obs::reduce_grid;
use crate::rng::substream;
use crate::subgoal::{extract_subgoals, Candidate, Subgoal, SubgoalError, UnsatSet};
use crate::train::{signals, Agent};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Parse(#[from] LtlError),
    #[error("specification mentions propositions the environment does not label: {0:?}")]
    UnknownPropositions(Vec<String>),
    #[error("evaluation needs at least one episode and one seed")]
    Empty,
}

/// Anything that can pick actions and rate subgoals from raw observations.
pub trait Controller {
    fn act(&mut self, obs: &Observation, sg: &Subgoal) -> Action;
    /// Higher is better.
    fn score(&mut self, obs: &Observation, sg: &Subgoal) -> f64;
}

/// The trained agent acts deterministically (argmax or mean) and scores
/// subgoals by `V_r − λ·V_h`.
impl Controller for Agent {
    fn act(&mut self, obs: &Observation, sg: &Subgoal) -> Action {
        let x = self.features(obs, sg);
        self.to_action(self.mode(&x))
    }

    fn score(&mut self, obs: &Observation, sg: &Subgoal) -> f64 {
        Agent::score(self, obs, sg)
    }
}

/// Index of the best-scoring candidate; ties and NaNs resolve to the earliest
/// candidate in subgoal order.
pub fn select_subgoal(cands: &[Candidate], obs: &Observation, ctrl: &mut dyn Controller) -> usize {
    let scores: Vec<f64> = cands.iter().map(|c| ctrl.score(obs, &c.subgoal)).collect();
    argmax(&scores)
}

/// First index of the maximum; NaN never wins.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

pub const DEFAULT_EPS_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeoutPolicy {
    pub mu_subgoal: Option<usize>,
    pub eps_scale: f64,
}

impl TimeoutPolicy {
    /// `ceil((1+ε)·μ)`, or `max_steps / 4` without a training statistic.
    pub fn threshold(&self, max_steps: usize) -> usize {
        match self.mu_subgoal {
            Some(mu) => ((1.0 + self.eps_scale) * mu as f64).ceil() as usize,
            None => max_steps / 4,
        }
        .max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub timeout: usize,
    pub max_steps: usize,
    /// Timeout-based switching; disabling it keeps the agent on its subgoal.
    pub switching: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    Violation,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub steps: usize,
    pub steps_to_success: Option<usize>,
    pub accepting_visits: usize,
}

/// A subgoal abandoned after the timeout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeoutEvent {
    pub t: usize,
    pub states: Vec<usize>,
    pub alpha_plus: Assignment,
    pub attempted_steps: usize,
}

/// One executed step with the executor's bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(flatten)]
    pub record: TrajectoryRecord,
    pub subgoal: Value,
    pub automaton_states: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub outcome: Outcome,
    pub labels: Vec<Assignment>,
    /// Active subgoal at each step.
    pub subgoals: Vec<Subgoal>,
    /// `Q_c` after each step (empty on violation).
    pub states: Vec<StateSet>,
    pub timeouts: Vec<TimeoutEvent>,
    pub records: Vec<StepRecord>,
}

fn live_only(b: &BuchiAutomaton, s: StateSet) -> StateSet {
    s.iter().filter(|&q| b.is_live(q)).collect()
}

/// Runs the policy from the environment's current state (the caller resets
/// it) until success, violation, candidate exhaustion or `max_steps`.
pub fn run_episode(env: &mut dyn Environment, b: &BuchiAutomaton, ctrl: &mut dyn Controller, opts: &RunOptions) -> Episode {
    let achievable = env.achievable();
    let ctx = env.alphabet().clone();
    let mut ep = Episode {
        outcome: Outcome {
            kind: OutcomeKind::Other,
            steps: 0,
            steps_to_success: None,
            accepting_visits: 0,
        },
        labels: Vec::new(),
        subgoals: Vec::new(),
        states: Vec::new(),
        timeouts: Vec::new(),
        records: Vec::new(),
    };
    let mut qc = live_only(b, b.initial_set());
    if qc.is_empty() {
        ep.outcome.kind = OutcomeKind::Violation;
        return ep;
    }
    if qc.iter().any(|q| b.flags(q).accepting_sink) {
        ep.outcome.kind = OutcomeKind::Success;
        ep.outcome.steps_to_success = Some(0);
        return ep;
    }
    let mut unsat = UnsatSet::new();
    let mut current: Option<Candidate> = None;
    let mut timer = 0;
    let mut t = 0;
    while t < opts.max_steps {
        let obs = env.observation();
        if current.is_none() {
            match extract_subgoals(b, &qc, &unsat, &achievable) {
                Ok(cands) => {
                    let i = select_subgoal(&cands, &obs, ctrl);
                    current = Some(cands[i].clone());
                }
                Err(SubgoalError::NoSubgoals) => break,
                Err(e) => unreachable!("extraction error {e}"),
            }
        }
        let sg = current.as_ref().expect("subgoal selected").subgoal.clone();
        let action = ctrl.act(&obs, &sg);
        let res = env.step(&action);
        t += 1;
        timer += 1;
        let alpha = res.label;
        let next = live_only(b, b.step(&qc, alpha));
        let (r, h) = signals(alpha, &sg);
        ep.records.push(StepRecord {
            record: TrajectoryRecord {
                t,
                state: env.state_json(),
                action,
                label: ctx.assignment_names(alpha),
                reward: r,
                h,
            },
            subgoal: sg.to_json(&ctx),
            automaton_states: next.iter().collect(),
        });
        ep.labels.push(alpha);
        ep.subgoals.push(sg.clone());
        ep.states.push(next.clone());
        ep.outcome.steps = t;
        if next.is_empty() {
            ep.outcome.kind = OutcomeKind::Violation;
            return ep;
        }
        if next.iter().any(|q| b.is_accepting(q)) {
            ep.outcome.accepting_visits += 1;
        }
        if next.iter().any(|q| b.flags(q).accepting_sink) {
            ep.outcome.kind = OutcomeKind::Success;
            ep.outcome.steps_to_success = Some(t);
            return ep;
        }
        if next != qc {
            qc = next;
            current = None;
            timer = 0;
        } else if opts.switching && timer >= opts.timeout && !qc.iter().any(|q| b.is_accepting(q)) {
            for q in qc.iter() {
                unsat.insert(q, sg.alpha_plus);
            }
            ep.timeouts.push(TimeoutEvent {
                t,
                states: qc.iter().collect(),
                alpha_plus: sg.alpha_plus,
                attempted_steps: timer,
            });
            current = None;
            timer = 0;
        }
        if res.done {
            break;
        }
    }
    ep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceClass {
    Satisfied,
    Violated,
    Undetermined,
}

impl TraceClass {
    pub fn matches(self, kind: OutcomeKind) -> bool {
        matches!(
            (self, kind),
            (TraceClass::Satisfied, OutcomeKind::Success)
                | (TraceClass::Violated, OutcomeKind::Violation)
                | (TraceClass::Undetermined, OutcomeKind::Other)
        )
    }
}

/// Offline classification of a finite label trace: satisfied once some run
/// reaches an accepting sink, violated once no run can still be accepted.
pub fn classify_trace_oracle(b: &BuchiAutomaton, trace: &[Assignment]) -> TraceClass {
    let mut runs = b.initial_set();
    let check = |runs: &StateSet| {
        if runs.iter().all(|q| !b.flags(q).live) {
            Some(TraceClass::Violated)
        } else if runs.iter().any(|q| b.flags(q).accepting_sink) {
            Some(TraceClass::Satisfied)
        } else {
            None
        }
    };
    if let Some(c) = check(&runs) {
        return c;
    }
    for &a in trace {
        runs = b.step(&runs, a);
        if let Some(c) = check(&runs) {
            return c;
        }
    }
    TraceClass::Undetermined
}

/// The `α` of a top-level `F G α` conjunct with propositional `α`.
pub fn persistence_target(f: &Formula) -> Option<&Formula> {
    f.conjuncts().into_iter().find_map(|c| match c {
        Formula::Eventually(g) => match g.as_ref() {
            Formula::Always(a) if a.is_propositional() => Some(a.as_ref()),
            _ => None,
        },
        _ => None,
    })
}

/// Consecutive steps satisfying `alpha`, counted backward from the last.
pub fn trailing_count(alpha: &Formula, labels: &[Assignment]) -> usize {
    labels.iter().rev().take_while(|&&l| alpha.holds(l)).count()
}

/// Accepting-visit count of an episode, using the backward persistence count
/// for `F G α` specifications.
pub fn accepting_count(f: &Formula, ep: &Episode) -> usize {
    match persistence_target(f) {
        Some(alpha) => trailing_count(alpha, &ep.labels),
        None => ep.outcome.accepting_visits,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub horizon_multiplier: usize,
    pub eps_scale: f64,
    pub mu_subgoal: Option<usize>,
    pub switching: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 100,
            seeds: (0..5).collect(),
            horizon_multiplier: 1,
            eps_scale: DEFAULT_EPS_SCALE,
            mu_subgoal: None,
            switching: true,
        }
    }
}

/// Per-specification metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecReport {
    pub spec: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub success_rate: f64,
    pub violation_rate: f64,
    pub other_rate: f64,
    /// Mean steps among successes.
    pub mean_steps: Option<f64>,
    /// Mean accepting visits among non-violating episodes.
    pub mean_accepting_visits: Option<f64>,
    pub horizon: usize,
    pub timeout: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub specs: Vec<SpecReport>,
}

/// Running tallies for one specification; merging is order-independent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub n: usize,
    pub success: usize,
    pub violation: usize,
    pub success_steps: usize,
    pub non_violating: usize,
    pub accepting: usize,
}

impl Tally {
    pub fn add(&mut self, kind: OutcomeKind, steps: usize, accepting: usize) {
        self.n += 1;
        match kind {
            OutcomeKind::Success => {
                self.success += 1;
                self.success_steps += steps;
            }
            OutcomeKind::Violation => self.violation += 1,
            OutcomeKind::Other => {}
        }
        if kind != OutcomeKind::Violation {
            self.non_violating += 1;
            self.accepting += accepting;
        }
    }

    pub fn merge(&mut self, o: &Tally) {
        self.n += o.n;
        self.success += o.success;
        self.violation += o.violation;
        self.success_steps += o.success_steps;
        self.non_violating += o.non_violating;
        self.accepting += o.accepting;
    }

    pub fn report(&self, spec: &str, seeds: &[u64], horizon: usize, timeout: usize) -> SpecReport {
        let n = self.n as f64;
        let other = self.n - self.success - self.violation;
        SpecReport {
            spec: spec.to_string(),
            n: self.n,
            seeds: seeds.to_vec(),
            success_rate: self.success as f64 / n,
            violation_rate: self.violation as f64 / n,
            other_rate: other as f64 / n,
            mean_steps: (self.success > 0).then(|| self.success_steps as f64 / self.success as f64),
            mean_accepting_visits: (self.non_violating > 0).then(|| self.accepting as f64 / self.non_violating as f64),
            horizon,
            timeout,
        }
    }
}

/// Parses `text` over the environment's propositions, rejecting unknown ones.
pub fn parse_for_env(text: &str, env: &dyn Environment) -> Result<Formula, ExecError> {
    let mut ctx = env.alphabet().clone();
    let f = parse(text, &mut ctx)?;
    if ctx.len() != env.alphabet().len() {
        return Err(ExecError::UnknownPropositions(ctx.names()[env.alphabet().len()..].to_vec()));
    }
    Ok(f)
}

/// Seeded environment for episode `i` of `seed`.
pub fn episode_env(env_cfg: &EnvConfig, horizon: usize, seed: u64, i: usize) -> Result<Box<dyn Environment>, ExecError> {
    let mut env = env_cfg.build()?;
    env.set_max_steps(horizon);
    env.reset(&mut substream(seed, "eval", i as u64))?;
    Ok(env)
}

/// Evaluates every specification over `seeds × episodes` freshly reset
/// layouts; the same `(seed, episode)` pair yields the same layout for all
/// specifications.
pub fn evaluate(
    specs: &[String],
    env_cfg: &EnvConfig,
    ctrl: &mut dyn Controller,
    opts: &EvalOptions,
    mut on_episode: impl FnMut(&str, u64, usize, &Episode),
) -> Result<EvalReport, ExecError> {
    if opts.episodes == 0 || opts.seeds.is_empty() {
        return Err(ExecError::Empty);
    }
    let horizon = env_cfg.max_steps() * opts.horizon_multiplier.max(1);
    let timeout = TimeoutPolicy {
        mu_subgoal: opts.mu_subgoal,
        eps_scale: opts.eps_scale,
    }
    .threshold(horizon);
    let run = RunOptions {
        timeout,
        max_steps: horizon,
        switching: opts.switching,
    };
    let probe = env_cfg.build()?;
    let mut out = Vec::new();
    for spec in specs {
        let f = parse_for_env(spec, probe.as_ref())?;
        let b = compile(&f, probe.alphabet());
        let mut tally = Tally::default();
        for &seed in &opts.seeds {
            for i in 0..opts.episodes {
                let mut env = episode_env(env_cfg, horizon, seed, i)?;
                let ep = run_episode(env.as_mut(), &b, ctrl, &run);
                tally.add(ep.outcome.kind, ep.outcome.steps, accepting_count(&f, &ep));
                on_episode(spec, seed, i, &ep);
            }
        }
        out.push(tally.report(spec, &opts.seeds, horizon, timeout));
    }
    Ok(EvalReport { specs: out })
}

/// Scripted LetterWorld controller: shortest torus path on the egocentric
/// view to a reach cell avoiding avoided cells; scores by negative distance.
#[derive(Clone, Copy, Debug, Default)]
pub struct GridGreedyController;

impl GridGreedyController {
    /// First move and length of a shortest safe path, if any.
    fn plan(obs: &Observation, sg: &Subgoal) -> Option<(usize, usize)> {
        let Observation::Grid { size: n, .. } = obs else {
            panic!("grid controller needs a grid observation");
        };
        let n = *n;
        let vals = reduce_grid(obs, sg);
        let start = (n / 2) * n + n / 2;
        let mut first = vec![usize::MAX; n * n];
        let mut dist = vec![usize::MAX; n * n];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            let (r, col) = (c / n, c % n);
            let nbrs = [((r + n - 1) % n, col), ((r + 1) % n, col), (r, (col + n - 1) % n), (r, (col + 1) % n)];
            for (m, &(nr, nc)) in nbrs.iter().enumerate() {
                let d = nr * n + nc;
                if dist[d] != usize::MAX || vals[d] < 0.0 {
                    continue;
                }
                dist[d] = dist[c] + 1;
                first[d] = if c == start { m } else { first[c] };
                if vals[d] > 0.0 {
                    return Some((first[d], dist[d]));
                }
                queue.push_back(d);
            }
        }
        None
    }
}

impl Controller for GridGreedyController {
    fn act(&mut self, obs: &Observation, sg: &Subgoal) -> Action {
        Action::Discrete(Self::plan(obs, sg).map_or(0, |(m, _)| m))
    }

    fn score(&mut self, obs: &Observation, sg: &Subgoal) -> f64 {
        Self::plan(obs, sg).map_or(f64::NEG_INFINITY, |(_, d)| -(d as f64))
    }
}

/// Scripted ZoneSim controller steering along the lidar beam with the
/// strongest reach reading while repelled by nearby avoided zones.
///
/// Its score is the closeness of the farthest required color, so a
/// conjunction of two nearby but disjoint colors looks attractive.
#[derive(Clone, Copy, Debug)]
pub struct LidarGreedyController {
    /// Avoid readings above this closeness repel.
    pub avoid_threshold: f64,
    pub avoid_gain: f64,
}

impl Default for LidarGreedyController {
    fn default() -> Self {
        Self {
            avoid_threshold: 0.8,
            avoid_gain: 8.0,
        }
    }
}

fn beam_angle(i: usize, k: usize) -> f64 {
    let a = TAU * i as f64 / k as f64;
    if a > PI {
        a - TAU
    } else {
        a
    }
}

impl Controller for LidarGreedyController {
    fn act(&mut self, obs: &Observation, sg: &Subgoal) -> Action {
        let Observation::Lidar { lidar, .. } = obs else {
            panic!("lidar controller needs a lidar observation");
        };
        let k = lidar.first().map_or(0, Vec::len);
        let pull: Vec<f64> = (0..k).map(|i| sg.alpha_plus.iter().map(|p| lidar[p][i]).sum()).collect();
        let target = argmax(&pull);
        if pull.get(target).is_none_or(|&p| p <= 0.0) {
            // Nothing in sight, possibly between beams: turn in place to scan.
            return Action::Continuous(vec![-1.0, 1.0]);
        }
        let a = beam_angle(target, k);
        let (mut x, mut y) = (a.cos(), a.sin());
        for a in &sg.avoid {
            for i in 0..k {
                let c = a.iter().map(|p| lidar[p][i]).fold(f64::INFINITY, f64::min);
                if c.is_finite() && c > self.avoid_threshold {
                    let ang = beam_angle(i, k);
                    let w = self.avoid_gain * (c - self.avoid_threshold);
                    x -= w * ang.cos();
                    y -= w * ang.sin();
                }
            }
        }
        let err = y.atan2(x);
        let steer = (2.0 * err / PI).clamp(-1.0, 1.0);
        let accel = if err.abs() < PI / 3.0 { 1.0 } else { -1.0 };
        Action::Continuous(vec![accel, steer])
    }

    fn score(&mut self, obs: &Observation, sg: &Subgoal) -> f64 {
        let Observation::Lidar { lidar, .. } = obs else {
            panic!("lidar controller needs a lidar observation");
        };
        sg.alpha_plus
            .iter()
            .map(|p| lidar[p].iter().copied().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}
