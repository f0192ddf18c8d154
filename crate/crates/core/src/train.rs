//! Subgoal-conditioned constrained policy optimization: rollout collection,
//! reward and reachability-cost advantages, the state-wise Lagrangian
//! objective and the training loop.

use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, ActionSpace, EnvConfig, EnvError, Environment, Observation};
use crate::ltl::Assignment;
use crate::nn::{action_dist, clip_grad_norm, Adam, Head, Mlp, MlpSpec, NnError, POLICY_OUTPUT_GAIN};
use crate::obs::{reduce, FusionMode};
use crate::rng::substream;
use crate::subgoal::{build_universe, sample_training_subgoal, ConflictMode, Subgoal, SubgoalError, SubgoalUniverse, DEFAULT_UNIVERSE_CAP};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Subgoal(#[from] SubgoalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("non-finite {what} at iteration {iter}; diagnostics: {diagnostic}")]
    NonFinite { iter: usize, what: String, diagnostic: String },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Discount; `None` uses the environment family's default.
    pub gamma: Option<f64>,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub multiplier_lr: f64,
    pub total_interactions: usize,
    pub steps_per_iter: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub max_grad_norm: f64,
    pub entropy_coef: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub conflict_mode: ConflictMode,
    /// Observation fusion; `None` picks the reduced mode for the environment.
    pub fusion: Option<FusionMode>,
    pub workers: usize,
    pub stats_window: usize,
    pub stats_min_completions: usize,
    pub universe_cap: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            lr: 3e-4,
            multiplier_lr: 1e-3,
            total_interactions: 2_000_000,
            steps_per_iter: 4096,
            minibatch: 256,
            epochs: 10,
            max_grad_norm: 0.5,
            entropy_coef: 0.0,
            actor_hidden: vec![64, 64, 64],
            critic_hidden: vec![64, 64],
            conflict_mode: ConflictMode::Equality,
            fusion: None,
            workers: 1,
            stats_window: 1000,
            stats_min_completions: 100,
            universe_cap: DEFAULT_UNIVERSE_CAP,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return bad("gamma must lie in (0, 1)");
            }
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.steps_per_iter == 0 || self.minibatch == 0 || self.epochs == 0 || self.workers == 0 {
            return bad("steps_per_iter, minibatch, epochs and workers must be positive");
        }
        if self.workers > self.steps_per_iter {
            return bad("more workers than steps per iteration");
        }
        Ok(())
    }

    pub fn gamma_for(&self, env: &EnvConfig) -> f64 {
        self.gamma.unwrap_or_else(|| env.default_gamma())
    }

    pub fn iterations(&self) -> usize {
        self.total_interactions.div_ceil(self.steps_per_iter).max(1)
    }
}

/// Reward and safety signal for a label under a subgoal: `r = 1` iff the
/// label is the reach assignment, `h = +1` iff it is avoided, else `−1`.
pub fn signals(label: Assignment, sg: &Subgoal) -> (f64, f64) {
    let r = if sg.reached(label) { 1.0 } else { 0.0 };
    let h = if sg.violated(label) { 1.0 } else { -1.0 };
    (r, h)
}

/// Steps-to-complete over a trailing window of finished subgoals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgoalStepStats {
    window: usize,
    min_count: usize,
    steps: VecDeque<usize>,
}

impl SubgoalStepStats {
    pub fn new(window: usize, min_count: usize) -> Self {
        Self {
            window: window.max(1),
            min_count,
            steps: VecDeque::new(),
        }
    }

    pub fn record(&mut self, steps: usize) {
        if self.steps.len() == self.window {
            self.steps.pop_front();
        }
        self.steps.push_back(steps);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.steps.len() >= self.min_count.max(1)
    }

    /// Window maximum, once enough completions have been seen.
    pub fn mu(&self) -> Option<usize> {
        self.is_valid().then(|| self.steps.iter().copied().max().unwrap_or(0))
    }

    /// Nearest-rank percentile `p ∈ (0, 100]` of the window.
    pub fn percentile(&self, p: f64) -> Option<usize> {
        if self.steps.is_empty() {
            return None;
        }
        let mut v: Vec<usize> = self.steps.iter().copied().collect();
        v.sort_unstable();
        let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
        Some(v[rank.min(v.len()) - 1])
    }
}

/// Policy, reward value, reachability value and multiplier networks plus the
/// observation fusion they were trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: Mlp,
    pub value_r: Mlp,
    pub value_h: Mlp,
    pub multiplier: Mlp,
    pub fusion: FusionMode,
    pub n_props: usize,
    pub action_space: ActionSpace,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        action_space: ActionSpace,
        fusion: FusionMode,
        n_props: usize,
        actor_hidden: &[usize],
        critic_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let head = match action_space {
            ActionSpace::Discrete(n) => Head::Categorical { n },
            ActionSpace::Continuous(n) => Head::DiagGaussian { n },
        };
        Self {
            policy: Mlp::init(MlpSpec::new(input, actor_hidden, head), rng, POLICY_OUTPUT_GAIN),
            value_r: Mlp::init(MlpSpec::new(input, critic_hidden, Head::Scalar), rng, 1.0),
            value_h: Mlp::init(MlpSpec::new(input, critic_hidden, Head::Scalar), rng, 1.0),
            multiplier: Mlp::init(MlpSpec::new(input, critic_hidden, Head::NonNegScalar), rng, POLICY_OUTPUT_GAIN),
            fusion,
            n_props,
            action_space,
        }
    }

    pub fn features(&self, obs: &Observation, sg: &Subgoal) -> Vec<f64> {
        reduce(obs, sg, self.fusion, self.n_props)
    }

    /// Stochastic action and its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let out = self.policy.forward_one(x).expect("feature width");
        action_dist(&self.policy, &out).sample(rng)
    }

    /// Deterministic action (argmax or mean).
    pub fn mode(&self, x: &[f64]) -> Vec<f64> {
        let out = self.policy.forward_one(x).expect("feature width");
        action_dist(&self.policy, &out).mode()
    }

    /// `(V_r, V_h, λ)` at one feature vector.
    pub fn values(&self, x: &[f64]) -> (f64, f64, f64) {
        (
            self.value_r.forward_one(x).expect("feature width")[0],
            self.value_h.forward_one(x).expect("feature width")[0],
            self.multiplier.forward_one(x).expect("feature width")[0],
        )
    }

    /// Selection score `V_r − λ·V_h`.
    pub fn score(&self, obs: &Observation, sg: &Subgoal) -> f64 {
        let (vr, vh, lam) = self.values(&self.features(obs, sg));
        vr - lam * vh
    }

    pub fn to_action(&self, a: Vec<f64>) -> Action {
        match self.action_space {
            ActionSpace::Discrete(_) => Action::Discrete(a[0] as usize),
            ActionSpace::Continuous(_) => Action::Continuous(a),
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub gamma: f64,
    pub agent: Agent,
    /// Maximum steps-to-complete at the end of training, if enough subgoals
    /// were completed.
    pub mu_subgoal: Option<usize>,
    pub interactions: usize,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, TrainError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, TrainError> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(TrainError::Config(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        write_atomic(path, self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Collected interactions. A step ends a segment when it is `terminal`
/// (subgoal satisfied or violated) or `truncated` (environment horizon or
/// end of buffer, bootstrapped from `bootstrap_r` / `bootstrap_h`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rollout {
    pub features: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub subgoal_ids: Vec<usize>,
    pub terminal: Vec<bool>,
    pub truncated: Vec<bool>,
    /// First step after an environment reset.
    pub episode_start: Vec<bool>,
    pub values_r: Vec<f64>,
    pub values_h: Vec<f64>,
    pub bootstrap_r: Vec<f64>,
    pub bootstrap_h: Vec<f64>,
    pub satisfied: usize,
    pub violated: usize,
    pub timed_out: usize,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn segment_end(&self, t: usize) -> bool {
        self.terminal[t] || self.truncated[t]
    }

    pub fn append(&mut self, mut other: Rollout) {
        self.features.append(&mut other.features);
        self.actions.append(&mut other.actions);
        self.log_probs.append(&mut other.log_probs);
        self.rewards.append(&mut other.rewards);
        self.costs.append(&mut other.costs);
        self.subgoal_ids.append(&mut other.subgoal_ids);
        self.terminal.append(&mut other.terminal);
        self.truncated.append(&mut other.truncated);
        self.episode_start.append(&mut other.episode_start);
        self.values_r.append(&mut other.values_r);
        self.values_h.append(&mut other.values_h);
        self.bootstrap_r.append(&mut other.bootstrap_r);
        self.bootstrap_h.append(&mut other.bootstrap_h);
        self.satisfied += other.satisfied;
        self.violated += other.violated;
        self.timed_out += other.timed_out;
    }
}

/// Reward advantages and returns `R̂ = A_r + V_r`, with `V := 0` after a
/// terminal step and the bootstrap value after a truncation.
pub fn gae_reward(ro: &Rollout, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ro.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_v = if ro.terminal[t] {
            0.0
        } else if ro.truncated[t] {
            ro.bootstrap_r[t]
        } else {
            ro.values_r[t + 1]
        };
        if ro.segment_end(t) {
            next_adv = 0.0;
        }
        let delta = ro.rewards[t] + gamma * next_v - ro.values_r[t];
        adv[t] = delta + gamma * lambda * next_adv;
        next_adv = adv[t];
    }
    let ret = adv.iter().zip(&ro.values_r).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Reachability-cost advantages from
/// `δ_h = (1−γ)h_t + γ·max(h_t, V_h(s_{t+1})) − V_h(s_t)` and the cost-to-go
/// target `Ĥ_t = max_{k≥t} h_k` within the segment. A terminal step takes
/// `V_h(s_{t+1}) := h_t`; a truncation bootstraps both quantities.
pub fn gae_cost(ro: &Rollout, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ro.len();
    let mut adv = vec![0.0; n];
    let mut target = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut running = f64::NEG_INFINITY;
    for t in (0..n).rev() {
        let h = ro.costs[t];
        let next_v = if ro.terminal[t] {
            h
        } else if ro.truncated[t] {
            ro.bootstrap_h[t]
        } else {
            ro.values_h[t + 1]
        };
        if ro.segment_end(t) {
            next_adv = 0.0;
            running = if ro.terminal[t] { h } else { h.max(ro.bootstrap_h[t]) };
        } else {
            running = running.max(h);
        }
        let delta = (1.0 - gamma) * h + gamma * h.max(next_v) - ro.values_h[t];
        adv[t] = delta + gamma * lambda * next_adv;
        next_adv = adv[t];
        target[t] = running;
    }
    (adv, target)
}

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)` and its derivative in `ratio`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Per-sample Lagrangian policy objective
/// `surrogate − λ·((1−γ)Ĥ + ratio·A_h)`.
pub fn lagrangian_objective(ratio: f64, adv_r: f64, adv_h: f64, lambda: f64, h_hat: f64, gamma: f64, eps: f64) -> f64 {
    clipped_surrogate(ratio, adv_r, eps).0 - lambda * safety_term(ratio, adv_h, h_hat, gamma)
}

/// `(1−γ)Ĥ + ratio·A_h`, the quantity the multiplier weighs.
pub fn safety_term(ratio: f64, adv_h: f64, h_hat: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * h_hat + ratio * adv_h
}

/// Zero-mean, unit-variance rescaling in place (no-op for fewer than two
/// samples or zero spread).
pub fn normalize(v: &mut [f64]) {
    if v.len() < 2 {
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for x in v.iter_mut() {
        *x = (*x - mean) / (sd + 1e-8);
    }
}

/// Training batch with advantages and targets attached.
pub struct Batch {
    pub features: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub adv_r: Vec<f64>,
    pub returns: Vec<f64>,
    pub adv_h: Vec<f64>,
    pub h_hat: Vec<f64>,
}

impl Batch {
    pub fn from_rollout(ro: Rollout, gamma: f64, lambda: f64) -> Self {
        let (mut adv_r, returns) = gae_reward(&ro, gamma, lambda);
        let (adv_h, h_hat) = gae_cost(&ro, gamma, lambda);
        normalize(&mut adv_r);
        Self {
            features: ro.features,
            actions: ro.actions,
            log_probs: ro.log_probs,
            adv_r,
            returns,
            adv_h,
            h_hat,
        }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub policy_objective: f64,
    pub multiplier_objective: f64,
    pub value_r_loss: f64,
    pub value_h_loss: f64,
    pub entropy: f64,
    pub mean_lambda: f64,
}

impl LossReport {
    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("policy objective", self.policy_objective),
            ("multiplier objective", self.multiplier_objective),
            ("reward value loss", self.value_r_loss),
            ("cost value loss", self.value_h_loss),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(w, _)| w)
    }
}

/// Adam states for the four networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub policy: Adam,
    pub value_r: Adam,
    pub value_h: Adam,
    pub multiplier: Adam,
}

impl Optimizers {
    pub fn new(agent: &Agent, lr: f64, multiplier_lr: f64) -> Self {
        Self {
            policy: Adam::new(agent.policy.num_params(), lr),
            value_r: Adam::new(agent.value_r.num_params(), lr),
            value_h: Adam::new(agent.value_h.num_params(), lr),
            multiplier: Adam::new(agent.multiplier.num_params(), multiplier_lr),
        }
    }
}

fn rows(batch: &Batch, idx: &[usize]) -> Array2<f64> {
    let d = batch.features[idx[0]].len();
    let mut x = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).iter_mut().zip(&batch.features[i]).for_each(|(dst, &v)| *dst = v);
    }
    x
}

fn regress(net: &mut Mlp, opt: &mut Adam, x: &Array2<f64>, targets: &[f64], max_norm: f64) -> f64 {
    let b = targets.len() as f64;
    let (out, cache) = net.forward(x).expect("feature width");
    let mut d = Array2::zeros((targets.len(), 1));
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let e = out[[i, 0]] - t;
        loss += e * e / b;
        d[[i, 0]] = 2.0 * e / b;
    }
    let mut g = net.backward(&cache, &d, None);
    clip_grad_norm(&mut g, max_norm);
    opt.step(&mut net.params, &g);
    loss
}

/// One gradient step of all four networks on the minibatch `idx`.
pub fn update_minibatch(agent: &mut Agent, opt: &mut Optimizers, batch: &Batch, idx: &[usize], cfg: &TrainerConfig, gamma: f64) -> LossReport {
    let b = idx.len() as f64;
    let x = rows(batch, idx);
    let (out, cache) = agent.policy.forward(&x).expect("feature width");
    let (lam, lam_cache) = agent.multiplier.forward(&x).expect("feature width");
    let n_out = out.ncols();
    let mut d_out = Array2::zeros((idx.len(), n_out));
    let mut d_log_std = vec![0.0; agent.policy.log_std().len()];
    let mut d_lam = Array2::zeros((idx.len(), 1));
    let mut rep = LossReport::default();
    for (r, &i) in idx.iter().enumerate() {
        let row = out.row(r).to_vec();
        let dist = action_dist(&agent.policy, &row);
        let a = &batch.actions[i];
        let ratio = (dist.log_prob(a) - batch.log_probs[i]).exp();
        let l = lam[[r, 0]];
        let (surr, d_surr) = clipped_surrogate(ratio, batch.adv_r[i], cfg.clip_eps);
        let c = safety_term(ratio, batch.adv_h[i], batch.h_hat[i], gamma);
        rep.policy_objective += (surr - l * c) / b;
        rep.multiplier_objective += -l * c / b;
        rep.mean_lambda += l / b;
        // ascend the objective: descend its negation; ∂ratio/∂logπ = ratio
        let d_logp = -(d_surr - l * batch.adv_h[i]) * ratio / b;
        let (gl, gs) = dist.log_prob_grad(a);
        let ent = dist.entropy();
        rep.entropy += ent / b;
        let (el, es) = dist.entropy_grad();
        for k in 0..n_out {
            d_out[[r, k]] = d_logp * gl[k] - cfg.entropy_coef * el[k] / b;
        }
        for k in 0..d_log_std.len() {
            d_log_std[k] += d_logp * gs[k] - cfg.entropy_coef * es[k] / b;
        }
        d_lam[[r, 0]] = -c / b;
    }
    let has_std = !d_log_std.is_empty();
    let mut g = agent.policy.backward(&cache, &d_out, has_std.then_some(&d_log_std[..]));
    clip_grad_norm(&mut g, cfg.max_grad_norm);
    opt.policy.step(&mut agent.policy.params, &g);
    let mut g = agent.multiplier.backward(&lam_cache, &d_lam, None);
    clip_grad_norm(&mut g, cfg.max_grad_norm);
    opt.multiplier.step(&mut agent.multiplier.params, &g);
    let ret: Vec<f64> = idx.iter().map(|&i| batch.returns[i]).collect();
    rep.value_r_loss = regress(&mut agent.value_r, &mut opt.value_r, &x, &ret, cfg.max_grad_norm);
    let hh: Vec<f64> = idx.iter().map(|&i| batch.h_hat[i]).collect();
    rep.value_h_loss = regress(&mut agent.value_h, &mut opt.value_h, &x, &hh, cfg.max_grad_norm);
    rep
}

/// A persistent rollout worker: the environment, its current subgoal, and
/// the random streams survive across iterations.
pub struct Collector {
    env: Box<dyn Environment>,
    env_rng: ChaCha8Rng,
    act_rng: ChaCha8Rng,
    obs: Option<Observation>,
    label: Assignment,
    subgoal: Option<usize>,
    subgoal_steps: usize,
}

impl Collector {
    pub fn new(env: Box<dyn Environment>, env_rng: ChaCha8Rng, act_rng: ChaCha8Rng) -> Self {
        Self {
            env,
            env_rng,
            act_rng,
            obs: None,
            label: Assignment::EMPTY,
            subgoal: None,
            subgoal_steps: 0,
        }
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// Exactly `n` interactions with the stochastic policy.
    pub fn collect(&mut self, agent: &Agent, universe: &[Subgoal], n: usize, stats: &mut SubgoalStepStats) -> Result<Rollout, TrainError> {
        let mut ro = Rollout::default();
        let mut just_reset = false;
        while ro.len() < n {
            if self.obs.is_none() {
                self.obs = Some(self.env.reset(&mut self.env_rng)?);
                self.label = self.env.label();
                self.subgoal = None;
                just_reset = true;
            }
            if self.subgoal.is_none() {
                match sample_training_subgoal(universe, &mut self.act_rng, Some(self.label)) {
                    Ok(s) => {
                        self.subgoal = Some(universe.binary_search(s).expect("sampled from the universe"));
                        self.subgoal_steps = 0;
                    }
                    Err(SubgoalError::NoValidSubgoal) if !just_reset => {
                        self.obs = None;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let sid = self.subgoal.expect("subgoal chosen");
            let sg = &universe[sid];
            let x = agent.features(self.obs.as_ref().expect("observation"), sg);
            let (a, lp) = agent.sample(&x, &mut self.act_rng);
            let (vr, vh, _) = agent.values(&x);
            let res = self.env.step(&agent.to_action(a.clone()));
            let (r, h) = signals(res.label, sg);
            self.subgoal_steps += 1;
            let terminal = r > 0.0 || h > 0.0;
            let last = ro.len() + 1 == n;
            let truncated = !terminal && (res.done || last);
            let (br, bh) = if truncated {
                let (br, bh, _) = agent.values(&agent.features(&res.observation, sg));
                (br, bh)
            } else {
                (0.0, 0.0)
            };
            ro.features.push(x);
            ro.actions.push(a);
            ro.log_probs.push(lp);
            ro.rewards.push(r);
            ro.costs.push(h);
            ro.subgoal_ids.push(sid);
            ro.terminal.push(terminal);
            ro.truncated.push(truncated);
            ro.episode_start.push(just_reset);
            ro.values_r.push(vr);
            ro.values_h.push(vh);
            ro.bootstrap_r.push(br);
            ro.bootstrap_h.push(bh);
            just_reset = false;
            if h > 0.0 {
                ro.violated += 1;
                self.obs = None;
                continue;
            }
            if r > 0.0 {
                ro.satisfied += 1;
                stats.record(self.subgoal_steps);
                self.subgoal = None;
            }
            if res.done {
                if r == 0.0 {
                    ro.timed_out += 1;
                }
                self.obs = None;
            } else {
                self.label = res.label;
                self.obs = Some(res.observation);
            }
        }
        Ok(ro)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub steps: usize,
    pub mean_reward: f64,
    /// Satisfied fraction of subgoal attempts that ended this iteration.
    pub subgoal_success: Option<f64>,
    pub violation_rate: f64,
    pub mean_lambda: f64,
    pub mu_subgoal: Option<usize>,
    pub policy_objective: f64,
    pub value_r_loss: f64,
    pub value_h_loss: f64,
    pub entropy: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<IterationLog>,
}

/// Feature width of the fused observation for an environment.
pub fn feature_width(env: &mut dyn Environment, fusion: FusionMode, rng: &mut dyn RngCore) -> Result<usize, TrainError> {
    let obs = env.reset(rng)?;
    let probe = Subgoal::new(Assignment::EMPTY, []);
    Ok(reduce(&obs, &probe, fusion, env.alphabet().len()).len())
}

/// Full training loop; `on_iter` sees each log line as it is produced.
pub fn train(cfg: &TrainerConfig, env_cfg: &EnvConfig, mut on_iter: impl FnMut(&IterationLog)) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let gamma = cfg.gamma_for(env_cfg);
    let mut probe_env = env_cfg.build()?;
    let n_props = probe_env.alphabet().len();
    let action_space = probe_env.action_space();
    let fusion = match cfg.fusion {
        Some(f) => f,
        None => FusionMode::reduced_for(&probe_env.reset(&mut substream(cfg.seed, "env", u64::MAX))?),
    };
    let width = feature_width(probe_env.as_mut(), fusion, &mut substream(cfg.seed, "env", u64::MAX))?;
    let universe: SubgoalUniverse = build_universe(&probe_env.achievable(), cfg.conflict_mode, cfg.universe_cap)?;
    if universe.subgoals.is_empty() {
        return Err(SubgoalError::NoSubgoals.into());
    }
    let mut agent = Agent::new(
        width,
        action_space,
        fusion,
        n_props,
        &cfg.actor_hidden,
        &cfg.critic_hidden,
        &mut substream(cfg.seed, "policy-init", 0),
    );
    let mut opt = Optimizers::new(&agent, cfg.lr, cfg.multiplier_lr);
    let mut collectors = (0..cfg.workers)
        .map(|w| -> Result<Collector, TrainError> {
            Ok(Collector::new(
                env_cfg.build()?,
                substream(cfg.seed, "env", w as u64),
                substream(cfg.seed, "rollout", w as u64),
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut stats = SubgoalStepStats::new(cfg.stats_window, cfg.stats_min_completions);
    let mut shuffle_rng = substream(cfg.seed, "rollout", u64::MAX);
    let mut log = Vec::new();
    let mut steps = 0;
    for iter in 0..cfg.iterations() {
        let ro = collect_all(&mut collectors, &agent, &universe.subgoals, cfg.steps_per_iter, &mut stats)?;
        steps += ro.len();
        let mean_reward = ro.rewards.iter().sum::<f64>() / ro.len() as f64;
        let ended = ro.satisfied + ro.violated + ro.timed_out;
        let subgoal_success = (ended > 0).then(|| ro.satisfied as f64 / ended as f64);
        let violation_rate = ro.violated as f64 / ro.len() as f64;
        let batch = Batch::from_rollout(ro, gamma, cfg.gae_lambda);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut sum = LossReport::default();
        let mut count = 0.0;
        for _ in 0..cfg.epochs {
            shuffle(&mut order, &mut shuffle_rng);
            for idx in order.chunks(cfg.minibatch) {
                let rep = update_minibatch(&mut agent, &mut opt, &batch, idx, cfg, gamma);
                if let Some(what) = rep.first_non_finite().or_else(|| agent_non_finite(&agent)) {
                    return Err(TrainError::NonFinite {
                        iter,
                        what: what.into(),
                        diagnostic: serde_json::json!({
                            "losses": format!("{rep:?}"),
                            "last_log": log.last(),
                        })
                        .to_string(),
                    });
                }
                sum.policy_objective += rep.policy_objective;
                sum.value_r_loss += rep.value_r_loss;
                sum.value_h_loss += rep.value_h_loss;
                sum.entropy += rep.entropy;
                sum.mean_lambda += rep.mean_lambda;
                count += 1.0;
            }
        }
        let line = IterationLog {
            iter,
            steps,
            mean_reward,
            subgoal_success,
            violation_rate,
            mean_lambda: sum.mean_lambda / count,
            mu_subgoal: stats.mu(),
            policy_objective: sum.policy_objective / count,
            value_r_loss: sum.value_r_loss / count,
            value_h_loss: sum.value_h_loss / count,
            entropy: sum.entropy / count,
        };
        on_iter(&line);
        log.push(line);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            version: CHECKPOINT_VERSION,
            env: env_cfg.clone(),
            trainer: cfg.clone(),
            gamma,
            agent,
            mu_subgoal: stats.mu(),
            interactions: steps,
        },
        log,
    })
}

fn agent_non_finite(agent: &Agent) -> Option<&'static str> {
    [
        ("policy parameters", &agent.policy),
        ("reward value parameters", &agent.value_r),
        ("cost value parameters", &agent.value_h),
        ("multiplier parameters", &agent.multiplier),
    ]
    .into_iter()
    .find(|(_, m)| m.params.iter().any(|p| !p.is_finite()))
    .map(|(w, _)| w)
}

fn shuffle<R: Rng + ?Sized>(v: &mut [usize], rng: &mut R) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

/// Splits `n` steps over the workers (earlier workers take the remainder)
/// and concatenates their rollouts in worker order.
fn collect_all(
    collectors: &mut [Collector],
    agent: &Agent,
    universe: &[Subgoal],
    n: usize,
    stats: &mut SubgoalStepStats,
) -> Result<Rollout, TrainError> {
    let w = collectors.len();
    let share = |i: usize| n / w + usize::from(i < n % w);
    if w == 1 {
        return collectors[0].collect(agent, universe, n, stats);
    }
    let results: Vec<Result<(Rollout, SubgoalStepStats), TrainError>> = std::thread::scope(|s| {
        let handles: Vec<_> = collectors
            .iter_mut()
            .enumerate()
            .map(|(i, c)| {
                let mut local = SubgoalStepStats::new(stats.window, stats.min_count);
                s.spawn(move || c.collect(agent, universe, share(i), &mut local).map(|r| (r, local)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("collector thread")).collect()
    });
    let mut out = Rollout::default();
    for r in results {
        let (ro, local) = r?;
        for s in local.steps {
            stats.record(s);
        }
        out.append(ro);
    }
    Ok(out)
}
