//! Small tanh MLPs with exact reverse-mode gradients, output heads, action
//! distributions and Adam.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("input has {found} features, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter vector has {found} entries, spec needs {expected}")]
    ParamCount { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Categorical { n: usize },
    DiagGaussian { n: usize },
    Scalar,
    /// Softplus output, always `≥ 0`.
    NonNegScalar,
}

impl Head {
    pub fn output_dim(self) -> usize {
        match self {
            Head::Categorical { n } | Head::DiagGaussian { n } => n,
            Head::Scalar | Head::NonNegScalar => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub head: Head,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], head: Head) -> Self {
        Self {
            input,
            hidden: hidden.to_vec(),
            head,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend(&self.hidden);
        w.push(self.head.output_dim());
        w
    }

    /// `(weight offset, bias offset, fan_in, fan_out)` per layer.
    fn layers(&self) -> Vec<(usize, usize, usize, usize)> {
        let w = self.widths();
        let mut off = 0;
        w.windows(2)
            .map(|p| {
                let (i, o) = (p[0], p[1]);
                let layer = (off, off + i * o, i, o);
                off += i * o + o;
                layer
            })
            .collect()
    }

    fn log_std_offset(&self) -> usize {
        self.layers().last().map_or(0, |&(_, b, _, o)| b + o)
    }

    pub fn num_params(&self) -> usize {
        let extra = match self.head {
            Head::DiagGaussian { n } => n,
            _ => 0,
        };
        self.log_std_offset() + extra
    }
}

pub const HIDDEN_GAIN: f64 = 1.0;
pub const POLICY_OUTPUT_GAIN: f64 = 0.01;
pub const INITIAL_LOG_STD: f64 = -0.5;

/// A `rows × cols` matrix with orthonormal rows or columns, scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> Array2<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut q = Array2::<f64>::zeros((long, short));
    for j in 0..short {
        loop {
            let mut v: Array1<f64> = (0..long).map(|_| StandardNormal.sample(rng)).collect();
            for k in 0..j {
                let qk = q.column(k);
                let proj = v.dot(&qk);
                v.scaled_add(-proj, &qk);
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                q.column_mut(j).assign(&(v / norm));
                break;
            }
        }
    }
    let w = if rows >= cols { q } else { q.reversed_axes() };
    w * gain
}

/// Intermediate values kept from a batch forward pass.
pub struct ForwardCache {
    /// Layer inputs: the network input followed by each hidden activation.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of the output layer.
    pre_out: Array2<f64>,
}

/// A feed-forward network: flat parameters laid out per layer as the weight
/// matrix (`fan_in × fan_out`, row-major) followed by the bias, then the
/// Gaussian log-std vector for [`Head::DiagGaussian`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        let params = vec![0.0; spec.num_params()];
        Self { spec, params }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self, NnError> {
        if params.len() != spec.num_params() {
            return Err(NnError::ParamCount {
                expected: spec.num_params(),
                found: params.len(),
            });
        }
        Ok(Self { spec, params })
    }

    /// Orthogonal weights, zero biases; the output layer uses `output_gain`.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R, output_gain: f64) -> Self {
        let mut m = Self::zeros(spec);
        let layers = m.spec.layers();
        let last = layers.len() - 1;
        for (l, &(w, _, i, o)) in layers.iter().enumerate() {
            let gain = if l == last { output_gain } else { HIDDEN_GAIN };
            let mat = orthogonal(rng, i, o, gain);
            m.params[w..w + i * o].copy_from_slice(mat.as_standard_layout().as_slice().expect("contiguous"));
        }
        if let Head::DiagGaussian { n } = m.spec.head {
            let off = m.spec.log_std_offset();
            m.params[off..off + n].fill(INITIAL_LOG_STD);
        }
        m
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn weight(&self, off: usize, i: usize, o: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((i, o), &self.params[off..off + i * o]).expect("layer shape")
    }

    fn bias(&self, off: usize, o: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[off..off + o])
    }

    pub fn log_std(&self) -> &[f64] {
        match self.spec.head {
            Head::DiagGaussian { n } => {
                let off = self.spec.log_std_offset();
                &self.params[off..off + n]
            }
            _ => &[],
        }
    }

    /// Head outputs for a batch (`batch × input`): logits, Gaussian means, or
    /// the scalar (softplus-transformed for [`Head::NonNegScalar`]).
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NnError> {
        if x.ncols() != self.spec.input {
            return Err(NnError::DimensionMismatch {
                expected: self.spec.input,
                found: x.ncols(),
            });
        }
        let layers = self.spec.layers();
        let mut inputs = vec![x.clone()];
        let mut pre_out = Array2::zeros((0, 0));
        for (l, &(w, b, i, o)) in layers.iter().enumerate() {
            let z = inputs[l].dot(&self.weight(w, i, o)) + &self.bias(b, o);
            if l + 1 == layers.len() {
                pre_out = z;
            } else {
                inputs.push(z.mapv(f64::tanh));
            }
        }
        let out = match self.spec.head {
            Head::NonNegScalar => pre_out.mapv(softplus),
            _ => pre_out.clone(),
        };
        Ok((out, ForwardCache { inputs, pre_out }))
    }

    /// Single-input convenience wrapper.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let xb = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row");
        Ok(self.forward(&xb)?.0.row(0).to_vec())
    }

    /// Gradient of `Σ d_out ⊙ out (+ d_log_std · log_std)` with respect to the
    /// flat parameters, where `out` is the head output returned by `forward`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>, d_log_std: Option<&[f64]>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = match self.spec.head {
            Head::NonNegScalar => d_out * &cache.pre_out.mapv(sigmoid),
            _ => d_out.clone(),
        };
        let layers = self.spec.layers();
        for (l, &(w, b, i, o)) in layers.iter().enumerate().rev() {
            let a_in = &cache.inputs[l];
            let dw = a_in.t().dot(&delta);
            grad[w..w + i * o].copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
            for (g, v) in grad[b..b + o].iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g = v;
            }
            if l > 0 {
                let d_in = delta.dot(&self.weight(w, i, o).t());
                delta = d_in * &a_in.mapv(|a| 1.0 - a * a);
            }
        }
        if let (Head::DiagGaussian { n }, Some(d)) = (self.spec.head, d_log_std) {
            let off = self.spec.log_std_offset();
            grad[off..off + n].copy_from_slice(d);
        }
        grad
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Action distribution read off a policy head output row.
#[derive(Clone, Copy, Debug)]
pub enum ActionDist<'a> {
    Categorical { logits: &'a [f64] },
    Gaussian { mean: &'a [f64], log_std: &'a [f64] },
}

impl ActionDist<'_> {
    /// A stochastic action (a one-element index vector for categorical) and
    /// its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let a = match self {
            ActionDist::Categorical { logits } => {
                let lp = log_softmax(logits);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = lp.len() - 1;
                for (i, l) in lp.iter().enumerate() {
                    acc += l.exp();
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                vec![pick as f64]
            }
            ActionDist::Gaussian { mean, log_std } => mean
                .iter()
                .zip(log_std.iter())
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s.exp() * z
                })
                .collect(),
        };
        let lp = self.log_prob(&a);
        (a, lp)
    }

    /// The deterministic action: argmax or the mean.
    pub fn mode(&self) -> Vec<f64> {
        match self {
            ActionDist::Categorical { logits } => {
                let mut best = 0;
                for (i, &l) in logits.iter().enumerate() {
                    if l > logits[best] {
                        best = i;
                    }
                }
                vec![best as f64]
            }
            ActionDist::Gaussian { mean, .. } => mean.to_vec(),
        }
    }

    pub fn log_prob(&self, a: &[f64]) -> f64 {
        match self {
            ActionDist::Categorical { logits } => log_softmax(logits)[a[0] as usize],
            ActionDist::Gaussian { mean, log_std } => mean
                .iter()
                .zip(log_std.iter())
                .zip(a)
                .map(|((m, s), x)| {
                    let z = (x - m) / s.exp();
                    -0.5 * z * z - s - 0.5 * LN_2PI
                })
                .sum(),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDist::Categorical { logits } => {
                let lp = log_softmax(logits);
                -lp.iter().map(|l| l.exp() * l).sum::<f64>()
            }
            ActionDist::Gaussian { log_std, .. } => log_std.iter().map(|s| s + 0.5 * (1.0 + LN_2PI)).sum(),
        }
    }

    /// `∂ log π(a) / ∂ head output` and, for Gaussians, `∂ / ∂ log_std`.
    pub fn log_prob_grad(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActionDist::Categorical { logits } => {
                let lp = log_softmax(logits);
                let g = lp
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (i == a[0] as usize) as u8 as f64 - l.exp())
                    .collect();
                (g, Vec::new())
            }
            ActionDist::Gaussian { mean, log_std } => {
                let mut gm = Vec::with_capacity(mean.len());
                let mut gs = Vec::with_capacity(mean.len());
                for ((m, s), x) in mean.iter().zip(log_std.iter()).zip(a) {
                    let var = (2.0 * s).exp();
                    gm.push((x - m) / var);
                    gs.push((x - m) * (x - m) / var - 1.0);
                }
                (gm, gs)
            }
        }
    }

    /// `∂ entropy / ∂ head output` and `∂ / ∂ log_std`.
    pub fn entropy_grad(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActionDist::Categorical { logits } => {
                let lp = log_softmax(logits);
                let h = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
                // ∂H/∂z_i = −p_i (log p_i + H)
                let g = lp.iter().map(|l| -l.exp() * (l + h)).collect();
                (g, Vec::new())
            }
            ActionDist::Gaussian { mean, log_std } => (vec![0.0; mean.len()], vec![1.0; log_std.len()]),
        }
    }
}

/// The action distribution of `policy` for one head output row.
pub fn action_dist<'a>(policy: &'a Mlp, row: &'a [f64]) -> ActionDist<'a> {
    match policy.spec.head {
        Head::Categorical { .. } => ActionDist::Categorical { logits: row },
        Head::DiagGaussian { .. } => ActionDist::Gaussian {
            mean: row,
            log_std: policy.log_std(),
        },
        h => panic!("{h:?} is not a policy head"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` to at most `max_norm`; returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
