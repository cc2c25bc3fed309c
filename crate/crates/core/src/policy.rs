//! Small MLP policies over flat weight vectors.
//!
//! A policy is an [`ArchSpec`] plus one flat `Vec<f64>`. Interpolating two
//! policies is therefore plain vector arithmetic, and the network is evaluated
//! directly from the flat buffer.
//!
//! Layout of the buffer: for every affine layer (hidden layers first, then the
//! output layer) the weight matrix in row-major `[out][in]` order followed by
//! the bias `[out]`; a Gaussian head with learned log-std appends one entry per
//! action dimension.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    /// No nonlinearity. Makes a multi-layer network polynomial in its weights.
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogStd {
    Fixed(f64),
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Gaussian { action_dim: usize, log_std: LogStd },
    Categorical { vocab_size: usize },
}

/// Fixed network architecture. Two specs are interpolation compatible iff they
/// are equal field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub head: Head,
    pub activation: Activation,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        match self.head {
            Head::Gaussian { action_dim: 0, .. } | Head::Categorical { vocab_size: 0 } => {
                Err(Error::invalid("head width must be positive"))
            }
            Head::Gaussian { log_std: LogStd::Fixed(v), .. } if !v.is_finite() => {
                Err(Error::NonFinite("fixed log-std"))
            }
            _ => Ok(()),
        }
    }

    /// Width of the final affine layer (action mean or logits).
    pub fn output_dim(&self) -> usize {
        match self.head {
            Head::Gaussian { action_dim, .. } => action_dim,
            Head::Categorical { vocab_size } => vocab_size,
        }
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.obs_dim;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim()));
        dims
    }

    pub fn param_count(&self) -> usize {
        let affine: usize = self.layer_dims().iter().map(|(i, o)| (i + 1) * o).sum();
        affine + self.learned_log_std_len()
    }

    fn learned_log_std_len(&self) -> usize {
        match self.head {
            Head::Gaussian { action_dim, log_std: LogStd::Learned } => action_dim,
            _ => 0,
        }
    }

    /// Canonical `key=value` description, one pair per line. Floats use the
    /// shortest round-tripping representation.
    pub fn canonical_text(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(|h| format!("{h}")).collect();
        let mut s = format!(
            "obs_dim={}\nhidden={}\nactivation={}\n",
            self.obs_dim,
            hidden.join(","),
            self.activation.name()
        );
        match self.head {
            Head::Gaussian { action_dim, log_std } => {
                s += &format!("head=gaussian\naction_dim={action_dim}\n");
                match log_std {
                    LogStd::Fixed(v) => s += &format!("log_std=fixed:{v:?}\n"),
                    LogStd::Learned => s += "log_std=learned\n",
                }
            }
            Head::Categorical { vocab_size } => {
                s += &format!("head=categorical\nvocab_size={vocab_size}\n");
            }
        }
        s
    }

    pub fn parse_canonical(text: &str) -> Result<Self> {
        let mut obs_dim = None;
        let mut hidden = None;
        let mut activation = None;
        let mut head = None;
        let mut action_dim = None;
        let mut log_std = None;
        let mut vocab = None;
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("malformed line `{line}`")))?;
            match key {
                "obs_dim" => obs_dim = Some(parse_usize(value)?),
                "hidden" => {
                    hidden = Some(if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(parse_usize).collect::<Result<Vec<_>>>()?
                    })
                }
                "activation" => activation = Some(value.parse::<Activation>()?),
                "head" => head = Some(String::from(value)),
                "action_dim" => action_dim = Some(parse_usize(value)?),
                "vocab_size" => vocab = Some(parse_usize(value)?),
                "log_std" => {
                    log_std = Some(if value == "learned" {
                        LogStd::Learned
                    } else if let Some(v) = value.strip_prefix("fixed:") {
                        LogStd::Fixed(
                            v.parse::<f64>()
                                .map_err(|_| Error::Invalid(format!("bad log_std `{v}`")))?,
                        )
                    } else {
                        return Err(Error::Invalid(format!("bad log_std `{value}`")));
                    })
                }
                other => return Err(Error::Invalid(format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Invalid(format!("missing key `{k}`"));
        let head = match head.as_deref() {
            Some("gaussian") => Head::Gaussian {
                action_dim: action_dim.ok_or_else(|| missing("action_dim"))?,
                log_std: log_std.ok_or_else(|| missing("log_std"))?,
            },
            Some("categorical") => {
                Head::Categorical { vocab_size: vocab.ok_or_else(|| missing("vocab_size"))? }
            }
            Some(other) => return Err(Error::Invalid(format!("unknown head `{other}`"))),
            None => return Err(missing("head")),
        };
        let arch = ArchSpec {
            obs_dim: obs_dim.ok_or_else(|| missing("obs_dim"))?,
            hidden: hidden.ok_or_else(|| missing("hidden"))?,
            head,
            activation: activation.ok_or_else(|| missing("activation"))?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Invalid(format!("expected an integer, got `{s}`")))
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text().replace('\n', " "))
    }
}

/// A policy's parameters: architecture plus a flat buffer of matching length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    arch: ArchSpec,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(arch: ArchSpec, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let expected = arch.param_count();
        if values.len() != expected {
            return Err(Error::Shape { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(WeightVector { arch, values })
    }

    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        let n = arch.param_count();
        Self::new(arch, vec![0.0; n])
    }

    /// Per-layer uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    /// A learned log-std starts at the fixed value zero.
    pub fn init_uniform<R: Rng + ?Sized>(arch: ArchSpec, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut values = Vec::with_capacity(arch.param_count());
        for (fan_in, fan_out) in arch.layer_dims() {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            for _ in 0..(fan_in + 1) * fan_out {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        values.resize(arch.param_count(), 0.0);
        Self::new(arch, values)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_compatible(&self, other: &WeightVector) -> bool {
        self.arch == other.arch
    }

    /// Returns a copy with `values` replaced, checking length and finiteness.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.arch.clone(), values)
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn distance(&self, other: &WeightVector) -> f64 {
        libm::sqrt(
            self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum(),
        )
    }
}

/// Gradient with respect to a [`WeightVector`]'s values.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        GradientVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Continuous(Vec<f64>),
    Token(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
    Categorical { logits: Vec<f64> },
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

impl ActionDistribution {
    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (ActionDistribution::Gaussian { mean, log_std }, Action::Continuous(a)) => {
                if a.len() != mean.len() {
                    return Err(Error::Shape { expected: mean.len(), got: a.len() });
                }
                Ok(mean
                    .iter()
                    .zip(log_std)
                    .zip(a)
                    .map(|((m, ls), x)| {
                        let z = (x - m) * libm::exp(-ls);
                        -0.5 * z * z - ls - HALF_LN_2PI
                    })
                    .sum())
            }
            (ActionDistribution::Categorical { logits }, Action::Token(t)) => {
                if *t >= logits.len() {
                    return Err(Error::Shape { expected: logits.len(), got: *t });
                }
                Ok(logits[*t] - log_sum_exp(logits))
            }
            _ => Err(Error::invalid("action kind does not match the distribution head")),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, ls)| {
                        let eps: f64 = rng.sample(StandardNormal);
                        m + libm::exp(*ls) * eps
                    })
                    .collect(),
            ),
            ActionDistribution::Categorical { logits } => {
                // Inverse CDF with a single uniform per draw keeps the random
                // stream aligned across nearby policies.
                let probs = softmax(logits);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Action::Token(i);
                    }
                }
                Action::Token(probs.len() - 1)
            }
        }
    }

    /// Greedy action: the mean, or the most likely token (lowest index on ties).
    pub fn mode(&self) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
            ActionDistribution::Categorical { logits } => {
                let mut best = 0;
                for (i, l) in logits.iter().enumerate() {
                    if *l > logits[best] {
                        best = i;
                    }
                }
                Action::Token(best)
            }
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDistribution::Gaussian { log_std, .. } => {
                log_std.iter().map(|ls| ls + HALF_LN_2PI + 0.5).sum()
            }
            ActionDistribution::Categorical { logits } => {
                let lse = log_sum_exp(logits);
                -logits.iter().map(|l| libm::exp(l - lse) * (l - lse)).sum::<f64>()
            }
        }
    }

    /// Distribution parameters as one vector: mean then log-std, or logits.
    pub fn params(&self) -> Vec<f64> {
        match self {
            ActionDistribution::Gaussian { mean, log_std } => {
                mean.iter().chain(log_std).copied().collect()
            }
            ActionDistribution::Categorical { logits } => logits.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// Gradient of `log_prob(action)` with respect to (outputs, log-std).
    fn log_prob_output_grad(&self, action: &Action, d_out: &mut [f64], d_log_std: &mut [f64]) -> Result<()> {
        match (self, action) {
            (ActionDistribution::Gaussian { mean, log_std }, Action::Continuous(a)) => {
                if a.len() != mean.len() {
                    return Err(Error::Shape { expected: mean.len(), got: a.len() });
                }
                for k in 0..mean.len() {
                    let inv_var = libm::exp(-2.0 * log_std[k]);
                    let diff = a[k] - mean[k];
                    d_out[k] = diff * inv_var;
                    d_log_std[k] = diff * diff * inv_var - 1.0;
                }
                Ok(())
            }
            (ActionDistribution::Categorical { logits }, Action::Token(t)) => {
                if *t >= logits.len() {
                    return Err(Error::Shape { expected: logits.len(), got: *t });
                }
                let p = softmax(logits);
                for k in 0..logits.len() {
                    d_out[k] = if k == *t { 1.0 } else { 0.0 } - p[k];
                }
                Ok(())
            }
            _ => Err(Error::invalid("action kind does not match the distribution head")),
        }
    }

    /// Gradient of the entropy with respect to (outputs, log-std).
    fn entropy_output_grad(&self, d_out: &mut [f64], d_log_std: &mut [f64]) {
        match self {
            ActionDistribution::Gaussian { .. } => {
                d_out.iter_mut().for_each(|d| *d = 0.0);
                d_log_std.iter_mut().for_each(|d| *d = 1.0);
            }
            ActionDistribution::Categorical { logits } => {
                let lse = log_sum_exp(logits);
                let logp: Vec<f64> = logits.iter().map(|l| l - lse).collect();
                let h = -logp.iter().map(|lp| libm::exp(*lp) * lp).sum::<f64>();
                for k in 0..logits.len() {
                    d_out[k] = -libm::exp(logp[k]) * (logp[k] + h);
                }
            }
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum())
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| libm::exp(x - lse)).collect()
}

/// Draws an action and returns its exact log-probability.
pub fn sample_and_logprob<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> (Action, f64) {
    let action = dist.sample(rng);
    let lp = dist.log_prob(&action).expect("sampled action matches its own head");
    (action, lp)
}

/// Cached activations of one forward pass.
struct Tape {
    /// `acts[0]` is the observation, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

fn forward_tape(weights: &WeightVector, obs: &[f64]) -> Result<(ActionDistribution, Tape)> {
    let arch = &weights.arch;
    if obs.len() != arch.obs_dim {
        return Err(Error::Shape { expected: arch.obs_dim, got: obs.len() });
    }
    let dims = arch.layer_dims();
    let last = dims.len() - 1;
    let w = &weights.values;
    let mut acts = Vec::with_capacity(dims.len() + 1);
    acts.push(obs.to_vec());
    let mut off = 0;
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let input = &acts[l];
        let mat = &w[off..off + fan_in * fan_out];
        let bias = &w[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let row = &mat[o * fan_in..(o + 1) * fan_in];
            let mut z = bias[o];
            for (a, b) in row.iter().zip(input) {
                z += a * b;
            }
            out.push(if l == last { z } else { arch.activation.apply(z) });
        }
        acts.push(out);
        off += (fan_in + 1) * fan_out;
    }
    let out = acts.last().cloned().unwrap_or_default();
    let dist = match arch.head {
        Head::Gaussian { action_dim, log_std } => {
            let ls = match log_std {
                LogStd::Fixed(v) => vec![v; action_dim],
                LogStd::Learned => w[off..off + action_dim].to_vec(),
            };
            ActionDistribution::Gaussian { mean: out, log_std: ls }
        }
        Head::Categorical { .. } => ActionDistribution::Categorical { logits: out },
    };
    if !dist.is_finite() {
        return Err(Error::NonFinite("policy output"));
    }
    Ok((dist, Tape { acts }))
}

/// Backpropagates `(d_out, d_log_std)` and accumulates `scale * grad` into `grad`.
fn backward(weights: &WeightVector, tape: &Tape, d_out: &[f64], d_log_std: &[f64], scale: f64, grad: &mut [f64]) {
    let arch = &weights.arch;
    let dims = arch.layer_dims();
    let w = &weights.values;
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &(i, o) in &dims {
        offsets.push(off);
        off += (i + 1) * o;
    }
    if let Head::Gaussian { log_std: LogStd::Learned, action_dim } = arch.head {
        for k in 0..action_dim {
            grad[off + k] += scale * d_log_std[k];
        }
    }
    let mut delta: Vec<f64> = d_out.to_vec();
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let base = offsets[l];
        let input = &tape.acts[l];
        for o in 0..fan_out {
            let d = delta[o] * scale;
            if d != 0.0 {
                let row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            grad[base + fan_in * fan_out + o] += d;
        }
        if l == 0 {
            break;
        }
        let mat = &w[base..base + fan_in * fan_out];
        let mut prev = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d != 0.0 {
                for (p, a) in prev.iter_mut().zip(&mat[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * a;
                }
            }
        }
        for (p, y) in prev.iter_mut().zip(&tape.acts[l]) {
            *p *= arch.activation.derivative_from_output(*y);
        }
        delta = prev;
    }
}

pub fn forward(weights: &WeightVector, obs: &[f64]) -> Result<ActionDistribution> {
    forward_tape(weights, obs).map(|(d, _)| d)
}

/// Exact gradient of `log pi(action | obs)` with respect to every weight.
pub fn logprob_gradient(weights: &WeightVector, obs: &[f64], action: &Action) -> Result<GradientVector> {
    let mut g = GradientVector::zeros(weights.len());
    accumulate_step_gradient(weights, obs, action, 1.0, 0.0, &mut g.0)?;
    Ok(g)
}

/// Adds `logp_scale * grad log pi(a|o) + entropy_scale * grad H(pi(.|o))` into
/// `grad`. Returns the log-probability of `action`.
pub fn accumulate_step_gradient(
    weights: &WeightVector,
    obs: &[f64],
    action: &Action,
    logp_scale: f64,
    entropy_scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let (dist, tape) = forward_tape(weights, obs)?;
    let n_out = weights.arch.output_dim();
    let n_ls = match weights.arch.head {
        Head::Gaussian { action_dim, .. } => action_dim,
        Head::Categorical { .. } => 0,
    };
    let mut d_out = vec![0.0; n_out];
    let mut d_ls = vec![0.0; n_ls];
    dist.log_prob_output_grad(action, &mut d_out, &mut d_ls)?;
    let logp = dist.log_prob(action)?;
    if entropy_scale != 0.0 {
        let mut e_out = vec![0.0; n_out];
        let mut e_ls = vec![0.0; n_ls];
        dist.entropy_output_grad(&mut e_out, &mut e_ls);
        for (d, e) in d_out.iter_mut().zip(&e_out) {
            *d = logp_scale * *d + entropy_scale * e;
        }
        for (d, e) in d_ls.iter_mut().zip(&e_ls) {
            *d = logp_scale * *d + entropy_scale * e;
        }
        backward(weights, &tape, &d_out, &d_ls, 1.0, grad);
    } else {
        backward(weights, &tape, &d_out, &d_ls, logp_scale, grad);
    }
    Ok(logp)
}

/// Gradient of the policy entropy at `obs`.
pub fn entropy_gradient(weights: &WeightVector, obs: &[f64]) -> Result<GradientVector> {
    let (dist, tape) = forward_tape(weights, obs)?;
    let n_out = weights.arch.output_dim();
    let n_ls = match weights.arch.head {
        Head::Gaussian { action_dim, .. } => action_dim,
        Head::Categorical { .. } => 0,
    };
    let mut d_out = vec![0.0; n_out];
    let mut d_ls = vec![0.0; n_ls];
    dist.entropy_output_grad(&mut d_out, &mut d_ls);
    let mut g = GradientVector::zeros(weights.len());
    backward(weights, &tape, &d_out, &d_ls, 1.0, &mut g.0);
    Ok(g)
}
