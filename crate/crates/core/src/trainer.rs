//! REINFORCE with a baseline.
//!
//! Used three ways: pretraining on the environment's pretraining reward,
//! fine-tuning one expert per proxy reward, and the scalarized multi-objective
//! baseline that trains one policy per weighting `mu`.
//!
//! Per update, with `B` episodes and scalarized returns `G_b`:
//!
//! ```text
//! g = 1/B * sum_b (G_b - baseline_b) * sum_t grad log pi(a_t | o_t)
//!   + entropy_bonus / B * sum_b sum_t grad H(pi(. | o_t))
//! ```
//!
//! The self-critical baseline is the return of the greedy rollout in the same
//! episode context; it does not depend on the sampled actions, so the
//! estimator stays unbiased.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, RewardWeighting};
use crate::policy::{self, ArchSpec, GradientVector, WeightVector};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    SelfCritical,
    BatchMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub episodes_per_update: usize,
    pub updates: usize,
    pub baseline: Baseline,
    pub seed: u64,
    pub entropy_bonus: f64,
    pub optimizer: Optimizer,
    /// Rescale the update direction to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-3,
            episodes_per_update: 16,
            updates: 300,
            baseline: Baseline::SelfCritical,
            seed: 0,
            entropy_bonus: 0.0,
            optimizer: Optimizer::Sgd,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.episodes_per_update == 0 {
            return Err(Error::invalid("episodes_per_update must be positive"));
        }
        if !self.entropy_bonus.is_finite() {
            return Err(Error::NonFinite("entropy_bonus"));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return Err(Error::invalid("max_grad_norm must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub scalarized_return: f64,
    /// Batch-mean reward panel.
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub reward_ids: Vec<String>,
    pub weighting: RewardWeighting,
    pub config: TrainConfig,
    pub history: Vec<UpdateRecord>,
    pub final_weights: WeightVector,
    /// `||theta_final - theta_init||_2`.
    pub distance_from_init: f64,
    /// Distance divided by `||theta_init||_2`.
    pub relative_distance_from_init: f64,
    /// Filled in by callers that measure time; never serialized.
    #[serde(skip)]
    pub wall_clock_secs: Option<f64>,
}

/// Summary of one batch used for a gradient estimate.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub scalarized_return: f64,
    pub rewards: Vec<f64>,
}

fn scalarize(terms: &[(usize, f64)], panel: &[f64]) -> f64 {
    terms.iter().map(|(i, w)| w * panel[*i]).sum()
}

/// One Monte-Carlo policy-gradient estimate from a fresh batch drawn from `rng`.
pub fn gradient_estimate<E: Environment + ?Sized>(
    weights: &WeightVector,
    env: &E,
    weighting: &RewardWeighting,
    baseline: Baseline,
    episodes: usize,
    entropy_bonus: f64,
    rng: &mut dyn RngCore,
) -> Result<(GradientVector, BatchStats)> {
    if episodes == 0 {
        return Err(Error::invalid("a batch needs at least one episode"));
    }
    let panel_ids = env.reward_ids();
    let terms = weighting.resolve(&panel_ids)?;
    let mut batch = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let ctx = env.sample_context(rng);
        let ep = env.rollout(weights, ctx, rng, false)?;
        batch.push((ctx, ep));
    }
    let returns: Vec<f64> = batch.iter().map(|(_, ep)| scalarize(&terms, &ep.rewards)).collect();
    let baselines: Vec<f64> = match baseline {
        Baseline::BatchMean => {
            let m = returns.iter().sum::<f64>() / episodes as f64;
            vec![m; episodes]
        }
        Baseline::SelfCritical => {
            let mut greedy: BTreeMap<usize, f64> = BTreeMap::new();
            let mut out = Vec::with_capacity(episodes);
            for (ctx, _) in &batch {
                let b = match greedy.get(ctx) {
                    Some(b) => *b,
                    None => {
                        let ep = env.rollout(weights, *ctx, rng, true)?;
                        let b = scalarize(&terms, &ep.rewards);
                        greedy.insert(*ctx, b);
                        b
                    }
                };
                out.push(b);
            }
            out
        }
    };
    let n = episodes as f64;
    let mut grad = GradientVector::zeros(weights.len());
    for (((_, ep), g), b) in batch.iter().zip(&returns).zip(&baselines) {
        let adv = (g - b) / n;
        for step in &ep.trajectory.steps {
            policy::accumulate_step_gradient(weights, &step.obs, &step.action, adv, entropy_bonus / n, &mut grad.0)?;
        }
    }
    let mut rewards = vec![0.0; panel_ids.len()];
    for (_, ep) in &batch {
        for (s, r) in rewards.iter_mut().zip(&ep.rewards) {
            *s += r / n;
        }
    }
    let stats = BatchStats { scalarized_return: returns.iter().sum::<f64>() / n, rewards };
    Ok((grad, stats))
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Runs `config.updates` gradient-ascent steps on the `weighting` of the
/// environment's rewards, starting from `init`.
pub fn train<E: Environment + ?Sized>(
    init: &WeightVector,
    env: &E,
    weighting: &RewardWeighting,
    config: &TrainConfig,
) -> Result<RunRecord> {
    config.validate()?;
    env.check_arch(init.arch())?;
    let panel_ids = env.reward_ids();
    weighting.resolve(&panel_ids)?;
    let mut rng = seed::rng(config.seed);
    let mut values = init.values().to_vec();
    let mut current = init.clone();
    let mut history = Vec::with_capacity(config.updates);
    let mut adam = match config.optimizer {
        Optimizer::Adam { .. } => Some(AdamState { m: vec![0.0; values.len()], v: vec![0.0; values.len()], t: 0 }),
        Optimizer::Sgd => None,
    };
    for update in 0..config.updates {
        let diverged = |reason: String| Error::Divergence { update, reason };
        let (mut grad, stats) = gradient_estimate(
            &current,
            env,
            weighting,
            config.baseline,
            config.episodes_per_update,
            config.entropy_bonus,
            &mut rng,
        )
        .map_err(|e| match e {
            Error::NonFinite(what) => diverged(String::from(what)),
            other => other,
        })?;
        if !stats.scalarized_return.is_finite() || grad.0.iter().any(|g| !g.is_finite()) {
            return Err(diverged("non-finite loss or gradient".into()));
        }
        if let Some(max) = config.max_grad_norm {
            let norm = libm::sqrt(grad.0.iter().map(|g| g * g).sum());
            if norm > max {
                grad.0.iter_mut().for_each(|g| *g *= max / norm);
            }
        }
        match (&mut adam, config.optimizer) {
            (Some(st), Optimizer::Adam { beta1, beta2, epsilon }) => {
                st.t += 1;
                let c1 = 1.0 - libm::pow(beta1, st.t as f64);
                let c2 = 1.0 - libm::pow(beta2, st.t as f64);
                for k in 0..values.len() {
                    let g = grad.0[k];
                    st.m[k] = beta1 * st.m[k] + (1.0 - beta1) * g;
                    st.v[k] = beta2 * st.v[k] + (1.0 - beta2) * g * g;
                    let mhat = st.m[k] / c1;
                    let vhat = st.v[k] / c2;
                    values[k] += config.learning_rate * mhat / (libm::sqrt(vhat) + epsilon);
                }
            }
            _ => {
                for (v, g) in values.iter_mut().zip(&grad.0) {
                    *v += config.learning_rate * g;
                }
            }
        }
        current = current.with_values(values.clone()).map_err(|_| diverged("non-finite weights".into()))?;
        history.push(UpdateRecord { update, scalarized_return: stats.scalarized_return, rewards: stats.rewards });
    }
    let distance = current.distance(init);
    let init_norm = init.l2_norm();
    Ok(RunRecord {
        reward_ids: panel_ids,
        weighting: weighting.clone(),
        config: config.clone(),
        history,
        final_weights: current,
        distance_from_init: distance,
        relative_distance_from_init: if init_norm > 0.0 { distance / init_norm } else { f64::INFINITY },
        wall_clock_secs: None,
    })
}

/// The seeded fresh initialization used by [`pretrain`].
pub fn fresh_init(arch: ArchSpec, base_seed: u64) -> Result<WeightVector> {
    WeightVector::init_uniform(arch, &mut seed::rng(seed::derive(base_seed, "init")))
}

/// Trains a fresh initialization on the environment's pretraining reward.
pub fn pretrain_run<E: Environment + ?Sized>(arch: ArchSpec, env: &E, config: &TrainConfig) -> Result<RunRecord> {
    let init = fresh_init(arch, config.seed)?;
    let weighting = RewardWeighting::single(env.pretrain_reward());
    let cfg = TrainConfig { seed: seed::derive(config.seed, "pretrain"), ..config.clone() };
    train(&init, env, &weighting, &cfg)
}

pub fn pretrain<E: Environment + ?Sized>(arch: ArchSpec, env: &E, config: &TrainConfig) -> Result<WeightVector> {
    pretrain_run(arch, env, config).map(|r| r.final_weights)
}

/// Seed of the fine-tuning run for `weighting` under experiment seed `base`.
/// A vertex weighting shares its seed with the expert for that reward.
pub fn run_seed(base: u64, weighting: &RewardWeighting) -> u64 {
    seed::derive(base, &alloc::format!("finetune:{}", weighting.label()))
}

/// [`train`] with the run seed derived from `config.seed` and the weighting.
pub fn finetune<E: Environment + ?Sized>(
    init: &WeightVector,
    env: &E,
    weighting: &RewardWeighting,
    config: &TrainConfig,
) -> Result<RunRecord> {
    let cfg = TrainConfig { seed: run_seed(config.seed, weighting), ..config.clone() };
    train(init, env, weighting, &cfg)
}

/// One independent fine-tuning per weighting, all from `init`, in grid order.
pub fn morl_sweep<E: Environment + ?Sized>(
    init: &WeightVector,
    env: &E,
    mu_grid: &[RewardWeighting],
    config: &TrainConfig,
) -> Result<Vec<RunRecord>> {
    if mu_grid.is_empty() {
        return Err(Error::invalid("mu grid must be nonempty"));
    }
    mu_grid.iter().map(|mu| finetune(init, env, mu, config)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BanditEnv, RewardWeighting};
    use crate::policy::{Activation, Head};

    fn bandit_arch() -> ArchSpec {
        ArchSpec { obs_dim: 1, hidden: vec![], head: Head::Categorical { vocab_size: 2 }, activation: Activation::Tanh }
    }

    #[test]
    fn zero_updates_is_identity() {
        let env = BanditEnv { arm_rewards: vec![0.0, 1.0] };
        let init = fresh_init(bandit_arch(), 3).unwrap();
        let cfg = TrainConfig { updates: 0, ..TrainConfig::default() };
        let rec = train(&init, &env, &RewardWeighting::single("reward"), &cfg).unwrap();
        assert_eq!(rec.final_weights, init);
        assert!(rec.history.is_empty());
        assert_eq!(pretrain(bandit_arch(), &env, &cfg).unwrap(), fresh_init(bandit_arch(), 0).unwrap());
    }

    #[test]
    fn history_length_matches_updates() {
        let env = BanditEnv { arm_rewards: vec![0.0, 1.0] };
        let init = fresh_init(bandit_arch(), 3).unwrap();
        let cfg = TrainConfig { updates: 7, ..TrainConfig::default() };
        let rec = train(&init, &env, &RewardWeighting::single("reward"), &cfg).unwrap();
        assert_eq!(rec.history.len(), 7);
        assert_eq!(rec.history[6].update, 6);
    }

    #[test]
    fn unknown_reward_is_rejected() {
        let env = BanditEnv { arm_rewards: vec![0.0, 1.0] };
        let init = fresh_init(bandit_arch(), 3).unwrap();
        let err = train(&init, &env, &RewardWeighting::single("nope"), &TrainConfig::default()).unwrap_err();
        assert_eq!(err, Error::UnknownReward("nope".into()));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { episodes_per_update: 0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn adam_also_learns_the_bandit() {
        let env = BanditEnv { arm_rewards: vec![0.0, 1.0] };
        let init = WeightVector::zeros(bandit_arch()).unwrap();
        let cfg = TrainConfig { updates: 200, learning_rate: 0.05, optimizer: Optimizer::adam(), ..TrainConfig::default() };
        let rec = train(&init, &env, &RewardWeighting::single("reward"), &cfg).unwrap();
        let p = policy::softmax(&policy::forward(&rec.final_weights, &[1.0]).unwrap().params());
        assert!(p[1] > 0.95, "p = {p:?}");
    }

    #[test]
    fn divergence_carries_update_index() {
        let env = BanditEnv { arm_rewards: vec![0.0, 1e300] };
        let init = WeightVector::zeros(bandit_arch()).unwrap();
        let cfg = TrainConfig { updates: 50, learning_rate: 1e10, baseline: Baseline::BatchMean, ..TrainConfig::default() };
        match train(&init, &env, &RewardWeighting::single("reward"), &cfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
