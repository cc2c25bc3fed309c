//! Multi-reward tasks.
//!
//! Every environment reports a fixed panel of rewards per episode. The panel
//! contains the proxy rewards that pull in different directions plus the
//! reward used for pretraining.
//!
//! * [`PointMassEnv`]: 1-D point mass pushed by a clipped force, rewarded for
//!   velocity with a quadratic action penalty `R_a = sum v - a * sum clip(u)^2`
//!   at `a = 0` (risky), `a = 1` (cautious) and the pretraining coefficient.
//! * [`TokenSeqEnv`]: emit tokens for a prompt until a stop token; scored by
//!   precision and recall against a fixed reference multiset.
//! * [`BanditEnv`]: single-step multi-armed bandit for trainer sanity checks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::policy::{self, Action, ArchSpec, Head, WeightVector};
use crate::seed;
use crate::simplex::SimplexPoint;
use crate::{Error, Result};

/// Mean returns per reward id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl RewardVector {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::Arity(ids.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward vector"));
        }
        Ok(RewardVector { ids, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids.iter().position(|i| i == id).ok_or_else(|| Error::UnknownReward(id.into()))
    }

    pub fn get(&self, id: &str) -> Result<f64> {
        Ok(self.values[self.index_of(id)?])
    }

    /// The sub-vector for `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<RewardVector> {
        let values = ids.iter().map(|id| self.get(id)).collect::<Result<Vec<_>>>()?;
        Ok(RewardVector { ids: ids.to_vec(), values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub obs: Vec<f64>,
    pub action: Action,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// The episode ended on a stop action rather than the length limit.
    pub terminal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// One rollout: the trajectory and the reward panel in [`Environment::reward_ids`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub rewards: Vec<f64>,
}

pub trait Environment: Sync {
    /// Ids of the full reward panel.
    fn reward_ids(&self) -> Vec<String>;

    /// Id of the reward used for pretraining.
    fn pretrain_reward(&self) -> &str;

    fn obs_dim(&self) -> usize;

    fn check_arch(&self, arch: &ArchSpec) -> Result<()>;

    /// Per-episode context (a prompt index, or 0 for context-free tasks).
    fn sample_context(&self, rng: &mut dyn RngCore) -> usize;

    /// Runs one episode. `greedy` uses the distribution mode and draws nothing from `rng`.
    fn rollout(&self, weights: &WeightVector, context: usize, rng: &mut dyn RngCore, greedy: bool) -> Result<Episode>;

    /// Maximum trajectory length.
    fn horizon(&self) -> usize;
}

fn step_policy(weights: &WeightVector, obs: &[f64], rng: &mut dyn RngCore, greedy: bool) -> Result<(Action, f64)> {
    let dist = policy::forward(weights, obs)?;
    let action = if greedy { dist.mode() } else { dist.sample(rng) };
    let lp = dist.log_prob(&action)?;
    Ok((action, lp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassEnv {
    pub horizon: usize,
    pub dt: f64,
    pub friction: f64,
    pub action_clip: f64,
    /// Action-penalty coefficient of the pretraining reward.
    pub pretrain_alpha: f64,
    /// Observations are `(x / position_scale, v / velocity_scale)`.
    pub position_scale: f64,
    pub velocity_scale: f64,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        PointMassEnv {
            horizon: 50,
            dt: 0.1,
            friction: 0.05,
            action_clip: 1.0,
            pretrain_alpha: 0.1,
            position_scale: 10.0,
            velocity_scale: 2.0,
        }
    }
}

pub const POINTMASS_REWARDS: [&str; 3] = ["R0", "R1", "Rpre"];

impl PointMassEnv {
    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon > 0
            && self.dt > 0.0
            && (0.0..1.0).contains(&self.friction)
            && self.action_clip > 0.0
            && self.position_scale > 0.0
            && self.velocity_scale > 0.0
            && self.pretrain_alpha.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("invalid point-mass parameters"))
        }
    }

    /// One rollout from rest, with the reward panel as a named vector.
    pub fn rollout_rewards(&self, weights: &WeightVector, rng: &mut dyn RngCore, greedy: bool) -> Result<(Trajectory, RewardVector)> {
        let ep = self.rollout(weights, 0, rng, greedy)?;
        let rv = RewardVector::new(self.reward_ids(), ep.rewards)?;
        Ok((ep.trajectory, rv))
    }
}

impl Environment for PointMassEnv {
    fn reward_ids(&self) -> Vec<String> {
        POINTMASS_REWARDS.iter().map(|s| String::from(*s)).collect()
    }

    fn pretrain_reward(&self) -> &str {
        "Rpre"
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn check_arch(&self, arch: &ArchSpec) -> Result<()> {
        match arch.head {
            Head::Gaussian { action_dim: 1, .. } if arch.obs_dim == 2 => Ok(()),
            _ => Err(Error::Incompatible("point-mass needs obs_dim=2 and a 1-D Gaussian head".into())),
        }
    }

    fn sample_context(&self, _rng: &mut dyn RngCore) -> usize {
        0
    }

    fn rollout(&self, weights: &WeightVector, _context: usize, rng: &mut dyn RngCore, greedy: bool) -> Result<Episode> {
        self.check_arch(weights.arch())?;
        let (mut x, mut v) = (0.0f64, 0.0f64);
        let mut velocity_sum = 0.0;
        let mut penalty = 0.0;
        let mut steps = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let obs = vec![x / self.position_scale, v / self.velocity_scale];
            let (action, logprob) = step_policy(weights, &obs, rng, greedy)?;
            let a = match &action {
                Action::Continuous(a) => a[0],
                Action::Token(_) => unreachable!("checked Gaussian head"),
            };
            if !a.is_finite() || !logprob.is_finite() {
                return Err(Error::NonFinite("action"));
            }
            let u = a.clamp(-self.action_clip, self.action_clip);
            v = v + self.dt * u - self.friction * v;
            x += self.dt * v;
            velocity_sum += v;
            penalty += u * u;
            steps.push(Step { obs, action, logprob });
        }
        let rewards = vec![velocity_sum, velocity_sum - penalty, velocity_sum - self.pretrain_alpha * penalty];
        Ok(Episode { trajectory: Trajectory { steps, terminal: false }, rewards })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenSeqParams {
    /// Content tokens `0..vocab_size`; the stop token is `vocab_size`.
    pub vocab_size: usize,
    pub prompts: usize,
    pub reference_len: usize,
    pub max_len: usize,
}

impl Default for TokenSeqParams {
    fn default() -> Self {
        TokenSeqParams { vocab_size: 20, prompts: 8, reference_len: 6, max_len: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSeqEnv {
    pub params: TokenSeqParams,
    /// Per-prompt reference multisets, frozen at construction.
    pub references: Vec<Vec<usize>>,
}

pub const TOKENSEQ_REWARDS: [&str; 3] = ["precision", "recall", "f1"];

impl TokenSeqEnv {
    /// Draws the references from `seed`.
    pub fn new(params: TokenSeqParams, seed: u64) -> Result<Self> {
        if params.vocab_size == 0 || params.prompts == 0 || params.reference_len == 0 || params.max_len == 0 {
            return Err(Error::invalid("token-sequence parameters must be positive"));
        }
        let mut rng = seed::rng(seed::derive(seed, "tokenseq:references"));
        let references = (0..params.prompts)
            .map(|_| {
                let mut r: Vec<usize> =
                    (0..params.reference_len).map(|_| rng.random_range(0..params.vocab_size)).collect();
                r.sort_unstable();
                r
            })
            .collect();
        Ok(TokenSeqEnv { params, references })
    }

    pub fn stop_token(&self) -> usize {
        self.params.vocab_size
    }

    pub fn observation(&self, prompt: usize, position: usize) -> Vec<f64> {
        let mut obs = vec![0.0; self.params.prompts + self.params.max_len];
        obs[prompt] = 1.0;
        obs[self.params.prompts + position] = 1.0;
        obs
    }

    /// `(precision, recall)` of a generation against `reference` with multiset
    /// overlap. An empty generation scores zero on both.
    pub fn score(&self, generated: &[usize], reference: &[usize]) -> (f64, f64) {
        let overlap = multiset_overlap(generated, reference, self.params.vocab_size);
        let precision = if generated.is_empty() { 0.0 } else { overlap as f64 / generated.len() as f64 };
        let recall = overlap as f64 / reference.len() as f64;
        (precision, recall)
    }

    pub fn rollout_rewards(&self, weights: &WeightVector, rng: &mut dyn RngCore, greedy: bool) -> Result<(Trajectory, RewardVector)> {
        let prompt = self.sample_context(rng);
        let ep = self.rollout(weights, prompt, rng, greedy)?;
        let rv = RewardVector::new(self.reward_ids(), ep.rewards)?;
        Ok((ep.trajectory, rv))
    }
}

pub fn multiset_overlap(a: &[usize], b: &[usize], vocab: usize) -> usize {
    let mut counts = vec![0usize; vocab + 1];
    for &t in b {
        counts[t.min(vocab)] += 1;
    }
    let mut overlap = 0;
    for &t in a {
        let c = &mut counts[t.min(vocab)];
        if *c > 0 {
            *c -= 1;
            overlap += 1;
        }
    }
    overlap
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl Environment for TokenSeqEnv {
    fn reward_ids(&self) -> Vec<String> {
        TOKENSEQ_REWARDS.iter().map(|s| String::from(*s)).collect()
    }

    fn pretrain_reward(&self) -> &str {
        "f1"
    }

    fn obs_dim(&self) -> usize {
        self.params.prompts + self.params.max_len
    }

    fn horizon(&self) -> usize {
        self.params.max_len
    }

    fn check_arch(&self, arch: &ArchSpec) -> Result<()> {
        match arch.head {
            Head::Categorical { vocab_size } if vocab_size == self.params.vocab_size + 1 && arch.obs_dim == self.obs_dim() => Ok(()),
            _ => Err(Error::Incompatible(alloc::format!(
                "token-sequence needs obs_dim={} and a categorical head over {} tokens",
                self.obs_dim(),
                self.params.vocab_size + 1
            ))),
        }
    }

    fn sample_context(&self, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.params.prompts)
    }

    fn rollout(&self, weights: &WeightVector, prompt: usize, rng: &mut dyn RngCore, greedy: bool) -> Result<Episode> {
        self.check_arch(weights.arch())?;
        if prompt >= self.params.prompts {
            return Err(Error::invalid("prompt index out of range"));
        }
        let mut generated = Vec::with_capacity(self.params.max_len);
        let mut steps = Vec::with_capacity(self.params.max_len);
        let mut terminal = false;
        for pos in 0..self.params.max_len {
            let obs = self.observation(prompt, pos);
            let (action, logprob) = step_policy(weights, &obs, rng, greedy)?;
            let token = match action {
                Action::Token(t) => t,
                Action::Continuous(_) => unreachable!("checked categorical head"),
            };
            steps.push(Step { obs, action, logprob });
            if token == self.stop_token() {
                terminal = true;
                break;
            }
            generated.push(token);
        }
        let (p, r) = self.score(&generated, &self.references[prompt]);
        Ok(Episode { trajectory: Trajectory { steps, terminal }, rewards: vec![p, r, harmonic_mean(p, r)] })
    }
}

/// Single-step bandit with a constant observation `[1.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditEnv {
    pub arm_rewards: Vec<f64>,
}

impl Environment for BanditEnv {
    fn reward_ids(&self) -> Vec<String> {
        vec![String::from("reward")]
    }

    fn pretrain_reward(&self) -> &str {
        "reward"
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        1
    }

    fn check_arch(&self, arch: &ArchSpec) -> Result<()> {
        match arch.head {
            Head::Categorical { vocab_size } if vocab_size == self.arm_rewards.len() && arch.obs_dim == 1 => Ok(()),
            _ => Err(Error::Incompatible("bandit needs obs_dim=1 and one logit per arm".into())),
        }
    }

    fn sample_context(&self, _rng: &mut dyn RngCore) -> usize {
        0
    }

    fn rollout(&self, weights: &WeightVector, _context: usize, rng: &mut dyn RngCore, greedy: bool) -> Result<Episode> {
        self.check_arch(weights.arch())?;
        let obs = vec![1.0];
        let (action, logprob) = step_policy(weights, &obs, rng, greedy)?;
        let arm = match action {
            Action::Token(t) => t,
            Action::Continuous(_) => unreachable!(),
        };
        let r = self.arm_rewards[arm];
        Ok(Episode {
            trajectory: Trajectory { steps: vec![Step { obs, action, logprob }], terminal: true },
            rewards: vec![r],
        })
    }
}

/// Mean reward panel over `episodes` stochastic rollouts. Episode `i` uses a
/// generator seeded from `(seed, i)`, so two policies evaluated with the same
/// seed see the same episode streams.
pub fn evaluate<E: Environment + ?Sized>(env: &E, weights: &WeightVector, episodes: usize, seed: u64) -> Result<RewardVector> {
    if episodes == 0 {
        return Err(Error::invalid("evaluate needs at least one episode"));
    }
    let ids = env.reward_ids();
    let mut sums = vec![0.0; ids.len()];
    for i in 0..episodes {
        let mut rng = seed::rng(seed::derive_indexed(seed, i as u64));
        let ctx = env.sample_context(&mut rng);
        let ep = env.rollout(weights, ctx, &mut rng, false)?;
        for (s, r) in sums.iter_mut().zip(&ep.rewards) {
            *s += r;
        }
    }
    let n = episodes as f64;
    RewardVector::new(ids, sums.into_iter().map(|s| s / n).collect())
}

/// Anything that maps weights to a reward vector: an environment (by
/// Monte-Carlo evaluation) or a closed-form reward model.
pub trait Evaluator: Sync {
    fn reward_ids(&self) -> Vec<String>;
    fn evaluate(&self, weights: &WeightVector, episodes: usize, seed: u64) -> Result<RewardVector>;
}

/// Evaluates an environment and keeps only a subset of its reward panel.
pub struct RewardSubset<'a, E: ?Sized> {
    env: &'a E,
    ids: Vec<String>,
}

impl<'a, E: Environment + ?Sized> RewardSubset<'a, E> {
    pub fn new(env: &'a E, ids: Vec<String>) -> Result<Self> {
        let panel = env.reward_ids();
        for id in &ids {
            if !panel.contains(id) {
                return Err(Error::UnknownReward(id.clone()));
            }
        }
        Ok(RewardSubset { env, ids })
    }

    pub fn env(&self) -> &E {
        self.env
    }
}

impl<E: Environment + ?Sized> Evaluator for RewardSubset<'_, E> {
    fn reward_ids(&self) -> Vec<String> {
        self.ids.clone()
    }

    fn evaluate(&self, weights: &WeightVector, episodes: usize, seed: u64) -> Result<RewardVector> {
        evaluate(self.env, weights, episodes, seed)?.select(&self.ids)
    }
}

/// A weighting of named rewards, e.g. `(1 - mu) R0 + mu R1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeighting {
    pub ids: Vec<String>,
    pub weights: SimplexPoint,
}

impl RewardWeighting {
    pub fn new(ids: Vec<String>, weights: SimplexPoint) -> Result<Self> {
        if ids.len() != weights.arity() {
            return Err(Error::Arity(ids.len(), weights.arity()));
        }
        Ok(RewardWeighting { ids, weights })
    }

    pub fn single(id: &str) -> Self {
        RewardWeighting { ids: vec![String::from(id)], weights: SimplexPoint::vertex(1, 0) }
    }

    /// Resolves the weighting against a reward panel into `(panel index, weight)` pairs.
    pub fn resolve(&self, panel: &[String]) -> Result<Vec<(usize, f64)>> {
        self.ids
            .iter()
            .zip(self.weights.coeffs())
            .map(|(id, w)| {
                panel
                    .iter()
                    .position(|p| p == id)
                    .map(|i| (i, *w))
                    .ok_or_else(|| Error::UnknownReward(id.clone()))
            })
            .collect()
    }

    /// Stable label: the reward id at a vertex, otherwise the coefficients.
    pub fn label(&self) -> String {
        match self.weights.vertex_index() {
            Some(i) => self.ids[i].clone(),
            None => {
                let parts: Vec<String> = self
                    .ids
                    .iter()
                    .zip(self.weights.coeffs())
                    .map(|(id, w)| alloc::format!("{id}={w:?}"))
                    .collect();
                alloc::format!("mix:{}", parts.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Activation, LogStd};

    fn pm_arch() -> ArchSpec {
        ArchSpec {
            obs_dim: 2,
            hidden: vec![],
            head: Head::Gaussian { action_dim: 1, log_std: LogStd::Fixed(0.0) },
            activation: Activation::Tanh,
        }
    }

    /// Greedy policy emitting a constant action `c` (zero weights, bias `c`).
    fn constant_policy(c: f64) -> WeightVector {
        WeightVector::new(pm_arch(), vec![0.0, 0.0, c]).unwrap()
    }

    #[test]
    fn zero_policy_does_not_move() {
        let env = PointMassEnv::default();
        let (_, rv) = env.rollout_rewards(&constant_policy(0.0), &mut seed::rng(0), true).unwrap();
        assert_eq!(rv.get("R0").unwrap(), 0.0);
        assert_eq!(rv.get("R1").unwrap(), 0.0);
    }

    #[test]
    fn two_step_recurrence() {
        // Hand-iterated: v1 = 0.1, v2 = 0.1 + 0.1 - 0.05 * 0.1 = 0.195.
        let env = PointMassEnv { horizon: 2, ..PointMassEnv::default() };
        let (traj, rv) = env.rollout_rewards(&constant_policy(1.0), &mut seed::rng(0), true).unwrap();
        assert_eq!(traj.len(), 2);
        assert!((rv.get("R0").unwrap() - 0.295).abs() < 1e-12);
        assert!((rv.get("R1").unwrap() - (0.295 - 2.0)).abs() < 1e-12);
        assert!((rv.get("Rpre").unwrap() - (0.295 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn clipping_happens_at_the_boundary() {
        let env = PointMassEnv { horizon: 2, ..PointMassEnv::default() };
        let (traj, rv) = env.rollout_rewards(&constant_policy(5.0), &mut seed::rng(0), true).unwrap();
        assert!((rv.get("R1").unwrap() - (0.295 - 2.0)).abs() < 1e-12);
        // Log-probabilities refer to the unclipped action.
        assert_eq!(traj.steps[0].action, Action::Continuous(vec![5.0]));
    }

    #[test]
    fn penalty_gap_is_sum_of_squared_clipped_actions() {
        let env = PointMassEnv::default();
        let w = WeightVector::new(pm_arch(), vec![0.3, -0.2, 0.4]).unwrap();
        for s in 0..20 {
            let (traj, rv) = env.rollout_rewards(&w, &mut seed::rng(s), false).unwrap();
            let sq: f64 = traj
                .steps
                .iter()
                .map(|st| match &st.action {
                    Action::Continuous(a) => a[0].clamp(-1.0, 1.0).powi(2),
                    _ => unreachable!(),
                })
                .sum();
            let gap = rv.get("R0").unwrap() - rv.get("R1").unwrap();
            assert!(gap >= 0.0);
            assert!((gap - sq).abs() <= 1e-12 * (1.0 + sq));
        }
    }

    #[test]
    fn greedy_rollouts_are_deterministic_and_draw_nothing() {
        let env = PointMassEnv::default();
        let w = WeightVector::new(pm_arch(), vec![0.3, -0.2, 0.4]).unwrap();
        let mut r1 = seed::rng(1);
        let mut r2 = seed::rng(2);
        let a = env.rollout_rewards(&w, &mut r1, true).unwrap().1;
        let b = env.rollout_rewards(&w, &mut r2, true).unwrap().1;
        assert_eq!(a, b);
        assert_eq!(r1.next_u64(), seed::rng(1).next_u64());
    }

    #[test]
    fn non_finite_action_is_reported() {
        let env = PointMassEnv::default();
        let bad = ArchSpec { head: Head::Gaussian { action_dim: 1, log_std: LogStd::Fixed(800.0) }, ..pm_arch() };
        let w = WeightVector::zeros(bad).unwrap();
        assert_eq!(
            env.rollout_rewards(&w, &mut seed::rng(0), false).unwrap_err(),
            Error::NonFinite("action")
        );
    }

    fn token_env() -> TokenSeqEnv {
        TokenSeqEnv {
            params: TokenSeqParams { vocab_size: 20, prompts: 1, reference_len: 6, max_len: 10 },
            references: vec![vec![3, 3, 7, 9, 9, 12]],
        }
    }

    #[test]
    fn precision_recall_examples() {
        let env = token_env();
        let r = env.references[0].clone();
        assert_eq!(env.score(&r, &r), (1.0, 1.0));
        let (p, rc) = env.score(&[3], &r);
        assert_eq!(p, 1.0);
        assert!((rc - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(env.score(&[], &r), (0.0, 0.0));
        // Multiset: the third 3 does not count.
        let (p, rc) = env.score(&[3, 3, 3], &r);
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((rc - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn immediate_stop_gives_zero_rewards() {
        let env = token_env();
        let arch = ArchSpec {
            obs_dim: env.obs_dim(),
            hidden: vec![],
            head: Head::Categorical { vocab_size: 21 },
            activation: Activation::Tanh,
        };
        let mut vals = vec![0.0; arch.param_count()];
        // Bias of the stop logit dominates.
        let bias_off = arch.obs_dim * 21;
        vals[bias_off + 20] = 50.0;
        let w = WeightVector::new(arch, vals).unwrap();
        let (traj, rv) = env.rollout_rewards(&w, &mut seed::rng(0), true).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(traj.terminal);
        assert_eq!(rv.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn references_are_seeded_and_stop_free() {
        let a = TokenSeqEnv::new(TokenSeqParams::default(), 3).unwrap();
        let b = TokenSeqEnv::new(TokenSeqParams::default(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.references.len(), 8);
        for r in &a.references {
            assert_eq!(r.len(), 6);
            assert!(r.iter().all(|t| *t < a.stop_token()));
        }
    }

    #[test]
    fn evaluate_single_episode_and_determinism() {
        let env = PointMassEnv::default();
        let w = WeightVector::new(pm_arch(), vec![0.3, -0.2, 0.4]).unwrap();
        let one = evaluate(&env, &w, 1, 99).unwrap();
        let mut rng = seed::rng(seed::derive_indexed(99, 0));
        let (_, direct) = env.rollout_rewards(&w, &mut rng, false).unwrap();
        assert_eq!(one, direct);
        let a = evaluate(&env, &w, 50, 5).unwrap();
        let b = evaluate(&env, &w, 50, 5).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(evaluate(&env, &w, 0, 5).is_err());
    }

    #[test]
    fn weighting_labels() {
        let ids = vec![String::from("R0"), String::from("R1")];
        let v = RewardWeighting::new(ids.clone(), SimplexPoint::vertex(2, 1)).unwrap();
        assert_eq!(v.label(), "R1");
        let m = RewardWeighting::new(ids, SimplexPoint::pair(0.25).unwrap()).unwrap();
        assert_eq!(m.label(), "mix:R0=0.75,R1=0.25");
    }
}
