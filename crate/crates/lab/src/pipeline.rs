//! The experiment stages, shared by the command line and the acceptance suite.

use rayon::prelude::*;
use rsoup_core::env::{Environment, RewardSubset, RewardVector, RewardWeighting};
use rsoup_core::pareto::{FrontPoint, NormalizationSpec, Provenance};
use rsoup_core::policy::{ArchSpec, WeightVector};
use rsoup_core::simplex::{self, SimplexPoint};
use rsoup_core::soup::{self, LmcReport, SoupCandidate};
use rsoup_core::trainer::{self, RunRecord, TrainConfig};
use rsoup_core::{seed, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub struct Experiment {
    pub config: ExperimentConfig,
    pub env: Box<dyn Environment>,
    pub arch: ArchSpec,
}

/// One evaluated policy on a front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub coeffs: SimplexPoint,
    pub eval: RewardVector,
    pub provenance: Provenance,
}

impl FrontRow {
    pub fn point(&self) -> FrontPoint {
        FrontPoint { rewards: self.eval.clone(), provenance: self.provenance.clone() }
    }
}

/// The selection phase for one user preference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub preference: SimplexPoint,
    pub lambda: SimplexPoint,
    pub validation_value: f64,
    pub test_value: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let env = config.build_env()?;
        let arch = config.arch_spec()?;
        env.check_arch(&arch)?;
        Ok(Experiment { config, env, arch })
    }

    pub fn n_rewards(&self) -> usize {
        self.config.rewards.len()
    }

    fn run_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig { seed: self.config.seed, ..base.clone() }
    }

    /// The fine-tuning rewards as an evaluator over just those ids.
    pub fn evaluator(&self) -> RewardSubset<'_, dyn Environment> {
        RewardSubset::new(self.env.as_ref(), self.config.rewards.clone()).expect("validated reward ids")
    }

    pub fn evaluate(&self, w: &WeightVector, seed: u64) -> Result<RewardVector> {
        use rsoup_core::env::Evaluator;
        self.evaluator().evaluate(w, self.config.eval.episodes, seed)
    }

    pub fn pretrain(&self) -> Result<RunRecord> {
        trainer::pretrain_run(self.arch.clone(), self.env.as_ref(), &self.run_config(&self.config.pretrain))
    }

    pub fn weighting(&self, coeffs: SimplexPoint) -> RewardWeighting {
        RewardWeighting::new(self.config.rewards.clone(), coeffs).expect("arity matches rewards")
    }

    /// One fine-tuning per proxy reward, all from `init`.
    pub fn experts(&self, init: &WeightVector) -> Result<Vec<RunRecord>> {
        let cfg = self.run_config(&self.config.finetune);
        self.config
            .rewards
            .par_iter()
            .map(|id| trainer::finetune(init, self.env.as_ref(), &RewardWeighting::single(id), &cfg))
            .collect()
    }

    /// Experts trained from independent fresh initializations: the pretraining
    /// schedule on reward `k`, then the fine-tuning schedule on it.
    pub fn scratch_experts(&self) -> Result<Vec<RunRecord>> {
        self.config
            .rewards
            .par_iter()
            .map(|id| {
                let weighting = RewardWeighting::single(id);
                let init_seed = seed::derive(self.config.seed, &format!("scratch:init:{id}"));
                let init = trainer::fresh_init(self.arch.clone(), init_seed)?;
                let first = TrainConfig {
                    seed: seed::derive(self.config.seed, &format!("scratch:stage1:{id}")),
                    ..self.config.pretrain.clone()
                };
                let warm = trainer::train(&init, self.env.as_ref(), &weighting, &first)?;
                let cfg = TrainConfig {
                    seed: seed::derive(self.config.seed, &format!("scratch:stage2:{id}")),
                    ..self.config.finetune.clone()
                };
                trainer::train(&warm.final_weights, self.env.as_ref(), &weighting, &cfg)
            })
            .collect()
    }

    fn simplex_grid(&self, points: usize, purpose: &str) -> Result<Vec<SimplexPoint>> {
        let n = self.n_rewards();
        if n == 2 {
            return Ok(SimplexPoint::pair_grid(points));
        }
        let mut grid: Vec<SimplexPoint> = (0..n).map(|i| SimplexPoint::vertex(n, i)).collect();
        grid.push(SimplexPoint::barycenter(n));
        let mut rng = seed::rng(seed::derive(self.config.seed, purpose));
        grid.extend(simplex::sample_simplex(n, self.config.sweep.simplex_samples, &mut rng)?);
        Ok(grid)
    }

    pub fn lambda_grid(&self) -> Result<Vec<SimplexPoint>> {
        self.simplex_grid(self.config.sweep.lambda_points, "sweep:lambda")
    }

    pub fn mu_grid(&self) -> Result<Vec<SimplexPoint>> {
        self.simplex_grid(self.config.sweep.mu_points, "sweep:mu")
    }

    /// Soup sweep over `grid`, every point scored on the same episode seeds.
    pub fn sweep(&self, experts: &[WeightVector], grid: &[SimplexPoint], episodes: usize, seed: u64) -> Result<Vec<SoupCandidate>> {
        let ev = self.evaluator();
        grid.par_iter().map(|l| soup::evaluate_candidate(experts, &ev, l, episodes, seed)).collect()
    }

    pub fn rs_rows(&self, candidates: &[SoupCandidate]) -> Vec<FrontRow> {
        candidates
            .iter()
            .map(|c| FrontRow {
                coeffs: c.lambda.clone(),
                eval: c.eval.clone(),
                provenance: match c.lambda.vertex_index() {
                    Some(i) => Provenance::Endpoint { reward_id: self.config.rewards[i].clone() },
                    None => Provenance::Rs { lambda: c.lambda.coeffs().to_vec() },
                },
            })
            .collect()
    }

    /// One independent fine-tuning per preference in `grid`.
    pub fn morl_runs(&self, init: &WeightVector, grid: &[SimplexPoint]) -> Result<Vec<RunRecord>> {
        let cfg = self.run_config(&self.config.finetune);
        grid.par_iter()
            .map(|mu| trainer::finetune(init, self.env.as_ref(), &self.weighting(mu.clone()), &cfg))
            .collect()
    }

    pub fn morl_rows(&self, runs: &[RunRecord], seed: u64) -> Result<Vec<FrontRow>> {
        runs.par_iter()
            .map(|r| {
                Ok(FrontRow {
                    coeffs: r.weighting.weights.clone(),
                    eval: self.evaluate(&r.final_weights, seed)?,
                    provenance: Provenance::Morl { mu: r.weighting.weights.coeffs().to_vec() },
                })
            })
            .collect()
    }

    pub fn lmc(&self, theta1: &WeightVector, theta2: &WeightVector) -> Result<LmcReport> {
        let grid: Vec<f64> = SimplexPoint::pair_grid(self.config.sweep.lambda_points).iter().map(|p| p.coeffs()[1]).collect();
        soup::lmc_audit(theta1, theta2, &self.evaluator(), &grid, self.config.eval.episodes, self.config.test_seed())
    }

    /// Picks a soup per preference on validation episodes and reports its test value.
    pub fn select(
        &self,
        experts: &[WeightVector],
        test_candidates: &[SoupCandidate],
        preferences: &[SimplexPoint],
    ) -> Result<Vec<Selection>> {
        let grid: Vec<SimplexPoint> = test_candidates.iter().map(|c| c.lambda.clone()).collect();
        let valid =
            self.sweep(experts, &grid, self.config.eval.selection_episodes, self.config.validation_seed())?;
        preferences
            .iter()
            .map(|pref| {
                let i = soup::select_index(&valid, pref)?;
                Ok(Selection {
                    preference: pref.clone(),
                    lambda: valid[i].lambda.clone(),
                    validation_value: valid[i].scalarized(pref)?,
                    test_value: test_candidates[i].scalarized(pref)?,
                })
            })
            .collect()
    }
}

/// Normalization with the initialization mapped to 1 and the componentwise
/// worst point of `rows` mapped to 0. Rewards whose initialization value is
/// itself the worst fall back to min-max scaling.
pub fn normalization(init: &RewardVector, rows: &[&[f64]]) -> Result<NormalizationSpec> {
    let worst = rsoup_core::pareto::floor_of(rows)?;
    let best = rsoup_core::pareto::utopia_of(rows)?;
    let top: Vec<f64> = init
        .values
        .iter()
        .zip(worst.iter().zip(&best))
        .map(|(i, (w, b))| if i > w { *i } else if b > w { *b } else { w + 1.0 })
        .collect();
    NormalizationSpec::new(init.ids.clone(), top, worst)
}
