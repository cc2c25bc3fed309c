//! Weight interpolation and the audits built on it.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{Evaluator, RewardVector};
use crate::policy::{self, WeightVector};
use crate::simplex::SimplexPoint;
use crate::{Error, Result};

/// Coordinate-wise `sum_i lambda_i * theta_i`.
///
/// At a simplex vertex the selected expert is returned unchanged, and
/// coordinates on which all experts agree are copied rather than recombined,
/// so they are reproduced bit for bit.
pub fn interpolate(experts: &[WeightVector], lambda: &SimplexPoint) -> Result<WeightVector> {
    let first = experts.first().ok_or_else(|| Error::invalid("interpolate needs at least one expert"))?;
    if experts.len() != lambda.arity() {
        return Err(Error::Arity(experts.len(), lambda.arity()));
    }
    for (i, e) in experts.iter().enumerate().skip(1) {
        if !first.is_compatible(e) {
            return Err(Error::Incompatible(alloc::format!(
                "expert {i} has architecture `{}`, expert 0 has `{}`",
                e.arch(),
                first.arch()
            )));
        }
    }
    if let Some(i) = lambda.vertex_index() {
        return Ok(experts[i].clone());
    }
    let coeffs = lambda.coeffs();
    let values = (0..first.len())
        .map(|k| {
            let v0 = first.values()[k];
            if experts.iter().all(|e| e.values()[k] == v0) {
                v0
            } else {
                experts.iter().zip(coeffs).map(|(e, c)| c * e.values()[k]).sum()
            }
        })
        .collect();
    first.with_values(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupCandidate {
    pub lambda: SimplexPoint,
    pub weights: WeightVector,
    pub eval: RewardVector,
}

impl SoupCandidate {
    pub fn scalarized(&self, pref: &SimplexPoint) -> Result<f64> {
        if pref.arity() != self.eval.len() {
            return Err(Error::Arity(self.eval.len(), pref.arity()));
        }
        Ok(pref.dot(&self.eval.values))
    }
}

/// Materializes and evaluates a single point of a sweep.
pub fn evaluate_candidate<V: Evaluator + ?Sized>(
    experts: &[WeightVector],
    evaluator: &V,
    lambda: &SimplexPoint,
    eval_episodes: usize,
    seed: u64,
) -> Result<SoupCandidate> {
    let weights = interpolate(experts, lambda)?;
    let eval = evaluator.evaluate(&weights, eval_episodes, seed)?;
    Ok(SoupCandidate { lambda: lambda.clone(), weights, eval })
}

/// Evaluates every grid point with the same episode seed schedule.
pub fn front_sweep<V: Evaluator + ?Sized>(
    experts: &[WeightVector],
    evaluator: &V,
    grid: &[SimplexPoint],
    eval_episodes: usize,
    seed: u64,
) -> Result<Vec<SoupCandidate>> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid must be nonempty"));
    }
    grid.iter().map(|l| evaluate_candidate(experts, evaluator, l, eval_episodes, seed)).collect()
}

/// Index of the candidate maximizing `sum_i pref_i * eval_i`; the lowest index
/// wins ties.
pub fn select_index(candidates: &[SoupCandidate], user_pref: &SimplexPoint) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    let mut best = 0;
    let mut best_score = candidates[0].scalarized(user_pref)?;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let s = c.scalarized(user_pref)?;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

pub fn select_coefficient<'a>(candidates: &'a [SoupCandidate], user_pref: &SimplexPoint) -> Result<&'a SoupCandidate> {
    select_index(candidates, user_pref).map(|i| &candidates[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcRow {
    /// Weight on the second expert.
    pub lambda: f64,
    /// `R_k(theta_lambda)` per reward.
    pub interpolated: Vec<f64>,
    /// `(1 - lambda) R_k(theta_1) + lambda R_k(theta_2)` per reward.
    pub linear: Vec<f64>,
    pub margin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcReport {
    pub reward_ids: Vec<String>,
    pub rows: Vec<LmcRow>,
}

impl LmcReport {
    pub fn endpoint_values(&self) -> Option<(&[f64], &[f64])> {
        let first = self.rows.iter().find(|r| r.lambda == 0.0)?;
        let last = self.rows.iter().find(|r| r.lambda == 1.0)?;
        Some((&first.interpolated, &last.interpolated))
    }

    /// Mean margin of reward `k` over `0 < lambda < 1`, or `None` without interior points.
    pub fn interior_mean_margin(&self, k: usize) -> Option<f64> {
        let interior: Vec<f64> =
            self.rows.iter().filter(|r| r.lambda > 0.0 && r.lambda < 1.0).map(|r| r.margin[k]).collect();
        if interior.is_empty() {
            None
        } else {
            Some(interior.iter().sum::<f64>() / interior.len() as f64)
        }
    }

    /// Mean of the interior margins over all rewards.
    pub fn interior_mean_margin_all(&self) -> Option<f64> {
        let per: Option<Vec<f64>> = (0..self.reward_ids.len()).map(|k| self.interior_mean_margin(k)).collect();
        let per = per?;
        if per.is_empty() {
            None
        } else {
            Some(per.iter().sum::<f64>() / per.len() as f64)
        }
    }
}

/// Compares rewards at interpolated weights with the interpolation of the
/// endpoint rewards. The endpoint evaluations are computed once and reused,
/// so margins at `lambda in {0, 1}` are exactly zero.
pub fn lmc_audit<V: Evaluator + ?Sized>(
    theta1: &WeightVector,
    theta2: &WeightVector,
    evaluator: &V,
    lambda_grid: &[f64],
    eval_episodes: usize,
    seed: u64,
) -> Result<LmcReport> {
    if !theta1.is_compatible(theta2) {
        return Err(Error::Incompatible(alloc::format!("`{}` vs `{}`", theta1.arch(), theta2.arch())));
    }
    if lambda_grid.is_empty() {
        return Err(Error::invalid("lambda grid must be nonempty"));
    }
    let e1 = evaluator.evaluate(theta1, eval_episodes, seed)?.values;
    let e2 = evaluator.evaluate(theta2, eval_episodes, seed)?.values;
    let experts = [theta1.clone(), theta2.clone()];
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let point = SimplexPoint::pair(lambda)?;
        let endpoint = lambda == 0.0 || lambda == 1.0;
        let interpolated = if lambda == 0.0 {
            e1.clone()
        } else if lambda == 1.0 {
            e2.clone()
        } else {
            evaluator.evaluate(&interpolate(&experts, &point)?, eval_episodes, seed)?.values
        };
        let linear: Vec<f64> = e1
            .iter()
            .zip(&e2)
            .enumerate()
            .map(|(k, (a, b))| {
                if endpoint {
                    interpolated[k]
                } else if a == b {
                    *a
                } else {
                    (1.0 - lambda) * a + lambda * b
                }
            })
            .collect();
        let margin = if endpoint {
            alloc::vec![0.0; linear.len()]
        } else {
            interpolated.iter().zip(&linear).map(|(r, l)| r - l).collect()
        };
        rows.push(LmcRow { lambda, interpolated, linear, margin });
    }
    Ok(LmcReport { reward_ids: evaluator.reward_ids(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblingGap {
    /// Maximum over probes.
    pub gap: f64,
    /// Euclidean distance between parameter vectors, per probe input.
    pub per_input: Vec<f64>,
}

/// Distance between the output distribution parameters of the interpolated
/// weights and the lambda-mixture of the endpoints' parameters.
pub fn ensembling_gap(theta1: &WeightVector, theta2: &WeightVector, lambda: f64, probes: &[Vec<f64>]) -> Result<EnsemblingGap> {
    if !theta1.is_compatible(theta2) {
        return Err(Error::Incompatible(alloc::format!("`{}` vs `{}`", theta1.arch(), theta2.arch())));
    }
    if probes.is_empty() {
        return Err(Error::invalid("ensembling gap needs at least one probe input"));
    }
    let mixed = interpolate(&[theta1.clone(), theta2.clone()], &SimplexPoint::pair(lambda)?)?;
    let mut per_input = Vec::with_capacity(probes.len());
    for x in probes {
        let p = policy::forward(&mixed, x)?.params();
        let p1 = policy::forward(theta1, x)?.params();
        let p2 = policy::forward(theta2, x)?.params();
        let sq: f64 = p
            .iter()
            .zip(p1.iter().zip(&p2))
            .map(|(v, (a, b))| {
                let d = v - ((1.0 - lambda) * a + lambda * b);
                d * d
            })
            .sum();
        per_input.push(libm::sqrt(sq));
    }
    let gap = per_input.iter().copied().fold(0.0, f64::max);
    Ok(EnsemblingGap { gap, per_input })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingAudit {
    /// `(scale, gap)` for every scale, including those excluded from the fit.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!("{} points", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive coordinates"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ly: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all scales are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Fits how the ensembling gap grows along `theta2 = theta1 + s * direction`.
///
/// Gaps at the level of rounding noise (relative to the parameter magnitudes)
/// count as zero and are left out of the fit.
pub fn scaling_audit(
    theta1: &WeightVector,
    direction: &[f64],
    lambda: f64,
    scales: &[f64],
    probes: &[Vec<f64>],
) -> Result<ScalingAudit> {
    if direction.len() != theta1.len() {
        return Err(Error::Shape { expected: theta1.len(), got: direction.len() });
    }
    if scales.len() < 3 {
        return Err(Error::InsufficientData(alloc::format!("need at least 3 scales, got {}", scales.len())));
    }
    if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("scales must be positive and finite"));
    }
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(0.0, f64::max);
    if hi < 10.0 * lo {
        return Err(Error::invalid("scales must span at least one decade"));
    }
    let mut points = Vec::with_capacity(scales.len());
    let mut fit = Vec::new();
    for &s in scales {
        let shifted: Vec<f64> = theta1.values().iter().zip(direction).map(|(v, u)| v + s * u).collect();
        let theta2 = theta1.with_values(shifted)?;
        let gap = ensembling_gap(theta1, &theta2, lambda, probes)?.gap;
        points.push((s, gap));
        let magnitude = theta1.values().iter().chain(theta2.values()).fold(0.0_f64, |m, v| m.max(v.abs()));
        if gap > 1e-12 * (1.0 + magnitude) {
            fit.push((s, gap));
        }
    }
    if fit.len() < 3 {
        return Err(Error::InsufficientData(alloc::format!(
            "only {} of {} gaps are nonzero",
            fit.len(),
            scales.len()
        )));
    }
    Ok(ScalingAudit { slope: log_log_slope(&fit)?, points })
}
