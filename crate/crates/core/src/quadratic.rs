//! Interpolation between optima of diagonal quadratic rewards.
//!
//! `R_i(theta) = peak_i - sum_j eta_i^j (theta^j - theta_i^j)^2`.
//!
//! For two rewards and a preference `mu` (weight on the second), the global
//! maximizer of `R_mu = (1 - mu) R_1 + mu R_2` sits at per-dimension
//! coefficients `lhat^j` between the two optima, while weight interpolation
//! can only pick one shared coefficient `lbar`. The loss from sharing it is
//! `sum_j p_j (lbar - lhat^j)^2` and is bounded in terms of the curvature ratio
//! `M` and the cross-losses `Delta_1`, `Delta_2`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Evaluator, RewardVector};
use crate::policy::{Activation, ArchSpec, Head, LogStd, WeightVector};
use crate::seed;
use crate::simplex::SimplexPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReward {
    pub optimum: Vec<f64>,
    pub curvature: Vec<f64>,
    pub peak: f64,
}

impl QuadraticReward {
    pub fn new(optimum: Vec<f64>, curvature: Vec<f64>, peak: f64) -> Result<Self> {
        if optimum.is_empty() {
            return Err(Error::invalid("quadratic reward needs at least one dimension"));
        }
        if optimum.len() != curvature.len() {
            return Err(Error::Shape { expected: optimum.len(), got: curvature.len() });
        }
        if curvature.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::invalid("curvatures must be positive and finite"));
        }
        if optimum.iter().any(|v| !v.is_finite()) || !peak.is_finite() {
            return Err(Error::NonFinite("quadratic reward"));
        }
        Ok(QuadraticReward { optimum, curvature, peak })
    }

    pub fn isotropic(optimum: Vec<f64>, eta: f64, peak: f64) -> Result<Self> {
        let curvature = alloc::vec![eta; optimum.len()];
        Self::new(optimum, curvature, peak)
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    /// The common curvature if all dimensions share it.
    pub fn isotropic_eta(&self) -> Option<f64> {
        let c = self.curvature[0];
        self.curvature.iter().all(|x| *x == c).then_some(c)
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let loss: f64 = theta
            .iter()
            .zip(&self.optimum)
            .zip(&self.curvature)
            .map(|((t, o), c)| c * (t - o) * (t - o))
            .sum();
        Ok(self.peak - loss)
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(theta
            .iter()
            .zip(&self.optimum)
            .zip(&self.curvature)
            .map(|((t, o), c)| -2.0 * c * (t - o))
            .collect())
    }
}

/// Maximizer of `sum_i pref_i R_i` for isotropic rewards, and its convex-hull
/// coefficients `lambda_i ∝ pref_i eta_i`.
pub fn isotropic_mixture_opt(rewards: &[QuadraticReward], pref: &SimplexPoint) -> Result<(Vec<f64>, SimplexPoint)> {
    let first = rewards.first().ok_or_else(|| Error::invalid("no rewards"))?;
    if rewards.len() != pref.arity() {
        return Err(Error::Arity(rewards.len(), pref.arity()));
    }
    let mut w = Vec::with_capacity(rewards.len());
    for (i, r) in rewards.iter().enumerate() {
        if r.dim() != first.dim() {
            return Err(Error::Shape { expected: first.dim(), got: r.dim() });
        }
        let eta = r
            .isotropic_eta()
            .ok_or_else(|| Error::Invalid(alloc::format!("reward {i} is not isotropic")))?;
        w.push(pref.coeffs()[i] * eta);
    }
    if w.iter().all(|x| *x == 0.0) {
        return Err(Error::Degenerate("every pref_i * eta_i is zero".into()));
    }
    let hull = match pref.vertex_index() {
        Some(i) => SimplexPoint::vertex(rewards.len(), i),
        None => SimplexPoint::normalized(w)?,
    };
    let theta = (0..first.dim())
        .map(|j| rewards.iter().zip(hull.coeffs()).map(|(r, c)| c * r.optimum[j]).sum())
        .collect();
    Ok((theta, hull))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPair {
    pub r1: QuadraticReward,
    pub r2: QuadraticReward,
}

impl QuadPair {
    pub fn new(r1: QuadraticReward, r2: QuadraticReward) -> Result<Self> {
        if r1.dim() != r2.dim() {
            return Err(Error::Shape { expected: r1.dim(), got: r2.dim() });
        }
        Ok(QuadPair { r1, r2 })
    }

    pub fn dim(&self) -> usize {
        self.r1.dim()
    }

    /// Worst per-dimension curvature ratio, at least 1.
    pub fn m_ratio(&self) -> f64 {
        self.r1
            .curvature
            .iter()
            .zip(&self.r2.curvature)
            .map(|(a, b)| (a / b).max(b / a))
            .fold(1.0, f64::max)
    }

    fn sq_diff(&self) -> impl Iterator<Item = f64> + '_ {
        self.r1.optimum.iter().zip(&self.r2.optimum).map(|(a, b)| (a - b) * (a - b))
    }

    /// `R_1(theta_1) - R_1(theta_2)`.
    pub fn delta1(&self) -> f64 {
        self.sq_diff().zip(&self.r1.curvature).map(|(d, c)| c * d).sum()
    }

    /// `R_2(theta_2) - R_2(theta_1)`.
    pub fn delta2(&self) -> f64 {
        self.sq_diff().zip(&self.r2.curvature).map(|(d, c)| c * d).sum()
    }

    /// `R_mu = (1 - mu) R_1 + mu R_2`.
    pub fn mixture(&self, mu: f64, theta: &[f64]) -> Result<f64> {
        Ok((1.0 - mu) * self.r1.eval(theta)? + mu * self.r2.eval(theta)?)
    }

    /// `(1 - lambda) theta_1 + lambda theta_2`.
    pub fn segment_point(&self, lambda: f64) -> Vec<f64> {
        self.r1.optimum.iter().zip(&self.r2.optimum).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect()
    }

    fn check_mu(mu: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Invalid(alloc::format!("mu_hat must lie in [0, 1], got {mu}")));
        }
        Ok(())
    }

    fn check_distinct(&self) -> Result<()> {
        if self.r1.optimum == self.r2.optimum {
            return Err(Error::Degenerate("theta_1 == theta_2: every lambda is optimal".into()));
        }
        Ok(())
    }
}

/// `lhat^j = mu eta_2^j / ((1 - mu) eta_1^j + mu eta_2^j)`.
pub fn per_dim_coeffs(pair: &QuadPair, mu_hat: f64) -> Result<Vec<f64>> {
    QuadPair::check_mu(mu_hat)?;
    Ok(pair
        .r1
        .curvature
        .iter()
        .zip(&pair.r2.curvature)
        .map(|(e1, e2)| {
            let num = mu_hat * e2;
            (num / ((1.0 - mu_hat) * e1 + num)).clamp(0.0, 1.0)
        })
        .collect())
}

/// The global maximizer of `R_mu`, built from the per-dimension coefficients.
pub fn mixture_optimum(pair: &QuadPair, mu_hat: f64) -> Result<Vec<f64>> {
    let l = per_dim_coeffs(pair, mu_hat)?;
    Ok(pair
        .r1
        .optimum
        .iter()
        .zip(&pair.r2.optimum)
        .zip(&l)
        .map(|((a, b), l)| (1.0 - l) * a + l * b)
        .collect())
}

/// `p_j = ((1 - mu) eta_1^j + mu eta_2^j) (theta_1^j - theta_2^j)^2`.
pub fn dim_weights(pair: &QuadPair, mu_hat: f64) -> Result<Vec<f64>> {
    QuadPair::check_mu(mu_hat)?;
    Ok(pair
        .sq_diff()
        .zip(pair.r1.curvature.iter().zip(&pair.r2.curvature))
        .map(|(d, (e1, e2))| ((1.0 - mu_hat) * e1 + mu_hat * e2) * d)
        .collect())
}

/// Both closed forms of the best shared coefficient: the `p`-weighted mean of
/// `lhat^j`, and `mu Delta_2 / ((1 - mu) Delta_1 + mu Delta_2)`.
pub fn best_uniform_coeff_forms(pair: &QuadPair, mu_hat: f64) -> Result<(f64, f64)> {
    pair.check_distinct()?;
    let l = per_dim_coeffs(pair, mu_hat)?;
    let p = dim_weights(pair, mu_hat)?;
    let total: f64 = p.iter().sum();
    let weighted = p.iter().zip(&l).map(|(p, l)| p * l).sum::<f64>() / total;
    let (d1, d2) = (pair.delta1(), pair.delta2());
    let ratio = mu_hat * d2 / ((1.0 - mu_hat) * d1 + mu_hat * d2);
    Ok((weighted.clamp(0.0, 1.0), ratio.clamp(0.0, 1.0)))
}

/// The shared coefficient maximizing `R_mu` on the segment.
pub fn best_uniform_coeff(pair: &QuadPair, mu_hat: f64) -> Result<f64> {
    if mu_hat == 0.0 || mu_hat == 1.0 {
        pair.check_distinct()?;
        return Ok(mu_hat);
    }
    best_uniform_coeff_forms(pair, mu_hat).map(|(w, _)| w)
}

/// `max R_mu - max_{lambda} R_mu(theta_lambda) = sum_j p_j (lbar - lhat^j)^2`.
pub fn exact_gap(pair: &QuadPair, mu_hat: f64) -> Result<f64> {
    let lbar = best_uniform_coeff(pair, mu_hat)?;
    let l = per_dim_coeffs(pair, mu_hat)?;
    let p = dim_weights(pair, mu_hat)?;
    Ok(p.iter().zip(&l).map(|(p, l)| p * (lbar - l) * (lbar - l)).sum())
}

/// The general bound in terms of `M`, `Delta_1` and `Delta_2`.
pub fn gap_bound_general(m: f64, d1: f64, d2: f64, mu_hat: f64) -> f64 {
    let a = mu_hat * (1.0 - mu_hat);
    let num = a * a * (m * d1 - d2) * (m * d2 - d1);
    let den = (a * (m - 1.0) * (m - 1.0) + m) * ((1.0 - mu_hat) * d1 + mu_hat * d2);
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The bound when `Delta_1 = Delta_2 = delta`.
pub fn gap_bound_equal(m: f64, delta: f64, mu_hat: f64) -> f64 {
    let a = mu_hat * (1.0 - mu_hat);
    a * a * (m - 1.0) * (m - 1.0) * delta / (a * (m - 1.0) * (m - 1.0) + m)
}

/// Upper bound on [`exact_gap`]. When the cross-losses coincide the
/// simplified form is evaluated too and must agree.
pub fn gap_bound(pair: &QuadPair, mu_hat: f64) -> Result<f64> {
    QuadPair::check_mu(mu_hat)?;
    pair.check_distinct()?;
    let (m, d1, d2) = (pair.m_ratio(), pair.delta1(), pair.delta2());
    let general = gap_bound_general(m, d1, d2, mu_hat);
    if (d1 - d2).abs() <= 1e-12 {
        let equal = gap_bound_equal(m, 0.5 * (d1 + d2), mu_hat);
        if (general - equal).abs() > 1e-10 * (1.0 + equal.abs()) {
            return Err(Error::Invalid(alloc::format!(
                "bound forms disagree: general {general}, equal-loss {equal}"
            )));
        }
    }
    Ok(general)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySpec {
    pub count: usize,
    pub dim_min: usize,
    pub dim_max: usize,
    pub curvature_min: f64,
    pub curvature_max: f64,
    pub seed: u64,
    pub mu_points: usize,
    /// Draw `eta_2 = eta_1` (so `M = 1`).
    pub equal_curvature: bool,
    /// Multiplies the bound before checking; 1 except in negative controls.
    pub bound_scale: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            count: 1000,
            dim_min: 1,
            dim_max: 64,
            curvature_min: 0.1,
            curvature_max: 10.0,
            seed: 0,
            mu_points: 21,
            equal_curvature: false,
            bound_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub instance_index: usize,
    pub mu_hat: f64,
    pub kind: String,
    pub gap: f64,
    pub bound: f64,
    pub instance: QuadPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub spec: VerifySpec,
    pub checks: usize,
    /// Smallest `bound - gap` seen.
    pub min_slack: f64,
    pub max_slack: f64,
    /// Largest disagreement between the two `lbar` formulas.
    pub max_lambda_formula_diff: f64,
    pub max_gap: f64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Draws one random instance as used by [`verify_instances`].
pub fn random_pair(spec: &VerifySpec, index: usize) -> Result<QuadPair> {
    let mut rng = seed::rng(seed::derive_indexed(seed::derive(spec.seed, "quad:instances"), index as u64));
    let d = rng.random_range(spec.dim_min..=spec.dim_max);
    let (lo, hi) = (libm::log(spec.curvature_min), libm::log(spec.curvature_max));
    let draw_eta = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|_| libm::exp(rng.random_range(lo..=hi))).collect()
    };
    let eta1 = draw_eta(&mut rng);
    let eta2 = if spec.equal_curvature { eta1.clone() } else { draw_eta(&mut rng) };
    let theta1: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta2: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let peak1 = rng.random_range(-1.0..1.0);
    let peak2 = rng.random_range(-1.0..1.0);
    QuadPair::new(QuadraticReward::new(theta1, eta1, peak1)?, QuadraticReward::new(theta2, eta2, peak2)?)
}

/// Evenly spaced grid on `[0, 1]` with exact endpoints.
pub fn unit_grid(points: usize) -> Vec<f64> {
    SimplexPoint::pair_grid(points).iter().map(|p| p.coeffs()[1]).collect()
}

/// Checks `0 <= gap <= bound` (plus `1e-9`), `lbar in [0, 1]`, agreement of
/// the two `lbar` formulas to `1e-10`, and the variance bound on the
/// distribution of `lhat^j` weighted by `p_j`, over random instances.
pub fn verify_instances(spec: &VerifySpec) -> Result<VerifyReport> {
    if spec.count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if spec.dim_min == 0 || spec.dim_min > spec.dim_max {
        return Err(Error::invalid("dimension range must be nonempty and positive"));
    }
    if !(spec.curvature_min > 0.0) || spec.curvature_min > spec.curvature_max {
        return Err(Error::invalid("curvature range must be positive and nonempty"));
    }
    if spec.mu_points < 2 {
        return Err(Error::invalid("mu grid needs at least 2 points"));
    }
    let grid = unit_grid(spec.mu_points);
    let mut report = VerifyReport {
        spec: spec.clone(),
        checks: 0,
        min_slack: f64::INFINITY,
        max_slack: f64::NEG_INFINITY,
        max_lambda_formula_diff: 0.0,
        max_gap: 0.0,
        violations: Vec::new(),
    };
    for index in 0..spec.count {
        let pair = random_pair(spec, index)?;
        for &mu in &grid {
            report.checks += 1;
            let mut flag = |kind: &str, gap: f64, bound: f64| {
                report.violations.push(Violation {
                    instance_index: index,
                    mu_hat: mu,
                    kind: kind.into(),
                    gap,
                    bound,
                    instance: pair.clone(),
                });
            };
            let (gap, bound, forms, lbar) = match (
                exact_gap(&pair, mu),
                gap_bound(&pair, mu),
                best_uniform_coeff_forms(&pair, mu),
                best_uniform_coeff(&pair, mu),
            ) {
                (Ok(g), Ok(b), Ok(f), Ok(l)) => (g, b * spec.bound_scale, f, l),
                (g, b, f, l) => {
                    let msg = [g.err(), b.err(), f.err(), l.err()].into_iter().flatten().next();
                    flag(&alloc::format!("error: {}", msg.map(|e| alloc::format!("{e}")).unwrap_or_default()), f64::NAN, f64::NAN);
                    continue;
                }
            };
            let slack = bound - gap;
            report.min_slack = report.min_slack.min(slack);
            report.max_slack = report.max_slack.max(slack);
            report.max_gap = report.max_gap.max(gap);
            let diff = (forms.0 - forms.1).abs();
            report.max_lambda_formula_diff = report.max_lambda_formula_diff.max(diff);
            if !(gap >= -1e-12) {
                flag("negative gap", gap, bound);
            }
            if !(gap <= bound + 1e-9) {
                flag("gap exceeds bound", gap, bound);
            }
            if !(0.0..=1.0).contains(&lbar) {
                flag("lbar outside [0, 1]", gap, bound);
            }
            if !(diff <= 1e-10) {
                flag("lbar formulas disagree", gap, bound);
            }
            let l = per_dim_coeffs(&pair, mu)?;
            let p = dim_weights(&pair, mu)?;
            let total: f64 = p.iter().sum();
            let mean = p.iter().zip(&l).map(|(p, l)| p * l).sum::<f64>() / total;
            let var = p.iter().zip(&l).map(|(p, l)| p * (l - mean) * (l - mean)).sum::<f64>() / total;
            let lmax = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lmin = l.iter().copied().fold(f64::INFINITY, f64::min);
            if !(var <= (lmax - mean) * (mean - lmin) + 1e-12) {
                flag("variance bound violated", gap, bound);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub mu_hat: f64,
    pub rs_value: f64,
    pub lmc_lower: f64,
    /// `rs_value + bound` for each `M`.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub m_values: Vec<f64>,
    pub rows: Vec<BoundRow>,
}

/// The normalized two-reward picture with `R_1(theta_1) = R_2(theta_2) = 1`
/// and `R_1(theta_2) = R_2(theta_1) = 0`: the value reached by interpolation,
/// the line joining the endpoint values, and the upper bound per `M`.
pub fn bound_curve(m_values: &[f64], mu_grid: &[f64]) -> Result<BoundCurve> {
    if m_values.iter().any(|m| !(*m >= 1.0)) {
        return Err(Error::invalid("M must be at least 1"));
    }
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        QuadPair::check_mu(mu)?;
        // Equal cross-losses give lbar = mu.
        let lbar = mu;
        let r1 = 1.0 - lbar * lbar;
        let r2 = 1.0 - (1.0 - lbar) * (1.0 - lbar);
        let rs_value = (1.0 - mu) * r1 + mu * r2;
        let lmc_lower = (1.0 - mu) * (1.0 - lbar) + mu * lbar;
        let upper = m_values.iter().map(|&m| rs_value + gap_bound_equal(m, 1.0, mu)).collect();
        rows.push(BoundRow { mu_hat: mu, rs_value, lmc_lower, upper });
    }
    Ok(BoundCurve { m_values: m_values.to_vec(), rows })
}

/// Architecture whose flat weight vector has exactly `dim` entries, used to
/// carry quadratic parameters through the weight-space tooling. Needs `dim >= 2`.
pub fn carrier_arch(dim: usize) -> Result<ArchSpec> {
    if dim < 2 {
        return Err(Error::invalid("carrier architecture needs dim >= 2"));
    }
    Ok(ArchSpec {
        obs_dim: dim - 1,
        hidden: Vec::new(),
        head: Head::Gaussian { action_dim: 1, log_std: LogStd::Fixed(0.0) },
        activation: Activation::Identity,
    })
}

/// Closed-form "environment": the reward panel of a weight vector is the
/// quadratic rewards at its values. Episodes and seeds are ignored.
#[derive(Debug, Clone)]
pub struct QuadraticEvaluator {
    pub ids: Vec<String>,
    pub rewards: Vec<QuadraticReward>,
}

impl QuadraticEvaluator {
    pub fn new(ids: Vec<String>, rewards: Vec<QuadraticReward>) -> Result<Self> {
        if ids.len() != rewards.len() || ids.is_empty() {
            return Err(Error::Arity(ids.len(), rewards.len()));
        }
        let d = rewards[0].dim();
        if rewards.iter().any(|r| r.dim() != d) {
            return Err(Error::invalid("rewards of different dimensions"));
        }
        Ok(QuadraticEvaluator { ids, rewards })
    }

    pub fn from_pair(pair: &QuadPair) -> Self {
        QuadraticEvaluator { ids: alloc::vec!["R1".into(), "R2".into()], rewards: alloc::vec![pair.r1.clone(), pair.r2.clone()] }
    }

    pub fn weights_at(&self, theta: Vec<f64>) -> Result<WeightVector> {
        WeightVector::new(carrier_arch(theta.len())?, theta)
    }

    /// The optimum of reward `i` as a weight vector.
    pub fn expert(&self, i: usize) -> Result<WeightVector> {
        self.weights_at(self.rewards[i].optimum.clone())
    }
}

impl Evaluator for QuadraticEvaluator {
    fn reward_ids(&self) -> Vec<String> {
        self.ids.clone()
    }

    fn evaluate(&self, weights: &WeightVector, _episodes: usize, _seed: u64) -> Result<RewardVector> {
        let values = self.rewards.iter().map(|r| r.eval(weights.values())).collect::<Result<Vec<_>>>()?;
        RewardVector::new(self.ids.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pair(eta1: Vec<f64>, eta2: Vec<f64>, t1: Vec<f64>, t2: Vec<f64>) -> QuadPair {
        QuadPair::new(QuadraticReward::new(t1, eta1, 1.0).unwrap(), QuadraticReward::new(t2, eta2, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let r = QuadraticReward::new(vec![1.0], vec![2.0], 0.0).unwrap();
        assert_eq!(r.eval(&[0.0]).unwrap(), -2.0);
        assert_eq!(r.eval(&[1.0]).unwrap(), 0.0);
        assert!(r.eval(&[0.0, 1.0]).is_err());
        assert!(QuadraticReward::new(vec![1.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn coefficient_edge_cases() {
        let p = pair(vec![1.0, 3.0], vec![2.0, 0.5], vec![0.0, 1.0], vec![1.0, -1.0]);
        assert!(per_dim_coeffs(&p, 0.0).unwrap().iter().all(|l| *l == 0.0));
        assert_eq!(best_uniform_coeff(&p, 1.0).unwrap(), 1.0);
        assert_eq!(exact_gap(&p, 0.0).unwrap(), 0.0);
        assert_eq!(exact_gap(&p, 1.0).unwrap(), 0.0);
        assert_eq!(gap_bound(&p, 0.0).unwrap(), 0.0);
        assert_eq!(gap_bound(&p, 1.0).unwrap(), 0.0);
        let same = pair(vec![1.0, 3.0], vec![1.0, 3.0], vec![0.0, 1.0], vec![1.0, -1.0]);
        for l in per_dim_coeffs(&same, 0.3).unwrap() {
            assert!((l - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_losses_give_half() {
        let p = pair(vec![1.0], vec![1.0], vec![0.0], vec![2.0]);
        assert!((best_uniform_coeff(&p, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(p.m_ratio(), 1.0);
        assert_eq!(gap_bound(&p, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_pair() {
        let p = pair(vec![1.0], vec![2.0], vec![0.5], vec![0.5]);
        assert!(matches!(best_uniform_coeff(&p, 0.5), Err(Error::Degenerate(_))));
        assert!(matches!(exact_gap(&p, 0.5), Err(Error::Degenerate(_))));
        assert!(matches!(gap_bound(&p, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hand_evaluated_bound() {
        let b = gap_bound_equal(2.0, 1.0, 0.5);
        assert!((b - 0.0625 / 2.25).abs() < 1e-15);
        assert!((gap_bound_general(2.0, 1.0, 1.0, 0.5) - b).abs() < 1e-15);
    }

    #[test]
    fn curve_values() {
        let c = bound_curve(&[2.0, 10.0], &unit_grid(21)).unwrap();
        let mid = &c.rows[10];
        assert!((mid.rs_value - 0.75).abs() < 1e-15);
        assert!((mid.lmc_lower - 0.5).abs() < 1e-15);
        for row in [&c.rows[0], &c.rows[20]] {
            assert!(row.upper.iter().all(|u| (*u - 1.0).abs() < 1e-15));
        }
        for row in &c.rows {
            assert!(row.upper[1] >= row.upper[0]);
        }
    }

    #[test]
    fn isotropic_examples() {
        let rs = vec![
            QuadraticReward::isotropic(vec![0.0, 1.0], 2.0, 0.0).unwrap(),
            QuadraticReward::isotropic(vec![1.0, 0.0], 2.0, 0.0).unwrap(),
        ];
        let pref = SimplexPoint::pair(0.3).unwrap();
        let (_, hull) = isotropic_mixture_opt(&rs, &pref).unwrap();
        for (a, b) in hull.coeffs().iter().zip(pref.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let (theta, _) = isotropic_mixture_opt(&rs, &SimplexPoint::vertex(2, 1)).unwrap();
        assert_eq!(theta, vec![1.0, 0.0]);
        let aniso = vec![QuadraticReward::new(vec![0.0, 0.0], vec![1.0, 2.0], 0.0).unwrap(), rs[1].clone()];
        assert!(isotropic_mixture_opt(&aniso, &pref).is_err());
    }

    #[test]
    fn verification_is_deterministic() {
        let spec = VerifySpec { count: 20, ..VerifySpec::default() };
        let a = verify_instances(&spec).unwrap();
        assert!(a.passed(), "{:?}", a.violations.first());
        assert_eq!(a, verify_instances(&spec).unwrap());
        let bad = verify_instances(&VerifySpec { bound_scale: 0.5, ..spec }).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn evaluator_matches_closed_form() {
        let p = pair(vec![1.0, 3.0], vec![2.0, 0.5], vec![0.0, 1.0], vec![1.0, -1.0]);
        let ev = QuadraticEvaluator::from_pair(&p);
        let w = ev.weights_at(vec![0.25, 0.5]).unwrap();
        let r = ev.evaluate(&w, 1, 0).unwrap();
        assert_eq!(r.values[0], p.r1.eval(&[0.25, 0.5]).unwrap());
        assert_eq!(r.values[1], p.r2.eval(&[0.25, 0.5]).unwrap());
    }
}
