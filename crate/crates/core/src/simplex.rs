//! Points of the probability simplex, used for interpolation coefficients and
//! reward weightings alike.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `|sum - 1|`.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    coeffs: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("simplex point needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("simplex coefficients must be finite and nonnegative"));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Invalid(alloc::format!(
                "simplex coefficients sum to {sum}, not 1"
            )));
        }
        Ok(SimplexPoint { coeffs })
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Degenerate("weights must be nonnegative with a positive sum".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n, "vertex index out of range");
        let mut coeffs = alloc::vec![0.0; n];
        coeffs[i] = 1.0;
        SimplexPoint { coeffs }
    }

    pub fn barycenter(n: usize) -> Self {
        assert!(n > 0);
        SimplexPoint { coeffs: alloc::vec![1.0 / n as f64; n] }
    }

    /// `(1 - t, t)`: weight `t` on the second component.
    pub fn pair(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Invalid(alloc::format!("pair coefficient {t} outside [0, 1]")));
        }
        Ok(SimplexPoint { coeffs: alloc::vec![1.0 - t, t] })
    }

    /// `points` evenly spaced pairs from `(1, 0)` to `(0, 1)`.
    pub fn pair_grid(points: usize) -> Vec<Self> {
        assert!(points >= 2, "a pair grid needs both endpoints");
        (0..points)
            .map(|i| {
                let t = if i + 1 == points { 1.0 } else { i as f64 / (points - 1) as f64 };
                SimplexPoint { coeffs: alloc::vec![1.0 - t, t] }
            })
            .collect()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn arity(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the coefficient equal to one, if this is a vertex.
    pub fn vertex_index(&self) -> Option<usize> {
        self.coeffs.iter().position(|&c| c == 1.0)
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.coeffs
    }
}

/// Draws `m` independent points uniformly from the `n`-simplex (flat Dirichlet)
/// by normalizing unit-rate exponential variates.
pub fn sample_simplex<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<SimplexPoint>> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("sample_simplex needs n >= 1 and m >= 1"));
    }
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = e.iter().sum();
        if sum <= 0.0 {
            continue;
        }
        let mut coeffs: Vec<f64> = e.iter().map(|x| x / sum).collect();
        // Push the rounding residue into the largest coordinate.
        let resid = 1.0 - coeffs.iter().sum::<f64>();
        let imax = argmax(&coeffs);
        coeffs[imax] += resid;
        out.push(SimplexPoint { coeffs });
    }
    Ok(out)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn rejects_bad_points() {
        assert!(SimplexPoint::new(alloc::vec![]).is_err());
        assert!(SimplexPoint::new(alloc::vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(alloc::vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::new(alloc::vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexPoint::new(alloc::vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn degenerate_simplex_samples_are_one() {
        let mut rng = seed::rng(1);
        for p in sample_simplex(1, 20, &mut rng).unwrap() {
            assert_eq!(p.coeffs(), &[1.0]);
        }
    }

    #[test]
    fn samples_lie_on_simplex() {
        let mut rng = seed::rng(2);
        for p in sample_simplex(5, 1000, &mut rng).unwrap() {
            let s: f64 = p.coeffs().iter().sum();
            assert!((s - 1.0).abs() <= SUM_TOLERANCE);
            assert!(p.coeffs().iter().all(|c| *c >= 0.0));
        }
    }

    #[test]
    fn uniform_samples_have_flat_means() {
        let mut rng = seed::rng(3);
        let m = 100_000;
        let pts = sample_simplex(3, m, &mut rng).unwrap();
        for k in 0..3 {
            let mean = pts.iter().map(|p| p.coeffs()[k]).sum::<f64>() / m as f64;
            assert!((mean - 1.0 / 3.0).abs() < 0.01, "coordinate {k} mean {mean}");
        }
    }

    #[test]
    fn pair_grid_hits_endpoints_exactly() {
        let g = SimplexPoint::pair_grid(11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0].coeffs(), &[1.0, 0.0]);
        assert_eq!(g[10].coeffs(), &[0.0, 1.0]);
        assert_eq!(g[0].vertex_index(), Some(0));
        assert_eq!(g[5].vertex_index(), None);
    }
}
