use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsoup_core::quadratic::{self, QuadPair, QuadraticReward, VerifySpec};
use rsoup_core::simplex::{self, SimplexPoint};

fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> QuadPair {
    let mut eta = || -> Vec<f64> { (0..d).map(|_| rng.random_range(0.1f64.ln()..10f64.ln()).exp()).collect() };
    let (e1, e2) = (eta(), eta());
    let t1: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t2: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    QuadPair::new(QuadraticReward::new(t1, e1, 0.3).unwrap(), QuadraticReward::new(t2, e2, -0.2).unwrap()).unwrap()
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Exhaustive maximization of `R_mu` over the segment with step `1e-5`.
fn segment_grid_max(pair: &QuadPair, mu: f64) -> (f64, f64) {
    let steps = 100_000;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let l = i as f64 / steps as f64;
        let v = pair.mixture(mu, &pair.segment_point(l)).unwrap();
        if v > best.0 {
            best = (v, l);
        }
    }
    best
}

#[test]
fn gradient_vanishes_at_the_optimum() {
    let r = QuadraticReward::new(vec![0.3, -1.2, 2.0], vec![0.5, 4.0, 1.5], 0.7).unwrap();
    for g in fd_gradient(|t| r.eval(t).unwrap(), &r.optimum) {
        assert!(g.abs() <= 1e-6);
    }
    let x = [1.0, 1.0, 1.0];
    for (a, n) in r.gradient(&x).unwrap().iter().zip(fd_gradient(|t| r.eval(t).unwrap(), &x)) {
        assert!((a - n).abs() <= 1e-6);
    }
}

#[test]
fn per_dimension_point_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let d = rng.random_range(1..=6);
        let pair = random_pair(&mut rng, d);
        let mu = rng.random_range(0.0..1.0);
        let opt = quadratic::mixture_optimum(&pair, mu).unwrap();
        for g in fd_gradient(|t| pair.mixture(mu, t).unwrap(), &opt) {
            assert!(g.abs() <= 1e-6, "gradient {g}");
        }
    }
}

#[test]
fn best_coefficient_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let pair = random_pair(&mut rng, 3);
        for mu in [0.1, 0.35, 0.5, 0.8] {
            let lbar = quadratic::best_uniform_coeff(&pair, mu).unwrap();
            let (_, l) = segment_grid_max(&pair, mu);
            assert!((lbar - l).abs() <= 1e-4, "lbar {lbar}, grid {l}");
        }
    }
}

#[test]
fn exact_gap_matches_dual_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let pair = random_pair(&mut rng, 4);
        for mu in [0.2, 0.5, 0.7] {
            let global = pair.mixture(mu, &quadratic::mixture_optimum(&pair, mu).unwrap()).unwrap();
            let (seg, _) = segment_grid_max(&pair, mu);
            let gap = quadratic::exact_gap(&pair, mu).unwrap();
            assert!((gap - (global - seg)).abs() <= 1e-6, "gap {gap} vs {}", global - seg);
        }
    }
}

#[test]
fn equal_curvatures_have_no_gap() {
    let report = quadratic::verify_instances(&VerifySpec { count: 200, equal_curvature: true, ..VerifySpec::default() }).unwrap();
    assert!(report.passed());
    assert!(report.max_gap <= 1e-12, "max gap {}", report.max_gap);
    assert!(report.min_slack >= -1e-12);
    let one = quadratic::verify_instances(&VerifySpec { count: 1, equal_curvature: true, ..VerifySpec::default() }).unwrap();
    assert!(one.max_slack <= 1e-12);
}

#[test]
fn bound_holds_on_random_instances() {
    let report = quadratic::verify_instances(&VerifySpec { count: 300, seed: 11, ..VerifySpec::default() }).unwrap();
    assert!(report.passed(), "{:?}", report.violations.first());
    assert!(report.max_lambda_formula_diff <= 1e-10);
    assert!(report.min_slack >= -1e-9);
}

/// Grid search for the maximizer of `sum_i pref_i R_i`, refining a 41^d grid
/// around the incumbent until the spacing drops below `1e-7`.
fn grid_maximize(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let d = lo.len();
    let mut center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a) + 0.1).collect();
    let n = 40usize;
    while half.iter().any(|h| 2.0 * h / n as f64 > 1e-7) {
        let mut best = (f64::NEG_INFINITY, center.clone());
        let total = (n + 1).pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            let x: Vec<f64> = (0..d)
                .map(|j| {
                    let k = rem % (n + 1);
                    rem /= n + 1;
                    center[j] - half[j] + 2.0 * half[j] * k as f64 / n as f64
                })
                .collect();
            let v = f(&x);
            if v > best.0 {
                best = (v, x);
            }
        }
        center = best.1;
        half.iter_mut().for_each(|h| *h *= 0.1);
    }
    center
}

#[test]
fn isotropic_optimum_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let d = 2;
        let rewards: Vec<QuadraticReward> = (0..2)
            .map(|_| {
                let opt = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                QuadraticReward::isotropic(opt, rng.random_range(0.1..10.0), rng.random_range(-1.0..1.0)).unwrap()
            })
            .collect();
        let pref = simplex::sample_simplex(2, 1, &mut rng).unwrap().remove(0);
        let (theta, hull) = quadratic::isotropic_mixture_opt(&rewards, &pref).unwrap();
        let f = |t: &[f64]| rewards.iter().zip(pref.coeffs()).map(|(r, c)| c * r.eval(t).unwrap()).sum::<f64>();
        let lo: Vec<f64> = (0..d).map(|j| rewards.iter().map(|r| r.optimum[j]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..d).map(|j| rewards.iter().map(|r| r.optimum[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let grid = grid_maximize(f, &lo, &hi);
        for (a, b) in theta.iter().zip(&grid) {
            assert!((a - b).abs() <= 1e-6, "{theta:?} vs {grid:?}");
        }
        assert!((hull.coeffs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for g in fd_gradient(f, &theta) {
            assert!(g.abs() <= 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn gap_is_between_zero_and_bound(seed in any::<u64>(), d in 1usize..12, mu in 0.0f64..=1.0) {
        let pair = random_pair(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let gap = quadratic::exact_gap(&pair, mu).unwrap();
        let bound = quadratic::gap_bound(&pair, mu).unwrap();
        prop_assert!(gap >= 0.0);
        prop_assert!(gap <= bound + 1e-9, "gap {} bound {}", gap, bound);
        let (a, b) = quadratic::best_uniform_coeff_forms(&pair, mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn segment_objective_is_concave(seed in any::<u64>(), d in 1usize..8, mu in 0.0f64..=1.0, l in 0.01f64..0.99) {
        let pair = random_pair(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let h = 0.01;
        let f = |x: f64| pair.mixture(mu, &pair.segment_point(x)).unwrap();
        prop_assert!(f(l - h) - 2.0 * f(l) + f(l + h) <= 1e-12);
    }

    #[test]
    fn variance_of_coefficients_obeys_the_range_bound(seed in any::<u64>(), d in 1usize..16, mu in 0.0f64..=1.0) {
        let pair = random_pair(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let l = quadratic::per_dim_coeffs(&pair, mu).unwrap();
        let p = quadratic::dim_weights(&pair, mu).unwrap();
        let total: f64 = p.iter().sum();
        let mean = p.iter().zip(&l).map(|(p, l)| p * l).sum::<f64>() / total;
        let var = p.iter().zip(&l).map(|(p, l)| p * (l - mean).powi(2)).sum::<f64>() / total;
        let hi = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(var <= (hi - mean) * (mean - lo) + 1e-12);
    }

    #[test]
    fn isotropic_hull_is_in_the_simplex(seed in any::<u64>(), n in 2usize..=3, d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards: Vec<QuadraticReward> = (0..n)
            .map(|_| QuadraticReward::isotropic((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0.1..10.0), 0.0).unwrap())
            .collect();
        let pref = simplex::sample_simplex(n, 1, &mut rng).unwrap().remove(0);
        let (theta, hull) = quadratic::isotropic_mixture_opt(&rewards, &pref).unwrap();
        prop_assert!(hull.coeffs().iter().all(|c| *c >= 0.0));
        prop_assert!((hull.coeffs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let grad: Vec<f64> = (0..d)
            .map(|j| rewards.iter().zip(pref.coeffs()).map(|(r, c)| c * r.gradient(&theta).unwrap()[j]).sum())
            .collect();
        prop_assert!(grad.iter().all(|g| g.abs() <= 1e-9));
    }
}

#[test]
fn equal_preference_with_equal_curvature_reproduces_pref() {
    let rs = vec![
        QuadraticReward::isotropic(vec![0.0], 3.0, 0.0).unwrap(),
        QuadraticReward::isotropic(vec![1.0], 3.0, 0.0).unwrap(),
        QuadraticReward::isotropic(vec![2.0], 3.0, 0.0).unwrap(),
    ];
    let pref = SimplexPoint::new(vec![0.2, 0.5, 0.3]).unwrap();
    let (_, hull) = quadratic::isotropic_mixture_opt(&rs, &pref).unwrap();
    for (a, b) in hull.coeffs().iter().zip(pref.coeffs()) {
        assert!((a - b).abs() < 1e-15);
    }
}
