//! One-dimensional Gauss rules, sphere quadrature and deterministic summation.
//!
//! Everything here is plumbing for the transform modules: Gauss-Legendre
//! nodes via Newton iteration on the three-term recurrence, product rules on
//! S^1 and S^2, a seeded Monte Carlo fallback for higher-dimensional spheres,
//! and a fixed-order pairwise sum so that results do not depend on how work
//! was scheduled across threads.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Pairwise summation over the slice in its given order.  The reduction tree
/// depends only on the slice length, never on thread scheduling.
pub fn fixed_order_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            fixed_order_sum(&xs[..mid]) + fixed_order_sum(&xs[mid..])
        }
    }
}

/// Surface area |S^{m-1}| of the unit sphere in R^m.
///
/// |S^0| = 2 (two points), |S^1| = 2*pi, and |S^{m-1}| = 2*pi*|S^{m-3}|/(m-2).
pub fn sphere_surface(m: usize) -> f64 {
    assert!(m >= 1, "sphere dimension must be positive");
    match m {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        _ => std::f64::consts::TAU * sphere_surface(m - 2) / (m - 2) as f64,
    }
}

/// Volume of the unit ball in R^m.
pub fn ball_volume(m: usize) -> f64 {
    sphere_surface(m) / m as f64
}

fn legendre_value_deriv(order: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for j in 2..=order {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * cur - (jf - 1.0) * prev) / jf;
        prev = cur;
        cur = next;
    }
    let deriv = order as f64 * (x * cur - prev) / (x * x - 1.0);
    (cur, deriv)
}

fn gauss_legendre_uncached(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1);
    if order == 1 {
        return vec![(0.0, 2.0)];
    }
    let mut rule = vec![(0.0, 0.0); order];
    let half = order / 2;
    for i in 0..half {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_value_deriv(order, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_value_deriv(order, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        rule[i] = (-x, w);
        rule[order - 1 - i] = (x, w);
    }
    if order % 2 == 1 {
        let (_, d) = legendre_value_deriv(order, 0.0);
        rule[half] = (0.0, 2.0 / (d * d));
    }
    rule
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(order: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| Arc::new(gauss_legendre_uncached(order)))
        .clone()
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, order: usize) -> Vec<(f64, f64)> {
    let scale = 0.5 * (b - a);
    let shift = 0.5 * (b + a);
    gauss_legendre(order)
        .iter()
        .map(|&(x, w)| (shift + scale * x, scale * w))
        .collect()
}

/// A uniformly distributed point on S^{m-1}: normalized standard Gaussian.
pub fn uniform_sphere_point<R: Rng>(m: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(m, |_, _| {
            let g: f64 = StandardNormal.sample(rng);
            g
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Quadrature on the unit sphere S^{m-1} in R^m: exact product rules for
/// m <= 3, seeded Monte Carlo above.  Weights sum to |S^{m-1}|.
///
/// `budget` controls per-axis resolution for the product rules (the S^2 rule
/// uses `budget` polar nodes and `2 * budget` azimuths) and `budget^2` total
/// samples for the Monte Carlo fallback.
pub fn sphere_quadrature(m: usize, budget: usize, seed: u64) -> Result<Vec<(DVector<f64>, f64)>> {
    if budget == 0 {
        return Err(Error::parameter("sphere quadrature budget must be positive"));
    }
    match m {
        0 => Err(Error::parameter("sphere dimension must be positive")),
        1 => Ok(vec![
            (DVector::from_element(1, 1.0), 1.0),
            (DVector::from_element(1, -1.0), 1.0),
        ]),
        2 => {
            let count = budget.max(4);
            let w = std::f64::consts::TAU / count as f64;
            Ok((0..count)
                .map(|i| {
                    let phi = std::f64::consts::TAU * (i as f64 + 0.5) / count as f64;
                    (DVector::from_vec(vec![phi.cos(), phi.sin()]), w)
                })
                .collect())
        }
        3 => {
            let polar = budget.max(4);
            let azimuths = 2 * polar;
            let w_phi = std::f64::consts::TAU / azimuths as f64;
            let mut nodes = Vec::with_capacity(polar * azimuths);
            for &(t, wt) in gauss_legendre(polar).iter() {
                let s = (1.0 - t * t).sqrt();
                for j in 0..azimuths {
                    let phi = std::f64::consts::TAU * (j as f64 + 0.5) / azimuths as f64;
                    nodes.push((
                        DVector::from_vec(vec![s * phi.cos(), s * phi.sin(), t]),
                        wt * w_phi,
                    ));
                }
            }
            Ok(nodes)
        }
        _ => {
            let count = budget * budget;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = sphere_surface(m) / count as f64;
            Ok((0..count)
                .map(|_| (uniform_sphere_point(m, &mut rng), w))
                .collect())
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        // x^6 on [-1,1] -> 2/7 with a 4-point rule (exact through degree 7).
        let rule = gauss_legendre(4);
        let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(got, 2.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn legendre_on_interval_matches_analytic() {
        let rule = gauss_legendre_on(0.0, std::f64::consts::FRAC_PI_2, 32);
        let got: f64 = rule.iter().map(|&(x, w)| w * x.cos()).sum();
        assert_relative_eq!(got, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn sphere_surface_recurrence() {
        assert_relative_eq!(sphere_surface(1), 2.0);
        assert_relative_eq!(sphere_surface(2), std::f64::consts::TAU);
        assert_relative_eq!(sphere_surface(3), 4.0 * std::f64::consts::PI);
        assert_relative_eq!(
            sphere_surface(4),
            2.0 * std::f64::consts::PI * std::f64::consts::PI
        );
    }

    #[test]
    fn sphere_rules_total_mass() {
        for m in 1..=3 {
            let nodes = sphere_quadrature(m, 16, 0).unwrap();
            let total: f64 = nodes.iter().map(|(_, w)| w).sum();
            assert_relative_eq!(total, sphere_surface(m), max_relative = 1e-12);
        }
        let nodes = sphere_quadrature(4, 64, 7).unwrap();
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(total, sphere_surface(4), max_relative = 1e-12);
    }

    #[test]
    fn sphere_rule_second_moment() {
        // mean of x_m^2 over S^{m-1} is 1/m.
        for m in 2..=3 {
            let nodes = sphere_quadrature(m, 24, 0).unwrap();
            let got: f64 = nodes
                .iter()
                .map(|(p, w)| w * p[m - 1] * p[m - 1])
                .sum::<f64>()
                / sphere_surface(m);
            assert_relative_eq!(got, 1.0 / m as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(sphere_quadrature(2, 0, 0).is_err());
    }

    #[test]
    fn fixed_order_sum_matches_naive() {
        let xs: Vec<f64> = (0..1001).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(fixed_order_sum(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn hermite_oracle_integrates_gaussian_moments() {
        let rule = oracles::gauss_hermite(32);
        let got: f64 = rule.iter().map(|&(x, w)| w * x * x).sum();
        assert_relative_eq!(got, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);
    }
}
