//! Law of `|<X_j, v>|` for `X_j` uniform on the sphere, its order statistics,
//! spherical caps and the binomial tail quantities built on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::special::{beta_inc_pair, integrate, ln_gamma};
use crate::error::{domain, invalid, Result};

/// Bisection stops once the bracket is this narrow.
pub const QUANTILE_TOL: f64 = 1e-12;

fn check_unit_interval(z: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&z) {
        return domain(format!("{what} = {z} outside [0, 1]"));
    }
    Ok(())
}

fn check_dimension(n: u32) -> Result<()> {
    if n < 2 {
        return domain(format!("dimension n = {n} must be at least 2"));
    }
    Ok(())
}

/// `Gamma(n/2) / Gamma((n-1)/2)`.
pub fn gamma_ratio(n: u32) -> Result<f64> {
    check_dimension(n)?;
    let n = n as f64;
    Ok((ln_gamma(n / 2.0) - ln_gamma((n - 1.0) / 2.0)).exp())
}

/// Density of `|<X_j, v>|`'s signed counterpart `<X_j, v>` on `[0, 1]`:
/// `g(z) = Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2)) (1 - z^2)^{(n-3)/2}`.
/// The law of `|<X_j, v>|` has density `2 g`.
pub fn inner_density(z: f64, n: u32) -> Result<f64> {
    check_unit_interval(z, "z")?;
    let ratio = gamma_ratio(n)?;
    let exponent = (n as f64 - 3.0) / 2.0;
    Ok(ratio / PI.sqrt() * (1.0 - z * z).powf(exponent))
}

/// `(G(z), 1 - G(z))` with `G(z) = P(|<X_j, v>| <= z) = I_{z^2}(1/2, (n-1)/2)`.
pub fn inner_cdf_pair(z: f64, n: u32) -> Result<(f64, f64)> {
    check_unit_interval(z, "z")?;
    check_dimension(n)?;
    let x = z * z;
    let y = (1.0 - z) * (1.0 + z);
    beta_inc_pair(0.5, (n as f64 - 1.0) / 2.0, x, y)
}

/// `G(z) = 2 int_0^z g`, the CDF of `|<X_j, v>|`.
pub fn inner_cdf(z: f64, n: u32) -> Result<f64> {
    Ok(inner_cdf_pair(z, n)?.0)
}

/// `G(z)` by adaptive quadrature of the density after the substitution
/// `z = sin(theta)`, which removes the endpoint singularity at `n = 2`.
/// Independent of the incomplete-beta route; used as a cross-check.
pub fn inner_cdf_quadrature(z: f64, n: u32) -> Result<f64> {
    check_unit_interval(z, "z")?;
    let scale = gamma_ratio(n)? / PI.sqrt();
    let power = n as i32 - 2;
    let integral = integrate(|t: f64| t.cos().powi(power), 0.0, z.asin(), 1e-14);
    Ok(2.0 * scale * integral)
}

/// Order index `r` (1-based) among `p` draws of `|<X_j, v>|` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderStatSpec {
    p: u64,
    r: u64,
    n: u32,
}

impl OrderStatSpec {
    pub fn new(p: u64, r: u64, n: u32) -> Result<Self> {
        if r < 1 || r > p {
            return invalid(format!("order index r = {r} must lie in [1, p = {p}]"));
        }
        check_dimension(n)?;
        Ok(Self { p, r, n })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// `(F(z), 1 - F(z))` where `F(z) = P(Z_(r) <= z) = P(Bin(p, G(z)) >= r)
/// = I_{G(z)}(r, p - r + 1)`.
pub fn order_stat_cdf_pair(z: f64, spec: &OrderStatSpec) -> Result<(f64, f64)> {
    let (g, gc) = inner_cdf_pair(z, spec.n)?;
    beta_inc_pair(spec.r as f64, (spec.p - spec.r + 1) as f64, g, gc)
}

pub fn order_stat_cdf(z: f64, spec: &OrderStatSpec) -> Result<f64> {
    Ok(order_stat_cdf_pair(z, spec)?.0)
}

/// `P(Z_(r) > z)`, accurate far into the upper tail.
pub fn order_stat_sf(z: f64, spec: &OrderStatSpec) -> Result<f64> {
    Ok(order_stat_cdf_pair(z, spec)?.1)
}

/// Smallest `z` with `F(z) >= 1 - alpha`, found by bisection on the survival
/// function so that levels like `alpha = p^{-n}` stay resolvable.
pub fn order_stat_quantile(alpha: f64, spec: &OrderStatSpec) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("quantile level {alpha} outside (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if order_stat_sf(mid, spec)? <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `P(B <= k)` for `B ~ Bin(trials, q)`.
pub fn binomial_cdf(k: u64, trials: u64, q: f64) -> Result<f64> {
    check_unit_interval(q, "success probability")?;
    if k >= trials {
        return Ok(1.0);
    }
    // P(B <= k) = I_{1-q}(trials - k, k + 1)
    Ok(beta_inc_pair((trials - k) as f64, (k + 1) as f64, 1.0 - q, q)?.0)
}

/// Lower-tail Chernoff bound `exp(-eps^2 mean / 2)` for
/// `P(B <= (1 - eps) E[B])`.
pub fn chernoff_lower(eps: f64, mean: f64) -> f64 {
    (-0.5 * eps * eps * mean).exp()
}

/// True probability that `w` uniform on `S^{n-1}` lands in the cap
/// `{ <v, w> >= h }`: `(1/2) I_{1-h^2}((n-1)/2, 1/2)`.
pub fn cap_probability(h: f64, n: u32) -> Result<f64> {
    check_unit_interval(h, "h")?;
    check_dimension(n)?;
    let y = (1.0 - h) * (1.0 + h);
    Ok(0.5 * beta_inc_pair((n as f64 - 1.0) / 2.0, 0.5, y, h * h)?.0)
}

/// The cap-probability ratio exactly as displayed in the proof:
/// `int_0^{2h-h^2} t^{(n-1)/2} (1-t)^{1/2} dt / int_0^1 (same)`, i.e.
/// `I_{2h-h^2}((n+1)/2, 3/2)`. Kept for auditing; it is not the cap probability.
pub fn cap_probability_displayed(h: f64, n: u32) -> Result<f64> {
    check_unit_interval(h, "h")?;
    check_dimension(n)?;
    let upper = 2.0 * h - h * h;
    let rest = (1.0 - h) * (1.0 - h);
    Ok(beta_inc_pair((n as f64 + 1.0) / 2.0, 1.5, upper, rest)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

    #[test]
    fn density_in_three_dimensions_is_half() {
        for &z in &[0.0, 0.2, 0.77, 0.999, 1.0] {
            assert!((inner_density(z, 3).unwrap() - 0.5).abs() < 1e-14);
        }
        assert!(inner_density(1.5, 3).is_err());
        assert!(inner_density(0.5, 1).is_err());
        assert!(inner_density(1.0, 2).unwrap().is_infinite());
        assert!(inner_density(1.0 - 1e-9, 2).unwrap() > 1e3);
    }

    #[test]
    fn cdf_endpoints_and_three_dimensional_identity() {
        for n in 2..30 {
            assert_eq!(inner_cdf(0.0, n).unwrap(), 0.0);
            assert_eq!(inner_cdf(1.0, n).unwrap(), 1.0);
        }
        for k in 0..=100 {
            let z = k as f64 / 100.0;
            assert!((inner_cdf(z, 3).unwrap() - z).abs() < 1e-14);
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        for n in [2, 3, 4, 7, 15, 40] {
            for k in 0..=20 {
                let z = k as f64 / 20.0;
                let a = inner_cdf(z, n).unwrap();
                let b = inner_cdf_quadrature(z, n).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n} z={z}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cdf_derivative_is_twice_density() {
        let h = 1e-6;
        for n in [3, 5, 12] {
            for k in 1..19 {
                let z = 0.05 * k as f64;
                let fd = (inner_cdf(z + h, n).unwrap() - inner_cdf(z - h, n).unwrap()) / (2.0 * h);
                assert!((fd - 2.0 * inner_density(z, n).unwrap()).abs() < 1e-6, "n={n} z={z}");
            }
        }
    }

    #[test]
    fn gamma_ratio_values() {
        assert!((gamma_ratio(4).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-14);
        assert!((gamma_ratio(2).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-14);
        assert!((gamma_ratio(3).unwrap() - PI.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn first_order_statistic_complements_no_successes() {
        let spec = OrderStatSpec::new(12, 1, 5).unwrap();
        for k in 0..=10 {
            let z = k as f64 / 10.0;
            let g = inner_cdf(z, 5).unwrap();
            let expected = 1.0 - (1.0 - g).powi(12);
            assert!((order_stat_cdf(z, &spec).unwrap() - expected).abs() < 1e-13);
        }
        for r in 1..=12 {
            let spec = OrderStatSpec::new(12, r, 5).unwrap();
            assert_eq!(order_stat_cdf(1.0, &spec).unwrap(), 1.0);
        }
    }

    #[test]
    fn uniform_order_statistics_follow_beta() {
        let p = 20;
        for r in [1, 5, 20] {
            let spec = OrderStatSpec::new(p, r, 3).unwrap();
            let beta = Beta::new(r as f64, (p - r + 1) as f64).unwrap();
            for k in 0..=200 {
                let z = k as f64 / 200.0;
                assert!((order_stat_cdf(z, &spec).unwrap() - beta.cdf(z)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn order_stat_cdf_monotonicity() {
        for r in 1..=8 {
            let spec = OrderStatSpec::new(8, r, 6).unwrap();
            let mut prev = 0.0;
            for k in 0..=50 {
                let v = order_stat_cdf(k as f64 / 50.0, &spec).unwrap();
                assert!(v >= prev - 1e-15);
                prev = v;
            }
            if r > 1 {
                let lower = OrderStatSpec::new(8, r - 1, 6).unwrap();
                for k in 0..=50 {
                    let z = k as f64 / 50.0;
                    assert!(order_stat_cdf(z, &spec).unwrap() <= order_stat_cdf(z, &lower).unwrap() + 1e-15);
                }
            }
        }
        assert!(OrderStatSpec::new(5, 0, 3).is_err());
        assert!(OrderStatSpec::new(5, 6, 3).is_err());
    }

    fn beta_quantile_by_bisection(a: f64, b: f64, level: f64) -> f64 {
        let beta = Beta::new(a, b).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta.cdf(mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn quantile_matches_independent_beta_bisection() {
        let spec = OrderStatSpec::new(10, 3, 3).unwrap();
        let q = order_stat_quantile(0.1, &spec).unwrap();
        let oracle = beta_quantile_by_bisection(3.0, 8.0, 0.9);
        assert!((q - oracle).abs() < 1e-10, "{q} vs {oracle}");
    }

    #[test]
    fn quantile_consistency_and_limits() {
        for &(p, r, n) in &[(10u64, 3u64, 3u32), (50, 12, 6), (200, 15, 4)] {
            let spec = OrderStatSpec::new(p, r, n).unwrap();
            for &alpha in &[0.5, 0.1, 1e-3, 1e-8] {
                let q = order_stat_quantile(alpha, &spec).unwrap();
                let cdf = order_stat_cdf(q, &spec).unwrap();
                assert!(cdf >= 1.0 - alpha - 1e-15, "alpha={alpha}");
                assert!(cdf <= 1.0 - alpha + 1e-9, "alpha={alpha}: {cdf}");
            }
            let near_one = order_stat_quantile(1.0 - 1e-12, &spec).unwrap();
            assert!(near_one < 0.05, "{near_one}");
        }
        let spec = OrderStatSpec::new(50, 12, 6).unwrap();
        let deep = order_stat_quantile(50f64.powi(-6), &spec).unwrap();
        assert!(order_stat_sf(deep, &spec).unwrap() <= 50f64.powi(-6));
        assert!(order_stat_quantile(0.0, &spec).is_err());
    }

    #[test]
    fn binomial_cdf_matches_statrs() {
        for &(trials, q) in &[(10u64, 0.3), (1000, 0.1), (37, 0.9)] {
            let b = Binomial::new(q, trials).unwrap();
            for k in 0..=trials.min(120) {
                assert!((binomial_cdf(k, trials, q).unwrap() - b.cdf(k)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn chernoff_values() {
        assert_eq!(chernoff_lower(0.3, 0.0), 1.0);
        assert!((chernoff_lower(0.5, 8.0) - (-1f64).exp()).abs() < 1e-15);
        assert!(chernoff_lower(0.6, 10.0) < chernoff_lower(0.5, 10.0));
    }

    #[test]
    fn cap_probability_values() {
        for n in 2..20 {
            assert!((cap_probability(0.0, n).unwrap() - 0.5).abs() < 1e-15);
            assert_eq!(cap_probability(1.0, n).unwrap(), 0.0);
        }
        assert!((cap_probability(0.5, 3).unwrap() - 0.25).abs() < 1e-15);
        for k in 0..=20 {
            let h = k as f64 / 20.0;
            assert!((cap_probability(h, 3).unwrap() - (1.0 - h) / 2.0).abs() < 1e-14);
        }
        assert!(cap_probability(-0.1, 3).is_err());
    }

    #[test]
    fn cap_identity_with_inner_cdf() {
        for n in 2..=30 {
            for k in 0..=40 {
                let h = k as f64 / 40.0;
                let lhs = 2.0 * cap_probability(h, n).unwrap();
                let rhs = 1.0 - inner_cdf(h, n).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "n={n} h={h}");
            }
        }
    }

    #[test]
    fn displayed_cap_ratio_differs_from_truth() {
        // n = 3, h = 0.5: 2h - h^2 = 0.75, I_0.75(2, 1.5) vs the true 0.25
        let shown = cap_probability_displayed(0.5, 3).unwrap();
        let beta = Beta::new(2.0, 1.5).unwrap();
        assert!((shown - beta.cdf(0.75)).abs() < 1e-12);
        assert!((shown - 0.25).abs() > 0.1);
        assert_eq!(cap_probability_displayed(0.0, 5).unwrap(), 0.0);
        assert_eq!(cap_probability_displayed(1.0, 5).unwrap(), 1.0);
    }
}
