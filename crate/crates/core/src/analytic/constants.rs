//! Constants, thresholds and hypotheses of the selection-value bound, written
//! out formula by formula so each can be audited independently. Nothing here
//! is trusted by the selection pipeline.

use std::f64::consts::{E, LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::distributions::gamma_ratio;
use crate::error::{domain, Result};

/// `4 e^{-2(ln 2 - 1)}` (equal to `e^2`): the outer inflation factor chosen in
/// the order-statistic step, and the first branch of the theorem's `kappa`.
pub fn kappa_order_stat() -> f64 {
    4.0 * (-2.0 * (LN_2 - 1.0)).exp()
}

/// Smallest admissible column count, `ceil(e^{6 / sqrt(2 pi)})`.
pub fn min_columns() -> u64 {
    (6.0 / (2.0 * PI).sqrt()).exp().ceil() as u64
}

/// Claimed bound on the selection value: `80 log(p) / p`.
pub fn claimed_gamma_bound(p: f64) -> f64 {
    80.0 * p.ln() / p
}

/// Claimed success probability `1 - 5n / (p log(p)^{n-1}) - 9 p^{-n}`.
pub fn theorem_success_probability(n: u64, p: u64) -> f64 {
    let (nf, pf) = (n as f64, p as f64);
    let l = pf.ln();
    1.0 - 5.0 * nf / (pf * l.powf(nf - 1.0)) - 9.0 * pf.powf(-nf)
}

/// Claimed coherence bound `p^{-2} / 2` of the greedy outer set.
pub fn claimed_coherence_bound(p: u64) -> f64 {
    0.5 / (p as f64 * p as f64)
}

/// Claimed tail `8 p^{-n}` for the outer-set operator norm.
pub fn claimed_norm_tail(n: u64, p: u64) -> f64 {
    8.0 * (p as f64).powf(-(n as f64))
}

/// `(lower, upper)` Stirling-type bounds on `Gamma(n/2) / Gamma((n-1)/2)` as
/// stated in the order-statistic step: `(e^{2 ln 2} / 2) (n-3)^{3/2} / (n-2)^{1/2}`
/// and `(e^2 / 2) (n-3)^{3/2} / (n-2)^{1/2}`.
pub fn gamma_ratio_claimed_bounds(n: u32) -> Result<(f64, f64)> {
    if n < 4 {
        return domain(format!("gamma-ratio bounds need n >= 4 (got {n})"));
    }
    let n = n as f64;
    let shape = (n - 3.0).powf(1.5) / (n - 2.0).sqrt();
    Ok(((2.0 * LN_2).exp() / 2.0 * shape, E * E / 2.0 * shape))
}

/// Where the claimed gamma-ratio bounds actually hold, `4 <= n <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRatioAudit {
    pub n_max: u32,
    pub lower_holds: Vec<u32>,
    pub upper_holds: Vec<u32>,
    /// Largest `n` with `lower <= exact <= upper`, if any.
    pub largest_valid: Option<u32>,
}

pub fn gamma_ratio_audit(n_max: u32) -> Result<GammaRatioAudit> {
    let mut lower_holds = Vec::new();
    let mut upper_holds = Vec::new();
    let mut largest_valid = None;
    for n in 4..=n_max {
        let exact = gamma_ratio(n)?;
        let (lo, hi) = gamma_ratio_claimed_bounds(n)?;
        if lo <= exact {
            lower_holds.push(n);
        }
        if exact <= hi {
            upper_holds.push(n);
        }
        if lo <= exact && exact <= hi {
            largest_valid = Some(n);
        }
    }
    Ok(GammaRatioAudit {
        n_max,
        lower_holds,
        upper_holds,
        largest_valid,
    })
}

/// The two admissible-quantile constraints on `z_0`, evaluated as stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Z0Window {
    /// `(2 sqrt(pi) / e^{2 ln 2}) (n-2)^{1/2} / (n-3)^{3/2} (2 / eps^2) (n / p) log p`
    pub z_lower: f64,
    /// `(2 sqrt(pi) / e^2) (n-2)^{1/2} / (n-3)^{3/2} kappa s / ((1 - eps) p)`
    pub z_upper: f64,
    /// `kappa >= (4 / e^{2(ln 2 - 1)}) ((1 - eps) / eps^2) (n / s) log p`, as stated.
    pub compatible_claimed: bool,
    /// Whether `z_lower <= z_upper` actually holds.
    pub window_nonempty: bool,
}

pub fn z0_window(n: u64, p: u64, eps: f64, kappa: f64, s: u64) -> Result<Z0Window> {
    if n < 4 {
        return domain(format!("z0 window needs n >= 4 (got {n})"));
    }
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let shape = (nf - 2.0).sqrt() / (nf - 3.0).powf(1.5);
    let z_lower = 2.0 * PI.sqrt() / (2.0 * LN_2).exp() * shape / (0.5 * eps * eps) * (nf / pf) * pf.ln();
    let z_upper = 2.0 * PI.sqrt() / (E * E) * shape * kappa * sf / ((1.0 - eps) * pf);
    let required = 4.0 / (2.0 * (LN_2 - 1.0)).exp() * (1.0 - eps) / (eps * eps) * (nf / sf) * pf.ln();
    Ok(Z0Window {
        z_lower,
        z_upper,
        compatible_claimed: kappa >= required,
        window_nonempty: z_lower <= z_upper,
    })
}

/// Explicit quantile threshold of the greedy outer set,
/// `(8 sqrt(pi) / e^{2 ln 2}) (n-2)^{1/2} / (n-3)^{3/2} (n / p) log p`.
pub fn z0_claimed(n: u64, p: u64) -> Result<f64> {
    if n < 4 {
        return domain(format!("z0 needs n >= 4 (got {n})"));
    }
    let (nf, pf) = (n as f64, p as f64);
    Ok(8.0 * PI.sqrt() / (2.0 * LN_2).exp() * (nf - 2.0).sqrt() / (nf - 3.0).powf(1.5) * nf / pf * pf.ln())
}

/// Coherence threshold `h = (1/2) exp(-2 (log p + (log p - log 2) / (n + 1)))`,
/// the value solving `(p^2 / 2) (2h)^{(n+1)/2} = p^{-n}`.
pub fn coherence_threshold_h(p: u64, n: u64) -> f64 {
    let l = (p as f64).ln();
    0.5 * (-2.0 * (l + (l - LN_2) / (n as f64 + 1.0))).exp()
}

/// `K_eps = (sqrt(2 pi) / 6) ((1 + C_kappa) log(1 + 2/eps) + C_kappa + log(C_kappa / 4))`.
pub fn k_epsilon(eps: f64, c_kappa: f64) -> f64 {
    (2.0 * PI).sqrt() / 6.0 * ((1.0 + c_kappa) * (1.0 + 2.0 / eps).ln() + c_kappa + (c_kappa / 4.0).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaBranches {
    /// `4 e^{-2(ln 2 - 1)}`
    pub constant: f64,
    /// `4 e^3 / (1 - rho)^2 ((1 + K_eps)(1 + C_kappa) / (c (1 - eps)^4))^2 log^2(p) log(C_kappa n)`
    pub scaling: f64,
    pub value: f64,
}

pub fn kappa_theorem(rho_minus: f64, eps: f64, c_kappa: f64, p: u64, n: u64, c_subgauss: f64) -> KappaBranches {
    let k = k_epsilon(eps, c_kappa);
    let inner = (1.0 + k) * (1.0 + c_kappa) / (c_subgauss * (1.0 - eps).powi(4));
    let l = (p as f64).ln();
    let scaling = 4.0 * E.powi(3) / (1.0 - rho_minus).powi(2) * inner * inner * l * l * (c_kappa * n as f64).ln();
    let constant = kappa_order_stat();
    KappaBranches {
        constant,
        scaling,
        value: constant.max(scaling),
    }
}

/// `C_s = c^2 (1 - rho)^2 (1 - eps)^8 / (4 e^3) * C_kappa / ((1 + K_eps)^2 (1 + C_kappa)^2)`.
pub fn c_s(rho_minus: f64, eps: f64, c_kappa: f64, c_subgauss: f64) -> f64 {
    let k = k_epsilon(eps, c_kappa);
    c_subgauss.powi(2) * (1.0 - rho_minus).powi(2) * (1.0 - eps).powi(8) / (4.0 * E.powi(3)) * c_kappa
        / ((1.0 + k).powi(2) * (1.0 + c_kappa).powi(2))
}

/// Largest admissible `s`: `floor(C_s n / (log^2(p) log(C_kappa n)))`.
pub fn s_max(n: u64, p: u64, rho_minus: f64, eps: f64, c_kappa: f64, c_subgauss: f64) -> Result<u64> {
    let l = (p as f64).ln();
    let lk = (c_kappa * n as f64).ln();
    if !(l > 0.0) {
        return domain(format!("log(p) must be positive (p = {p})"));
    }
    if !(lk > 0.0) {
        return domain(format!("log(C_kappa n) must be positive (C_kappa n = {})", c_kappa * n as f64));
    }
    let value = c_s(rho_minus, eps, c_kappa, c_subgauss) * n as f64 / (l * l * lk);
    Ok(value.floor() as u64)
}

/// Outer-set norm threshold `(1 + K_eps) / (c (1 - eps)^4) (n + kappa s) / n log p`.
pub fn norm_threshold_u(n: u64, p: u64, kappa_s: f64, eps: f64, c_subgauss: f64, k_eps: f64) -> f64 {
    let nf = n as f64;
    (1.0 + k_eps) / (c_subgauss * (1.0 - eps).powi(4)) * (nf + kappa_s) / nf * (p as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VFunction {
    /// `(e u^2 / (kappa r'^2))^{r'^2 / v^2}`, `(e |M|^4 / (kappa u^2))^{u^2 / |M|^2}`,
    /// `(e |M|^2 / (kappa v^2))^{v^2 / mu(M)^2}`
    pub terms: [f64; 3],
    pub value: f64,
    /// `kappa r'^2 / e >= u^2`
    pub u_upper_ok: bool,
    /// `u^2 >= |M|^4 / kappa`
    pub u_lower_ok: bool,
    /// `v^2 >= |M|^2 / kappa`
    pub v_ok: bool,
}

impl VFunction {
    pub fn preconditions_hold(&self) -> bool {
        self.u_upper_ok && self.u_lower_ok && self.v_ok
    }
}

/// The three-term function bounding the decoupled restriction norm tail.
/// The `s` argument only enters through the caller's `3 kappa s` prefactor.
pub fn v_function(r_prime: f64, u: f64, v: f64, kappa: f64, norm_m: f64, mu_m: f64) -> VFunction {
    let (u2, v2, r2) = (u * u, v * v, r_prime * r_prime);
    let m2 = norm_m * norm_m;
    let terms = [
        (E / kappa * u2 / r2).powf(r2 / v2),
        (E / kappa * m2 * m2 / u2).powf(u2 / m2),
        (E / kappa * m2 / v2).powf(v2 / (mu_m * mu_m)),
    ];
    VFunction {
        terms,
        value: terms.iter().sum(),
        u_upper_ok: kappa * r2 / E >= u2,
        u_lower_ok: u2 >= m2 * m2 / kappa,
        v_ok: v2 >= m2 / kappa,
    }
}

/// `3 kappa s V`.
pub fn decoupled_tail_bound(kappa_s: f64, v: &VFunction) -> f64 {
    3.0 * kappa_s * v.value
}

/// Final three-term bound after substituting `C_V = log(C_kappa n)`:
/// `(e^{-2})^{L}`, `(r'^2 / (e^2 L^2))^{L}`, `(e^{-2})^{2 r'^2 p^2 / L}` with `L = log(C_kappa n)`.
pub fn substituted_v_terms(r_prime: f64, c_kappa: f64, n: u64, p: u64) -> [f64; 3] {
    let l = (c_kappa * n as f64).ln();
    let pf = p as f64;
    [
        (E.powi(-2)).powf(l),
        (r_prime * r_prime / (E * E * l * l)).powf(l),
        (E.powi(-2)).powf(2.0 * r_prime * r_prime * pf * pf / l),
    ]
}

/// `2 * 36 * 3 * kappa s * (sum of terms)`: bound on the probability that a
/// uniformly drawn `s`-subset of the outer set has Gram deviation `>= r'`.
pub fn extraction_failure_bound(kappa_s: f64, terms: &[f64; 3]) -> f64 {
    2.0 * 36.0 * 3.0 * kappa_s * terms.iter().sum::<f64>()
}

/// Tunable inputs of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub rho_minus: f64,
    pub epsilon: f64,
    pub c_kappa: f64,
    /// Sub-Gaussian constant of `P(|<v, X_j>| >= u) <= 2 exp(-c n u^2)`.
    /// Defaults to 1/2, the exact constant for sphere-uniform columns.
    pub c_subgauss: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            rho_minus: 0.5,
            epsilon: 0.5,
            c_kappa: 1.0,
            c_subgauss: 0.5,
        }
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_minus > 0.0 && self.rho_minus < 1.0) {
            return domain(format!("rho_minus = {} outside (0, 1)", self.rho_minus));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return domain(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        if !(self.c_kappa > 0.0) {
            return domain(format!("C_kappa = {} must be positive", self.c_kappa));
        }
        if !(self.c_subgauss > 0.0) {
            return domain(format!("c = {} must be positive", self.c_subgauss));
        }
        Ok(())
    }
}

/// Every derived constant for a given `(n, p, s)`, always recomputed from
/// [`BoundInputs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub inputs: BoundInputs,
    pub n: u64,
    pub p: u64,
    pub s: u64,
    pub k_epsilon: f64,
    pub kappa: KappaBranches,
    pub c_s: f64,
    pub s_max: Option<u64>,
    /// `C_V = log(C_kappa n)`
    pub c_v: f64,
    /// `r' = (1 - rho) / 2`
    pub r_prime: f64,
    /// Outer-set norm threshold, with `kappa s` from the theorem's `kappa`.
    pub u_norm: f64,
    /// `u = sqrt(C_V) * u_norm`
    pub u_split: f64,
    /// `v = r' / sqrt(log(C_kappa n))`
    pub v_split: f64,
    pub h_cap: f64,
    pub z0: Option<f64>,
    pub gamma_bound: f64,
    pub success_probability: f64,
}

impl BoundConstants {
    pub fn derive(inputs: BoundInputs, n: u64, p: u64, s: u64) -> Result<Self> {
        inputs.validate()?;
        let BoundInputs {
            rho_minus,
            epsilon,
            c_kappa,
            c_subgauss,
        } = inputs;
        let k = k_epsilon(epsilon, c_kappa);
        let kappa = kappa_theorem(rho_minus, epsilon, c_kappa, p, n, c_subgauss);
        let c_v = (c_kappa * n as f64).ln();
        let r_prime = (1.0 - rho_minus) / 2.0;
        let u_norm = norm_threshold_u(n, p, kappa.value * s as f64, epsilon, c_subgauss, k);
        Ok(Self {
            inputs,
            n,
            p,
            s,
            k_epsilon: k,
            kappa,
            c_s: c_s(rho_minus, epsilon, c_kappa, c_subgauss),
            s_max: s_max(n, p, rho_minus, epsilon, c_kappa, c_subgauss).ok(),
            c_v,
            r_prime,
            u_norm,
            u_split: c_v.sqrt() * u_norm,
            v_split: r_prime / c_v.sqrt(),
            h_cap: coherence_threshold_h(p, n),
            z0: z0_claimed(n, p).ok(),
            gamma_bound: claimed_gamma_bound(p as f64),
            success_probability: theorem_success_probability(n, p),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl ConstraintCheck {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: lhs <= rhs,
        }
    }

    fn lt(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            satisfied: lhs < rhs,
            ..Self::le(name, lhs, rhs)
        }
    }
}

/// Every hypothesis of the selection-value bound, evaluated at `(n, p, s)`.
/// Large right-hand sides are compared in log space.
pub fn constraint_check(n: u64, p: u64, s: u64, inputs: &BoundInputs) -> Vec<ConstraintCheck> {
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let BoundInputs {
        rho_minus,
        epsilon,
        c_kappa,
        c_subgauss,
    } = *inputs;
    let in_unit = |x: f64| if x > 0.0 && x < 1.0 { 0.0 } else { 1.0 };
    let kappa = kappa_theorem(rho_minus, epsilon, c_kappa, p, n, c_subgauss).value;
    let lower = (kappa * sf).max(2.0 * 36.0 * 3.0 * 3.0).max(((1.0 - rho_minus) / 2.0).exp()) / c_kappa;
    let l = pf.ln();
    let s_bound = c_s(rho_minus, epsilon, c_kappa, c_subgauss) * nf / (l * l * (c_kappa * nf).ln());

    vec![
        ConstraintCheck::le("rho_minus in (0,1)", in_unit(rho_minus), 0.0),
        ConstraintCheck::le("epsilon in (0,1)", in_unit(epsilon), 0.0),
        ConstraintCheck::le("C_kappa > 0", -c_kappa, 0.0),
        ConstraintCheck::le("p >= ceil(e^(6/sqrt(2 pi)))", min_columns() as f64, pf),
        ConstraintCheck::le("n >= 6", 6.0, nf),
        ConstraintCheck::le("max{kappa s, 648, e^((1-rho)/2)} / C_kappa <= n", lower, nf),
        ConstraintCheck::le("n <= (p / log p)^2", nf, (pf / l).powi(2)),
        ConstraintCheck::le(
            "log n <= (1-rho) p / sqrt(2) - log C_kappa",
            nf.ln(),
            (1.0 - rho_minus) * pf / SQRT_2 - c_kappa.ln(),
        ),
        ConstraintCheck::le("s <= C_s n / (log^2 p log(C_kappa n))", sf, s_bound),
        ConstraintCheck::lt("claimed success probability > 0", 0.0, theorem_success_probability(n, p)),
    ]
}

pub fn all_satisfied(checks: &[ConstraintCheck]) -> bool {
    checks.iter().all(|c| c.satisfied)
}

/// Scans `p` and `n` over powers of ten (`s = 1`) for a parameter set meeting
/// every hypothesis. `None` when nothing in the grid qualifies.
pub fn find_admissible_parameters(inputs: &BoundInputs, max_exp: u32) -> Option<(u64, u64, u64)> {
    for pe in 1..=max_exp.min(18) {
        let p = 10u64.pow(pe);
        for ne in 1..=max_exp.min(18) {
            let n = 10u64.pow(ne);
            if all_satisfied(&constraint_check(n, p, 1, inputs)) {
                return Some((n, p, 1));
            }
        }
    }
    None
}
