//! Greedy outer approximation, random well-conditioned extraction, exact
//! brute-force oracles and certified estimates of the selection value
//! `gamma = sup_v inf_I ||X_I^t v||_inf`.

use std::cmp::Ordering;

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::constants::kappa_order_stat;
use crate::error::{invalid, Error, Result};
use crate::linalg::{check_unit, dot, sigma_min, submatrix, ColumnMatrix, IndexSet};
use crate::sphere::{sample_unit_vector, EpsNet, NetDescriptor, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub s: usize,
    pub rho_minus: f64,
    /// Outer inflation factor: the greedy set has `min(ceil(kappa s), floor(p/2))` columns.
    pub kappa: f64,
    /// Net radius.
    pub epsilon: f64,
    pub c_kappa: f64,
    pub c_subgauss: f64,
    pub max_attempts: usize,
    /// Largest `C(p, s)` an exact oracle may enumerate.
    pub brute_force_limit: u128,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            s: 2,
            rho_minus: 0.5,
            kappa: kappa_order_stat(),
            epsilon: 0.5,
            c_kappa: 1.0,
            c_subgauss: 0.5,
            max_attempts: 1000,
            brute_force_limit: 1_000_000,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return invalid("s must be at least 1");
        }
        if !(self.rho_minus > 0.0 && self.rho_minus < 1.0) {
            return invalid(format!("rho_minus = {} outside (0, 1)", self.rho_minus));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return invalid(format!("kappa = {} must be a finite value >= 1", self.kappa));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return invalid(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        if self.max_attempts == 0 {
            return invalid("max_attempts must be at least 1");
        }
        Ok(())
    }

    /// `min(ceil(kappa s), floor(p / 2))`, after checking `ceil(kappa s) <= p`.
    pub fn outer_size(&self, p: usize) -> Result<usize> {
        let inflated = (self.kappa * self.s as f64).ceil();
        if inflated > p as f64 {
            return invalid(format!(
                "ceil(kappa s) = {inflated} exceeds the column count p = {p}"
            ));
        }
        Ok((inflated as usize).min(p / 2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionOutcome {
    pub outer_set: IndexSet,
    /// `None` when no well-conditioned subset was found within the budget.
    pub inner_set: Option<IndexSet>,
    /// `sigma_min` of the accepted subset, or the best seen when infeasible.
    pub sigma_min_achieved: f64,
    /// `||X_I^t v||_inf` for the accepted subset, `+inf` when infeasible.
    pub attained_value: f64,
    /// `||X_outer^t v||_inf`, the `m`-th order statistic of `|<X_j, v>|`.
    pub outer_value: f64,
    pub attempts_used: usize,
}

impl SelectionOutcome {
    pub fn is_feasible(&self) -> bool {
        self.inner_set.is_some()
    }
}

fn by_value_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `m` indices with the smallest `|<X_j, v>|`, ties broken by the smaller index.
pub fn greedy_outer(x: &ColumnMatrix, v: &[f64], m: usize) -> Result<IndexSet> {
    check_unit(v, x.n())?;
    if m == 0 || m > x.p() {
        return invalid(format!("outer size m = {m} outside [1, {}]", x.p()));
    }
    let mut keyed: Vec<(f64, usize)> = x.abs_inner_products(v).into_iter().zip(0..).collect();
    if m < keyed.len() {
        keyed.select_nth_unstable_by(m - 1, by_value_then_index);
    }
    IndexSet::new(keyed[..m].iter().map(|&(_, j)| j).collect())
}

/// Result of [`random_extract`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub subset: Option<IndexSet>,
    pub sigma_min: f64,
    pub attempts: usize,
}

/// Draws uniform `s`-subsets of `outer` until one has `sigma_min >= rho_minus`
/// or `max_attempts` draws have been spent.
pub fn random_extract<R: Rng + ?Sized>(
    x: &ColumnMatrix,
    outer: &IndexSet,
    s: usize,
    rho_minus: f64,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Extraction> {
    outer.check_bounds(x.p())?;
    if s == 0 || s > outer.len() {
        return invalid(format!("cannot extract {s} columns from an outer set of {}", outer.len()));
    }
    let mut pool: Vec<usize> = outer.as_slice().to_vec();
    let mut best = 0.0f64;
    for attempt in 1..=max_attempts {
        for i in 0..s {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        let candidate = IndexSet::new(pool[..s].to_vec())?;
        let sm = sigma_min(&submatrix(x, &candidate)?)?;
        if sm >= rho_minus {
            return Ok(Extraction {
                subset: Some(candidate),
                sigma_min: sm,
                attempts: attempt,
            });
        }
        best = best.max(sm);
    }
    Ok(Extraction {
        subset: None,
        sigma_min: best,
        attempts: max_attempts,
    })
}

/// Greedy outer set followed by random extraction.
pub fn constrained_select<R: Rng + ?Sized>(
    x: &ColumnMatrix,
    v: &[f64],
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    cfg.validate()?;
    let m = cfg.outer_size(x.p())?;
    let outer = greedy_outer(x, v, m)?;
    let outer_value = outer.iter().map(|j| dot(x.column(j), v).abs()).fold(0.0, f64::max);
    let ext = random_extract(x, &outer, cfg.s, cfg.rho_minus, cfg.max_attempts, rng)?;
    let attained_value = match &ext.subset {
        Some(set) => set.iter().map(|j| dot(x.column(j), v).abs()).fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    Ok(SelectionOutcome {
        outer_set: outer,
        inner_set: ext.subset,
        sigma_min_achieved: ext.sigma_min,
        attained_value,
        outer_value,
        attempts_used: ext.attempts,
    })
}

/// `C(p, s)` without overflow for the sizes that matter; saturates at `u128::MAX`.
pub fn subset_count(p: usize, s: usize) -> u128 {
    if s > p {
        return 0;
    }
    let s = s.min(p - s);
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = match acc.checked_mul((p - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Every `s`-subset of the columns with `sigma_min >= rho_minus`. The family
/// does not depend on the direction, so it is enumerated once per matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleFamily {
    p: usize,
    sets: Vec<Vec<usize>>,
    total: u128,
}

impl FeasibleFamily {
    pub fn enumerate(x: &ColumnMatrix, s: usize, rho_minus: f64, limit: u128) -> Result<Self> {
        if s == 0 || s > x.p() {
            return invalid(format!("subset size {s} outside [1, {}]", x.p()));
        }
        let total = subset_count(x.p(), s);
        if total > limit {
            return Err(Error::BudgetExceeded { required: total, limit });
        }
        let mut sets = Vec::new();
        for combo in (0..x.p()).combinations(s) {
            let set = IndexSet::new(combo)?;
            if sigma_min(&submatrix(x, &set)?)? >= rho_minus {
                sets.push(set.into());
            }
        }
        Ok(Self { p: x.p(), sets, total })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Feasible fraction of all `s`-subsets.
    pub fn fraction(&self) -> f64 {
        self.sets.len() as f64 / self.total as f64
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// `inf_I ||X_I^t v||_inf` over the family, `+inf` when it is empty.
    pub fn inf(&self, x: &ColumnMatrix, v: &[f64]) -> Result<f64> {
        if x.p() != self.p {
            return invalid("matrix does not match the enumerated family");
        }
        check_unit(v, x.n())?;
        let vals = x.abs_inner_products(v);
        Ok(self
            .sets
            .iter()
            .map(|set| set.iter().map(|&j| vals[j]).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min))
    }
}

/// Exact `inf` of `||X_I^t v||_inf` over well-conditioned `s`-subsets.
pub fn brute_force_inf(x: &ColumnMatrix, v: &[f64], s: usize, rho_minus: f64, limit: u128) -> Result<f64> {
    FeasibleFamily::enumerate(x, s, rho_minus, limit)?.inf(x, v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEstimate {
    /// Max over the net of the pipeline's attained value, plus the net radius.
    pub certified_upper: f64,
    /// Max over probe directions of the exact inf (or of attained values
    /// when the oracle is over budget).
    pub heuristic_lower: f64,
    pub oracle_exact: bool,
    /// Max over probe directions of the pipeline's attained value.
    pub probe_attained_max: f64,
    pub directions_tested: usize,
    pub net: NetDescriptor,
    /// Fraction of net directions where extraction found a feasible subset.
    pub feasibility_rate: f64,
}

/// Certified upper estimate of `gamma` from a net, with a lower estimate from
/// uniform probes. Net point `i` uses `stream.substream(2i)` and probe `k`
/// uses `stream.substream(2k + 1)`, so results do not depend on thread count.
pub fn estimate_gamma(
    x: &ColumnMatrix,
    cfg: &SelectionConfig,
    net: &EpsNet,
    probe_count: usize,
    stream: RngStream,
) -> Result<GammaEstimate> {
    cfg.validate()?;
    if net.dimension() != x.n() {
        return invalid(format!(
            "net dimension {} does not match n = {}",
            net.dimension(),
            x.n()
        ));
    }
    cfg.outer_size(x.p())?;

    let net_values: Vec<f64> = net
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut rng = stream.substream(2 * i as u64).rng();
            constrained_select(x, v, cfg, &mut rng).map(|o| o.attained_value)
        })
        .collect::<Result<_>>()?;

    let family = match FeasibleFamily::enumerate(x, cfg.s, cfg.rho_minus, cfg.brute_force_limit) {
        Ok(f) => Some(f),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };

    let probes: Vec<(f64, f64)> = (0..probe_count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.substream(2 * k as u64 + 1).rng();
            let v = sample_unit_vector(x.n(), &mut rng)?;
            let attained = constrained_select(x, &v, cfg, &mut rng)?.attained_value;
            let exact = match &family {
                Some(f) => f.inf(x, &v)?,
                None => attained,
            };
            Ok((exact, attained))
        })
        .collect::<Result<_>>()?;

    let feasible = net_values.iter().filter(|a| a.is_finite()).count();
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    Ok(GammaEstimate {
        certified_upper: max(&mut net_values.iter().copied()) + net.epsilon(),
        heuristic_lower: max(&mut probes.iter().map(|p| p.0)),
        oracle_exact: family.is_some(),
        probe_attained_max: max(&mut probes.iter().map(|p| p.1)),
        directions_tested: net.len() + probe_count,
        net: net.descriptor(),
        feasibility_rate: if net.is_empty() { 0.0 } else { feasible as f64 / net.len() as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monotonicity {
    pub gamma_x: f64,
    pub gamma_concat: f64,
    pub satisfied: bool,
}

/// Exact `gamma` of `X` and `[X, X_extra]` over a finite direction set.
/// Adding columns only enlarges the feasible family, so the concatenation
/// should never do worse.
pub fn monotonicity_check(
    x: &ColumnMatrix,
    x_extra: &ColumnMatrix,
    cfg: &SelectionConfig,
    directions: &[Vec<f64>],
) -> Result<Monotonicity> {
    if directions.is_empty() {
        return invalid("monotonicity check needs at least one direction");
    }
    let concat = x.concat(x_extra)?;
    let fam_x = FeasibleFamily::enumerate(x, cfg.s, cfg.rho_minus, cfg.brute_force_limit)?;
    let fam_c = FeasibleFamily::enumerate(&concat, cfg.s, cfg.rho_minus, cfg.brute_force_limit)?;
    let mut gamma_x = f64::NEG_INFINITY;
    let mut gamma_concat = f64::NEG_INFINITY;
    for v in directions {
        gamma_x = gamma_x.max(fam_x.inf(x, v)?);
        gamma_concat = gamma_concat.max(fam_c.inf(&concat, v)?);
    }
    Ok(Monotonicity {
        gamma_x,
        gamma_concat,
        satisfied: gamma_concat <= gamma_x + 1e-12,
    })
}
