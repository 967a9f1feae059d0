//! Sampling on the unit sphere, epsilon-net construction and net-based
//! operator-norm estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2, ColumnMatrix, Matrix};

/// Nets are refused above this dimension unless the caller raises the cap.
pub const DEFAULT_MAX_NET_DIM: usize = 8;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8 with its 64-bit stream selector, so the value sequence
/// depends only on the pair and not on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A child stream keyed by `index`, distinct from every `(seed, k)` pair
    /// of the parent family.
    pub fn substream(&self, index: u64) -> RngStream {
        let mixed = splitmix64(self.seed ^ splitmix64(self.stream ^ 0xA076_1D64_78BD_642F));
        RngStream::new(mixed, index)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A normalized standard Gaussian vector, uniform on `S^{n-1}`.
pub fn sample_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("cannot sample on the sphere of R^0");
    }
    loop {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&g);
        if norm > 0.0 && norm.is_finite() {
            g.iter_mut().for_each(|x| *x /= norm);
            return Ok(g);
        }
    }
}

/// `p` i.i.d. uniform unit columns in `R^n`.
pub fn sample_sphere_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<ColumnMatrix> {
    if p == 0 {
        return invalid("a sphere matrix needs at least one column");
    }
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..p {
        data.extend(sample_unit_vector(n, rng)?);
    }
    ColumnMatrix::from_col_major(n, p, data)
}

/// Rescales every column to unit length. Zero columns are an error.
pub fn normalize_columns(m: Matrix) -> Result<ColumnMatrix> {
    let mut cols = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let c = m.column(j);
        let norm = norm2(c);
        if norm == 0.0 || !norm.is_finite() {
            return invalid(format!("column {j} cannot be normalized (norm {norm})"));
        }
        cols.push(c.iter().map(|x| x / norm).collect::<Vec<_>>());
    }
    ColumnMatrix::from_columns(m.rows(), &cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetMode {
    Exact,
    Heuristic,
}

/// A finite epsilon-separated set of unit vectors in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsNet {
    dimension: usize,
    epsilon: f64,
    points: Vec<Vec<f64>>,
    mode: NetMode,
}

/// Size and provenance of a net, without its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDescriptor {
    pub dimension: usize,
    pub epsilon: f64,
    pub size: usize,
    pub mode: NetMode,
    pub cardinality_bound: f64,
}

impl EpsNet {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mode(&self) -> NetMode {
        self.mode
    }

    /// Existence bound `2d (1 + 2/eps)^{d-1}` for an eps-net of `S^{d-1}`.
    /// Reported next to the constructed size, never enforced.
    pub fn cardinality_bound(&self) -> f64 {
        net_cardinality_bound(self.dimension, self.epsilon)
    }

    pub fn descriptor(&self) -> NetDescriptor {
        NetDescriptor {
            dimension: self.dimension,
            epsilon: self.epsilon,
            size: self.len(),
            mode: self.mode,
            cardinality_bound: self.cardinality_bound(),
        }
    }

    /// Index of and distance to the closest net point.
    pub fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let (idx, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, q)| (i, dot(q, v)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let dist2: f64 = self.points[idx].iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        (idx, dist2.sqrt())
    }

    /// Smallest pairwise distance, `+inf` for fewer than two points.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                let d2: f64 = self.points[a]
                    .iter()
                    .zip(&self.points[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }
}

pub fn net_cardinality_bound(d: usize, eps: f64) -> f64 {
    2.0 * d as f64 * (1.0 + 2.0 / eps).powi(d as i32 - 1)
}

/// Builds an eps-separated subset of `S^{d-1}` by rejection: uniform candidates
/// are accepted iff they lie farther than `eps` from every accepted point, and
/// construction stops after `stall_budget` consecutive rejections.
pub fn build_eps_net<R: Rng + ?Sized>(d: usize, eps: f64, stall_budget: usize, rng: &mut R) -> Result<EpsNet> {
    build_eps_net_capped(d, eps, stall_budget, DEFAULT_MAX_NET_DIM, rng)
}

pub fn build_eps_net_capped<R: Rng + ?Sized>(
    d: usize,
    eps: f64,
    stall_budget: usize,
    max_dim: usize,
    rng: &mut R,
) -> Result<EpsNet> {
    if d == 0 {
        return invalid("net dimension must be at least 1");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("net radius {eps} outside (0, 1)"));
    }
    if stall_budget == 0 {
        return invalid("stall budget must be at least 1");
    }
    if d > max_dim {
        return invalid(format!(
            "net dimension {d} exceeds the cap {max_dim}; raise it explicitly"
        ));
    }
    if d == 1 {
        return Ok(EpsNet {
            dimension: 1,
            epsilon: eps,
            points: vec![vec![-1.0], vec![1.0]],
            mode: NetMode::Exact,
        });
    }

    // |a - b| > eps  <=>  <a, b> < 1 - eps^2 / 2 for unit vectors
    let max_ip = 1.0 - eps * eps / 2.0;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut stalled = 0;
    while stalled < stall_budget {
        let cand = sample_unit_vector(d, rng)?;
        if points.iter().any(|q| dot(q, &cand) >= max_ip) {
            stalled += 1;
        } else {
            points.push(cand);
            stalled = 0;
        }
    }
    Ok(EpsNet {
        dimension: d,
        epsilon: eps,
        points,
        mode: NetMode::Heuristic,
    })
}

/// `sup_{v in N, w in N'} |v^t A w| / ((1 - eps)(1 - eps'))`, where `N` covers
/// the sphere of the row space and `N'` that of the column space.
pub fn net_norm_estimate(a: &Matrix, rows_net: &EpsNet, cols_net: &EpsNet) -> Result<f64> {
    if rows_net.dimension() != a.rows() || cols_net.dimension() != a.cols() {
        return invalid(format!(
            "nets of dimensions ({}, {}) do not match a {}x{} operator",
            rows_net.dimension(),
            cols_net.dimension(),
            a.rows(),
            a.cols()
        ));
    }
    let mut sup: f64 = 0.0;
    for w in cols_net.points() {
        let aw = a.mul_vec(w);
        for v in rows_net.points() {
            sup = sup.max(dot(v, &aw).abs());
        }
    }
    Ok(sup / ((1.0 - rows_net.epsilon()) * (1.0 - cols_net.epsilon())))
}
