//! Dense small-matrix primitives.
//!
//! Matrices are stored column-major. Spectra are obtained from a cyclic Jacobi
//! eigensolver applied to the smaller of the two Gram matrices, which is
//! plenty for the desk-scale sizes (a few dozen columns) used throughout.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Maximum tolerated deviation of a column norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Relative off-diagonal threshold at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// A general dense real matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a list of equally long columns.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return invalid(format!("column {j} has length {}, expected {rows}", c.len()));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.rows + i] = value;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `A^t A`, a `cols x cols` symmetric matrix.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let v = dot(self.column(a), self.column(b));
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }

    /// `A A^t`, a `rows x rows` symmetric matrix.
    pub fn outer_gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.rows);
        for c in 0..self.cols {
            let col = self.column(c);
            for a in 0..self.rows {
                for b in a..self.rows {
                    g.data[b * self.rows + a] += col[a] * col[b];
                }
            }
        }
        for a in 0..self.rows {
            for b in a + 1..self.rows {
                let v = g.get(a, b);
                g.set(b, a, v);
            }
        }
        g
    }

    /// `A x` for a vector of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (yi, aij) in y.iter_mut().zip(self.column(j)) {
                *yi += aij * xj;
            }
        }
        y
    }

    /// `A^t x` for a vector of length `rows`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.column(j), x)).collect()
    }

    /// Restriction to the given rows and columns (in the given order).
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }
}

/// An `n x p` matrix whose columns are unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatrix {
    inner: Matrix,
}

impl ColumnMatrix {
    /// Wraps a matrix after checking `n, p >= 1` and the unit-norm invariant.
    /// Columns are never renormalized here; see [`crate::sphere::normalize_columns`].
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows == 0 || m.cols == 0 {
            return invalid("a column matrix needs n >= 1 and p >= 1");
        }
        for j in 0..m.cols {
            let norm = dot(m.column(j), m.column(j)).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL || !norm.is_finite() {
                return invalid(format!("column {j} has norm {norm}, expected 1"));
            }
        }
        Ok(Self { inner: m })
    }

    pub fn from_columns(n: usize, columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_columns(n, columns)?)
    }

    pub fn from_col_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Matrix::new(n, p, data)?)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        Self { inner: m }
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.inner.rows
    }

    /// Number of columns.
    pub fn p(&self) -> usize {
        self.inner.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.inner.column(j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    /// `[self, other]`.
    pub fn concat(&self, other: &ColumnMatrix) -> Result<ColumnMatrix> {
        if self.n() != other.n() {
            return invalid(format!(
                "cannot concatenate matrices with {} and {} rows",
                self.n(),
                other.n()
            ));
        }
        let mut data = self.inner.data.clone();
        data.extend_from_slice(&other.inner.data);
        Ok(Self::from_matrix_unchecked(Matrix {
            rows: self.n(),
            cols: self.p() + other.p(),
            data,
        }))
    }

    /// `|<X_j, v>|` for every column.
    pub fn abs_inner_products(&self, v: &[f64]) -> Vec<f64> {
        (0..self.p()).map(|j| dot(self.column(j), v).abs()).collect()
    }
}

/// A strictly increasing list of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Sorts the indices; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate index {}", w[0]));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.iter().all(|j| other.contains(j))
    }

    pub fn check_bounds(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= p => Err(Error::InvalidIndex { index: last, len: p }),
            _ => Ok(()),
        }
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn check_unit(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return invalid(format!("vector has length {}, expected {n}", v.len()));
    }
    let norm = norm2(v);
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return invalid(format!("vector has norm {norm}, expected 1"));
    }
    Ok(())
}

/// Columns of `x` selected by `set`, order preserved. The result may have zero
/// columns; every spectral operation rejects that case.
pub fn submatrix(x: &ColumnMatrix, set: &IndexSet) -> Result<ColumnMatrix> {
    set.check_bounds(x.p())?;
    let n = x.n();
    let mut data = Vec::with_capacity(n * set.len());
    for j in set.iter() {
        data.extend_from_slice(x.column(j));
    }
    Ok(ColumnMatrix::from_matrix_unchecked(Matrix {
        rows: n,
        cols: set.len(),
        data,
    }))
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let d = a.rows;
    debug_assert_eq!(d, a.cols);
    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| j * d + i;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for j in 0..d {
            for i in 0..d {
                let v = m[idx(i, j)] * m[idx(i, j)];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off.sqrt() <= JACOBI_TOL * total.sqrt() {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[idx(q, q)] - m[idx(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m[idx(p, k)];
                    let aqk = m[idx(q, k)];
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
                m[idx(p, q)] = 0.0;
                m[idx(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..d).map(|i| m[idx(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Eigenvalues of whichever of `A^t A`, `A A^t` is smaller.
fn squared_singular_values(a: &Matrix) -> Vec<f64> {
    let g = if a.cols <= a.rows {
        a.gram()
    } else {
        a.outer_gram()
    };
    symmetric_eigenvalues(&g)
}

/// Smallest singular value of `x_s`; 0 when it has more columns than rows.
pub fn sigma_min(x_s: &ColumnMatrix) -> Result<f64> {
    if x_s.p() == 0 {
        return invalid("sigma_min of a matrix with no columns");
    }
    if x_s.p() > x_s.n() {
        return Ok(0.0);
    }
    let eig = symmetric_eigenvalues(&x_s.as_matrix().gram());
    Ok(eig[0].max(0.0).sqrt())
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return invalid("operator norm of an empty matrix");
    }
    let eig = squared_singular_values(a);
    Ok(eig.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Maximum `|<X_j, X_j'>|` over distinct columns.
pub fn coherence(x: &ColumnMatrix) -> Result<f64> {
    if x.p() < 2 {
        return invalid("coherence needs at least two columns");
    }
    let mut mu: f64 = 0.0;
    for a in 0..x.p() {
        for b in a + 1..x.p() {
            mu = mu.max(dot(x.column(a), x.column(b)).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// `|| X_S^t X_S - I ||`.
pub fn gram_deviation(x_s: &ColumnMatrix) -> Result<f64> {
    if x_s.p() == 0 {
        return invalid("gram deviation of a matrix with no columns");
    }
    let mut h = x_s.as_matrix().gram();
    for i in 0..x_s.p() {
        let v = h.get(i, i) - 1.0;
        h.set(i, i, v);
    }
    Ok(symmetric_spectral_norm(&h))
}

/// Spectral norm of a symmetric matrix, 0 for the empty matrix.
pub fn symmetric_spectral_norm(h: &Matrix) -> f64 {
    if h.rows == 0 {
        return 0.0;
    }
    let eig = symmetric_eigenvalues(h);
    eig[0].abs().max(eig[eig.len() - 1].abs())
}

/// `|| X_I^t v ||_inf`.
pub fn inf_norm_against(x: &ColumnMatrix, set: &IndexSet, v: &[f64]) -> Result<f64> {
    if set.is_empty() {
        return invalid("inf norm over an empty index set");
    }
    set.check_bounds(x.p())?;
    check_unit(v, x.n())?;
    Ok(set
        .iter()
        .map(|j| dot(x.column(j), v).abs())
        .fold(0.0, f64::max))
}
