//! Dense nonnegative matrices and distributions over the vertex set.
//!
//! Storage is row-major. Structural predicates treat an entry as zero iff it
//! is exactly `0.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Tolerance on row sums when a kernel is required to be stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Square matrix with finite nonnegative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct NonnegMatrix {
    n: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) = {} is not a finite nonnegative number",
                k / n,
                k % n,
                data[k]
            )));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "dimension must be at least 1");
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Matrix with every entry equal to `value`.
    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::from_row_major(n, vec![value; n * n])
    }

    /// Caller guarantees the entries are finite and nonnegative.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 0.0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data }
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix dimension");
        self.rows()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M' v`, accumulated row by row in a fixed order.
    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix dimension");
        let mut out = vec![0.0; self.n];
        for (r, &vi) in self.rows().zip(v) {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(r) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let out = &mut data[i * n..(i + 1) * n];
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Rows permuted by `p` and columns by `q`: result(i, j) = self(p[i], q[j]).
    pub fn permuted(&self, p: &[usize], q: &[usize]) -> Self {
        let n = self.n;
        assert!(p.len() == n && q.len() == n);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(p[i], q[j]);
            }
        }
        Self { n, data }
    }

    /// Largest deviation of a row sum from one.
    pub fn stochastic_defect(&self) -> f64 {
        self.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn ensure_stochastic(&self, tol: f64) -> Result<()> {
        for (row, sum) in self.row_sums().into_iter().enumerate() {
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(())
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when every positive entry sits on an edge of `g`.
    pub fn respects(&self, g: &crate::graph::Graph) -> bool {
        self.n == g.n()
            && (0..self.n).all(|i| (0..self.n).all(|j| self.is_zero(i, j) || g.has_edge(i, j)))
    }
}

impl TryFrom<Vec<Vec<f64>>> for NonnegMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<NonnegMatrix> for Vec<Vec<f64>> {
    fn from(m: NonnegMatrix) -> Self {
        m.to_rows()
    }
}

/// Nonnegative weights over the vertices, optionally normalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<f64>")]
pub struct Distribution {
    weights: Vec<f64>,
    is_probability: bool,
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.weights
    }
}

impl Distribution {
    /// A probability vector: nonnegative entries summing to one within [`PROBABILITY_TOL`].
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        let d = Self::measure(weights)?;
        let total = d.total();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidDistribution(format!(
                "not a probability vector (sum {total})"
            )));
        }
        Ok(Self { is_probability: true, ..d })
    }

    /// A nonnegative measure with arbitrary finite total mass.
    pub fn measure(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {} is not a finite nonnegative number",
                weights[i]
            )));
        }
        Ok(Self { weights, is_probability: false })
    }

    /// Rescales a nonnegative vector to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let d = Self::measure(weights)?;
        let total = d.total();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        Ok(Self {
            weights: d.weights.into_iter().map(|w| w / total).collect(),
            is_probability: true,
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self { weights: vec![1.0 / n as f64; n], is_probability: true }
    }

    /// Point mass on `state`.
    pub fn dirac(n: usize, state: usize) -> Self {
        assert!(state < n);
        let mut weights = vec![0.0; n];
        weights[state] = 1.0;
        Self { weights, is_probability: true }
    }

    /// Solver-produced probability vectors; mass drift is bounded by rounding only.
    pub(crate) fn from_flow(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| w.is_finite() && *w >= 0.0));
        Self { weights, is_probability: true }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|w| *w > 0.0)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        l1_distance(&self.weights, &other.weights)
    }

    pub fn ensure_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.dim() });
        }
        Ok(())
    }

    pub fn ensure_probability(&self) -> Result<()> {
        if self.is_probability {
            Ok(())
        } else {
            Err(Error::InvalidDistribution("a probability vector is required".into()))
        }
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan_entries() {
        assert!(NonnegMatrix::from_rows(vec![vec![1.0, -0.1], vec![0.0, 1.0]]).is_err());
        assert!(NonnegMatrix::from_rows(vec![vec![f64::NAN]]).is_err());
        assert!(NonnegMatrix::from_rows(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn products_and_transposes() {
        let m = NonnegMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(m.tmul_vec(&[1.0, 1.0]), vec![4.0, 6.0]);
        assert_eq!(m.transpose().get(0, 1), 3.0);
        let sq = m.matmul(&m).unwrap();
        assert_eq!(sq.to_rows(), vec![vec![7.0, 10.0], vec![15.0, 22.0]]);
    }

    #[test]
    fn probability_vectors_are_checked() {
        assert!(Distribution::probability(vec![0.5, 0.4]).is_err());
        assert!(Distribution::probability(vec![0.1, 0.2, 0.7]).is_ok());
        assert!(Distribution::measure(vec![2.0, 3.0]).is_ok());
        let d = Distribution::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn serde_round_trip_uses_nested_rows() {
        let m = NonnegMatrix::from_rows(vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, "[[0.25,0.75],[1.0,0.0]]");
        let back: NonnegMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<NonnegMatrix>("[[0.5,-1.0],[0,0]]").is_err());
    }
}
