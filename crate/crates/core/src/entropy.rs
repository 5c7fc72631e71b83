//! Relative entropy between distributions, kernels and Markovian path measures.
//!
//! Natural logarithms throughout, with `0 log 0 = 0`. A support violation is
//! reported as `f64::INFINITY`, which is a legitimate value of the functional
//! rather than an error. Reference measures need not be normalized, so results
//! can be negative.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{Distribution, NonnegMatrix, PROBABILITY_TOL, STOCHASTIC_TOL};

/// `Σ p log(p/q)` over raw slices of equal length.
pub(crate) fn divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total
}

pub fn relative_entropy(p: &Distribution, q: &Distribution) -> Result<f64> {
    q.ensure_dim(p.dim())?;
    Ok(divergence(p.weights(), q.weights()))
}

/// Shannon entropy rate `-Σ_i stat(i) Σ_j Π_ij log Π_ij` of a stationary chain.
pub fn entropy_rate(kernel: &NonnegMatrix, stat: &Distribution) -> Result<f64> {
    stat.ensure_dim(kernel.dim())?;
    let mut h = 0.0;
    for (row, &w) in kernel.rows().zip(stat.weights()) {
        if w == 0.0 {
            continue;
        }
        let row_h: f64 = row.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        h += w * row_h;
    }
    Ok(h)
}

/// Markovian measure on paths `x_0 .. x_N`: an initial law and one kernel per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathMeasure {
    initial: Distribution,
    kernels: Vec<NonnegMatrix>,
}

impl PathMeasure {
    pub fn new(initial: Distribution, kernels: Vec<NonnegMatrix>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Degenerate("path measure needs at least one step".into()));
        }
        let n = initial.dim();
        for k in &kernels {
            if k.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: k.dim() });
            }
        }
        Ok(Self { initial, kernels })
    }

    /// Time-homogeneous measure with `horizon` copies of `kernel`.
    pub fn homogeneous(initial: Distribution, kernel: NonnegMatrix, horizon: usize) -> Result<Self> {
        Self::new(initial, vec![kernel; horizon])
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn kernels(&self) -> &[NonnegMatrix] {
        &self.kernels
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// `initial(x_0) Π_t kernel_t(x_t, x_{t+1})`.
    pub fn path_weight(&self, path: &[usize]) -> f64 {
        assert_eq!(path.len(), self.horizon() + 1, "path length must be horizon + 1");
        let mut w = self.initial[path[0]];
        for (t, k) in self.kernels.iter().enumerate() {
            w *= k.get(path[t], path[t + 1]);
        }
        w
    }

    /// One-time marginals `μ_0 .. μ_N` obtained by forward propagation.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut flow = Vec::with_capacity(self.horizon() + 1);
        flow.push(self.initial.weights().to_vec());
        for k in &self.kernels {
            let next = k.tmul_vec(flow.last().expect("non-empty"));
            flow.push(next);
        }
        flow
    }

    pub fn is_stochastic(&self) -> bool {
        self.initial.is_probability()
            && self.kernels.iter().all(|k| k.stochastic_defect() <= STOCHASTIC_TOL)
    }
}

/// `D(P‖M)` for a Markovian probability measure `p` and a Markovian reference `m`,
/// evaluated through the per-step decomposition
/// `D(ν_0‖μ_0) + Σ_t Σ_x D(π_x·(t)‖m_x·(t)) p_t(x)`.
pub fn path_relative_entropy(p: &PathMeasure, m: &PathMeasure) -> Result<f64> {
    if p.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: p.dim() });
    }
    if p.horizon() != m.horizon() {
        return Err(Error::DimensionMismatch { expected: m.horizon(), found: p.horizon() });
    }
    p.initial.ensure_probability()?;
    for k in &p.kernels {
        k.ensure_stochastic(STOCHASTIC_TOL)?;
    }
    let mut total = divergence(p.initial.weights(), m.initial.weights());
    for (t, flow) in p.marginals().iter().take(p.horizon()).enumerate() {
        total += weighted_row_divergence(&p.kernels[t], &m.kernels[t], flow);
    }
    Ok(total)
}

/// `Σ_i w(i) D(π_i·‖m_i·)`, skipping rows with zero weight.
pub(crate) fn weighted_row_divergence(pi: &NonnegMatrix, m: &NonnegMatrix, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let d = divergence(pi.row(i), m.row(i));
        if d.is_infinite() {
            return f64::INFINITY;
        }
        total += wi * d;
    }
    total
}

/// Per-step cost `Σ_i D(π_i·‖m_i·) stat(i)` of a stationary kernel.
pub fn entropy_rate_objective(pi: &NonnegMatrix, m: &NonnegMatrix, stat: &Distribution) -> Result<f64> {
    if pi.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: pi.dim() });
    }
    stat.ensure_dim(m.dim())?;
    stat.ensure_probability()?;
    pi.ensure_stochastic(STOCHASTIC_TOL)?;
    Ok(weighted_row_divergence(pi, m, stat.weights()))
}

/// Joint law of one transition `(x_t, x_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDistribution {
    joint: NonnegMatrix,
}

impl EdgeDistribution {
    pub fn new(joint: NonnegMatrix) -> Result<Self> {
        let total: f64 = joint.as_slice().iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidDistribution(format!("edge distribution sums to {total}")));
        }
        Ok(Self { joint })
    }

    /// `p(i, j) = π_ij · stat(i)`.
    pub fn from_kernel(pi: &NonnegMatrix, stat: &Distribution) -> Result<Self> {
        stat.ensure_dim(pi.dim())?;
        let n = pi.dim();
        let data = (0..n)
            .flat_map(|i| pi.row(i).iter().map(move |v| v * stat[i]))
            .collect();
        Self::new(NonnegMatrix::from_raw(n, data))
    }

    pub fn joint(&self) -> &NonnegMatrix {
        &self.joint
    }

    /// Law of the departure state.
    pub fn source_marginal(&self) -> Vec<f64> {
        self.joint.row_sums()
    }

    /// Law of the arrival state.
    pub fn target_marginal(&self) -> Vec<f64> {
        self.joint.tmul_vec(&vec![1.0; self.joint.dim()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeIdentity {
    /// `Σ_ij p(i,j) log(p(i,j)/m(i,j))` on the joint edge laws.
    pub lhs: f64,
    /// Entropy-rate cost plus `D(stat‖m0)`.
    pub rhs: f64,
}

impl EdgeIdentity {
    pub fn gap(&self) -> f64 {
        if self.lhs.is_infinite() && self.rhs.is_infinite() {
            0.0
        } else {
            (self.lhs - self.rhs).abs()
        }
    }
}

/// Evaluates both sides of the edge-distribution identity: the divergence of
/// `p(i,j) = π_ij stat(i)` from `m(i,j) = m_ij m0(i)` against the per-step
/// cost plus `D(stat‖m0)`.
pub fn edge_identity_check(
    pi: &NonnegMatrix,
    m: &NonnegMatrix,
    stat: &Distribution,
    m0: &Distribution,
) -> Result<EdgeIdentity> {
    m0.ensure_dim(m.dim())?;
    let rate = entropy_rate_objective(pi, m, stat)?;
    let n = m.dim();
    let joint = EdgeDistribution::from_kernel(pi, stat)?;
    let reference: Vec<f64> = (0..n)
        .flat_map(|i| m.row(i).iter().map(move |v| v * m0[i]))
        .collect();
    let lhs = divergence(joint.joint().as_slice(), &reference);
    let rhs = rate + divergence(stat.weights(), m0.weights());
    Ok(EdgeIdentity { lhs, rhs })
}
