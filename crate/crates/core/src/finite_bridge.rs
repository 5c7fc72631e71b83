//! Finite-horizon Schrödinger bridge between two marginals.
//!
//! Given prior kernels `M(0..N-1)` and endpoint laws `ν_0`, `ν_N`, the
//! potentials `(φ, φ̂)` solve
//!
//! ```text
//! φ(t)   = M(t) φ(t+1)          (space-time harmonic)
//! φ̂(t+1) = M(t)' φ̂(t)           (space-time co-harmonic)
//! φ(0) ∘ φ̂(0) = ν_0,   φ(N) ∘ φ̂(N) = ν_N
//! ```
//!
//! and the optimal policy is `π*_ij(t) = m_ij(t) φ(t+1, j) / φ(t, i)`. The
//! system is solved by alternating rescaling of the two boundary conditions
//! (Fortet-IPF-Sinkhorn), starting from `φ(N) ≡ 1`.

use serde::Serialize;

use crate::entropy::weighted_row_divergence;
use crate::error::{Error, Result};
use crate::graph::coupling_exists;
use crate::matrix::{l1_distance, linf_distance, Distribution, NonnegMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// L1 tolerance on the boundary couplings.
    pub tol: f64,
    pub max_iters: usize,
    /// Record `(iteration, residual)` after every sweep.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, trace: false }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeProblem {
    kernels: Vec<NonnegMatrix>,
    nu0: Distribution,
    nu_n: Distribution,
    prior_initial: Option<Distribution>,
}

impl BridgeProblem {
    pub fn new(kernels: Vec<NonnegMatrix>, nu0: Distribution, nu_n: Distribution) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Degenerate("horizon must be at least 1".into()));
        }
        let n = kernels[0].dim();
        if let Some(k) = kernels.iter().find(|k| k.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: k.dim() });
        }
        nu0.ensure_dim(n)?;
        nu_n.ensure_dim(n)?;
        nu0.ensure_probability()?;
        nu_n.ensure_probability()?;
        Ok(Self { kernels, nu0, nu_n, prior_initial: None })
    }

    /// Same prior kernel at every one of `horizon` steps.
    pub fn homogeneous(
        kernel: NonnegMatrix,
        horizon: usize,
        nu0: Distribution,
        nu_n: Distribution,
    ) -> Result<Self> {
        Self::new(vec![kernel; horizon], nu0, nu_n)
    }

    /// Attaches the prior's initial measure `μ_0`, which must be positive everywhere.
    pub fn with_prior_initial(mut self, mu0: Distribution) -> Result<Self> {
        mu0.ensure_dim(self.dim())?;
        if !mu0.is_strictly_positive() {
            return Err(Error::InvalidDistribution("prior initial measure must be positive".into()));
        }
        self.prior_initial = Some(mu0);
        Ok(self)
    }

    pub fn kernels(&self) -> &[NonnegMatrix] {
        &self.kernels
    }

    pub fn nu0(&self) -> &Distribution {
        &self.nu0
    }

    pub fn nu_n(&self) -> &Distribution {
        &self.nu_n
    }

    pub fn prior_initial(&self) -> Option<&Distribution> {
        self.prior_initial.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn dim(&self) -> usize {
        self.nu0.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `G = M(0) M(1) ··· M(N-1)`.
    pub product: NonnegMatrix,
    /// All entries of `G` positive: the Schrödinger system then has a unique solution ray.
    pub positive: bool,
    pub zero_entries: Vec<(usize, usize)>,
}

pub fn check_feasibility(prob: &BridgeProblem) -> Result<FeasibilityReport> {
    let mut product = prob.kernels[0].clone();
    for k in &prob.kernels[1..] {
        product = product.matmul(k)?;
    }
    let n = product.dim();
    let zero_entries: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| product.is_zero(i, j))
        .collect();
    Ok(FeasibilityReport { positive: zero_entries.is_empty(), zero_entries, product })
}

/// Potentials `φ(t, ·)` and `φ̂(t, ·)` for `t = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchroedingerPair {
    pub phi: Vec<Vec<f64>>,
    pub phihat: Vec<Vec<f64>>,
}

impl SchroedingerPair {
    pub fn horizon(&self) -> usize {
        self.phi.len() - 1
    }

    /// The pair `(c φ, φ̂ / c)`, which solves the same system.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            phi: self.phi.iter().map(|v| v.iter().map(|x| x * c).collect()).collect(),
            phihat: self.phihat.iter().map(|v| v.iter().map(|x| x / c).collect()).collect(),
        }
    }

    /// `φ(t) ∘ φ̂(t)`.
    pub fn marginal(&self, t: usize) -> Vec<f64> {
        self.phi[t].iter().zip(&self.phihat[t]).map(|(a, b)| a * b).collect()
    }

    /// `max_t ‖φ(t) − M(t) φ(t+1)‖∞`.
    pub fn harmonic_residual(&self, kernels: &[NonnegMatrix]) -> f64 {
        kernels
            .iter()
            .enumerate()
            .map(|(t, m)| linf_distance(&self.phi[t], &m.mul_vec(&self.phi[t + 1])))
            .fold(0.0, f64::max)
    }

    /// `max_t ‖φ̂(t+1) − M(t)' φ̂(t)‖∞`.
    pub fn coharmonic_residual(&self, kernels: &[NonnegMatrix]) -> f64 {
        kernels
            .iter()
            .enumerate()
            .map(|(t, m)| linf_distance(&self.phihat[t + 1], &m.tmul_vec(&self.phihat[t])))
            .fold(0.0, f64::max)
    }

    /// L1 mismatch of the two boundary couplings against `ν_0` and `ν_N`.
    pub fn boundary_residuals(&self, nu0: &Distribution, nu_n: &Distribution) -> (f64, f64) {
        (
            l1_distance(&self.marginal(0), nu0.weights()),
            l1_distance(&self.marginal(self.horizon()), nu_n.weights()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeSolution {
    /// Row-stochastic kernels `π*(0..N-1)`.
    pub policy: Vec<NonnegMatrix>,
    /// Marginal flow `p_0 = ν_0, ..., p_N`.
    pub flow: Vec<Distribution>,
    /// `Σ_t Σ_x D(π*_x·(t)‖m_x·(t)) p_t(x)`.
    pub objective: f64,
    pub iterations: usize,
    /// Final `‖p_N − ν_N‖₁` as measured by the solver.
    pub residual: f64,
    pub trace: Vec<(usize, f64)>,
}

impl BridgeSolution {
    pub fn final_marginal(&self) -> &Distribution {
        self.flow.last().expect("flow has N + 1 entries")
    }
}

/// `num ⊘ den` with `0/0 := 0`; positive mass over a zero denominator is infeasible.
fn divide_marginal(num: &[f64], den: &[f64], which: &str) -> Result<Vec<f64>> {
    num.iter()
        .zip(den)
        .enumerate()
        .map(|(i, (&a, &b))| {
            if a == 0.0 {
                Ok(0.0)
            } else if b == 0.0 {
                Err(Error::InfeasibleSupport(format!(
                    "{which} puts mass {a} on state {i}, which the prior cannot connect to the other endpoint"
                )))
            } else {
                Ok(a / b)
            }
        })
        .collect()
}

fn backward_pass(kernels: &[NonnegMatrix], phi_end: Vec<f64>) -> Vec<Vec<f64>> {
    let mut phi = vec![Vec::new(); kernels.len() + 1];
    phi[kernels.len()] = phi_end;
    for t in (0..kernels.len()).rev() {
        phi[t] = kernels[t].mul_vec(&phi[t + 1]);
    }
    phi
}

fn forward_pass(kernels: &[NonnegMatrix], phihat_start: Vec<f64>) -> Vec<Vec<f64>> {
    let mut phihat = Vec::with_capacity(kernels.len() + 1);
    phihat.push(phihat_start);
    for k in kernels {
        let next = k.tmul_vec(phihat.last().expect("non-empty"));
        phihat.push(next);
    }
    phihat
}

/// Solves the Schrödinger system and assembles the optimal Markov policy.
///
/// Each sweep runs the backward pass from the current `φ(N)`, resets
/// `φ̂(0) = ν_0 ⊘ φ(0)`, runs the forward pass, and measures
/// `‖φ(N) ∘ φ̂(N) − ν_N‖₁`. Below `tol` the current pair is returned: both
/// recursions and the initial coupling then hold to rounding. Otherwise
/// `φ(N) = ν_N ⊘ φ̂(N)`, rescaled to unit mass.
pub fn solve(prob: &BridgeProblem, opts: &SolverOptions) -> Result<(SchroedingerPair, BridgeSolution)> {
    let n = prob.dim();
    let kernels = prob.kernels();
    let mut phi_end = vec![1.0; n];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;

    for iter in 1..=opts.max_iters {
        sweeps = iter;
        let phi = backward_pass(kernels, phi_end);
        let phihat0 = divide_marginal(prob.nu0.weights(), &phi[0], "initial marginal")?;
        let phihat = forward_pass(kernels, phihat0);
        let end: Vec<f64> = phi[prob.horizon()].iter().zip(&phihat[prob.horizon()]).map(|(a, b)| a * b).collect();
        residual = l1_distance(&end, prob.nu_n.weights());
        if opts.trace {
            trace.push((iter, residual));
        }
        if residual <= opts.tol {
            let pair = SchroedingerPair { phi, phihat };
            let policy = assemble_policy(&pair, kernels, &prob.nu0)?;
            let flow = marginal_flow(&prob.nu0, &policy)?;
            let objective = policy
                .iter()
                .zip(kernels)
                .zip(&flow)
                .map(|((pi, m), p)| weighted_row_divergence(pi, m, p.weights()))
                .sum();
            let residual = l1_distance(flow.last().expect("non-empty").weights(), prob.nu_n.weights());
            return Ok((pair, BridgeSolution { policy, flow, objective, iterations: iter, residual, trace }));
        }
        if !residual.is_finite() {
            break;
        }
        let mut next = divide_marginal(prob.nu_n.weights(), &phihat[prob.horizon()], "final marginal")?;
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= mass);
        phi_end = next;
    }
    Err(classify_failure(prob, sweeps, residual))
}

/// A failed iteration is reported as infeasible when no coupling supported on
/// the pattern of `M(0)···M(N−1)` carries `ν_0` to `ν_N`, and as
/// non-convergence otherwise.
fn classify_failure(prob: &BridgeProblem, iterations: usize, residual: f64) -> Error {
    let feasible = check_feasibility(prob)
        .and_then(|f| coupling_exists(&f.product, prob.nu0.weights(), prob.nu_n.weights()));
    match feasible {
        Ok(false) => Error::InfeasibleSupport(
            "no coupling supported on the prior's N-step transition pattern has the requested marginals".into(),
        ),
        _ => Error::NonConvergence { iterations, residual },
    }
}

/// Builds `π*_ij(t) = m_ij(t) φ(t+1, j) / φ(t, i)`.
///
/// Mass is propagated from `initial` through the assembled kernels. Rows with
/// `φ(t, i) = 0` and no mass get the normalized prior row (left zero when the
/// prior row is zero); a zero potential on a state that carries mass is an error.
pub fn assemble_policy(
    pair: &SchroedingerPair,
    kernels: &[NonnegMatrix],
    initial: &Distribution,
) -> Result<Vec<NonnegMatrix>> {
    if pair.phi.len() != kernels.len() + 1 || pair.phihat.len() != kernels.len() + 1 {
        return Err(Error::DimensionMismatch { expected: kernels.len() + 1, found: pair.phi.len() });
    }
    let mut mass = initial.weights().to_vec();
    let mut policy = Vec::with_capacity(kernels.len());
    for (t, m) in kernels.iter().enumerate() {
        let n = m.dim();
        let (here, next) = (&pair.phi[t], &pair.phi[t + 1]);
        if here.len() != n || next.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: here.len() });
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = m.row(i);
            if here[i] > 0.0 {
                data.extend(row.iter().zip(next).map(|(mij, fj)| mij * fj / here[i]));
            } else if mass[i] > 0.0 {
                return Err(Error::ZeroPotential { time: t, state: i });
            } else {
                let s: f64 = row.iter().sum();
                data.extend(row.iter().map(|v| if s > 0.0 { v / s } else { 0.0 }));
            }
        }
        let pi = NonnegMatrix::from_row_major(n, data)?;
        mass = pi.tmul_vec(&mass);
        policy.push(pi);
    }
    Ok(policy)
}

/// Forward propagation `p_{t+1} = Π(t)' p_t`.
pub fn marginal_flow(initial: &Distribution, policy: &[NonnegMatrix]) -> Result<Vec<Distribution>> {
    initial.ensure_probability()?;
    let mut flow = Vec::with_capacity(policy.len() + 1);
    flow.push(initial.clone());
    for k in policy {
        let current = flow.last().expect("non-empty");
        current.ensure_dim(k.dim())?;
        let next = k.tmul_vec(current.weights());
        flow.push(Distribution::from_flow(next));
    }
    Ok(flow)
}
