//! Infinite-horizon steering: the stationary bridge.
//!
//! Minimizing the relative entropy rate against a time-invariant prior `M`,
//! subject to `Π'π = π` and `Π 𝟙 = 𝟙`, reduces to a one-step bridge whose
//! two marginals are both `π`. Its solution is
//! `Π* = Diag(φ_0)^{-1} M Diag(φ_1)` with `φ_0 = M φ_1`, `φ̂_1 = M' φ̂_0`
//! and `φ_0 ∘ φ̂_0 = φ_1 ∘ φ̂_1 = π`.
//!
//! Full indecomposability of `M` is the structural gate. It guarantees a
//! solution for the uniform target; a general positive `π` must in addition
//! be attainable, i.e. carried to itself by some coupling on the support of
//! `M`, and the solver reports `InfeasibleSupport` when it is not. When the
//! prior is reversible, so is `Π*` with respect to `π`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::entropy::entropy_rate_objective;
use crate::error::{Error, Result};
use crate::finite_bridge::{self, BridgeProblem, SolverOptions};
use crate::graph::{adjacency, is_fully_indecomposable, max_coupling, Graph};
use crate::matrix::{l1_distance, Distribution, NonnegMatrix};

/// Threshold below which a kernel counts as reversible.
pub const REVERSIBLE_TOL: f64 = 1e-10;
/// Stricter threshold applied to the prior in the reversibility-transfer check.
pub const PRIOR_REVERSIBLE_TOL: f64 = 1e-12;
/// Accepted invariance defect `‖Π'π − π‖₁` for an existence witness.
pub const INVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProblem {
    prior: NonnegMatrix,
    target: Distribution,
}

impl StationaryProblem {
    pub fn new(prior: NonnegMatrix, target: Distribution) -> Result<Self> {
        target.ensure_dim(prior.dim())?;
        target.ensure_probability()?;
        if !target.is_strictly_positive() {
            return Err(Error::InvalidDistribution("target must be positive on every state".into()));
        }
        Ok(Self { prior, target })
    }

    pub fn prior(&self) -> &NonnegMatrix {
        &self.prior
    }

    pub fn target(&self) -> &Distribution {
        &self.target
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub solver: SolverOptions,
    /// Refuse priors that are not fully indecomposable instead of attempting the solve.
    pub strict: bool,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), strict: true }
    }
}

impl StationaryOptions {
    pub fn lenient() -> Self {
        Self { strict: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneStepPotentials {
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phihat0: Vec<f64>,
    pub phihat1: Vec<f64>,
}

impl OneStepPotentials {
    pub fn scaled(&self, c: f64) -> Self {
        let mul = |v: &[f64], s: f64| v.iter().map(|x| x * s).collect();
        Self {
            phi0: mul(&self.phi0, c),
            phi1: mul(&self.phi1, c),
            phihat0: mul(&self.phihat0, 1.0 / c),
            phihat1: mul(&self.phihat1, 1.0 / c),
        }
    }

    /// `Diag(φ_0)^{-1} M Diag(φ_1)`.
    pub fn kernel(&self, prior: &NonnegMatrix) -> Result<NonnegMatrix> {
        let n = prior.dim();
        let data = (0..n)
            .flat_map(|i| prior.row(i).iter().zip(&self.phi1).map(move |(m, f1)| m * f1 / self.phi0[i]))
            .collect();
        NonnegMatrix::from_row_major(n, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySolution {
    pub kernel: NonnegMatrix,
    pub potentials: OneStepPotentials,
    /// Entropy-rate cost `Σ_i D(Π*_i·‖m_i·) π(i)`.
    pub objective: f64,
    /// `‖Π*'π − π‖₁`.
    pub invariance_residual: f64,
    /// `max_ij |π_i Π*_ij − π_j Π*_ji|`.
    pub reversibility_residual: f64,
    pub reversible: bool,
    pub fully_indecomposable: bool,
    pub iterations: usize,
    /// `(iteration, residual)` per sweep when tracing was requested.
    pub trace: Vec<(usize, f64)>,
}

fn ensure_no_zero_row(m: &NonnegMatrix) -> Result<()> {
    match m.row_sums().iter().position(|&s| s == 0.0) {
        Some(i) => Err(Error::ZeroRow(i)),
        None => Ok(()),
    }
}

/// Solves the one-step bridge with both marginals equal to the target.
pub fn solve_stationary(prob: &StationaryProblem, opts: &StationaryOptions) -> Result<StationarySolution> {
    ensure_no_zero_row(&prob.prior)?;
    let fully_indecomposable = is_fully_indecomposable(&prob.prior);
    if !fully_indecomposable && opts.strict {
        return Err(Error::NotFullyIndecomposable);
    }
    let bridge = BridgeProblem::new(vec![prob.prior.clone()], prob.target.clone(), prob.target.clone())?;
    let (pair, sol) = finite_bridge::solve(&bridge, &opts.solver)?;
    let mut phi = pair.phi.into_iter();
    let mut phihat = pair.phihat.into_iter();
    let potentials = OneStepPotentials {
        phi0: phi.next().expect("two time slices"),
        phi1: phi.next().expect("two time slices"),
        phihat0: phihat.next().expect("two time slices"),
        phihat1: phihat.next().expect("two time slices"),
    };
    let kernel = sol.policy.into_iter().next().expect("one step");
    let objective = entropy_rate_objective(&kernel, &prob.prior, &prob.target)?;
    let invariance_residual = l1_distance(&kernel.tmul_vec(prob.target.weights()), prob.target.weights());
    let reversibility_residual = check_reversibility(&kernel, &prob.target)?;
    Ok(StationarySolution {
        kernel,
        potentials,
        objective,
        invariance_residual,
        reversibility_residual,
        reversible: reversibility_residual <= REVERSIBLE_TOL,
        fully_indecomposable,
        iterations: sol.iterations,
        trace: sol.trace,
    })
}

/// `max_ij |stat_i k_ij − stat_j k_ji|`, the largest entry of
/// `Diag(stat) K − K' Diag(stat)`.
pub fn check_reversibility(kernel: &NonnegMatrix, stat: &Distribution) -> Result<f64> {
    stat.ensure_dim(kernel.dim())?;
    let n = kernel.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let flux = stat[i] * kernel.get(i, j) - stat[j] * kernel.get(j, i);
            worst = worst.max(flux.abs());
        }
    }
    Ok(worst)
}

/// Stationary law of a row-stochastic kernel by power iteration on the lazy
/// chain `(I + K) / 2`, which shares its invariant vectors with `K`.
pub fn stationary_distribution(kernel: &NonnegMatrix, tol: f64, max_iters: usize) -> Result<Distribution> {
    kernel.ensure_stochastic(crate::matrix::STOCHASTIC_TOL)?;
    let n = kernel.dim();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iters {
        let kv = kernel.tmul_vec(&v);
        let mut next: Vec<f64> = v.iter().zip(&kv).map(|(a, b)| 0.5 * (a + b)).collect();
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= mass);
        let change = l1_distance(&next, &v);
        v = next;
        if change <= tol {
            return Distribution::normalized(v);
        }
    }
    Err(Error::NonConvergence { iterations: max_iters, residual: l1_distance(&kernel.tmul_vec(&v), &v) })
}

/// The only measure (up to scale on each component) a prior can be
/// reversible with: `μ_j = μ_i m_ij / m_ji` along a breadth-first spanning
/// forest of the two-way edges (`m_ij > 0` and `m_ji > 0`), each tree rooted
/// at weight 1, then normalized. Whether the prior really is reversible with
/// it is left to [`check_reversibility`].
pub fn reversing_measure_candidate(prior: &NonnegMatrix) -> Result<Distribution> {
    ensure_no_zero_row(prior)?;
    let n = prior.dim();
    let mut mu: Vec<Option<f64>> = vec![None; n];
    for root in 0..n {
        if mu[root].is_some() {
            continue;
        }
        mu[root] = Some(1.0);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            let mi = mu[i].expect("queued vertices are weighted");
            for (j, slot) in mu.iter_mut().enumerate() {
                let (fwd, bwd) = (prior.get(i, j), prior.get(j, i));
                if slot.is_none() && fwd > 0.0 && bwd > 0.0 {
                    *slot = Some(mi * fwd / bwd);
                    queue.push_back(j);
                }
            }
        }
    }
    Distribution::normalized(mu.into_iter().map(|w| w.expect("every vertex is a root or reached")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReversibilityVerdict {
    /// Prior reversible and the optimal kernel reversible with respect to the target.
    Holds,
    /// Prior reversible but the optimal kernel is not: a solver or tolerance failure.
    Violated,
    /// The hypothesis fails; nothing is claimed about the optimal kernel.
    PriorNotReversible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityReport {
    /// Measure the prior was tested against.
    pub measure: Distribution,
    pub prior_residual: f64,
    pub solution_residual: f64,
    pub verdict: ReversibilityVerdict,
}

/// Checks that a reversible prior yields a reversible optimal kernel.
///
/// `mu` is the measure the prior is claimed reversible with; when absent it is
/// computed from the prior (see [`reversing_measure_candidate`]).
pub fn verify_reversibility_inheritance(
    prob: &StationaryProblem,
    sol: &StationarySolution,
    mu: Option<&Distribution>,
) -> Result<ReversibilityReport> {
    let measure = match mu {
        Some(m) => {
            m.ensure_dim(prob.prior.dim())?;
            Distribution::normalized(m.weights().to_vec())?
        }
        None => reversing_measure_candidate(&prob.prior)?,
    };
    let prior_residual = check_reversibility(&prob.prior, &measure)?;
    let solution_residual = check_reversibility(&sol.kernel, &prob.target)?;
    let verdict = if prior_residual > PRIOR_REVERSIBLE_TOL {
        ReversibilityVerdict::PriorNotReversible
    } else if solution_residual <= REVERSIBLE_TOL {
        ReversibilityVerdict::Holds
    } else {
        ReversibilityVerdict::Violated
    };
    Ok(ReversibilityReport { measure, prior_residual, solution_residual, verdict })
}

/// Maximum-entropy-rate chain on `g` with the given invariant law: the
/// stationary bridge with the adjacency matrix as prior.
pub fn max_entropy_rate_chain(
    g: &Graph,
    target: &Distribution,
    opts: &StationaryOptions,
) -> Result<StationarySolution> {
    let prob = StationaryProblem::new(adjacency(g), target.clone())?;
    solve_stationary(&prob, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    /// Some stochastic kernel compatible with the graph leaves the target invariant.
    pub exists: bool,
    /// The adjacency matrix is fully indecomposable. Reported for reference:
    /// it neither implies nor is implied by `exists` for a general target.
    pub fully_indecomposable: bool,
    /// A compatible invariant kernel: the identity when every vertex has a
    /// self-loop, else the maximum-entropy-rate chain when the stationary
    /// solve converges, else one read off the maximum-flow coupling.
    pub witness: Option<NonnegMatrix>,
    pub invariance_residual: Option<f64>,
}

/// Whether some stochastic kernel supported on `g` has `target` as an invariant law.
///
/// Decided exactly: such a kernel `Π` exists iff some coupling `Γ` supported
/// on the edges has both marginals equal to the target (`Γ = Diag(π) Π`),
/// which is a maximum-flow question.
pub fn invariant_distributions_exist(
    g: &Graph,
    target: &Distribution,
    opts: &SolverOptions,
) -> Result<ExistenceReport> {
    let prob = StationaryProblem::new(adjacency(g), target.clone())?;
    let fully_indecomposable = is_fully_indecomposable(prob.prior());
    let absent = ExistenceReport { exists: false, fully_indecomposable, witness: None, invariance_residual: None };
    if (0..g.n()).all(|i| g.has_edge(i, i)) {
        return Ok(ExistenceReport {
            exists: true,
            fully_indecomposable,
            witness: Some(NonnegMatrix::identity(g.n())),
            invariance_residual: Some(0.0),
        });
    }
    let w = target.weights();
    let flow = max_coupling(prob.prior(), w, w)?;
    if flow.value < 1.0 - 1e-9 {
        return Ok(absent);
    }
    let lenient = StationaryOptions { solver: *opts, strict: false };
    let kernel = match solve_stationary(&prob, &lenient) {
        Ok(sol) if sol.invariance_residual <= INVARIANCE_TOL => sol.kernel,
        Ok(_) | Err(Error::NonConvergence { .. } | Error::InfeasibleSupport(_)) => {
            let n = g.n();
            let gamma = flow.coupling;
            let data = (0..n)
                .flat_map(|i| {
                    let s: f64 = gamma.row(i).iter().sum();
                    gamma.row(i).iter().map(move |v| v / s).collect::<Vec<_>>()
                })
                .collect();
            NonnegMatrix::from_row_major(n, data)?
        }
        Err(e) => return Err(e),
    };
    let residual = l1_distance(&kernel.tmul_vec(w), w);
    Ok(ExistenceReport {
        exists: true,
        fully_indecomposable,
        witness: Some(kernel),
        invariance_residual: Some(residual),
    })
}
