//! Boltzmann laws, Metropolis kernels, and the two cooling pipelines:
//! finite-horizon steering to the Boltzmann law of a lower temperature, and
//! a stationary kernel that keeps the chain there.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_bridge::{self, check_feasibility, BridgeProblem, BridgeSolution, FeasibilityReport, SolverOptions};
use crate::graph::{is_fully_indecomposable, Graph};
use crate::matrix::{Distribution, NonnegMatrix, STOCHASTIC_TOL};
use crate::stationary::{
    check_reversibility, solve_stationary, StationaryOptions, StationaryProblem, StationarySolution,
    PRIOR_REVERSIBLE_TOL,
};

/// Reversibility bound asserted for the cooled kernel.
pub const COOLED_REVERSIBLE_TOL: f64 = 1e-9;

/// Largest asymmetry tolerated in a proposal matrix.
const SYMMETRY_TOL: f64 = 1e-12;

/// Vertex energies and the thermal scale `kT` (same units).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyModel {
    energies: Vec<f64>,
    kt: f64,
}

impl EnergyModel {
    pub fn new(energies: Vec<f64>, kt: f64) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::Degenerate("energy model needs at least one state".into()));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidDistribution(format!("energy {i} is not finite")));
        }
        if !(kt.is_finite() && kt > 0.0) {
            return Err(Error::Degenerate(format!("kT must be positive and finite, got {kt}")));
        }
        Ok(Self { energies, kt })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Same energies at another temperature.
    pub fn at(&self, kt: f64) -> Result<Self> {
        Self::new(self.energies.clone(), kt)
    }
}

/// `π_T(i) = exp(−E_i / kT) / Z(T)`, evaluated on energies shifted by their minimum.
pub fn boltzmann(model: &EnergyModel) -> Distribution {
    let emin = model.energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = model.energies.iter().map(|e| (-(e - emin) / model.kt).exp()).collect();
    Distribution::normalized(w).expect("minimum-energy state has weight one")
}

/// Metropolis kernel for proposal `q`:
/// `p_ij = q_ij min(exp((E_i − E_j)/kT), 1)` off the diagonal, rows completed on the diagonal.
pub fn metropolis(model: &EnergyModel, q: &NonnegMatrix) -> Result<NonnegMatrix> {
    let n = model.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.dim() });
    }
    let asym = q.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    q.ensure_stochastic(STOCHASTIC_TOL)?;
    let e = &model.energies;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let mut off = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let accept = ((e[i] - e[j]) / model.kt).exp().min(1.0);
            let p = q.get(i, j) * accept;
            data[i * n + j] = p;
            off += p;
        }
        let diag = 1.0 - off;
        if diag < -STOCHASTIC_TOL {
            return Err(Error::NotStochastic { row: i, sum: off });
        }
        data[i * n + i] = diag.max(0.0);
    }
    NonnegMatrix::from_row_major(n, data)
}

/// Proposal with every entry `1/n`.
pub fn uniform_proposal(n: usize) -> NonnegMatrix {
    NonnegMatrix::filled(n, 1.0 / n as f64).expect("positive dimension")
}

/// Lazy max-degree walk on a symmetric graph: `1/(d_max + 1)` on every
/// off-diagonal edge, remainder on the diagonal.
pub fn max_degree_proposal(g: &Graph) -> Result<NonnegMatrix> {
    if !g.is_symmetric() {
        return Err(Error::InvalidGraph("proposal graph must be symmetric".into()));
    }
    let n = g.n();
    let degree = |i: usize| g.successors(i).iter().filter(|&&j| j != i).count();
    let dmax = (0..n).map(degree).max().unwrap_or(0);
    let w = 1.0 / (dmax + 1) as f64;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for &j in g.successors(i).iter().filter(|&&j| j != i) {
            data[i * n + j] = w;
        }
        data[i * n + i] = 1.0 - degree(i) as f64 * w;
    }
    NonnegMatrix::from_row_major(n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingPlan {
    /// Target thermal scale `kT_eff ≤ kT`.
    pub kt_eff: f64,
    /// Symmetric stochastic proposal of an irreducible chain.
    pub proposal: NonnegMatrix,
    /// Steering horizon; needed for fast cooling only.
    pub horizon: Option<usize>,
}

impl CoolingPlan {
    pub fn new(kt_eff: f64, proposal: NonnegMatrix, horizon: Option<usize>) -> Self {
        Self { kt_eff, proposal, horizon }
    }

    fn validate(&self, model: &EnergyModel) -> Result<()> {
        if !(self.kt_eff.is_finite() && self.kt_eff > 0.0) {
            return Err(Error::Degenerate(format!("kT_eff must be positive, got {}", self.kt_eff)));
        }
        if self.kt_eff > model.kt {
            return Err(Error::Degenerate(format!(
                "kT_eff = {} exceeds the prior kT = {}",
                self.kt_eff, model.kt
            )));
        }
        if self.proposal.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: self.proposal.dim() });
        }
        Ok(())
    }

    /// Metropolis prior `P(T)` at the model's temperature.
    pub fn prior(&self, model: &EnergyModel) -> Result<NonnegMatrix> {
        metropolis(model, &self.proposal)
    }

    pub fn target(&self, model: &EnergyModel) -> Result<Distribution> {
        Ok(boltzmann(&model.at(self.kt_eff)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastCooling {
    pub feasibility: FeasibilityReport,
    pub target: Distribution,
    pub solution: BridgeSolution,
}

/// Steers `nu0` to `π_{T_eff}` in `plan.horizon` steps against the Metropolis prior `P(T)`.
pub fn fast_cool(
    model: &EnergyModel,
    plan: &CoolingPlan,
    nu0: &Distribution,
    opts: &SolverOptions,
) -> Result<FastCooling> {
    plan.validate(model)?;
    let horizon = plan
        .horizon
        .ok_or_else(|| Error::Degenerate("fast cooling needs a horizon".into()))?;
    let prior = plan.prior(model)?;
    fast_cool_with_prior(&prior, &plan.target(model)?, horizon, nu0, opts)
}

/// Fast cooling against a caller-supplied prior kernel.
pub fn fast_cool_with_prior(
    prior: &NonnegMatrix,
    target: &Distribution,
    horizon: usize,
    nu0: &Distribution,
    opts: &SolverOptions,
) -> Result<FastCooling> {
    let prob = BridgeProblem::homogeneous(prior.clone(), horizon, nu0.clone(), target.clone())?;
    let feasibility = check_feasibility(&prob)?;
    let (_, solution) = finite_bridge::solve(&prob, opts)?;
    Ok(FastCooling { feasibility, target: target.clone(), solution })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCooling {
    pub target: Distribution,
    pub solution: StationarySolution,
    /// `max_ij |π_T(i) p_ij − π_T(j) p_ji|` for the prior.
    pub prior_reversibility_residual: f64,
    /// Prior reversible and the cooled kernel reversible w.r.t. `π_{T_eff}`
    /// within [`COOLED_REVERSIBLE_TOL`]; `None` when the prior is not reversible.
    pub reversibility_inherited: Option<bool>,
}

/// Stationary kernel closest in entropy rate to `P(T)` that leaves `π_{T_eff}` invariant.
pub fn asymptotic_cool(model: &EnergyModel, plan: &CoolingPlan, opts: &SolverOptions) -> Result<AsymptoticCooling> {
    plan.validate(model)?;
    let prior = plan.prior(model)?;
    if !is_fully_indecomposable(&prior) {
        return Err(Error::NotFullyIndecomposable);
    }
    let target = plan.target(model)?;
    let prob = StationaryProblem::new(prior.clone(), target.clone())?;
    let solution = solve_stationary(&prob, &StationaryOptions { solver: *opts, strict: true })?;
    let prior_reversibility_residual = check_reversibility(&prior, &boltzmann(model))?;
    let reversibility_inherited = (prior_reversibility_residual <= PRIOR_REVERSIBLE_TOL)
        .then_some(solution.reversibility_residual <= COOLED_REVERSIBLE_TOL);
    Ok(AsymptoticCooling { target, solution, prior_reversibility_residual, reversibility_inherited })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> EnergyModel {
        EnergyModel::new(vec![0.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn boltzmann_examples() {
        assert_eq!(boltzmann(&EnergyModel::new(vec![0.0, 0.0], 3.0).unwrap()).weights(), &[0.5, 0.5]);
        let p = boltzmann(&two_state());
        let z = 1.0 + (-1.0f64).exp();
        assert!((z - 1.367879).abs() < 1e-6);
        assert!((p[0] - 0.731059).abs() < 1e-6);
        assert!((p[1] - 0.268941).abs() < 1e-6);
        let hot = boltzmann(&EnergyModel::new(vec![0.0, 1.0], 1e9).unwrap());
        assert!((hot[0] - 0.5).abs() < 1e-8 && (hot[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn boltzmann_survives_large_energies() {
        let p = boltzmann(&EnergyModel::new(vec![1e6, 1e6 + 1.0], 1.0).unwrap());
        assert!((p[0] - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn energy_model_validation() {
        assert!(EnergyModel::new(vec![0.0], 0.0).is_err());
        assert!(EnergyModel::new(vec![f64::NAN], 1.0).is_err());
        assert!(EnergyModel::new(vec![], 1.0).is_err());
    }

    #[test]
    fn metropolis_examples() {
        let p = metropolis(&two_state(), &uniform_proposal(2)).unwrap();
        assert!((p.get(0, 1) - 0.183940).abs() < 1e-6);
        assert!((p.get(0, 0) - 0.816060).abs() < 1e-6);
        assert_eq!(p.get(1, 0), 0.5);
        assert_eq!(p.get(1, 1), 0.5);
        let pi = boltzmann(&two_state());
        assert!((pi[0] * p.get(0, 1) - 0.134470).abs() < 1e-6);
        assert!((pi[1] * p.get(1, 0) - 0.134470).abs() < 1e-6);

        let q = NonnegMatrix::from_rows(vec![vec![0.2, 0.8], vec![0.8, 0.2]]).unwrap();
        let flat = EnergyModel::new(vec![2.0, 2.0], 0.7).unwrap();
        assert!(metropolis(&flat, &q).unwrap().max_abs_diff(&q) < 1e-15);

        let cold = metropolis(&EnergyModel::new(vec![0.0, 1.0], 1e-3).unwrap(), &uniform_proposal(2)).unwrap();
        assert!(cold.get(0, 1) < 1e-300);
        assert_eq!(cold.get(1, 0), 0.5);
    }

    #[test]
    fn metropolis_rejects_bad_proposals() {
        let asym = NonnegMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap();
        assert!(matches!(metropolis(&two_state(), &asym), Err(Error::NotSymmetric(_))));
        let sub = NonnegMatrix::from_rows(vec![vec![0.2, 0.3], vec![0.3, 0.2]]).unwrap();
        assert!(matches!(metropolis(&two_state(), &sub), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn max_degree_proposal_is_symmetric_stochastic() {
        let g = Graph::new(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).unwrap();
        let q = max_degree_proposal(&g).unwrap();
        assert_eq!(q.asymmetry(), 0.0);
        assert!(q.stochastic_defect() < 1e-15);
        assert_eq!(q.get(0, 2), 0.0);
        assert!(max_degree_proposal(&Graph::new(2, [(0, 1)]).unwrap()).is_err());
    }

    #[test]
    fn nothing_to_steer_at_equal_temperature() {
        let model = two_state();
        let plan = CoolingPlan::new(1.0, uniform_proposal(2), Some(4));
        let prior = plan.prior(&model).unwrap();
        let fc = fast_cool(&model, &plan, &boltzmann(&model), &SolverOptions::default()).unwrap();
        for pi in &fc.solution.policy {
            assert!(pi.max_abs_diff(&prior) < 1e-12);
        }
        assert!(fc.solution.objective.abs() < 1e-12);

        let ac = asymptotic_cool(&model, &plan, &SolverOptions::default()).unwrap();
        assert!(ac.solution.kernel.max_abs_diff(&prior) < 1e-12);
        assert!(ac.solution.objective.abs() < 1e-12);
    }

    #[test]
    fn fast_cooling_two_state() {
        let model = two_state();
        let plan = CoolingPlan::new(0.5, uniform_proposal(2), Some(8));
        let fc = fast_cool(&model, &plan, &boltzmann(&model), &SolverOptions::default()).unwrap();
        let end = fc.solution.final_marginal();
        assert!((end[0] - 0.880797).abs() < 1e-6);
        assert!(end.l1_distance(&fc.target) <= 1e-8);
        assert!(fc.feasibility.positive);
    }

    #[test]
    fn one_step_cooling_without_a_connecting_edge_is_infeasible() {
        // path graph 0 - 1 - 2: no direct move from 0 to 2
        let g = Graph::new(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).unwrap();
        let model = EnergyModel::new(vec![1.0, 0.5, 0.0], 1.0).unwrap();
        let plan = CoolingPlan::new(0.5, max_degree_proposal(&g).unwrap(), Some(1));
        let nu0 = Distribution::dirac(3, 0);
        let err = fast_cool(&model, &plan, &nu0, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSupport(_)));
    }

    #[test]
    fn heating_is_rejected() {
        let plan = CoolingPlan::new(2.0, uniform_proposal(2), Some(3));
        assert!(asymptotic_cool(&two_state(), &plan, &SolverOptions::default()).is_err());
    }

    #[test]
    fn asymptotic_cooling_two_state() {
        let model = two_state();
        let plan = CoolingPlan::new(0.5, uniform_proposal(2), None);
        let ac = asymptotic_cool(&model, &plan, &SolverOptions::default()).unwrap();
        assert_eq!(ac.reversibility_inherited, Some(true));
        assert!(ac.solution.invariance_residual <= 1e-10);
    }
}
