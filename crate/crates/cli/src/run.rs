//! Dispatch of a validated problem to the solvers and assembly of the
//! result document.

use bridgeflow_core::cooling::{self, CoolingPlan, EnergyModel};
use bridgeflow_core::entropy::PathMeasure;
use bridgeflow_core::finite_bridge::{self, BridgeProblem, SolverOptions};
use bridgeflow_core::graph::{self, Graph};
use bridgeflow_core::simulate;
use bridgeflow_core::stationary::{self, StationaryOptions, StationaryProblem};
use bridgeflow_core::{Error, NonnegMatrix};
use serde_json::{json, Value};

use crate::spec::{Kind, Problem, Proposal};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// I/O or validation failure.
    Invalid = 1,
    NonConvergence = 2,
    Infeasible = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Exit status for a solver error.
    pub fn of(e: &Error) -> Self {
        match e {
            Error::NonConvergence { .. } => Exit::NonConvergence,
            Error::InfeasibleSupport(_)
            | Error::NotFullyIndecomposable
            | Error::ZeroRow(_)
            | Error::ZeroPotential { .. }
            | Error::NotStronglyConnected => Exit::Infeasible,
            _ => Exit::Invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Warning,
    Error,
}

/// Result of one run: the document to emit (absent on I/O or validation
/// failure), the exit status and the stderr records.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub document: Option<Value>,
    pub exit: Exit,
    pub messages: Vec<(Level, String)>,
}

fn document(kind: Kind, status: &str, key: &str, body: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "kind": kind.name(), "status": status, key: body })
}

fn failure(kind: Kind, e: Error, mut messages: Vec<(Level, String)>) -> Outcome {
    let exit = Exit::of(&e);
    messages.push((Level::Error, e.to_string()));
    let doc = match (&e, exit) {
        (Error::NonConvergence { iterations, residual }, _) => Some(document(
            kind,
            "nonconvergence",
            "error",
            json!({ "message": e.to_string(), "iterations": iterations, "residual": residual }),
        )),
        (_, Exit::Infeasible) => {
            Some(document(kind, "infeasible", "error", json!({ "message": e.to_string() })))
        }
        _ => None,
    };
    Outcome { document: doc, exit, messages }
}

fn value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("result types serialize to JSON")
}

/// Solves a validated problem.
pub fn run(p: &Problem) -> Outcome {
    let mut messages = Vec::new();
    match solve(p, &mut messages) {
        Ok(result) => Outcome { document: Some(document(p.kind, "ok", "result", result)), exit: Exit::Ok, messages },
        Err(e) => failure(p.kind, e, messages),
    }
}

fn solver_options(p: &Problem) -> SolverOptions {
    SolverOptions { tol: p.settings.tol, max_iters: p.settings.max_iters, trace: p.settings.trace }
}

fn given<T>(v: &Option<T>) -> &T {
    v.as_ref().expect("presence checked during validation")
}

fn solve(p: &Problem, messages: &mut Vec<(Level, String)>) -> Result<Value, Error> {
    let opts = solver_options(p);
    match p.kind {
        Kind::FiniteBridge => {
            let mut prob = BridgeProblem::new(given(&p.kernels).clone(), given(&p.nu0).clone(), given(&p.nu_n).clone())?;
            if let Some(mu) = &p.mu {
                prob = prob.with_prior_initial(mu.clone())?;
            }
            let feasibility = finite_bridge::check_feasibility(&prob)?;
            if !feasibility.positive {
                messages.push((
                    Level::Warning,
                    "the prior's N-step transition matrix has zero entries; a solution exists only for compatible marginals".into(),
                ));
            }
            let (potentials, solution) = finite_bridge::solve(&prob, &opts)?;
            Ok(json!({ "solution": value(solution), "potentials": value(potentials), "feasibility": value(feasibility) }))
        }
        Kind::Stationary => {
            let prob = StationaryProblem::new(given(&p.prior).clone(), given(&p.target).clone())?;
            let sopts = StationaryOptions { solver: opts, strict: p.settings.strict };
            if !p.settings.strict && !graph::is_fully_indecomposable(prob.prior()) {
                messages.push((
                    Level::Warning,
                    "prior is not fully indecomposable; solving without the structural guarantee".into(),
                ));
            }
            let solution = stationary::solve_stationary(&prob, &sopts)?;
            let reversibility = stationary::verify_reversibility_inheritance(&prob, &solution, p.mu.as_ref())?;
            Ok(json!({ "solution": value(solution), "reversibility": value(reversibility) }))
        }
        Kind::CoolFast | Kind::CoolAsymptotic => {
            let model = EnergyModel::new(given(&p.energies).clone(), *given(&p.kt))?;
            let proposal = match given(&p.proposal) {
                Proposal::Matrix(m) => m.clone(),
                Proposal::Graph(g) => cooling::max_degree_proposal(g)?,
                Proposal::Uniform(n) => cooling::uniform_proposal(*n),
            };
            let plan = CoolingPlan::new(*given(&p.kt_eff), proposal, p.horizon);
            let prior = plan.prior(&model)?;
            let result = if p.kind == Kind::CoolFast {
                value(cooling::fast_cool(&model, &plan, given(&p.nu0), &opts)?)
            } else {
                value(cooling::asymptotic_cool(&model, &plan, &opts)?)
            };
            Ok(json!({ "prior": value(prior), "cooling": result }))
        }
        Kind::Check => check(p, &opts),
        Kind::Simulate => {
            let measure = PathMeasure::new(given(&p.nu0).clone(), given(&p.kernels).clone())?;
            let report = simulate::sample_paths(&measure, p.settings.count, p.settings.seed)?;
            let mut out = json!({ "paths": value(report) });
            if let Some(target) = &p.target {
                let flux = simulate::empirical_flux(given(&p.prior), target, p.settings.count, p.settings.seed)?;
                out["flux"] = value(flux);
            }
            Ok(out)
        }
    }
}

fn structure(g: &Graph, m: &NonnegMatrix) -> Value {
    let zero_rows: Vec<usize> = m.row_sums().iter().enumerate().filter(|(_, &s)| s == 0.0).map(|(i, _)| i).collect();
    json!({
        "n": g.n(),
        "strongly_connected": graph::is_strongly_connected(g),
        "period": graph::period(g).ok(),
        "indecomposable": graph::is_indecomposable(m),
        "fully_indecomposable": graph::is_fully_indecomposable(m),
        "zero_rows": zero_rows,
    })
}

fn check(p: &Problem, opts: &SolverOptions) -> Result<Value, Error> {
    let prior = match (&p.prior, &p.kernels) {
        (Some(m), _) => m.clone(),
        (None, Some(ks)) => ks[0].clone(),
        (None, None) => unreachable!("validation requires a prior"),
    };
    let g = p.graph.clone().unwrap_or_else(|| Graph::from_pattern(&prior));
    let mut out = json!({ "structure": structure(&g, &prior) });
    if let Some(target) = &p.target {
        let support = Graph::from_pattern(&prior);
        out["invariant"] = value(stationary::invariant_distributions_exist(&support, target, opts)?);
    }
    if let (Some(nu0), Some(nu_n), Some(ks)) = (&p.nu0, &p.nu_n, &p.kernels) {
        let prob = BridgeProblem::new(ks.clone(), nu0.clone(), nu_n.clone())?;
        let report = finite_bridge::check_feasibility(&prob)?;
        let product = report.product.clone();
        let rows: Vec<f64> = nu0.weights().to_vec();
        out["feasibility"] = json!({
            "report": value(report),
            "coupling_exists": graph::coupling_exists(&product, &rows, nu_n.weights())?,
        });
    }
    Ok(out)
}
