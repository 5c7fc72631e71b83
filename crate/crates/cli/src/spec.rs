//! Problem documents: strict JSON parsing and validation with JSON-pointer
//! diagnostics.

use std::fmt;

use bridgeflow_core::matrix::PROBABILITY_TOL;
use bridgeflow_core::{Distribution, Graph, NonnegMatrix};
use serde::Deserialize;
use serde_path_to_error::Segment;

/// Which solver a document is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    FiniteBridge,
    Stationary,
    CoolFast,
    CoolAsymptotic,
    Check,
    Simulate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::FiniteBridge => "finite_bridge",
            Kind::Stationary => "stationary",
            Kind::CoolFast => "cool_fast",
            Kind::CoolAsymptotic => "cool_asymptotic",
            Kind::Check => "check",
            Kind::Simulate => "simulate",
        }
    }

    /// Top-level fields a document of this kind may carry besides `kind` and `options`.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Kind::FiniteBridge => &["graph", "matrix", "kernels", "horizon", "nu0", "nuN", "mu"],
            Kind::Stationary => &["graph", "matrix", "target", "mu"],
            Kind::CoolFast => &["graph", "energies", "kT", "kT_eff", "proposal", "horizon", "nu0"],
            Kind::CoolAsymptotic => &["graph", "energies", "kT", "kT_eff", "proposal"],
            Kind::Check => &["graph", "matrix", "kernels", "horizon", "nu0", "nuN", "target"],
            Kind::Simulate => &["graph", "matrix", "kernels", "horizon", "nu0", "target"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// `[i, j, value]` weights on listed edges; unlisted edges weigh 1.
    #[serde(default)]
    pub weights: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ProposalSpec {
    Matrix(Vec<Vec<f64>>),
    Named(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub count: Option<usize>,
    pub trace: Option<bool>,
}

/// A problem document as written. Nothing is checked beyond JSON types until
/// [`validate`] runs.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: Option<Kind>,
    pub graph: Option<GraphSpec>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub kernels: Option<Vec<Vec<Vec<f64>>>>,
    pub horizon: Option<usize>,
    pub nu0: Option<Vec<f64>>,
    #[serde(rename = "nuN")]
    pub nu_n: Option<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub energies: Option<Vec<f64>>,
    #[serde(rename = "kT")]
    pub kt: Option<f64>,
    #[serde(rename = "kT_eff")]
    pub kt_eff: Option<f64>,
    pub proposal: Option<ProposalSpec>,
    #[serde(default)]
    pub options: OptionsSpec,
}

impl ProblemSpec {
    fn present(&self) -> [(&'static str, bool); 12] {
        [
            ("graph", self.graph.is_some()),
            ("matrix", self.matrix.is_some()),
            ("kernels", self.kernels.is_some()),
            ("horizon", self.horizon.is_some()),
            ("nu0", self.nu0.is_some()),
            ("nuN", self.nu_n.is_some()),
            ("target", self.target.is_some()),
            ("mu", self.mu.is_some()),
            ("energies", self.energies.is_some()),
            ("kT", self.kt.is_some()),
            ("kT_eff", self.kt_eff.is_some()),
            ("proposal", self.proposal.is_some()),
        ]
    }
}

/// One problem with a document, located by JSON pointer (`""` is the root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self { pointer: pointer.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "at {at}: {}", self.message)
    }
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(format!("/{index}")),
            Segment::Map { key } => Some(format!("/{}", escape(key))),
            Segment::Enum { variant } => Some(format!("/{}", escape(variant))),
            Segment::Unknown => None,
        })
        .collect()
}

/// Parses a document, rejecting unknown fields and mistyped values.
pub fn parse_spec(text: &str) -> Result<ProblemSpec, Diagnostic> {
    let de = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize(de) {
        Ok(spec) => Ok(spec),
        Err(e) => {
            let at = pointer(e.path());
            let inner = e.into_inner();
            let message = if inner.is_syntax() || inner.is_eof() {
                format!("malformed JSON: {inner}")
            } else {
                inner.to_string()
            };
            Err(Diagnostic::new(at, message))
        }
    }
}

/// Command-line settings that take precedence over the document's `options`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub strict: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub count: usize,
    pub strict: bool,
    pub trace: bool,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_COUNT: usize = 100_000;

/// Where the prior for a proposal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Matrix(NonnegMatrix),
    /// Max-degree walk on the document's graph.
    Graph(Graph),
    /// Every entry `1/n`.
    Uniform(usize),
}

/// A validated document: every quantity has the common dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub kind: Kind,
    pub n: usize,
    pub graph: Option<Graph>,
    /// Single prior from `matrix` or from the weighted graph.
    pub prior: Option<NonnegMatrix>,
    /// Prior kernel per step: `kernels`, or `prior` replicated `horizon` times.
    pub kernels: Option<Vec<NonnegMatrix>>,
    pub horizon: Option<usize>,
    pub nu0: Option<Distribution>,
    pub nu_n: Option<Distribution>,
    pub target: Option<Distribution>,
    pub mu: Option<Distribution>,
    pub energies: Option<Vec<f64>>,
    pub kt: Option<f64>,
    pub kt_eff: Option<f64>,
    pub proposal: Option<Proposal>,
    pub settings: Settings,
}

#[derive(Default)]
struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn err(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(pointer, message));
    }

    /// Runs `f` and keeps its value only if it recorded no diagnostic.
    fn clean<T>(&mut self, f: impl FnOnce(&mut Self) -> Option<T>) -> Option<T> {
        let before = self.diags.len();
        let v = f(self);
        if self.diags.len() == before {
            v
        } else {
            None
        }
    }

    fn require<'a, T>(&mut self, field: &str, v: &'a Option<T>, kind: Kind) -> Option<&'a T> {
        if v.is_none() {
            self.err(format!("/{field}"), format!("required for `{}`", kind.name()));
        }
        v.as_ref()
    }

    fn require_prior(&mut self, prior: &Option<NonnegMatrix>, kind: Kind) -> bool {
        if prior.is_none() && !self.diags.iter().any(|d| d.pointer.starts_with("/matrix") || d.pointer.starts_with("/graph")) {
            self.err("/matrix", format!("`{}` needs a prior: give `matrix` or a weighted `graph`", kind.name()));
        }
        prior.is_some()
    }

    fn matrix(&mut self, at: &str, rows: &[Vec<f64>], n: usize) -> Option<NonnegMatrix> {
        self.clean(|c| {
            if rows.len() != n {
                c.err(at, format!("expected {n} rows, found {}", rows.len()));
                return None;
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    c.err(format!("{at}/{i}"), format!("expected {n} entries, found {}", row.len()));
                    continue;
                }
                for (j, &v) in row.iter().enumerate() {
                    if !(v.is_finite() && v >= 0.0) {
                        c.err(format!("{at}/{i}/{j}"), format!("entry {v} is not a finite nonnegative number"));
                    }
                }
            }
            NonnegMatrix::from_rows(rows.to_vec()).ok()
        })
    }

    fn within_graph(&mut self, at: &str, m: &NonnegMatrix, g: Option<&Graph>) {
        let Some(g) = g else { return };
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                if !m.is_zero(i, j) && !g.has_edge(i, j) {
                    self.err(format!("{at}/{i}/{j}"), format!("positive entry on ({i}, {j}), which is not a graph edge"));
                }
            }
        }
    }

    fn entries(&mut self, at: &str, w: &[f64], n: usize) -> bool {
        if w.len() != n {
            self.err(at, format!("expected {n} entries, found {}", w.len()));
            return false;
        }
        let mut ok = true;
        for (k, &v) in w.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                self.err(format!("{at}/{k}"), format!("entry {v} is not a finite nonnegative number"));
                ok = false;
            }
        }
        ok
    }

    fn probability(&mut self, at: &str, w: &[f64], n: usize) -> Option<Distribution> {
        if !self.entries(at, w, n) {
            return None;
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            self.err(at, format!("not a probability vector (entries sum to {sum})"));
            return None;
        }
        match Distribution::probability(w.to_vec()) {
            Ok(d) => Some(d),
            Err(e) => {
                self.err(at, e.to_string());
                None
            }
        }
    }

    fn positive(&mut self, at: &str, d: &Distribution) -> bool {
        let mut ok = true;
        for (k, &v) in d.weights().iter().enumerate() {
            if v <= 0.0 {
                self.err(format!("{at}/{k}"), "must be positive");
                ok = false;
            }
        }
        ok
    }

    fn graph(&mut self, g: &GraphSpec) -> Option<(Graph, NonnegMatrix)> {
        self.clean(|c| {
            if g.n == 0 {
                c.err("/graph/n", "must be at least 1");
                return None;
            }
            let n = g.n;
            let mut seen = vec![false; n * n];
            for (k, &(i, j)) in g.edges.iter().enumerate() {
                if i >= n || j >= n {
                    c.err(format!("/graph/edges/{k}"), format!("edge ({i}, {j}) out of range for n = {n}"));
                } else if std::mem::replace(&mut seen[i * n + j], true) {
                    c.err(format!("/graph/edges/{k}"), format!("duplicate edge ({i}, {j})"));
                }
            }
            let mut data: Vec<f64> = seen.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
            let mut weighted = vec![false; n * n];
            for (k, &(i, j, v)) in g.weights.iter().enumerate() {
                let at = format!("/graph/weights/{k}");
                if i >= n || j >= n || !seen[i * n + j] {
                    c.err(at, format!("({i}, {j}) is not a listed edge"));
                } else if !(v.is_finite() && v > 0.0) {
                    c.err(at, format!("weight {v} is not a finite positive number"));
                } else if std::mem::replace(&mut weighted[i * n + j], true) {
                    c.err(at, format!("edge ({i}, {j}) weighted twice"));
                } else {
                    data[i * n + j] = v;
                }
            }
            let graph = Graph::new(n, g.edges.iter().copied()).ok()?;
            Some((graph, NonnegMatrix::from_row_major(n, data).ok()?))
        })
    }

    fn positive_scalar(&mut self, at: &str, v: f64) -> bool {
        let ok = v.is_finite() && v > 0.0;
        if !ok {
            self.err(at, format!("{v} is not a finite positive number"));
        }
        ok
    }

    fn settings(&mut self, o: &OptionsSpec, cli: &Overrides) -> Settings {
        let tol = match cli.tol {
            Some(t) => {
                self.positive_scalar("--tol", t);
                t
            }
            None => {
                let t = o.tol.unwrap_or(bridgeflow_core::finite_bridge::DEFAULT_TOL);
                self.positive_scalar("/options/tol", t);
                t
            }
        };
        let mut at_least_one = |flag: &str, key: &str, cli: Option<usize>, doc: Option<usize>, default: usize| {
            let (at, v) = match (cli, doc) {
                (Some(v), _) => (flag.to_string(), v),
                (None, Some(v)) => (format!("/options/{key}"), v),
                (None, None) => (String::new(), default),
            };
            if v == 0 {
                self.err(at, "must be at least 1");
            }
            v
        };
        let max_iters = at_least_one(
            "--max-iters",
            "max_iters",
            cli.max_iters,
            o.max_iters,
            bridgeflow_core::finite_bridge::DEFAULT_MAX_ITERS,
        );
        let count = at_least_one("--count", "count", cli.count, o.count, DEFAULT_COUNT);
        Settings {
            tol,
            max_iters,
            seed: cli.seed.or(o.seed).unwrap_or(DEFAULT_SEED),
            count,
            strict: cli.strict || o.strict.unwrap_or(false),
            trace: cli.trace || o.trace.unwrap_or(false),
        }
    }
}

fn infer_dimension(spec: &ProblemSpec) -> Option<usize> {
    spec.graph
        .as_ref()
        .map(|g| g.n)
        .or_else(|| spec.matrix.as_ref().map(Vec::len))
        .or_else(|| spec.kernels.as_ref().and_then(|k| k.first()).map(Vec::len))
        .or_else(|| spec.energies.as_ref().map(Vec::len))
}

/// Checks a parsed document against the subcommand that received it and
/// resolves it into solver inputs. Every problem found is reported.
pub fn validate(spec: &ProblemSpec, kind: Kind, cli: &Overrides) -> Result<Problem, Vec<Diagnostic>> {
    let mut c = Checker::default();
    if let Some(k) = spec.kind {
        if k != kind {
            c.err("/kind", format!("document is for `{}` but the command solves `{}`", k.name(), kind.name()));
        }
    }
    for (field, present) in spec.present() {
        if present && !kind.fields().contains(&field) {
            c.err(format!("/{field}"), format!("not used by `{}`", kind.name()));
        }
    }
    let settings = c.settings(&spec.options, cli);
    let Some(n) = infer_dimension(spec) else {
        c.err("", "cannot tell the number of states: give a graph, matrix, kernels or energies");
        return Err(c.diags);
    };
    if n == 0 {
        c.err("", "the state space is empty");
        return Err(c.diags);
    }

    let graph = spec.graph.as_ref().and_then(|g| c.graph(g));
    let graph_ref = graph.as_ref().map(|(g, _)| g);
    let prior = match (&spec.matrix, &graph) {
        (Some(rows), _) => c.clean(|c| {
            let m = c.matrix("/matrix", rows, n)?;
            c.within_graph("/matrix", &m, graph_ref);
            Some(m)
        }),
        (None, Some((_, weighted))) if kind != Kind::CoolFast && kind != Kind::CoolAsymptotic => {
            Some(weighted.clone())
        }
        _ => None,
    };

    if spec.horizon == Some(0) {
        c.err("/horizon", "must be at least 1");
    }
    let kernels = match (&spec.kernels, &prior) {
        (Some(_), _) if spec.matrix.is_some() => {
            c.err("/kernels", "give either `kernels` or `matrix`, not both");
            None
        }
        (Some(list), _) => c.clean(|c| {
            if list.is_empty() {
                c.err("/kernels", "needs at least one kernel");
            }
            if let Some(h) = spec.horizon.filter(|&h| h != list.len()) {
                c.err("/horizon", format!("{h} disagrees with the {} kernels given", list.len()));
            }
            let ks: Vec<Option<NonnegMatrix>> = list
                .iter()
                .enumerate()
                .map(|(t, rows)| {
                    let at = format!("/kernels/{t}");
                    let m = c.matrix(&at, rows, n)?;
                    c.within_graph(&at, &m, graph_ref);
                    Some(m)
                })
                .collect();
            ks.into_iter().collect()
        }),
        (None, Some(m)) => spec.horizon.filter(|&h| h > 0).map(|h| vec![m.clone(); h]),
        (None, None) => None,
    };

    let dist = |c: &mut Checker, field: &str, v: &Option<Vec<f64>>| {
        v.as_ref().and_then(|w| c.probability(&format!("/{field}"), w, n))
    };
    let nu0 = dist(&mut c, "nu0", &spec.nu0);
    let nu_n = dist(&mut c, "nuN", &spec.nu_n);
    let target = dist(&mut c, "target", &spec.target);
    let mu = spec.mu.as_ref().and_then(|w| {
        c.clean(|c| {
            if c.entries("/mu", w, n) && w.iter().all(|&v| v == 0.0) {
                c.err("/mu", "must have positive total mass");
            }
            Distribution::measure(w.clone()).ok()
        })
    });

    let energies = spec.energies.as_ref().and_then(|e| {
        c.clean(|c| {
            if e.len() != n {
                c.err("/energies", format!("expected {n} entries, found {}", e.len()));
            }
            for (k, v) in e.iter().enumerate() {
                if !v.is_finite() {
                    c.err(format!("/energies/{k}"), "must be finite");
                }
            }
            Some(e.clone())
        })
    });
    let kt = spec.kt.filter(|&v| c.positive_scalar("/kT", v));
    let kt_eff = spec.kt_eff.filter(|&v| c.positive_scalar("/kT_eff", v));
    if let (Some(hot), Some(cold)) = (kt, kt_eff) {
        if cold > hot {
            c.err("/kT_eff", format!("{cold} exceeds kT = {hot}; cooling cannot raise the temperature"));
        }
    }
    let proposal = spec.proposal.as_ref().and_then(|p| match p {
        ProposalSpec::Matrix(rows) => c.matrix("/proposal", rows, n).map(Proposal::Matrix),
        ProposalSpec::Named(name) if name == "uniform" => Some(match graph_ref {
            Some(g) => Proposal::Graph(g.clone()),
            None => Proposal::Uniform(n),
        }),
        ProposalSpec::Named(name) => {
            c.err("/proposal", format!("unknown proposal `{name}`; expected a matrix or \"uniform\""));
            None
        }
    });

    match kind {
        Kind::FiniteBridge => {
            if spec.kernels.is_none() && c.require_prior(&prior, kind) {
                c.require("horizon", &spec.horizon, kind);
            }
            c.require("nu0", &spec.nu0, kind);
            c.require("nuN", &spec.nu_n, kind);
            if let Some(m) = &mu {
                c.positive("/mu", m);
            }
        }
        Kind::Stationary => {
            c.require_prior(&prior, kind);
            c.require("target", &spec.target, kind);
            if let Some(t) = &target {
                c.positive("/target", t);
            }
        }
        Kind::CoolFast | Kind::CoolAsymptotic => {
            c.require("energies", &spec.energies, kind);
            c.require("kT", &spec.kt, kind);
            c.require("kT_eff", &spec.kt_eff, kind);
            c.require("proposal", &spec.proposal, kind);
            if kind == Kind::CoolFast {
                c.require("horizon", &spec.horizon, kind);
                c.require("nu0", &spec.nu0, kind);
            }
        }
        Kind::Check => {
            if spec.kernels.is_none() {
                c.require_prior(&prior, kind);
            }
            let endpoints = [spec.nu0.is_some(), spec.nu_n.is_some()];
            if endpoints.iter().any(|&b| b) {
                c.require("nu0", &spec.nu0, kind);
                c.require("nuN", &spec.nu_n, kind);
                if spec.kernels.is_none() {
                    c.require("horizon", &spec.horizon, kind);
                }
            }
        }
        Kind::Simulate => {
            if spec.kernels.is_none() && c.require_prior(&prior, kind) {
                c.require("horizon", &spec.horizon, kind);
            }
            c.require("nu0", &spec.nu0, kind);
            if spec.target.is_some() && spec.kernels.is_some() {
                c.err("/target", "the stationary flux needs a single `matrix` kernel, not `kernels`");
            }
        }
    }

    if !c.diags.is_empty() {
        return Err(c.diags);
    }
    Ok(Problem {
        kind,
        n,
        graph: graph.map(|(g, _)| g),
        prior,
        kernels,
        horizon: spec.horizon,
        nu0,
        nu_n,
        target,
        mu,
        energies,
        kt,
        kt_eff,
        proposal,
        settings,
    })
}
