//! Command-line front end: reads a JSON problem document, validates it,
//! runs the matching solver and writes a JSON result document.
//!
//! Exit status: 0 on success, 1 on I/O or validation failure, 2 when the
//! solver does not converge, 3 when the problem is infeasible.

pub mod run;
pub mod spec;

use std::io::{Read, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use run::{run, Exit, Level, Outcome};
pub use spec::{parse_spec, validate, Diagnostic, Kind, Overrides, Problem, ProblemSpec};

#[derive(Debug, Parser)]
#[command(name = "bridgeflow", version, about = "Schrödinger bridge steering of Markovian network flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-horizon bridge between two marginals.
    Bridge(CommonArgs),
    /// Kernel closest in entropy rate to the prior with a given invariant law.
    Stationary(CommonArgs),
    /// Cooling of a Boltzmann law on a graph.
    #[command(subcommand)]
    Cool(CoolCommand),
    /// Structural predicates and feasibility of a prior.
    Check(CommonArgs),
    /// Monte-Carlo sampling of paths and stationary flux.
    Simulate(CommonArgs),
}

#[derive(Debug, Subcommand)]
pub enum CoolCommand {
    /// Steer to the colder law within a finite horizon.
    Fast(CommonArgs),
    /// Stationary kernel that holds the colder law.
    Asymptotic(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Problem document; `-` reads standard input.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Result document; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// L1 tolerance on the boundary marginals.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Seed for sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sampled paths or transitions.
    #[arg(long)]
    pub count: Option<usize>,
    /// Refuse stationary priors that are not fully indecomposable.
    #[arg(long)]
    pub strict: bool,
    /// Record the residual after every sweep.
    #[arg(long)]
    pub trace: bool,
}

impl Command {
    pub fn parts(&self) -> (Kind, &CommonArgs) {
        match self {
            Command::Bridge(a) => (Kind::FiniteBridge, a),
            Command::Stationary(a) => (Kind::Stationary, a),
            Command::Cool(CoolCommand::Fast(a)) => (Kind::CoolFast, a),
            Command::Cool(CoolCommand::Asymptotic(a)) => (Kind::CoolAsymptotic, a),
            Command::Check(a) => (Kind::Check, a),
            Command::Simulate(a) => (Kind::Simulate, a),
        }
    }
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.seed,
            count: self.count,
            strict: self.strict,
            trace: self.trace,
        }
    }
}

fn read_input(path: &PathBuf) -> std::io::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

fn invalid(messages: Vec<(Level, String)>) -> Outcome {
    Outcome { document: None, exit: Exit::Invalid, messages }
}

/// Reads, validates and solves the problem named on the command line.
pub fn solve_command(cmd: &Command) -> Outcome {
    let (kind, args) = cmd.parts();
    let text = match read_input(&args.input) {
        Ok(t) => t,
        Err(e) => return invalid(vec![(Level::Error, format!("cannot read {}: {e}", args.input.display()))]),
    };
    let spec = match parse_spec(&text) {
        Ok(s) => s,
        Err(d) => return invalid(vec![(Level::Error, d.to_string())]),
    };
    match validate(&spec, kind, &args.overrides()) {
        Ok(problem) => run(&problem),
        Err(diags) => invalid(diags.iter().map(|d| (Level::Error, d.to_string())).collect()),
    }
}

/// Serialized result document, terminated by a newline.
pub fn render(doc: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    s.push('\n');
    s
}

fn emit(doc: &serde_json::Value, out: Option<&PathBuf>) -> std::io::Result<()> {
    let text = render(doc);
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn report(level: Level, message: &str) {
    let tag = match level {
        Level::Warning => "WARNING",
        Level::Error => "ERROR",
    };
    for line in message.lines() {
        eprintln!("{tag}: {line}");
    }
}

/// Runs a parsed command line end to end and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let outcome = solve_command(&cli.command);
    for (level, message) in &outcome.messages {
        report(*level, message);
    }
    if let Some(doc) = &outcome.document {
        let (_, args) = cli.command.parts();
        if let Err(e) = emit(doc, args.out.as_ref()) {
            let target = args.out.as_ref().map_or("standard output".to_string(), |p| p.display().to_string());
            report(Level::Error, &format!("cannot write {target}: {e}"));
            return Exit::Invalid.code();
        }
    }
    outcome.exit.code()
}

/// Entry point: parses arguments, keeping usage errors on exit code 1 so
/// that 2 stays reserved for non-convergence.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            Exit::Ok.code()
        }
        Err(e) => {
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                report(Level::Error, "a subcommand is required");
            } else {
                let rendered = e.render().to_string();
                let first = rendered.lines().next().unwrap_or("invalid arguments");
                report(Level::Error, first.trim_start_matches("error: "));
            }
            report(Level::Error, "run `bridgeflow --help` for usage");
            Exit::Invalid.code()
        }
    }
}
