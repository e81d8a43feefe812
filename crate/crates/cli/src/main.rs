//! `hamlab`: compile verification circuits, print JSON reports and run the
//! self-test suite.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hamlab::acceptance::{self, AcceptanceConfig};
use hamlab::io::{self, HamiltonianFile};
use hamlab::{kitaev, HamlabError};
use serde_json::json;

pub const EXIT_CHECK: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "hamlab", version, about = "Separable-witness Hamiltonian toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Numerical tolerance for report checks (kind-specific default).
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Option<f64>,

    /// Restarts for product minimization and the consistency search.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: Option<u64>,

    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a circuit file into a Hamiltonian file.
    Compile { circuit: PathBuf },
    /// Print a JSON report.
    Report {
        kind: ReportKind,
        input: PathBuf,
        /// Proof file for `slh-verify`; an honest proof is built when absent.
        #[arg(long)]
        proof: Option<PathBuf>,
        /// Term index for `phase-estimate`.
        #[arg(long, default_value_t = 0)]
        term: usize,
    },
    /// Run the acceptance criteria and print one JSON line per criterion.
    Selftest {
        /// Criterion id, slug or tag.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Spectrum,
    Gap,
    ClockAngle,
    History,
    MinProduct,
    SlhVerify,
    PhaseEstimate,
    Qj,
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("tolerance must be a positive finite number, got {s}"))
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, kind: "usage", message: message.into() }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self { code: EXIT_PARSE, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

impl From<HamlabError> for Failure {
    fn from(e: HamlabError) -> Self {
        let (code, kind) = match e {
            HamlabError::Parse(_) => (EXIT_PARSE, "parse"),
            _ => (EXIT_INVARIANT, "invariant"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

/// Qubit cap from `HAMLAB_MAX_QUBITS`.
pub fn max_qubits() -> Result<usize, Failure> {
    match std::env::var("HAMLAB_MAX_QUBITS") {
        Err(_) => Ok(hamlab::DEFAULT_MAX_QUBITS),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::usage(format!("HAMLAB_MAX_QUBITS must be a positive integer, got {v:?}"))),
    }
}

pub fn read_input(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| Failure {
            code: EXIT_INVARIANT,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }),
        None => stdout_line(text),
    }
}

/// A closed pipe (`hamlab ... | head`) is not an error.
fn stdout_line(text: &str) -> Result<(), Failure> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
            code: EXIT_INVARIANT,
            kind: "io",
            message: format!("stdout: {e}"),
        }),
        _ => Ok(()),
    }
}

fn compile_cmd(circuit: &PathBuf, out: Option<&PathBuf>) -> Result<u8, Failure> {
    let text = read_input(circuit)?;
    let c = io::parse_circuit(&text)?;
    let k = kitaev::compile_with_budget(&c, max_qubits()?)?;
    let (a, b) = io::default_thresholds(c.steps());
    let file = HamiltonianFile::from_compiled(&k, a, b);
    emit(&io::to_canonical_json(&file)?, out)?;
    Ok(0)
}

fn selftest_cmd(cli: &Cli, filter: Option<&str>) -> Result<u8, Failure> {
    if acceptance::select(filter).is_empty() {
        return Err(Failure::usage(format!("no criterion matches {:?}", filter.unwrap_or(""))));
    }
    let mut cfg = AcceptanceConfig::default();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.restarts {
        cfg.restarts = r as usize;
    }
    let mut lines = Vec::new();
    let mut all = true;
    for info in acceptance::select(filter) {
        let r = acceptance::run_criterion(info.id, &cfg)?;
        all &= r.passed;
        let line = io::to_canonical_json(&r)?;
        if cli.out.is_none() {
            stdout_line(&line)?;
        }
        lines.push(line);
    }
    if let Some(path) = &cli.out {
        emit(&lines.join("\n"), Some(path))?;
    }
    Ok(if all { 0 } else { EXIT_CHECK })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Compile { circuit } => compile_cmd(circuit, cli.out.as_ref()),
        Command::Report { kind, input, proof, term } => {
            let opts = report::Options {
                seed: cli.seed.unwrap_or(0),
                tol: cli.tol,
                restarts: cli.restarts.map(|r| r as usize),
                proof: proof.clone(),
                term: *term,
            };
            let (value, passed) = report::build(*kind, input, &opts)?;
            emit(&io::to_canonical_json(&value)?, cli.out.as_ref())?;
            Ok(if passed { 0 } else { EXIT_CHECK })
        }
        Command::Selftest { filter } => selftest_cmd(cli, filter.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let err = json!({ "error": { "kind": f.kind, "message": f.message, "exit_code": f.code } });
            eprintln!("{err}");
            ExitCode::from(f.code)
        }
    }
}
