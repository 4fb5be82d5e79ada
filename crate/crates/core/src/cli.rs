//! `qmember` command line.
//!
//! Exit codes: 0 on success, 2 for bad input (unreadable or invalid specs, unknown suites,
//! out-of-range parameters), 3 when a constructed certificate fails its own re-check or a
//! verification suite fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::catalog::{analyze, build_problem, exact_id_povm, ProblemSpec};
use crate::error::Error;
use crate::meas::{povm_from_operator_system, OperatorSystem};
use crate::opspace::Tolerances;
use crate::states::{bloch_to_state, DensityOperator, Sampler};
use crate::suites::{run_suite, SuiteOptions, SUITES};

const DEFAULT_BUDGET: usize = 200;

#[derive(Parser, Debug)]
#[command(
    name = "qmember",
    version,
    about = "Decide whether a quantum membership problem needs an informationally complete measurement",
    after_help = "Problem specs are JSON: {\"d\": 3, \"kind\": \"fidelity\", \"params\": {...}}.\n\
                  Kinds: exact_id, hs_ball, trace_ball_qubit, fidelity, purity, almost_purity,\n\
                  rank_threshold, hemisphere. Problems with a custom classifier are only\n\
                  available through the library."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Seed for every sampled quantity; required by all commands that sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Relative rank cutoff.
    #[arg(long, global = true)]
    eta_rank: Option<f64>,
    /// Relative positivity slack.
    #[arg(long, global = true)]
    eta_pos: Option<f64>,
    /// Search budget for sampled evidence; for `verify`, a cap on trials per unit.
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic verdict for a catalog problem.
    Analyze {
        #[arg(long)]
        spec: PathBuf,
    },
    /// The direction a solving measurement may ignore, or a crossing showing none exists.
    Witness {
        #[arg(long)]
        spec: PathBuf,
    },
    /// A solving POVM for exact identification of a state, or one spanning an operator system.
    Povm {
        #[arg(long, conflicts_with = "system", required_unless_present = "system")]
        exact_id: Option<PathBuf>,
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Run a property suite.
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Uniform samples of the Bloch ball labelled by block, as `x,y,z,block`.
    BlochSample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn user(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_internal() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

impl RunArgs {
    fn tolerances(&self) -> Outcome<Tolerances> {
        let mut tol = Tolerances::default();
        if let Some(x) = self.eta_rank {
            tol.rank = x;
        }
        if let Some(x) = self.eta_pos {
            tol.pos = x;
        }
        tol.validate()?;
        Ok(tol)
    }

    fn seed(&self, command: &str) -> Outcome<u64> {
        self.seed
            .ok_or_else(|| Failure::user(format!("{command} samples random states; pass --seed")))
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn read(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Outcome<ProblemSpec> {
    ProblemSpec::from_json(&read(path)?).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> Outcome<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn json_only(run: &RunArgs, command: &str) -> Outcome<()> {
    if run.format(Format::Json) == Format::Csv {
        return Err(Failure::user(format!("{command} writes JSON only")));
    }
    Ok(())
}

/// Runs the command line and returns the exit code. Output goes to `stdout` unless `--out`
/// is given; diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|(text, code)| {
        match &cli.run.out {
            Some(path) => std::fs::write(path, &text)
                .map_err(|e| Failure::user(format!("{}: {e}", path.display())))?,
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::user(format!("stdout: {e}")))?,
        }
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli) -> Outcome<(String, i32)> {
    let run = &cli.run;
    let tol = run.tolerances()?;
    if let Some(jobs) = run.jobs {
        if jobs == 0 {
            return Err(Failure::user("--jobs must be at least 1"));
        }
        // the global pool can only be set once per process; later calls keep the first size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let budget = run.budget.unwrap_or(DEFAULT_BUDGET);
    match &cli.command {
        Command::Analyze { spec } => {
            json_only(run, "analyze")?;
            let seed = run.seed("analyze")?;
            let verdict = analyze(&read_spec(spec)?, seed, budget, &tol)?;
            Ok((json(&verdict)?, 0))
        }
        Command::Witness { spec } => {
            json_only(run, "witness")?;
            let seed = run.seed("witness")?;
            let verdict = analyze(&read_spec(spec)?, seed, budget, &tol)?;
            if let Some(w) = &verdict.witness {
                return Ok((json(w)?, 0));
            }
            let first = verdict.crossings().next().map(json);
            match first {
                Some(text) => Ok((text?, 0)),
                None => Err(Error::Verification(format!(
                    "{}: verdict carries neither a witness nor a crossing",
                    verdict.problem
                ))
                .into()),
            }
        }
        Command::Povm { exact_id, system } => {
            json_only(run, "povm")?;
            let povm = match (exact_id, system) {
                (Some(path), _) => {
                    let sigma: DensityOperator = serde_json::from_str(&read(path)?)
                        .map_err(|e| Failure::user(format!("{}: {e}", path.display())))?;
                    exact_id_povm(&sigma, &tol)?
                }
                (None, Some(path)) => {
                    let system: OperatorSystem = serde_json::from_str(&read(path)?)
                        .map_err(|e| Failure::user(format!("{}: {e}", path.display())))?;
                    povm_from_operator_system(&system, &tol)?
                }
                (None, None) => return Err(Failure::user("povm needs --exact-id or --system")),
            };
            Ok((json(&povm)?, 0))
        }
        Command::Verify { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Failure::user(format!(
                    "unknown suite \"{suite}\"; known suites: {}",
                    SUITES.join(", ")
                )));
            }
            let mut opts = SuiteOptions::new(run.seed("verify")?);
            opts.cap = run.budget;
            opts.tol = tol;
            let report = run_suite(suite, &opts)?;
            let code = if report.passed { 0 } else { 3 };
            let text = match run.format(Format::Json) {
                Format::Json => json(&report)?,
                Format::Csv => format!(
                    "suite,passed,trials,failures,seed\n{},{},{},{},{}\n",
                    report.suite, report.passed, report.trials, report.failures, report.seed
                ),
            };
            Ok((text, code))
        }
        Command::BlochSample { spec, n } => {
            let seed = run.seed("bloch-sample")?;
            let problem = build_problem(&read_spec(spec)?, &tol)?;
            if problem.dim() != 2 {
                return Err(Failure::user("bloch-sample needs a qubit problem (d = 2)"));
            }
            let mut s = Sampler::new(seed);
            let rows: Vec<([f64; 3], &str)> = (0..*n)
                .map(|_| {
                    let b = s.bloch_in_ball();
                    let block = problem.classify(&bloch_to_state(&b));
                    (b.r, problem.labels()[block].as_str())
                })
                .collect();
            let text = match run.format(Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("x,y,z,block\n");
                    for (r, block) in &rows {
                        out.push_str(&format!("{},{},{},{}\n", r[0], r[1], r[2], block));
                    }
                    out
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        x: f64,
                        y: f64,
                        z: f64,
                        block: &'a str,
                    }
                    let rows: Vec<Row> = rows
                        .iter()
                        .map(|(r, block)| Row { x: r[0], y: r[1], z: r[2], block })
                        .collect();
                    json(&rows)?
                }
            };
            Ok((text, 0))
        }
    }
}
