//! Command-line front end.

pub mod bench;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::{check, parse_objective, AlgorithmConfig, SpecError};
use crate::gen::{gen_hard_mn, gen_pi_trap, gen_random_mdp, BadParameter, RandomMdpParams};
use crate::graph::{preprocess, GraphError};
use crate::io::{read_model, write_model, write_model_file, IoError};
use crate::lp::{build_lp, BoundsMode, LpOptions, ObjectiveMode};
use crate::numeric::parse_rational;
use crate::result::{Deadline, SolveError};
use crate::vi::vi_estimates;

use bench::{
    hardness, parse_suite, read_csv, run_suite, write_csv, BenchError, DEFAULT_HARDNESS_FLOOR_MS,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Generate(#[from] BadParameter),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "mdpcheck",
    version,
    about = "Explicit-state MDP model checker and benchmark harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one objective on a model file.
    Check(CheckArgs),
    /// Write a generated model.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Run a benchmark suite and write a CSV.
    Bench {
        suite: PathBuf,
        /// Per-run timeout in seconds.
        #[arg(long, default_value_t = 1800.0)]
        timeout: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// List instances of a bench CSV that are hard for value iteration.
    Hardness {
        csv: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HARDNESS_FLOOR_MS)]
        floor_ms: f64,
    },
    /// Write the linear program of a model in CPLEX LP format.
    ExportLp {
        model: PathBuf,
        #[arg(long)]
        objective: String,
        #[arg(long, value_enum, default_value_t = LpBounds::Trivial)]
        lp_bounds: LpBounds,
        #[arg(long, value_enum, default_value_t = LpObjective::All)]
        lp_objective: LpObjective,
        #[arg(long)]
        lp_eq: bool,
        #[arg(long, default_value_t = 100)]
        warm_iters: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Family {
    /// The hard family with 2n+1 states.
    HardMn {
        #[arg(long)]
        n: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// The five-state policy iteration trap.
    PiTrap {
        /// Rational in (0, 1), e.g. 1/10.
        #[arg(long)]
        delta: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0.1)]
        targets: f64,
        /// Attach integer rewards up to this value.
        #[arg(long)]
        max_reward: Option<u32>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorArg {
    Exact,
    Fp,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Rational,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LpBounds {
    Trivial,
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LpObjective {
    All,
    Initial,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub objective: String,
    /// `vi`, `ovi`, `pi` or `lp`, optionally followed by `:key=value` options.
    #[arg(long, default_value = "ovi")]
    pub algorithm: String,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorArg>,
    #[arg(long, value_enum)]
    pub field: Option<FieldArg>,
    #[arg(long)]
    pub topological: bool,
    /// Warm start: greedy initial policy for pi, lower bounds for lp.
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, value_enum)]
    pub lp_bounds: Option<LpBounds>,
    #[arg(long, value_enum)]
    pub lp_objective: Option<LpObjective>,
    #[arg(long)]
    pub lp_eq: bool,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Seconds before giving up.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub print_policy: bool,
}

impl CheckArgs {
    /// Folds the dedicated flags into the `--algorithm` spec.
    pub fn algorithm_config(&self) -> Result<AlgorithmConfig, SpecError> {
        let mut parts = self.algorithm.split(':');
        let name = parts.next().unwrap_or_default().to_string();
        let mut options: Vec<(String, String)> = parts
            .map(|p| {
                p.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| SpecError(format!("expected key=value, found '{p}'")))
            })
            .collect::<Result<_, _>>()?;
        let mut set = |key: &str, value: String| {
            options.retain(|(k, _)| k != key);
            options.push((key.to_string(), value));
        };
        if let Some(eps) = self.epsilon {
            set("eps", eps.to_string());
        }
        if let Some(e) = self.evaluator {
            let v = match e {
                EvaluatorArg::Exact => "exact",
                EvaluatorArg::Fp => "fp",
                EvaluatorArg::Iterative => "iterative",
            };
            set("eval", v.into());
        }
        if let Some(f) = self.field {
            set(
                "field",
                if f == FieldArg::Rational {
                    "rational"
                } else {
                    "float"
                }
                .into(),
            );
        }
        if self.topological {
            set("topo", "true".into());
        }
        if self.warm_start {
            match name.as_str() {
                "pi" => set("init", "warm".into()),
                "lp" => set("bounds", "warm".into()),
                _ => return Err(SpecError(format!("--warm-start does not apply to {name}"))),
            }
        }
        if let Some(b) = self.lp_bounds {
            set(
                "bounds",
                if b == LpBounds::Warm {
                    "warm"
                } else {
                    "trivial"
                }
                .into(),
            );
        }
        if let Some(o) = self.lp_objective {
            set(
                "objective",
                if o == LpObjective::Initial {
                    "initial"
                } else {
                    "all"
                }
                .into(),
            );
        }
        if self.lp_eq {
            set("eq", "true".into());
        }
        if let Some(m) = self.max_iterations {
            set("max-iter", m.to_string());
        }
        AlgorithmConfig::from_options(&name, options)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_check(args: &CheckArgs) -> Result<String, CliError> {
    let mdp = read_model(&args.model)?;
    let objective = parse_objective(&args.objective)?;
    let mut config = args.algorithm_config()?;
    if let Some(secs) = args.timeout {
        config.set_deadline(Deadline::after(Duration::from_secs_f64(secs)));
    }
    let analysis = check(&mdp, &objective, &config)?;
    let sol = &analysis.solution;
    let mut out = format!("value: {}\n", sol.initial_text());
    if let Some(upper) = sol.initial_upper_text() {
        out.push_str(&format!("upper: {upper}\n"));
    }
    out.push_str(&format!("guarantee: {}\n", sol.guarantee().label()));
    out.push_str(&format!("iterations: {}\n", sol.iterations()));
    if let Some(calls) = analysis.backend_calls {
        out.push_str(&format!("backend calls: {calls}\n"));
    }
    out.push_str(&format!(
        "time: {:.3} ms (preprocessing {:.3} ms)\n",
        sol.elapsed().as_secs_f64() * 1e3,
        analysis.preprocess_time.as_secs_f64() * 1e3
    ));
    if args.print_policy {
        if let Some(policy) = sol.policy() {
            let choices: Vec<String> = policy.0.iter().map(ToString::to_string).collect();
            out.push_str(&format!("policy: {}\n", choices.join(" ")));
        }
    }
    Ok(out)
}

fn cmd_generate(family: &Family) -> Result<(), CliError> {
    let (mdp, out) = match family {
        Family::HardMn { n, out } => (gen_hard_mn(*n)?, out),
        Family::PiTrap { delta, out } => {
            let delta = parse_rational(delta)
                .ok_or_else(|| BadParameter(format!("invalid delta '{delta}'")))?;
            (gen_pi_trap(delta)?, out)
        }
        Family::Random {
            seed,
            states,
            actions,
            density,
            targets,
            max_reward,
            out,
        } => {
            let params = RandomMdpParams {
                seed: *seed,
                num_states: *states,
                max_actions: *actions,
                density: *density,
                target_fraction: *targets,
                max_reward: *max_reward,
            };
            (gen_random_mdp(&params)?, out)
        }
    };
    match out {
        Some(path) => write_model_file(path, &mdp)?,
        None => print!("{}", write_model(&mdp)),
    }
    Ok(())
}

fn cmd_bench(
    suite: &Path,
    timeout: f64,
    out: Option<&Path>,
    workers: usize,
) -> Result<(), CliError> {
    let text = fs::read_to_string(suite).map_err(|source| CliError::File {
        path: suite.display().to_string(),
        source,
    })?;
    let base = suite.parent().unwrap_or(Path::new("."));
    let entries = parse_suite(&text, base)?;
    let rows = run_suite(&entries, Duration::from_secs_f64(timeout), workers);
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    match out {
        Some(path) => fs::write(path, &buf).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })?,
        None => {
            let _ = std::io::stdout().write_all(&buf);
        }
    }
    Ok(())
}

fn cmd_hardness(csv: &Path, floor_ms: f64) -> Result<String, CliError> {
    let file = fs::File::open(csv).map_err(|source| CliError::File {
        path: csv.display().to_string(),
        source,
    })?;
    let rows = read_csv(file)?;
    Ok(hardness(&rows, floor_ms)
        .into_iter()
        .map(|(m, o)| format!("{m} {o}\n"))
        .collect())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check(args) => print!("{}", cmd_check(&args)?),
        Command::Generate { family } => cmd_generate(&family)?,
        Command::Bench {
            suite,
            timeout,
            out,
            workers,
        } => cmd_bench(&suite, timeout, out.as_deref(), workers)?,
        Command::Hardness { csv, floor_ms } => print!("{}", cmd_hardness(&csv, floor_ms)?),
        Command::ExportLp {
            model,
            objective,
            lp_bounds,
            lp_objective,
            lp_eq,
            warm_iters,
            out,
        } => {
            let mdp = read_model(&model)?;
            let q = preprocess(&mdp, &parse_objective(&objective)?)?;
            let options = LpOptions {
                bounds: match lp_bounds {
                    LpBounds::Trivial => BoundsMode::Trivial,
                    LpBounds::Warm => BoundsMode::Warm(vi_estimates(&q, warm_iters)),
                },
                objective: match lp_objective {
                    LpObjective::All => ObjectiveMode::AllStates,
                    LpObjective::Initial => ObjectiveMode::InitialOnly,
                },
                unique_action_equality: lp_eq,
            };
            emit(&build_lp(&q, &options)?.to_lp_text(), out.as_deref())?;
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
