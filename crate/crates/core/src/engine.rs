//! Parsing of objective and algorithm specs, and the end-to-end check.
//!
//! Objectives: `reach:{min|max}:<label>` or `reward:{min|max}`.
//!
//! Algorithms: `name[:key=value]*` with `name` one of `vi`, `ovi`, `pi`,
//! `lp`. Keys shared by all: `eps` (default `1e-6`), `max-iter`, `topo`.
//! Further keys: `mode=rel|abs` (vi); `budget` (ovi);
//! `eval=exact|fp|iterative`, `init=first|warm`, `warm-iters`, `tol` (pi);
//! `field=rational|float`, `bounds=trivial|warm`, `objective=all|initial`,
//! `eq=true|false`, `warm-iters` (lp).

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::preprocess;
use crate::lp::{solve_lp, BoundsMode, LpConfig, LpField, ObjectiveMode};
use crate::model::{Objective, Opt, SparseMdp};
use crate::pi::{solve_pi, Evaluator, InitialPolicy, PiConfig};
use crate::result::{Deadline, Solution, SolveError};
use crate::topo::{solve_topological, Backend};
use crate::vi::{solve_ovi, solve_vi, vi_estimates, OviConfig, StopMode, StoppingCriterion};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct SpecError(pub String);

pub fn parse_objective(spec: &str) -> Result<Objective, SpecError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let opt = |s: &str| match s {
        "min" => Ok(Opt::Min),
        "max" => Ok(Opt::Max),
        other => Err(SpecError(format!("expected min or max, found '{other}'"))),
    };
    match parts.as_slice() {
        ["reach", o, label] if !label.is_empty() => Ok(Objective::reach(opt(o)?, label)),
        ["reward", o] => Ok(Objective::total_reward(opt(o)?)),
        _ => Err(SpecError(format!(
            "bad objective '{spec}'; expected reach:{{min|max}}:<label> or reward:{{min|max}}"
        ))),
    }
}

const DEFAULT_EPSILON: f64 = 1e-6;
const DEFAULT_WARM_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub backend: Backend,
    pub topological: bool,
    /// Value-iteration steps behind warm LP bounds.
    pub lp_warm_iterations: Option<usize>,
    name: String,
    options: Vec<(String, String)>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, SpecError> {
    value
        .parse()
        .map_err(|_| SpecError(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, SpecError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(SpecError(format!("bad value '{value}' for '{key}'"))),
    }
}

impl AlgorithmConfig {
    pub fn parse(spec: &str) -> Result<Self, SpecError> {
        let mut parts = spec.split(':');
        let name = parts.next().unwrap_or_default();
        let options = parts
            .map(|p| match p.split_once('=') {
                Some((k, v)) => Ok((k.to_string(), v.to_string())),
                None => Err(SpecError(format!("expected key=value, found '{p}'"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_options(name, options)
    }

    pub fn from_options(name: &str, options: Vec<(String, String)>) -> Result<Self, SpecError> {
        let mut epsilon = DEFAULT_EPSILON;
        let mut max_iterations = None;
        let mut topological = false;
        let mut mode = StopMode::Relative;
        let mut budget = None;
        let mut evaluator = "exact".to_string();
        let mut warm = false;
        let mut warm_iterations = DEFAULT_WARM_ITERATIONS;
        let mut tolerance = None;
        let mut field = "rational".to_string();
        let mut objective = ObjectiveMode::AllStates;
        let mut equality = false;

        let allowed: &[&str] = match name {
            "vi" => &["mode"],
            "ovi" => &["budget"],
            "pi" => &["eval", "init", "warm-iters", "tol"],
            "lp" => &["field", "bounds", "objective", "eq", "warm-iters"],
            other => {
                return Err(SpecError(format!(
                    "unknown algorithm '{other}'; expected vi, ovi, pi or lp"
                )))
            }
        };
        for (key, value) in &options {
            let (key, value) = (key.as_str(), value.as_str());
            if !["eps", "max-iter", "topo"].contains(&key) && !allowed.contains(&key) {
                return Err(SpecError(format!(
                    "option '{key}' does not apply to {name}"
                )));
            }
            match key {
                "eps" => {
                    epsilon = parse_value(key, value)?;
                    if !(epsilon > 0.0 && epsilon < 1.0) {
                        return Err(SpecError(format!("eps must lie in (0, 1), got {value}")));
                    }
                }
                "max-iter" => max_iterations = Some(parse_value(key, value)?),
                "topo" => topological = parse_bool(key, value)?,
                "mode" => {
                    mode = match value {
                        "rel" | "relative" => StopMode::Relative,
                        "abs" | "absolute" => StopMode::Absolute,
                        _ => return Err(SpecError(format!("bad value '{value}' for 'mode'"))),
                    }
                }
                "budget" => budget = Some(parse_value(key, value)?),
                "eval" => {
                    if !["exact", "fp", "iterative"].contains(&value) {
                        return Err(SpecError(format!("bad value '{value}' for 'eval'")));
                    }
                    evaluator = value.to_string();
                }
                "init" => {
                    warm = match value {
                        "first" => false,
                        "warm" => true,
                        _ => return Err(SpecError(format!("bad value '{value}' for 'init'"))),
                    }
                }
                "warm-iters" => warm_iterations = parse_value(key, value)?,
                "tol" => tolerance = Some(parse_value(key, value)?),
                "field" => {
                    if !["rational", "float"].contains(&value) {
                        return Err(SpecError(format!("bad value '{value}' for 'field'")));
                    }
                    field = value.to_string();
                }
                "bounds" => {
                    warm = match value {
                        "trivial" => false,
                        "warm" => true,
                        _ => return Err(SpecError(format!("bad value '{value}' for 'bounds'"))),
                    }
                }
                "objective" => {
                    objective = match value {
                        "all" => ObjectiveMode::AllStates,
                        "initial" => ObjectiveMode::InitialOnly,
                        _ => return Err(SpecError(format!("bad value '{value}' for 'objective'"))),
                    }
                }
                "eq" => equality = parse_bool(key, value)?,
                _ => unreachable!("keys are checked above"),
            }
        }

        let stop = StoppingCriterion {
            mode,
            epsilon,
            max_iterations,
            deadline: Deadline::none(),
        };
        let mut lp_warm_iterations = None;
        let backend = match name {
            "vi" => Backend::Vi(stop),
            "ovi" => Backend::Ovi(OviConfig {
                verification_budget: budget,
                max_iterations,
                ..OviConfig::new(epsilon)
            }),
            "pi" => Backend::Pi {
                config: PiConfig {
                    improvement_tolerance: tolerance,
                    max_iterations,
                    ..PiConfig::new(match evaluator.as_str() {
                        "exact" => Evaluator::ExactElimination,
                        "fp" => Evaluator::FpElimination,
                        _ => Evaluator::Iterative(StoppingCriterion::relative(epsilon)),
                    })
                },
                initial: if warm {
                    InitialPolicy::WarmStart {
                        iterations: warm_iterations,
                    }
                } else {
                    InitialPolicy::FirstAction
                },
            },
            _ => {
                if warm {
                    lp_warm_iterations = Some(warm_iterations);
                }
                let mut config = LpConfig::new(if field == "rational" {
                    LpField::Rational
                } else {
                    LpField::float()
                });
                config.options.objective = objective;
                config.options.unique_action_equality = equality;
                config.max_iterations = max_iterations;
                Backend::Lp(config)
            }
        };
        Ok(AlgorithmConfig {
            backend,
            topological,
            lp_warm_iterations,
            name: name.to_string(),
            options,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The options as given, `key=value` joined by `:`.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .options
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        parts.join(":")
    }

    pub fn set_deadline(&mut self, deadline: Deadline) {
        match &mut self.backend {
            Backend::Vi(stop) => stop.deadline = deadline,
            Backend::Ovi(config) => config.deadline = deadline,
            Backend::Pi { config, .. } => {
                config.deadline = deadline;
                if let Evaluator::Iterative(stop) = &mut config.evaluator {
                    stop.deadline = deadline;
                }
            }
            Backend::Lp(config) => config.deadline = deadline,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub solution: Solution,
    pub preprocess_time: Duration,
    /// Present for topological runs.
    pub backend_calls: Option<usize>,
}

/// Preprocesses `mdp` and solves `objective` with `config`.
pub fn check(
    mdp: &SparseMdp,
    objective: &Objective,
    config: &AlgorithmConfig,
) -> Result<Analysis, SolveError> {
    let started = Instant::now();
    let q = preprocess(mdp, objective)?;
    let preprocess_time = started.elapsed();

    let mut backend = config.backend.clone();
    if let (Backend::Lp(lp), Some(iterations)) = (&mut backend, config.lp_warm_iterations) {
        lp.options.bounds = BoundsMode::Warm(vi_estimates(&q, iterations));
    }

    if config.topological {
        let out = solve_topological(&q, &backend, Some(mdp))?;
        return Ok(Analysis {
            solution: out.solution,
            preprocess_time,
            backend_calls: Some(out.backend_calls),
        });
    }
    let solution = match &backend {
        Backend::Vi(stop) => Solution::Float(solve_vi(&q, stop)?),
        Backend::Ovi(ovi) => Solution::Float(solve_ovi(&q, ovi)?),
        Backend::Pi { config, initial } => solve_pi(&q, config, initial, Some(mdp))?,
        Backend::Lp(lp) => solve_lp(&q, lp)?,
    };
    Ok(Analysis {
        solution,
        preprocess_time,
        backend_calls: None,
    })
}
