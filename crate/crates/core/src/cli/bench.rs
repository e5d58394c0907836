//! Benchmark suites, result classification and the hardness filter.
//!
//! A suite file has one run per line: `model objective algorithm [reference]`.
//! Model paths are relative to the suite file. Blank lines and `#` comments
//! are skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{check, parse_objective, AlgorithmConfig};
use crate::graph::preprocess;
use crate::io::{read_model, Reference};
use crate::result::{Deadline, SolveError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite line {line}: {reason}")]
    Suite { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Correct,
    Incorrect,
    Timeout,
    Error,
    NoReference,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Correct => "correct",
            Status::Incorrect => "incorrect",
            Status::Timeout => "timeout",
            Status::Error => "error",
            Status::NoReference => "no-reference",
        })
    }
}

/// Values whose magnitude is below this are treated as equal to zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;
/// Allowed deviation relative to the reference value.
pub const RELATIVE_TOLERANCE: f64 = 1e-3;

/// `result` is incorrect if it differs from `reference` by more than
/// `reference * 1e-3`, unless both are below `1e-8`.
pub fn classify(result: f64, reference: f64) -> Status {
    if result.is_infinite() || reference.is_infinite() {
        return if result == reference {
            Status::Correct
        } else {
            Status::Incorrect
        };
    }
    if result.is_nan() {
        return Status::Incorrect;
    }
    if result.abs() < ZERO_THRESHOLD && reference.abs() < ZERO_THRESHOLD {
        return Status::Correct;
    }
    if (result - reference).abs() > reference.abs() * RELATIVE_TOLERANCE {
        Status::Incorrect
    } else {
        Status::Correct
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub model_id: String,
    pub model_path: PathBuf,
    pub objective: String,
    pub algorithm: String,
    pub reference: Option<Reference>,
}

/// Parses a suite; every spec is validated before anything runs.
pub fn parse_suite(text: &str, base: &Path) -> Result<Vec<SuiteEntry>, BenchError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| BenchError::Suite {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (model, objective, algorithm, reference) = match fields[..] {
            [m, o, a] => (m, o, a, None),
            [m, o, a, r] => (m, o, a, Some(r)),
            _ => {
                return Err(err(format!(
                    "expected 3 or 4 fields, found {}",
                    fields.len()
                )))
            }
        };
        parse_objective(objective).map_err(|e| err(e.0))?;
        AlgorithmConfig::parse(algorithm).map_err(|e| err(e.0))?;
        let reference = match reference {
            Some(r) => {
                Some(Reference::parse(r).ok_or_else(|| err(format!("invalid reference '{r}'")))?)
            }
            None => None,
        };
        entries.push(SuiteEntry {
            model_id: model.to_string(),
            model_path: base.join(model),
            objective: objective.to_string(),
            algorithm: algorithm.to_string(),
            reference,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub objective: String,
    pub algorithm: String,
    pub config: String,
    pub status: Status,
    pub value: String,
    pub time_ms: f64,
    pub iterations: u64,
}

/// Algorithm column of the rows timing model loading and preprocessing.
pub const PREPROCESS: &str = "preprocess";

struct Outcome {
    status: Status,
    value: String,
    time_ms: f64,
    iterations: u64,
}

fn millis(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

fn run_one(entry: &SuiteEntry, timeout: Duration) -> Outcome {
    let failed = |status, iterations| Outcome {
        status,
        value: String::new(),
        time_ms: 0.0,
        iterations,
    };
    let mdp = match read_model(&entry.model_path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("warning: {}: {e}", entry.model_id);
            return failed(Status::Error, 0);
        }
    };
    let objective = parse_objective(&entry.objective).expect("validated when parsing the suite");
    let mut config =
        AlgorithmConfig::parse(&entry.algorithm).expect("validated when parsing the suite");
    config.set_deadline(Deadline::after(timeout));
    match check(&mdp, &objective, &config) {
        Ok(analysis) => {
            let solution = analysis.solution;
            let status = match &entry.reference {
                Some(r) => classify(solution.initial_f64(), r.to_f64()),
                None => Status::NoReference,
            };
            Outcome {
                status,
                value: solution.initial_text(),
                time_ms: millis(solution.elapsed()),
                iterations: solution.iterations(),
            }
        }
        Err(e) => match e.root() {
            SolveError::Timeout { iterations } => failed(Status::Timeout, *iterations),
            _ => {
                eprintln!(
                    "warning: {} {} {}: {e}",
                    entry.model_id, entry.objective, entry.algorithm
                );
                failed(Status::Error, 0)
            }
        },
    }
}

fn time_preprocess(path: &Path, objective: &str) -> Outcome {
    let started = Instant::now();
    let status = match read_model(path) {
        Ok(mdp) => {
            let objective = parse_objective(objective).expect("validated when parsing the suite");
            match preprocess(&mdp, &objective) {
                Ok(_) => Status::NoReference,
                Err(_) => Status::Error,
            }
        }
        Err(_) => Status::Error,
    };
    Outcome {
        status,
        value: String::new(),
        time_ms: millis(started.elapsed()),
        iterations: 0,
    }
}

/// Runs `task` on its own thread and gives up waiting after `limit`. A
/// task that overruns keeps its thread until it reaches a deadline check.
fn guarded(limit: Duration, task: impl FnOnce() -> Outcome + Send + 'static) -> Outcome {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(task());
    });
    match rx.recv_timeout(limit) {
        Ok(outcome) => outcome,
        Err(_) => Outcome {
            status: Status::Timeout,
            value: String::new(),
            time_ms: millis(limit),
            iterations: 0,
        },
    }
}

enum Job {
    Preprocess {
        model: String,
        path: PathBuf,
        objective: String,
    },
    Solve(SuiteEntry),
}

/// Runs every entry with the given per-run timeout. Each distinct
/// `(model, objective)` pair also gets a `preprocess` row timing model
/// loading and preprocessing. Rows come back in suite order.
pub fn run_suite(entries: &[SuiteEntry], timeout: Duration, workers: usize) -> Vec<BenchRow> {
    let mut jobs = Vec::new();
    let mut seen = BTreeMap::new();
    for e in entries {
        if seen
            .insert((e.model_id.clone(), e.objective.clone()), ())
            .is_none()
        {
            jobs.push(Job::Preprocess {
                model: e.model_id.clone(),
                path: e.model_path.clone(),
                objective: e.objective.clone(),
            });
        }
        jobs.push(Job::Solve(e.clone()));
    }

    let guard = timeout + timeout / 2 + Duration::from_secs(1);
    let results: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let row = match job {
                    Job::Preprocess {
                        model,
                        path,
                        objective,
                    } => {
                        let (p, o) = (path.clone(), objective.clone());
                        let out = guarded(guard, move || time_preprocess(&p, &o));
                        BenchRow {
                            model: model.clone(),
                            objective: objective.clone(),
                            algorithm: PREPROCESS.to_string(),
                            config: String::new(),
                            status: out.status,
                            value: out.value,
                            time_ms: out.time_ms,
                            iterations: out.iterations,
                        }
                    }
                    Job::Solve(entry) => {
                        let owned = entry.clone();
                        let out = guarded(guard, move || run_one(&owned, timeout));
                        let config = AlgorithmConfig::parse(&entry.algorithm).expect("validated");
                        BenchRow {
                            model: entry.model_id.clone(),
                            objective: entry.objective.clone(),
                            algorithm: config.name().to_string(),
                            config: config.describe(),
                            status: out.status,
                            value: out.value,
                            time_ms: out.time_ms,
                            iterations: out.iterations,
                        }
                    }
                };
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub const CSV_HEADER: [&str; 8] = [
    "model",
    "objective",
    "algorithm",
    "config",
    "status",
    "value",
    "time_ms",
    "iterations",
];

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?)
}

/// Default lower limit on value iteration plus preprocessing time.
pub const DEFAULT_HARDNESS_FLOOR_MS: f64 = 1000.0;

/// `(model, objective)` pairs where value iteration took longer than
/// loading and preprocessing, and both together took at least `floor_ms`.
pub fn hardness(rows: &[BenchRow], floor_ms: f64) -> Vec<(String, String)> {
    let mut pre: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut order = Vec::new();
    for row in rows.iter().filter(|r| r.algorithm == PREPROCESS) {
        let key = (row.model.as_str(), row.objective.as_str());
        if pre.insert(key, row.time_ms).is_none() {
            order.push(key);
        }
    }
    let mut vi: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.algorithm == "vi") {
        let key = (row.model.as_str(), row.objective.as_str());
        if matches!(row.status, Status::Timeout | Status::Error) {
            continue;
        }
        vi.entry(key).or_insert(row.time_ms);
    }
    order
        .into_iter()
        .filter(|key| {
            let (Some(&p), Some(&v)) = (pre.get(key), vi.get(key)) else {
                return false;
            };
            v > p && v + p >= floor_ms
        })
        .map(|(m, o)| (m.to_string(), o.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.247, 1.0 / 3.0), Status::Incorrect);
        assert_eq!(classify(5e-9, 1e-9), Status::Correct);
        assert_eq!(classify(1.0 / 3.0, 1.0 / 3.0), Status::Correct);
        assert_eq!(classify(f64::INFINITY, f64::INFINITY), Status::Correct);
        assert_eq!(classify(1.0, f64::INFINITY), Status::Incorrect);
        assert_eq!(classify(0.5005, 0.5), Status::Correct);
        assert_eq!(classify(0.5006, 0.5), Status::Incorrect);
    }

    fn row(model: &str, algorithm: &str, time_ms: f64) -> BenchRow {
        BenchRow {
            model: model.into(),
            objective: "reach:max:goal".into(),
            algorithm: algorithm.into(),
            config: String::new(),
            status: Status::NoReference,
            value: String::new(),
            time_ms,
            iterations: 0,
        }
    }

    #[test]
    fn hardness_rule() {
        assert!(hardness(&[], 1000.0).is_empty());
        let easy = [row("a", PREPROCESS, 500.0), row("a", "vi", 10.0)];
        assert!(hardness(&easy, 1000.0).is_empty());
        let hard = [row("b", PREPROCESS, 500.0), row("b", "vi", 2000.0)];
        assert_eq!(
            hardness(&hard, 1000.0),
            vec![("b".to_string(), "reach:max:goal".to_string())]
        );
        let quick = [row("c", PREPROCESS, 10.0), row("c", "vi", 20.0)];
        assert!(hardness(&quick, 1000.0).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("a", "vi", 1.5), row("b,c", "pi", 2.0)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("model,objective,algorithm,config,status,value,time_ms,iterations\n")
        );
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert!(read_csv(&empty[..]).unwrap().is_empty());
    }

    #[test]
    fn suite_errors_abort_early() {
        let base = Path::new(".");
        assert!(parse_suite("m.json reach:max:goal vi 1/3\n", base).is_ok());
        match parse_suite(
            "m.json reach:max:goal vi\nm.json reach:best:goal vi\n",
            base,
        ) {
            Err(BenchError::Suite { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_suite("m.json reward:max nope\n", base).is_err());
        assert!(parse_suite("m.json reward:max vi x/y\n", base).is_err());
    }
}
