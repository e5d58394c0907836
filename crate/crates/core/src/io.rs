//! Model files and reference-result files.
//!
//! A model is a JSON document:
//!
//! ```text
//! {
//!   "states": 3,
//!   "initial": 0,
//!   "labels": {"goal": [2]},
//!   "rewards": {"0": "1/2"},
//!   "transitions": [
//!     [[[1, "1/2"], [2, "1/2"]]],
//!     [[[1, "1"]]],
//!     [[[2, "1"]]]
//!   ]
//! }
//! ```
//!
//! `transitions[s][a]` lists `[successor, probability]` pairs. Probabilities
//! and rewards are `"p/q"` strings, decimal strings or integers, and are
//! parsed exactly.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::model::{build_mdp, ModelError, RawMdp, SparseMdp};
use crate::numeric::{format_rational, parse_rational, Rational};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        let reason = e.to_string();
        // serde_json appends " at line L column C"; keep only the reason
        let reason = match reason.rfind(" at line ") {
            Some(i) => reason[..i].to_string(),
            None => reason,
        };
        IoError::Parse {
            line: e.line(),
            reason,
        }
    }
}

struct Exact(Rational);

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exact;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as \"p/q\", a decimal string or an integer")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<Exact, E> {
                parse_rational(s)
                    .map(Exact)
                    .ok_or_else(|| E::custom(format!("invalid rational \"{s}\"")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
                Err(E::custom(format!(
                    "bare float {v}; write it as a string to keep it exact"
                )))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    states: usize,
    initial: usize,
    #[serde(default)]
    labels: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    rewards: Option<BTreeMap<usize, Exact>>,
    transitions: Vec<Vec<Vec<(usize, Exact)>>>,
}

pub fn parse_model(text: &str) -> Result<SparseMdp, IoError> {
    let doc: Document = serde_json::from_str(text)?;
    if doc.transitions.len() != doc.states {
        return Err(ModelError::StateCount {
            expected: doc.states,
            found: doc.transitions.len(),
        }
        .into());
    }
    let rewards = match doc.rewards {
        None => None,
        Some(map) => {
            let mut rewards = vec![Rational::from_integer(0.into()); doc.states];
            for (s, Exact(r)) in map {
                if s >= doc.states {
                    return Err(ModelError::BadStateRef {
                        what: "reward".into(),
                        index: s,
                    }
                    .into());
                }
                rewards[s] = r;
            }
            Some(rewards)
        }
    };
    let raw = RawMdp {
        num_states: doc.states,
        initial: doc.initial,
        transitions: doc
            .transitions
            .into_iter()
            .map(|actions| {
                actions
                    .into_iter()
                    .map(|dist| dist.into_iter().map(|(t, Exact(p))| (t, p)).collect())
                    .collect()
            })
            .collect(),
        rewards,
        labels: doc.labels,
    };
    Ok(build_mdp(raw)?)
}

/// Canonical text: one state per line, successors ascending, rationals in
/// lowest terms, zero rewards omitted.
pub fn write_model(mdp: &SparseMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"states\": {},", mdp.num_states());
    let _ = writeln!(out, "  \"initial\": {},", mdp.initial());
    let labels: Vec<String> = mdp
        .labels()
        .iter()
        .map(|(name, states)| {
            let list: Vec<String> = states.iter().map(ToString::to_string).collect();
            format!(
                "{}: [{}]",
                serde_json::to_string(name).expect("string"),
                list.join(", ")
            )
        })
        .collect();
    let _ = writeln!(out, "  \"labels\": {{{}}},", labels.join(", "));
    if let Some(rewards) = mdp.rewards() {
        let entries: Vec<String> = rewards
            .iter()
            .enumerate()
            .filter(|(_, r)| !num_traits::Zero::is_zero(*r))
            .map(|(s, r)| format!("\"{s}\": \"{}\"", format_rational(r)))
            .collect();
        let _ = writeln!(out, "  \"rewards\": {{{}}},", entries.join(", "));
    }
    let _ = writeln!(out, "  \"transitions\": [");
    for s in 0..mdp.num_states() {
        let actions: Vec<String> = mdp
            .choices(s)
            .map(|c| {
                let pairs: Vec<String> = mdp
                    .distribution(c)
                    .map(|(t, p)| format!("[{t}, \"{}\"]", format_rational(p)))
                    .collect();
                format!("[{}]", pairs.join(", "))
            })
            .collect();
        let sep = if s + 1 < mdp.num_states() { "," } else { "" };
        let _ = writeln!(out, "    [{}]{sep}", actions.join(", "));
    }
    let _ = writeln!(out, "  ]");
    out.push_str("}\n");
    out
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SparseMdp, IoError> {
    parse_model(&read(path.as_ref())?)
}

pub fn write_model_file(path: impl AsRef<Path>, mdp: &SparseMdp) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, write_model(mdp)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// A reference value: exact rational or infinity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Finite(Rational),
    Infinite,
}

impl Reference {
    pub fn parse(text: &str) -> Option<Reference> {
        match text {
            "inf" | "infinity" => Some(Reference::Infinite),
            _ => parse_rational(text).map(Reference::Finite),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Reference::Finite(r) => crate::numeric::rational_to_f64(r),
            Reference::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Finite(r) => f.write_str(&format_rational(r)),
            Reference::Infinite => f.write_str("inf"),
        }
    }
}

/// Reference results: lines `model-id objective-id value`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_references(text: &str) -> Result<BTreeMap<(String, String), Reference>, IoError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [model, objective, value] = fields[..] else {
            return Err(IoError::Parse {
                line: i + 1,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        let value = Reference::parse(value).ok_or_else(|| IoError::Parse {
            line: i + 1,
            reason: format!("invalid value \"{value}\""),
        })?;
        out.insert((model.to_string(), objective.to_string()), value);
    }
    Ok(out)
}

pub fn write_references(refs: &BTreeMap<(String, String), Reference>) -> String {
    refs.iter()
        .map(|((m, o), v)| format!("{m} {o} {v}\n"))
        .collect()
}
