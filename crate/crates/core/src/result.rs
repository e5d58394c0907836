//! Solver results, guarantees and errors shared by all algorithms.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::{GraphError, Quotient, StateImage};
use crate::model::{ExtValue, ModelError, Policy, ValueVector};
use crate::numeric::{Number, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("iteration limit of {limit} reached")]
    IterationLimit { limit: u64 },
    #[error("timed out after {iterations} iterations")]
    Timeout { iterations: u64 },
    #[error("singular linear system at state {state}")]
    SingularSystem { state: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("in SCC #{index} ({size} states): {source}")]
    InScc {
        index: usize,
        size: usize,
        #[source]
        source: Box<SolveError>,
    },
}

impl SolveError {
    /// The underlying error with SCC context stripped.
    pub fn root(&self) -> &SolveError {
        match self {
            SolveError::InScc { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Optional wall-clock limit, checked at iteration boundaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Deadline(pub Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(budget: Duration) -> Self {
        Deadline(Some(Instant::now() + budget))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }

    pub fn check(&self, iterations: u64) -> Result<(), SolveError> {
        if self.expired() {
            Err(SolveError::Timeout { iterations })
        } else {
            Ok(())
        }
    }
}

/// What a result promises about its distance to the true value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guarantee {
    Exact,
    /// Certified lower and upper bounds within relative `epsilon`. With
    /// `per_scc` the width holds per component, not end to end.
    Bounded {
        epsilon: f64,
        per_scc: bool,
    },
    Unsound,
}

impl Guarantee {
    pub fn weakest(self, other: Guarantee) -> Guarantee {
        use Guarantee::*;
        match (self, other) {
            (Unsound, _) | (_, Unsound) => Unsound,
            (Exact, g) | (g, Exact) => g,
            (
                Bounded {
                    epsilon: a,
                    per_scc: p,
                },
                Bounded {
                    epsilon: b,
                    per_scc: q,
                },
            ) => Bounded {
                epsilon: a.max(b),
                per_scc: p || q,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Guarantee::Exact => "exact",
            Guarantee::Bounded { per_scc: false, .. } => "sound",
            Guarantee::Bounded { per_scc: true, .. } => "sound-per-scc",
            Guarantee::Unsound => "unsound",
        }
    }
}

/// A solver's answer on the non-absorbing states of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSolution<F> {
    pub values: Vec<F>,
    pub upper: Option<Vec<F>>,
    pub policy: Option<Vec<usize>>,
    pub guarantee: Guarantee,
    pub iterations: u64,
}

impl<F: Number> SystemSolution<F> {
    pub fn exact_empty() -> Self {
        SystemSolution {
            values: Vec::new(),
            upper: None,
            policy: None,
            guarantee: Guarantee::Exact,
            iterations: 0,
        }
    }

    pub(crate) fn into_result(self, q: &Quotient, started: Instant) -> SolveResult<F> {
        let policy = self.policy.map(|mut choice| {
            choice.resize(q.mdp.num_states(), 0);
            Policy(choice)
        });
        SolveResult {
            values: lift(q, &self.values),
            upper: self.upper.map(|u| lift(q, &u)),
            policy,
            guarantee: self.guarantee,
            iterations: self.iterations,
            elapsed: started.elapsed(),
            initial_state: q.original_initial,
        }
    }
}

/// Values of all original states given values of the non-absorbing
/// quotient states.
pub fn lift<F: Number>(q: &Quotient, maybe: &[F]) -> ValueVector<F> {
    let target_value = if q.reward { F::zero() } else { F::one() };
    ValueVector(
        q.state_map
            .iter()
            .map(|image| match *image {
                StateImage::Infinite => ExtValue::Infinite,
                StateImage::Quotient(t) if t == q.target => ExtValue::Finite(target_value.clone()),
                StateImage::Quotient(t) if t == q.sink => ExtValue::Finite(F::zero()),
                StateImage::Quotient(t) => ExtValue::Finite(maybe[t].clone()),
            })
            .collect(),
    )
}

/// Result of solving an objective on an original model.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<F> {
    /// One value per original state.
    pub values: ValueVector<F>,
    /// Certified upper bounds, for sound iterative methods.
    pub upper: Option<ValueVector<F>>,
    /// Witness policy on the quotient model.
    pub policy: Option<Policy>,
    pub guarantee: Guarantee,
    pub iterations: u64,
    pub elapsed: Duration,
    pub initial_state: usize,
}

impl<F> SolveResult<F> {
    pub fn initial_value(&self) -> &ExtValue<F> {
        self.values.get(self.initial_state)
    }

    pub fn initial_upper(&self) -> Option<&ExtValue<F>> {
        self.upper.as_ref().map(|u| u.get(self.initial_state))
    }
}

/// A result in whichever field the algorithm computed in.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Exact(SolveResult<Rational>),
    Float(SolveResult<f64>),
}

impl Solution {
    pub fn guarantee(&self) -> Guarantee {
        match self {
            Solution::Exact(r) => r.guarantee,
            Solution::Float(r) => r.guarantee,
        }
    }

    pub fn iterations(&self) -> u64 {
        match self {
            Solution::Exact(r) => r.iterations,
            Solution::Float(r) => r.iterations,
        }
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            Solution::Exact(r) => r.elapsed,
            Solution::Float(r) => r.elapsed,
        }
    }

    pub fn policy(&self) -> Option<&Policy> {
        match self {
            Solution::Exact(r) => r.policy.as_ref(),
            Solution::Float(r) => r.policy.as_ref(),
        }
    }

    pub fn value_f64(&self, state: usize) -> f64 {
        match self {
            Solution::Exact(r) => r.values.get(state).to_f64(),
            Solution::Float(r) => r.values.get(state).to_f64(),
        }
    }

    pub fn initial_f64(&self) -> f64 {
        match self {
            Solution::Exact(r) => r.initial_value().to_f64(),
            Solution::Float(r) => r.initial_value().to_f64(),
        }
    }

    /// Initial-state value as text: a rational in lowest terms for exact
    /// results, the shortest round-tripping decimal otherwise.
    pub fn initial_text(&self) -> String {
        match self {
            Solution::Exact(r) => r.initial_value().to_string(),
            Solution::Float(r) => r.initial_value().to_string(),
        }
    }

    pub fn initial_upper_text(&self) -> Option<String> {
        match self {
            Solution::Exact(r) => r.initial_upper().map(ToString::to_string),
            Solution::Float(r) => r.initial_upper().map(ToString::to_string),
        }
    }

    pub fn exact(&self) -> Option<&SolveResult<Rational>> {
        match self {
            Solution::Exact(r) => Some(r),
            Solution::Float(_) => None,
        }
    }

    pub fn float(&self) -> Option<&SolveResult<f64>> {
        match self {
            Solution::Float(r) => Some(r),
            Solution::Exact(_) => None,
        }
    }

    pub fn values_f64(&self) -> Vec<f64> {
        match self {
            Solution::Exact(r) => r.values.iter().map(ExtValue::to_f64).collect(),
            Solution::Float(r) => r.values.iter().map(ExtValue::to_f64).collect(),
        }
    }
}
