//! Value iteration and optimistic value iteration.

use std::time::Instant;

use crate::graph::Quotient;
use crate::numeric::Number;
use crate::result::{Deadline, Guarantee, SolveError, SolveResult, SystemSolution};
use crate::system::ChoiceSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// `|x' - x| <= eps` in every state.
    Absolute,
    /// `|x' - x| <= eps * |x'|` in every state.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCriterion {
    pub mode: StopMode,
    pub epsilon: f64,
    pub max_iterations: Option<u64>,
    pub deadline: Deadline,
}

impl StoppingCriterion {
    pub fn relative(epsilon: f64) -> Self {
        StoppingCriterion {
            mode: StopMode::Relative,
            epsilon,
            max_iterations: None,
            deadline: Deadline::none(),
        }
    }

    pub fn absolute(epsilon: f64) -> Self {
        StoppingCriterion {
            mode: StopMode::Absolute,
            ..Self::relative(epsilon)
        }
    }

    pub fn with_max_iterations(mut self, limit: u64) -> Self {
        self.max_iterations = Some(limit);
        self
    }

    pub fn with_deadline(mut self, deadline: Deadline) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn converged<F: Number>(&self, old: &[F], new: &[F]) -> bool {
        let eps = F::from_f64(self.epsilon);
        old.iter().zip(new).all(|(a, b)| {
            let diff = (b.clone() - a.clone()).abs();
            match self.mode {
                StopMode::Absolute => diff <= eps,
                StopMode::Relative => diff <= eps.clone() * b.abs(),
            }
        })
    }
}

/// One Bellman update on every state of the quotient. Absorbing states
/// keep their fixed values.
pub fn bellman_apply<F: Number>(q: &Quotient, values: &[F]) -> Result<Vec<F>, SolveError> {
    let n = q.mdp.num_states();
    if values.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            found: values.len(),
        });
    }
    let sys = ChoiceSystem::<F>::from_quotient(q);
    let mut out = sys.bellman(&values[..q.num_maybe()]);
    out.push(if q.reward { F::zero() } else { F::one() });
    out.push(F::zero());
    Ok(out)
}

/// Iterates the Bellman operator on `x` in place until `stop` holds.
/// Returns the number of applications.
pub fn iterate<F: Number>(
    sys: &ChoiceSystem<F>,
    x: &mut Vec<F>,
    stop: &StoppingCriterion,
) -> Result<u64, SolveError> {
    let mut iterations = 0;
    loop {
        if let Some(limit) = stop.max_iterations {
            if iterations >= limit {
                return Err(SolveError::IterationLimit { limit });
            }
        }
        stop.deadline.check(iterations)?;
        let next = sys.bellman(x);
        iterations += 1;
        let done = stop.converged(x, &next);
        *x = next;
        if done {
            return Ok(iterations);
        }
    }
}

/// Value iteration from zero on a system.
pub fn vi_system<F: Number>(
    sys: &ChoiceSystem<F>,
    stop: &StoppingCriterion,
) -> Result<SystemSolution<F>, SolveError> {
    let mut x = vec![F::zero(); sys.num_states()];
    let iterations = iterate(sys, &mut x, stop)?;
    Ok(SystemSolution {
        policy: Some(sys.greedy(&x)),
        values: x,
        upper: None,
        guarantee: Guarantee::Unsound,
        iterations,
    })
}

/// Classic value iteration from below. The stopping rule gives no bound
/// on the distance to the true value.
pub fn solve_vi(q: &Quotient, stop: &StoppingCriterion) -> Result<SolveResult<f64>, SolveError> {
    let started = Instant::now();
    let sys = ChoiceSystem::<f64>::from_quotient(q);
    Ok(vi_system(&sys, stop)?.into_result(q, started))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OviConfig {
    /// Target relative width between the certified bounds.
    pub epsilon: f64,
    /// Verification iterations per guess; defaults to the length of the
    /// first value iteration phase.
    pub verification_budget: Option<u64>,
    pub max_iterations: Option<u64>,
    pub deadline: Deadline,
}

impl OviConfig {
    pub fn new(epsilon: f64) -> Self {
        OviConfig {
            epsilon,
            verification_budget: None,
            max_iterations: None,
            deadline: Deadline::none(),
        }
    }
}

enum Verdict {
    Certified,
    Refuted,
    Undecided,
}

/// Optimistic value iteration on a system.
///
/// Value iteration from below runs until its relative change drops under
/// `eps / 2`; then `u = l * (1 + eps)` is guessed and the lower and upper
/// vectors are iterated together. If the operator does not increase `u`
/// anywhere, `u` is a valid upper bound. If it increases `u` everywhere or
/// the vectors cross, the guess is abandoned and value iteration resumes
/// with half the tolerance.
pub fn ovi_system<F: Number>(
    sys: &ChoiceSystem<F>,
    config: &OviConfig,
) -> Result<SystemSolution<F>, SolveError> {
    let n = sys.num_states();
    if n == 0 {
        return Ok(SystemSolution {
            guarantee: Guarantee::Bounded {
                epsilon: config.epsilon,
                per_scc: false,
            },
            upper: Some(Vec::new()),
            ..SystemSolution::exact_empty()
        });
    }
    let eps = F::from_f64(config.epsilon);
    let mut lower = vec![F::zero(); n];
    let mut vi_epsilon = config.epsilon / 2.0;
    let mut iterations = 0u64;
    let mut first_phase = None;
    let over_limit = |iterations: u64| match config.max_iterations {
        Some(limit) if iterations >= limit => Err(SolveError::IterationLimit { limit }),
        _ => Ok(()),
    };

    loop {
        let stop = StoppingCriterion {
            mode: StopMode::Relative,
            epsilon: vi_epsilon,
            max_iterations: config.max_iterations.map(|l| l.saturating_sub(iterations)),
            deadline: config.deadline,
        };
        let phase = iterate(sys, &mut lower, &stop).map_err(|e| match e {
            SolveError::IterationLimit { .. } => SolveError::IterationLimit {
                limit: config.max_iterations.unwrap_or(0),
            },
            SolveError::Timeout { iterations: i } => SolveError::Timeout {
                iterations: iterations + i,
            },
            other => other,
        })?;
        iterations += phase;
        let budget = *first_phase.get_or_insert(config.verification_budget.unwrap_or(phase).max(1));

        let mut upper: Vec<F> = lower.iter().map(|l| guess(l, &eps)).collect();
        for _ in 0..budget {
            over_limit(iterations)?;
            config.deadline.check(iterations)?;
            let next_upper = sys.bellman(&upper);
            let next_lower = sys.bellman(&lower);
            iterations += 1;
            lower = next_lower;

            let verdict = verify(&lower, &upper, &next_upper);
            if let Verdict::Certified = verdict {
                if within(&lower, &upper, &eps) {
                    return Ok(SystemSolution {
                        policy: Some(sys.greedy(&lower)),
                        values: lower,
                        upper: Some(upper),
                        guarantee: Guarantee::Bounded {
                            epsilon: config.epsilon,
                            per_scc: false,
                        },
                        iterations,
                    });
                }
            }
            if let Verdict::Refuted = verdict {
                break;
            }
            upper = next_upper;
        }
        vi_epsilon /= 2.0;
    }
}

fn verify<F: Number>(lower: &[F], upper: &[F], next_upper: &[F]) -> Verdict {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Verdict::Refuted;
    }
    let mut down = true;
    let mut up = true;
    for (u, v) in upper.iter().zip(next_upper) {
        if v > u {
            down = false;
        }
        if v < u {
            up = false;
        }
    }
    match (down, up) {
        (true, _) => Verdict::Certified,
        (false, true) => Verdict::Refuted,
        _ => Verdict::Undecided,
    }
}

/// `l * (1 + eps)`, pulled back inside the target width if rounding
/// pushed it out.
fn guess<F: Number>(l: &F, eps: &F) -> F {
    let width = eps.clone() * l.abs();
    let mut u = l.clone() * (F::one() + eps.clone());
    for _ in 0..8 {
        if u.clone() - l.clone() <= width {
            break;
        }
        u = l.clone() + (u - l.clone()) * F::from_f64(0.999);
    }
    u
}

fn within<F: Number>(lower: &[F], upper: &[F], eps: &F) -> bool {
    lower
        .iter()
        .zip(upper)
        .all(|(l, u)| u.clone() - l.clone() <= eps.clone() * l.abs())
}

/// Optimistic value iteration with certified bounds in `f64`.
pub fn solve_ovi(q: &Quotient, config: &OviConfig) -> Result<SolveResult<f64>, SolveError> {
    let started = Instant::now();
    let sys = ChoiceSystem::<f64>::from_quotient(q);
    Ok(ovi_system(&sys, config)?.into_result(q, started))
}

/// Lower estimates after a fixed number of iterations from zero, one per
/// quotient state. Used for warm starts.
pub fn vi_estimates(q: &Quotient, iterations: usize) -> Vec<f64> {
    let sys = ChoiceSystem::<f64>::from_quotient(q);
    let mut x = vec![0.0; sys.num_states()];
    for _ in 0..iterations {
        x = sys.bellman(&x);
    }
    x.push(if q.reward { 0.0 } else { 1.0 });
    x.push(0.0);
    x
}
