//! Policy iteration with exact, floating-point or iterative evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::graph::{preprocess, Quotient};
use crate::model::{InducedMc, Objective, Opt, Policy, SparseMdp};
use crate::numeric::{Number, Rational};
use crate::result::{Deadline, Guarantee, Solution, SolveError, SystemSolution};
use crate::system::ChoiceSystem;
use crate::vi::{iterate, vi_estimates, StoppingCriterion};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluator {
    /// Sparse state elimination over exact rationals.
    ExactElimination,
    /// The same elimination in `f64`.
    FpElimination,
    /// Value iteration from zero on the induced chain.
    Iterative(StoppingCriterion),
}

/// How the first policy is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPolicy {
    /// Action 0 everywhere.
    FirstAction,
    /// A policy of the original model, translated onto the quotient.
    Original(Policy),
    /// Greedy with respect to `iterations` steps of value iteration.
    WarmStart { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiConfig {
    pub evaluator: Evaluator,
    /// Minimum gain for switching actions; derived from the evaluator
    /// when absent.
    pub improvement_tolerance: Option<f64>,
    pub max_iterations: Option<u64>,
    pub deadline: Deadline,
}

impl PiConfig {
    pub fn new(evaluator: Evaluator) -> Self {
        PiConfig {
            evaluator,
            improvement_tolerance: None,
            max_iterations: None,
            deadline: Deadline::none(),
        }
    }

    /// Exact elimination switches on any strict gain. Iterative evaluation
    /// only switches on gains its own tolerance could not have produced.
    pub fn tolerance(&self) -> f64 {
        self.improvement_tolerance.unwrap_or(match self.evaluator {
            Evaluator::ExactElimination => 0.0,
            Evaluator::FpElimination => 1e-8,
            Evaluator::Iterative(stop) => stop.epsilon.max(1e-8),
        })
    }
}

/// Solves `x = b + A x` for a system with one row per state by eliminating
/// states in ascending index order, then substituting back.
pub fn eliminate<F: Number>(mc: &ChoiceSystem<F>) -> Result<Vec<F>, SolveError> {
    let n = mc.num_states();
    let mut rows: Vec<BTreeMap<usize, F>> = vec![BTreeMap::new(); n];
    let mut users: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut b = Vec::with_capacity(n);
    for (i, row) in rows.iter_mut().enumerate() {
        let r = mc.rows(i).start;
        let (cols, coeffs) = mc.row(r);
        for (&j, a) in cols.iter().zip(coeffs) {
            let entry = row.entry(j).or_insert_with(F::zero);
            *entry = entry.clone() + a.clone();
            if j != i {
                users[j].insert(i);
            }
        }
        b.push(mc.constant(r).clone());
    }

    for k in 0..n {
        let pivot = F::one() - rows[k].remove(&k).unwrap_or_else(F::zero);
        let singular = if F::EXACT {
            pivot.is_zero()
        } else {
            pivot.to_f64().abs() < 1e-14
        };
        if singular {
            return Err(SolveError::SingularSystem { state: k });
        }
        if !pivot.is_one() {
            for a in rows[k].values_mut() {
                *a = a.clone() / pivot.clone();
            }
            b[k] = b[k].clone() / pivot;
        }
        let row_k: Vec<(usize, F)> = rows[k].iter().map(|(&j, a)| (j, a.clone())).collect();
        let later: Vec<usize> = users[k].range(k + 1..).copied().collect();
        for i in later {
            let Some(c) = rows[i].remove(&k) else {
                continue;
            };
            for (j, a) in &row_k {
                let entry = rows[i].entry(*j).or_insert_with(F::zero);
                *entry = entry.clone() + c.clone() * a.clone();
                if *j != i {
                    users[*j].insert(i);
                }
            }
            b[i] = b[i].clone() + c * b[k].clone();
        }
    }

    let mut x = vec![F::zero(); n];
    for k in (0..n).rev() {
        x[k] = rows[k]
            .iter()
            .fold(b[k].clone(), |acc, (&j, a)| acc + a.clone() * x[j].clone());
    }
    Ok(x)
}

/// Values of a one-row-per-state system and the inner iteration count.
pub fn evaluate_system<F: Number>(
    mc: &ChoiceSystem<F>,
    evaluator: &Evaluator,
) -> Result<(Vec<F>, u64), SolveError> {
    match evaluator {
        Evaluator::ExactElimination | Evaluator::FpElimination => Ok((eliminate(mc)?, 0)),
        Evaluator::Iterative(stop) => {
            let mut x = vec![F::zero(); mc.num_states()];
            let inner = iterate(mc, &mut x, stop)?;
            Ok((x, inner))
        }
    }
}

/// Values of a Markov chain induced by a policy.
pub fn evaluate_policy(
    mc: &InducedMc,
    objective: &Objective,
    evaluator: &Evaluator,
) -> Result<Solution, SolveError> {
    let started = Instant::now();
    let q = preprocess(&mc.chain, objective)?;
    let guarantee = match evaluator {
        Evaluator::ExactElimination => Guarantee::Exact,
        _ => Guarantee::Unsound,
    };
    fn run<F: Number>(
        q: &Quotient,
        evaluator: &Evaluator,
        guarantee: Guarantee,
    ) -> Result<SystemSolution<F>, SolveError> {
        let (values, iterations) =
            evaluate_system(&ChoiceSystem::<F>::from_quotient(q), evaluator)?;
        Ok(SystemSolution {
            values,
            upper: None,
            policy: None,
            guarantee,
            iterations,
        })
    }
    Ok(match evaluator {
        Evaluator::ExactElimination => {
            Solution::Exact(run::<Rational>(&q, evaluator, guarantee)?.into_result(&q, started))
        }
        _ => Solution::Float(run::<f64>(&q, evaluator, guarantee)?.into_result(&q, started)),
    })
}

/// Greedy policy of the quotient with respect to per-state estimates.
pub fn warm_start_policy(q: &Quotient, estimates: &[f64]) -> Result<Policy, SolveError> {
    let n = q.mdp.num_states();
    if estimates.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            found: estimates.len(),
        });
    }
    let sys = ChoiceSystem::<f64>::from_quotient(q);
    let mut choice = sys.greedy(&estimates[..q.num_maybe()]);
    choice.resize(n, 0);
    Ok(Policy(choice))
}

/// The first policy over the non-absorbing quotient states.
pub(crate) fn initial_choices(
    q: &Quotient,
    original: Option<&SparseMdp>,
    initial: &InitialPolicy,
) -> Result<Vec<usize>, SolveError> {
    match initial {
        InitialPolicy::FirstAction => Ok(vec![0; q.num_maybe()]),
        InitialPolicy::Original(policy) => {
            let original = original.expect("original model needed to translate a policy");
            policy.validate(original)?;
            Ok(q.translate_policy(original, policy))
        }
        InitialPolicy::WarmStart { iterations } => {
            let mut choice = warm_start_policy(q, &vi_estimates(q, *iterations))?.0;
            choice.truncate(q.num_maybe());
            Ok(choice)
        }
    }
}

/// Policy iteration on a system, starting from `policy`. `observe` sees
/// the value vector of every evaluated policy.
pub fn pi_system<F: Number>(
    sys: &ChoiceSystem<F>,
    config: &PiConfig,
    mut policy: Vec<usize>,
    mut observe: impl FnMut(&[F]),
) -> Result<SystemSolution<F>, SolveError> {
    if let Err(state) = sys.make_proper(&mut policy) {
        return Err(SolveError::SingularSystem { state });
    }
    let tol = F::from_f64(config.tolerance());
    let opt = sys.opt();
    let mut iterations = 0u64;
    loop {
        if let Some(limit) = config.max_iterations {
            if iterations >= limit {
                return Err(SolveError::IterationLimit { limit });
            }
        }
        config.deadline.check(iterations)?;
        let (values, _) = evaluate_system(&sys.restrict(&policy), &config.evaluator)?;
        observe(&values);
        iterations += 1;

        let mut switched = false;
        for (s, current) in policy.iter_mut().enumerate() {
            let rows = sys.rows(s);
            let first = rows.start;
            let q_current = sys.backup(first + *current, &values);
            let threshold = match opt {
                Opt::Max => q_current + tol.clone(),
                Opt::Min => q_current - tol.clone(),
            };
            let mut best: Option<(usize, F)> = None;
            for r in rows {
                if r - first == *current {
                    continue;
                }
                let q = sys.backup(r, &values);
                let beats_best = best.as_ref().is_none_or(|(_, b)| opt.better(&q, b));
                if opt.better(&q, &threshold) && beats_best {
                    best = Some((r - first, q));
                }
            }
            if let Some((a, _)) = best {
                *current = a;
                switched = true;
            }
        }
        if !switched {
            let guarantee = match (F::EXACT, config.evaluator) {
                (true, Evaluator::ExactElimination) => Guarantee::Exact,
                _ => Guarantee::Unsound,
            };
            return Ok(SystemSolution {
                values,
                upper: None,
                policy: Some(policy),
                guarantee,
                iterations,
            });
        }
    }
}

/// Policy iteration on a preprocessed model. `original` is only needed to
/// translate an [`InitialPolicy::Original`].
pub fn solve_pi(
    q: &Quotient,
    config: &PiConfig,
    initial: &InitialPolicy,
    original: Option<&SparseMdp>,
) -> Result<Solution, SolveError> {
    let started = Instant::now();
    let start = initial_choices(q, original, initial)?;
    Ok(match config.evaluator {
        Evaluator::ExactElimination => {
            let sys = ChoiceSystem::<Rational>::from_quotient(q);
            Solution::Exact(pi_system(&sys, config, start, |_| {})?.into_result(q, started))
        }
        _ => {
            let sys = ChoiceSystem::<f64>::from_quotient(q);
            Solution::Float(pi_system(&sys, config, start, |_| {})?.into_result(q, started))
        }
    })
}
