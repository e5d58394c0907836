//! Solving strongly connected components one at a time, successors first.

use std::time::Instant;

use crate::graph::{tarjan, Quotient};
use crate::lp::{
    build_lp_system, lp_system, warm_lower, BoundsMode, LpConfig, LpField, ObjectiveMode,
};
use crate::model::SparseMdp;
use crate::numeric::{Number, Rational};
use crate::pi::{initial_choices, pi_system, Evaluator, InitialPolicy, PiConfig};
use crate::result::{Guarantee, Solution, SolveError, SystemSolution};
use crate::system::ChoiceSystem;
use crate::vi::{ovi_system, vi_system, OviConfig, StoppingCriterion};

/// A numerical method together with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Vi(StoppingCriterion),
    Ovi(OviConfig),
    Pi {
        config: PiConfig,
        initial: InitialPolicy,
    },
    Lp(LpConfig),
}

impl Backend {
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            Backend::Pi {
                config: PiConfig {
                    evaluator: Evaluator::ExactElimination,
                    ..
                },
                ..
            } | Backend::Lp(LpConfig {
                field: LpField::Rational,
                ..
            })
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoOutcome {
    pub solution: Solution,
    /// Components handed to the backend; trivial ones are not counted.
    pub backend_calls: usize,
    pub num_components: usize,
}

/// Per-component solver: `(sub-system on lower constants, sub-system on
/// upper constants if tracked, component states)`.
type SccSolver<'a, F> = dyn FnMut(
        &ChoiceSystem<F>,
        Option<&ChoiceSystem<F>>,
        &[usize],
    ) -> Result<SystemSolution<F>, SolveError>
    + 'a;

struct Orchestrated<F> {
    solution: SystemSolution<F>,
    calls: usize,
    components: usize,
}

fn orchestrate<F: Number>(
    sys: &ChoiceSystem<F>,
    track_upper: bool,
    trivial: Guarantee,
    solve: &mut SccSolver<'_, F>,
) -> Result<Orchestrated<F>, SolveError> {
    let n = sys.num_states();
    let adj: Vec<Vec<usize>> = (0..n).map(|s| sys.successors(s)).collect();
    let sccs = tarjan(&adj);
    let mut lower = vec![F::zero(); n];
    let mut upper = track_upper.then(|| vec![F::zero(); n]);
    let mut policy = vec![0; n];
    let mut guarantee = Guarantee::Exact;
    let mut iterations = 0;
    let mut calls = 0;

    for (index, scc) in sccs.iter().enumerate() {
        if let [s] = scc.as_slice() {
            if !adj[*s].contains(s) {
                let (a, v) = sys.best_action(*s, &lower);
                lower[*s] = v;
                policy[*s] = a;
                if let Some(u) = upper.as_mut() {
                    u[*s] = sys.best_action(*s, u).1;
                }
                guarantee = guarantee.weakest(trivial);
                continue;
            }
        }
        let sub = sys.subsystem(scc, &lower);
        let sub_upper = upper.as_ref().map(|u| sys.subsystem(scc, u));
        let sol = solve(&sub, sub_upper.as_ref(), scc).map_err(|e| SolveError::InScc {
            index,
            size: scc.len(),
            source: Box::new(e),
        })?;
        calls += 1;
        for (i, &s) in scc.iter().enumerate() {
            lower[s] = sol.values[i].clone();
            if let Some(p) = &sol.policy {
                policy[s] = p[i];
            }
        }
        if let (Some(u), Some(su)) = (upper.as_mut(), &sol.upper) {
            for (i, &s) in scc.iter().enumerate() {
                u[s] = su[i].clone();
            }
        }
        guarantee = guarantee.weakest(sol.guarantee);
        iterations += sol.iterations;
    }

    Ok(Orchestrated {
        solution: SystemSolution {
            values: lower,
            upper,
            policy: Some(policy),
            guarantee,
            iterations,
        },
        calls,
        components: sccs.len(),
    })
}

/// Lower-bounds and initial choices restricted to one component.
fn restrict<T: Clone>(global: &[T], scc: &[usize]) -> Vec<T> {
    scc.iter().map(|&s| global[s].clone()).collect()
}

fn run<F: Number>(
    q: &Quotient,
    backend: &Backend,
    original: Option<&SparseMdp>,
) -> Result<Orchestrated<F>, SolveError> {
    let sys = ChoiceSystem::<F>::from_quotient(q);
    let k = q.num_maybe();
    match backend {
        Backend::Vi(stop) => orchestrate(&sys, false, Guarantee::Unsound, &mut |sub, _, _| {
            vi_system(sub, stop)
        }),
        Backend::Ovi(config) => {
            let per_scc = Guarantee::Bounded {
                epsilon: config.epsilon,
                per_scc: true,
            };
            orchestrate(&sys, true, per_scc, &mut |sub, sub_upper, _| {
                let low = ovi_system(sub, config)?;
                let high = ovi_system(sub_upper.expect("upper constants are tracked"), config)?;
                Ok(SystemSolution {
                    values: low.values,
                    upper: high.upper,
                    policy: low.policy,
                    guarantee: low.guarantee.weakest(high.guarantee).weakest(per_scc),
                    iterations: low.iterations + high.iterations,
                })
            })
        }
        Backend::Pi { config, initial } => {
            let start = initial_choices(q, original, initial)?;
            let trivial = match config.evaluator {
                Evaluator::ExactElimination if F::EXACT => Guarantee::Exact,
                _ => Guarantee::Unsound,
            };
            orchestrate(&sys, false, trivial, &mut |sub, _, scc| {
                pi_system(sub, config, restrict(&start, scc), |_| {})
            })
        }
        Backend::Lp(config) => {
            let warm: Option<Vec<F>> = match &config.options.bounds {
                BoundsMode::Trivial => None,
                BoundsMode::Warm(estimates) => {
                    if estimates.len() != q.mdp.num_states() {
                        return Err(SolveError::DimensionMismatch {
                            expected: q.mdp.num_states(),
                            found: estimates.len(),
                        });
                    }
                    Some(estimates[..k].iter().map(|&e| warm_lower::<F>(e)).collect())
                }
            };
            let entries = entry_states(&sys, q.mdp.initial());
            let trivial = if F::EXACT {
                Guarantee::Exact
            } else {
                Guarantee::Unsound
            };
            orchestrate(&sys, false, trivial, &mut |sub, _, scc| {
                let lower = warm.as_ref().map(|w| restrict(w, scc));
                let objective_states: Option<Vec<usize>> = match config.options.objective {
                    ObjectiveMode::AllStates => None,
                    ObjectiveMode::InitialOnly => {
                        let local: Vec<usize> =
                            (0..scc.len()).filter(|&i| entries[scc[i]]).collect();
                        (!local.is_empty()).then_some(local)
                    }
                };
                let lp = build_lp_system(
                    sub,
                    q.reward,
                    lower.as_deref(),
                    objective_states.as_deref(),
                    config.options.unique_action_equality,
                );
                lp_system(&lp, config, sub)
            })
        }
    }
}

/// States entered from outside their own component, plus the initial state.
fn entry_states<F: Number>(sys: &ChoiceSystem<F>, initial: usize) -> Vec<bool> {
    let n = sys.num_states();
    let adj: Vec<Vec<usize>> = (0..n).map(|s| sys.successors(s)).collect();
    let mut component = vec![0; n];
    for (c, scc) in tarjan(&adj).iter().enumerate() {
        for &s in scc {
            component[s] = c;
        }
    }
    let mut entry = vec![false; n];
    if initial < n {
        entry[initial] = true;
    }
    for s in 0..n {
        for &t in &adj[s] {
            if component[t] != component[s] {
                entry[t] = true;
            }
        }
    }
    entry
}

/// Topological solving of a preprocessed model with the given backend.
/// Exact backends compute in rationals, the others in `f64`.
pub fn solve_topological(
    q: &Quotient,
    backend: &Backend,
    original: Option<&SparseMdp>,
) -> Result<TopoOutcome, SolveError> {
    let started = Instant::now();
    if backend.is_exact() {
        let out = run::<Rational>(q, backend, original)?;
        Ok(TopoOutcome {
            solution: Solution::Exact(out.solution.into_result(q, started)),
            backend_calls: out.calls,
            num_components: out.components,
        })
    } else {
        let out = run::<f64>(q, backend, original)?;
        Ok(TopoOutcome {
            solution: Solution::Float(out.solution.into_result(q, started)),
            backend_calls: out.calls,
            num_components: out.components,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::gen_hard_mn;
    use crate::graph::preprocess;
    use crate::model::{build_mdp, ExtValue, Objective, Opt, RawMdp};
    use crate::numeric::{rational, rational_int};

    fn exact_pi() -> Backend {
        Backend::Pi {
            config: PiConfig::new(Evaluator::ExactElimination),
            initial: InitialPolicy::FirstAction,
        }
    }

    fn acyclic() -> SparseMdp {
        // 0 -> {1, 2}; 1 -> goal or 2; 2 -> goal or fail
        let mut raw = RawMdp::new(5);
        raw.action(0, vec![(1, rational_int(1))])
            .action(0, vec![(2, rational_int(1))])
            .action(1, vec![(3, rational(1, 3)), (2, rational(2, 3))])
            .action(2, vec![(3, rational(1, 2)), (4, rational(1, 2))])
            .action(3, vec![(3, rational_int(1))])
            .action(4, vec![(4, rational_int(1))])
            .label("goal", vec![3]);
        build_mdp(raw).unwrap()
    }

    #[test]
    fn acyclic_needs_no_backend_calls() {
        let mdp = acyclic();
        let q = preprocess(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        let backends = [
            exact_pi(),
            Backend::Vi(StoppingCriterion::relative(1e-6)),
            Backend::Ovi(OviConfig::new(1e-6)),
            Backend::Lp(LpConfig::new(LpField::Rational)),
        ];
        for backend in backends {
            let out = solve_topological(&q, &backend, Some(&mdp)).unwrap();
            assert_eq!(out.backend_calls, 0, "{backend:?}");
            assert!((out.solution.initial_f64() - 2.0 / 3.0).abs() < 1e-12);
        }
        let out = solve_topological(&q, &exact_pi(), Some(&mdp)).unwrap();
        assert_eq!(
            out.solution.exact().unwrap().initial_value(),
            &ExtValue::Finite(rational(2, 3))
        );
        assert_eq!(out.solution.guarantee(), Guarantee::Exact);
    }

    #[test]
    fn hard_family_is_one_component() {
        for opt in [Opt::Min, Opt::Max] {
            let mdp = gen_hard_mn(8).unwrap();
            let q = preprocess(&mdp, &Objective::reach(opt, "goal")).unwrap();
            let out = solve_topological(&q, &exact_pi(), Some(&mdp)).unwrap();
            assert_eq!(out.backend_calls, 1);
            let expected = if opt == Opt::Max {
                rational(2, 3)
            } else {
                rational(1, 3)
            };
            assert_eq!(
                out.solution.exact().unwrap().initial_value(),
                &ExtValue::Finite(expected)
            );
        }
    }

    #[test]
    fn ovi_reports_per_component_epsilon() {
        let mdp = gen_hard_mn(4).unwrap();
        let q = preprocess(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        let out = solve_topological(&q, &Backend::Ovi(OviConfig::new(1e-6)), Some(&mdp)).unwrap();
        assert_eq!(
            out.solution.guarantee(),
            Guarantee::Bounded {
                epsilon: 1e-6,
                per_scc: true
            }
        );
        let res = out.solution.float().unwrap();
        let (lo, hi) = (
            res.initial_value().to_f64(),
            res.initial_upper().unwrap().to_f64(),
        );
        assert!(lo <= 2.0 / 3.0 && 2.0 / 3.0 <= hi);
    }

    #[test]
    fn errors_carry_component() {
        let mdp = gen_hard_mn(4).unwrap();
        let q = preprocess(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        let backend = Backend::Vi(StoppingCriterion::relative(1e-12).with_max_iterations(1));
        let err = solve_topological(&q, &backend, Some(&mdp)).unwrap_err();
        assert!(matches!(err, SolveError::InScc { .. }));
        assert_eq!(err.root(), &SolveError::IterationLimit { limit: 1 });
    }
}
