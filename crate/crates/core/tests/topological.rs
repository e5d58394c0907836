//! Component-wise solving against monolithic solving.

#![allow(clippy::needless_range_loop)]

mod common;

use common::{brute_force, matches_exact, objectives, random_instance, rel_err, to_f64};
use mdpcheck::gen::{gen_hard_mn, gen_random_mdp, RandomMdpParams};
use mdpcheck::graph::preprocess;
use mdpcheck::lp::{solve_lp, LpConfig, LpField};
use mdpcheck::model::{build_mdp, Objective, Opt, RawMdp};
use mdpcheck::numeric::rational;
use mdpcheck::pi::{solve_pi, Evaluator, InitialPolicy, PiConfig};
use mdpcheck::result::Guarantee;
use mdpcheck::topo::{solve_topological, Backend};
use mdpcheck::vi::{solve_ovi, OviConfig, StoppingCriterion};

fn backends() -> Vec<Backend> {
    vec![
        Backend::Vi(StoppingCriterion::relative(1e-9)),
        Backend::Ovi(OviConfig::new(1e-6)),
        Backend::Pi {
            config: PiConfig::new(Evaluator::ExactElimination),
            initial: InitialPolicy::FirstAction,
        },
        Backend::Lp(LpConfig::new(LpField::Rational)),
    ]
}

#[test]
fn exact_backends_match_oracle_componentwise() {
    for seed in 0..40 {
        let mdp = random_instance(7000 + seed, 9);
        for objective in objectives() {
            let oracle = brute_force(&mdp, &objective);
            let q = preprocess(&mdp, &objective).unwrap();
            for backend in backends().into_iter().filter(Backend::is_exact) {
                let out = solve_topological(&q, &backend, Some(&mdp)).unwrap();
                matches_exact(&out.solution.exact().unwrap().values, &oracle)
                    .unwrap_or_else(|e| panic!("seed {seed}, {objective}, {backend:?}: {e}"));
                assert_eq!(out.solution.guarantee(), Guarantee::Exact);
            }
        }
    }
}

#[test]
fn ovi_componentwise_brackets_oracle() {
    for seed in 0..40 {
        let mdp = random_instance(8000 + seed, 9);
        for objective in objectives() {
            let oracle = to_f64(&brute_force(&mdp, &objective));
            let q = preprocess(&mdp, &objective).unwrap();
            let out = solve_topological(&q, &Backend::Ovi(OviConfig::new(1e-6)), None).unwrap();
            let res = out.solution.float().unwrap();
            let upper = res.upper.as_ref().unwrap();
            for s in 0..mdp.num_states() {
                let (lo, hi, want) = (res.values.get(s).to_f64(), upper.get(s).to_f64(), oracle[s]);
                if want.is_infinite() {
                    assert!(lo.is_infinite() && hi.is_infinite());
                    continue;
                }
                let slack = 1e-12 * want.abs().max(1.0);
                assert!(
                    lo <= want + slack && want <= hi + slack,
                    "seed {seed}, {objective}, state {s}: [{lo}, {hi}] vs {want}"
                );
            }
            let expected = match q.num_maybe() {
                0 => matches!(out.solution.guarantee(), Guarantee::Exact),
                _ => matches!(
                    out.solution.guarantee(),
                    Guarantee::Bounded { per_scc: true, .. }
                ),
            };
            assert!(
                expected,
                "seed {seed}, {objective}: {:?}",
                out.solution.guarantee()
            );
        }
    }
}

#[test]
fn monolithic_and_topological_agree_on_larger_models() {
    for seed in 0..10 {
        let params = RandomMdpParams {
            seed,
            num_states: 60,
            max_actions: 3,
            density: 0.05,
            target_fraction: 0.1,
            max_reward: Some(3),
        };
        let mdp = gen_random_mdp(&params).unwrap();
        for objective in objectives() {
            let q = preprocess(&mdp, &objective).unwrap();
            let exact = PiConfig::new(Evaluator::ExactElimination);
            let mono = solve_pi(&q, &exact, &InitialPolicy::FirstAction, None).unwrap();
            let lp = solve_lp(&q, &LpConfig::new(LpField::Rational)).unwrap();
            assert_eq!(mono.exact().unwrap().values, lp.exact().unwrap().values);
            let reference = mono.values_f64();
            for backend in backends() {
                let topo = solve_topological(&q, &backend, Some(&mdp)).unwrap();
                if backend.is_exact() {
                    assert_eq!(
                        topo.solution.exact().unwrap().values,
                        mono.exact().unwrap().values
                    );
                } else {
                    for (a, b) in topo.solution.values_f64().iter().zip(&reference) {
                        if b.is_infinite() {
                            assert!(a.is_infinite());
                        } else {
                            assert!(
                                rel_err(*a, *b) < 1e-5 || (a - b).abs() < 1e-9,
                                "{backend:?}: {a} vs {b}"
                            );
                        }
                    }
                }
            }
            let ovi = solve_ovi(&q, &OviConfig::new(1e-6)).unwrap();
            assert_eq!(ovi.values.len(), mdp.num_states());
        }
    }
}

#[test]
fn acyclic_models_need_no_backend_calls() {
    // a layered DAG: every state moves strictly forward
    let n = 14;
    let mut raw = RawMdp::new(n);
    for s in 0..n - 2 {
        raw.action(
            s,
            vec![
                (s + 1, rational(1, 3)),
                ((s + 2).min(n - 1), rational(2, 3)),
            ],
        );
        raw.action(s, vec![(n - 2, rational(1, 2)), (n - 1, rational(1, 2))]);
    }
    raw.action(n - 2, vec![(n - 2, rational(1, 1))]);
    raw.action(n - 1, vec![(n - 1, rational(1, 1))]);
    raw.label("goal", vec![n - 1]);
    let mdp = build_mdp(raw).unwrap();
    for opt in [Opt::Min, Opt::Max] {
        let objective = Objective::reach(opt, "goal");
        let q = preprocess(&mdp, &objective).unwrap();
        let oracle = brute_force(&mdp, &objective);
        for backend in backends() {
            let out = solve_topological(&q, &backend, None).unwrap();
            assert_eq!(out.backend_calls, 0, "{backend:?}");
            if backend.is_exact() {
                matches_exact(&out.solution.exact().unwrap().values, &oracle).unwrap();
            }
        }
    }
}

#[test]
fn hard_family_is_one_component() {
    for n in [3, 8, 15] {
        let mdp = gen_hard_mn(n).unwrap();
        let q = preprocess(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        let out = solve_topological(&q, &backends()[2], None).unwrap();
        assert_eq!(out.backend_calls, 1);
        assert_eq!(
            out.solution.exact().unwrap().values.get(0).finite(),
            Some(&rational(2, 3))
        );
    }
}
