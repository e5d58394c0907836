//! Randomised properties of the operators and solvers.

#![allow(clippy::needless_range_loop)]

mod common;

use common::{objectives, random_instance};
use mdpcheck::graph::preprocess;
use mdpcheck::io::{parse_model, write_model};
use mdpcheck::numeric::{rational, Rational};
use mdpcheck::pi::{solve_pi, Evaluator, InitialPolicy, PiConfig};
use mdpcheck::vi::{bellman_apply, solve_ovi, solve_vi, OviConfig, StoppingCriterion};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn bellman_is_monotone(seed in any::<u64>(), obj in 0usize..4, raw in proptest::collection::vec((0u32..64, 0u32..64), 12)) {
        let mdp = random_instance(seed, 12);
        let objective = &objectives()[obj];
        let q = preprocess(&mdp, objective).unwrap();
        let n = q.mdp.num_states();
        let k = q.num_maybe();
        let mut x: Vec<Rational> = Vec::with_capacity(n);
        let mut y: Vec<Rational> = Vec::with_capacity(n);
        for i in 0..k {
            let (a, b) = raw[i % raw.len()];
            let lo = rational(a.min(b) as i64, 64);
            x.push(lo.clone());
            y.push(lo + rational((a.max(b) - a.min(b)) as i64, 64));
        }
        let absorbing = |v: &mut Vec<Rational>| {
            v.push(if q.reward { rational(0, 1) } else { rational(1, 1) });
            v.push(rational(0, 1));
        };
        absorbing(&mut x);
        absorbing(&mut y);
        let fx = bellman_apply(&q, &x).unwrap();
        let fy = bellman_apply(&q, &y).unwrap();
        for i in 0..n {
            prop_assert!(fx[i] <= fy[i], "state {}", i);
        }
        prop_assert!(bellman_apply(&q, &x[..k]).is_err());
    }

    #[test]
    fn iteration_from_zero_stays_below_and_ovi_brackets(seed in any::<u64>(), obj in 0usize..4) {
        let mdp = random_instance(seed, 12);
        let objective = &objectives()[obj];
        let q = preprocess(&mdp, objective).unwrap();
        let exact = solve_pi(&q, &PiConfig::new(Evaluator::ExactElimination), &InitialPolicy::FirstAction, None).unwrap();
        let exact = exact.values_f64();
        let vi = solve_vi(&q, &StoppingCriterion::relative(1e-6)).unwrap();
        let ovi = solve_ovi(&q, &OviConfig::new(1e-6)).unwrap();
        let upper = ovi.upper.as_ref().unwrap();
        for s in 0..mdp.num_states() {
            let want = exact[s];
            let slack = 1e-12 * want.abs().max(1.0);
            prop_assert!(vi.values.get(s).to_f64() <= want + slack);
            prop_assert!(ovi.values.get(s).to_f64() <= want + slack);
            prop_assert!(upper.get(s).to_f64() + slack >= want);
        }
    }

    #[test]
    fn model_text_round_trips(seed in any::<u64>()) {
        let mdp = random_instance(seed, 12);
        let text = write_model(&mdp);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &mdp);
        prop_assert_eq!(write_model(&back), text);
    }
}
