//! Checks of the brute-force oracle itself against hand-derived values.

mod common;

use common::{brute_force, policy_count};
use mdpcheck::gen::{gen_hard_mn, gen_pi_trap, hard_mn_index};
use mdpcheck::model::{build_mdp, Objective, Opt, RawMdp};
use mdpcheck::numeric::{rational, rational_int};

#[test]
fn oracle_on_hard_family() {
    for n in 2..=6 {
        let mdp = gen_hard_mn(n).unwrap();
        let min = brute_force(&mdp, &Objective::reach(Opt::Min, "goal"));
        let max = brute_force(&mdp, &Objective::reach(Opt::Max, "goal"));
        assert_eq!(min[0], Some(rational(1, 3)), "n = {n}");
        assert_eq!(max[0], Some(rational(2, 3)), "n = {n}");
        assert_eq!(max[hard_mn_index(n as i64, n)], Some(rational_int(1)));
        assert_eq!(min[hard_mn_index(-(n as i64), n)], Some(rational_int(0)));
    }
}

#[test]
fn oracle_on_trap() {
    // b reaches G with probability 1/2 in the limit; a gives 1/10
    let mdp = gen_pi_trap(rational(1, 100)).unwrap();
    let max = brute_force(&mdp, &Objective::reach(Opt::Max, "goal"));
    assert_eq!(max[0], Some(rational(1, 2)));
    assert_eq!(max[1], Some(rational(1, 10)));
    let min = brute_force(&mdp, &Objective::reach(Opt::Min, "goal"));
    assert_eq!(min[0], Some(rational(1, 10)));
    assert_eq!(policy_count(&mdp, &Objective::reach(Opt::Max, "goal")), 2);
}

#[test]
fn oracle_on_rewards() {
    // 0 (r=1) --a--> 1 (r=2) absorbing via 2; 0 --b--> 0 loops forever
    let mut raw = RawMdp::new(3);
    raw.action(0, vec![(1, rational_int(1))])
        .action(0, vec![(0, rational_int(1))])
        .action(1, vec![(2, rational(1, 2)), (1, rational(1, 2))])
        .action(2, vec![(2, rational_int(1))])
        .label("goal", vec![2]);
    raw.rewards = Some(vec![rational_int(1), rational_int(2), rational_int(0)]);
    let mdp = build_mdp(raw).unwrap();
    let min = brute_force(&mdp, &Objective::total_reward(Opt::Min));
    // 1 + E[visits to 1] * 2 = 1 + 2 * 2
    assert_eq!(
        min,
        vec![
            Some(rational_int(5)),
            Some(rational_int(4)),
            Some(rational_int(0))
        ]
    );
    let max = brute_force(&mdp, &Objective::total_reward(Opt::Max));
    assert_eq!(max[0], None);
    assert_eq!(max[1], Some(rational_int(4)));
}

#[test]
fn oracle_handles_dense_denominators() {
    // a long chain with a leak forces large intermediate determinants
    let n = 12;
    let sink = n + 1;
    let mut raw = RawMdp::new(n + 2);
    for s in 0..n {
        let den = 61 - s as i64;
        raw.action(
            s,
            vec![
                (s + 1, rational(2, den)),
                (sink, rational(1, den)),
                (0, rational(den - 3, den)),
            ],
        );
    }
    raw.action(n, vec![(n, rational_int(1))])
        .label("goal", vec![n]);
    raw.action(sink, vec![(sink, rational_int(1))]);
    let mdp = build_mdp(raw).unwrap();
    let v: Vec<_> = brute_force(&mdp, &Objective::reach(Opt::Max, "goal"))
        .into_iter()
        .map(Option::unwrap)
        .collect();
    for s in 0..n {
        let c = mdp.choice(s, 0);
        let rhs = mdp
            .distribution(c)
            .fold(rational_int(0), |acc, (t, p)| acc + p * &v[t]);
        assert_eq!(v[s], rhs, "state {s}");
        assert!(v[s] > rational_int(0) && v[s] < rational_int(1));
    }
}
