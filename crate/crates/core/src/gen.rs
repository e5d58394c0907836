//! Model generators: the two adversarial families and seeded random MDPs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use num_traits::{One, Signed, Zero};

use crate::model::{build_mdp, RawMdp, SparseMdp};
use crate::numeric::{rational, rational_int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad generator parameter: {0}")]
pub struct BadParameter(pub String);

/// Index of state `i ∈ [-n, n]` of the hard family: 0 first, then
/// 1, -1, 2, -2, ... so that `n` sits at `2n - 1` and `-n` at `2n`.
pub fn hard_mn_index(i: i64, n: usize) -> usize {
    assert!(i.unsigned_abs() as usize <= n);
    match i {
        0 => 0,
        i if i > 0 => 2 * i as usize - 1,
        i => 2 * i.unsigned_abs() as usize,
    }
}

/// The hard family with `2n + 1` states.
///
/// State 0 moves to 1 or -1 with probability 1/2 each. Every state `i`
/// with `0 < |i| < n` has action `m` (index 0) moving one step further out
/// or back to 0, and action `j` (index 1) jumping to `n` or `-n`. The
/// states `n` ("goal") and `-n` are absorbing.
pub fn gen_hard_mn(n: usize) -> Result<SparseMdp, BadParameter> {
    if n < 2 {
        return Err(BadParameter(format!("hard-mn needs n >= 2, got {n}")));
    }
    let half = rational(1, 2);
    let idx = |i: i64| hard_mn_index(i, n);
    let top = n as i64;
    let mut raw = RawMdp::new(2 * n + 1);
    raw.action(0, vec![(idx(1), half.clone()), (idx(-1), half.clone())]);
    for k in 1..top {
        for sign in [1, -1] {
            let s = idx(sign * k);
            raw.action(
                s,
                vec![(idx(sign * (k + 1)), half.clone()), (0, half.clone())],
            );
            raw.action(s, vec![(idx(top), half.clone()), (idx(-top), half.clone())]);
        }
    }
    raw.action(idx(top), vec![(idx(top), rational_int(1))]);
    raw.action(idx(-top), vec![(idx(-top), rational_int(1))]);
    raw.label("goal", vec![idx(top)]);
    raw.label("sink", vec![idx(-top)]);
    Ok(build_mdp(raw).expect("hard family is well formed"))
}

/// The five-state policy iteration trap with states `s0, s1, s2, s3, G`
/// at indices 0 to 4. `s0` chooses between `a` (to `s1`, index 0) and
/// `b` (to `s2`, index 1); `s1` reaches `G` with probability 1/10; `s2`
/// reaches `G` and `s3` with `delta/2` each and returns to `s0` otherwise.
pub fn gen_pi_trap(delta: Rational) -> Result<SparseMdp, BadParameter> {
    if !delta.is_positive() || delta >= Rational::one() {
        return Err(BadParameter(format!(
            "pi-trap needs 0 < delta < 1, got {delta}"
        )));
    }
    let one = rational_int(1);
    let half_delta = delta.clone() / rational_int(2);
    let mut raw = RawMdp::new(5);
    raw.action(0, vec![(1, one.clone())])
        .action(0, vec![(2, one.clone())])
        .action(1, vec![(4, rational(1, 10)), (3, rational(9, 10))])
        .action(
            2,
            vec![
                (4, half_delta.clone()),
                (3, half_delta),
                (0, one.clone() - delta),
            ],
        )
        .action(3, vec![(3, one.clone())])
        .action(4, vec![(4, one)])
        .label("goal", vec![4]);
    Ok(build_mdp(raw).expect("trap is well formed"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpParams {
    pub seed: u64,
    pub num_states: usize,
    pub max_actions: usize,
    /// Expected fraction of states in the support of an action, in `(0, 1]`.
    pub density: f64,
    pub target_fraction: f64,
    /// Attach integer rewards in `0..=max` (about half the states get 0).
    pub max_reward: Option<u32>,
}

impl Default for RandomMdpParams {
    fn default() -> Self {
        RandomMdpParams {
            seed: 0,
            num_states: 10,
            max_actions: 3,
            density: 0.3,
            target_fraction: 0.1,
            max_reward: None,
        }
    }
}

/// Largest denominator used by the random generator.
pub const MAX_DENOMINATOR: u64 = 64;

/// A seeded random MDP with target label "goal".
///
/// Every distribution is `k_i / d` for a random `d <= 64`. Roughly one
/// state in eight is made absorbing so that zero-probability regions and
/// end components appear regularly.
pub fn gen_random_mdp(params: &RandomMdpParams) -> Result<SparseMdp, BadParameter> {
    let RandomMdpParams {
        seed,
        num_states: n,
        max_actions,
        density,
        target_fraction,
        max_reward,
    } = *params;
    if n == 0 || max_actions == 0 {
        return Err(BadParameter(
            "need at least one state and one action".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(BadParameter(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(BadParameter(format!(
            "target fraction must lie in [0, 1], got {target_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = RawMdp::new(n);

    if n == 1 {
        raw.action(0, vec![(0, rational_int(1))]);
        raw.label("goal", vec![0]);
        if max_reward.is_some() {
            raw.rewards = Some(vec![Rational::zero()]);
        }
        return Ok(build_mdp(raw).expect("generated model is well formed"));
    }

    let max_support = ((density * n as f64).round() as usize).clamp(1, n);
    for s in 0..n {
        if rng.gen_bool(0.125) {
            raw.action(s, vec![(s, rational_int(1))]);
            continue;
        }
        let actions = rng.gen_range(1..=max_actions);
        for _ in 0..actions {
            let support = rng.gen_range(1..=max_support);
            let succ = sample(&mut rng, n, support).into_vec();
            let den = rng.gen_range(support as u64..=MAX_DENOMINATOR);
            let weights = random_composition(&mut rng, den, support);
            raw.action(
                s,
                succ.into_iter()
                    .zip(weights)
                    .map(|(t, w)| (t, rational(w as i64, den as i64)))
                    .collect(),
            );
        }
    }

    let mut targets: Vec<usize> = (0..n).filter(|_| rng.gen_bool(target_fraction)).collect();
    if targets.is_empty() {
        targets.push(rng.gen_range(0..n));
    }
    raw.label("goal", targets);

    if let Some(max) = max_reward {
        raw.rewards = Some(
            (0..n)
                .map(|_| {
                    if max == 0 || rng.gen_bool(0.5) {
                        Rational::zero()
                    } else {
                        rational_int(rng.gen_range(1..=max) as i64)
                    }
                })
                .collect(),
        );
    }
    Ok(build_mdp(raw).expect("generated model is well formed"))
}

/// `parts` positive integers summing to `total`.
fn random_composition(rng: &mut impl Rng, total: u64, parts: usize) -> Vec<u64> {
    let mut cuts: Vec<u64> = sample(rng, (total - 1) as usize, parts - 1)
        .into_iter()
        .map(|c| c as u64 + 1)
        .collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(parts);
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}
