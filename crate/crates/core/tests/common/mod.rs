//! Independent brute-force oracle shared by the integration tests.
//!
//! Every memoryless deterministic policy is enumerated, the induced chain is
//! solved exactly, and the pointwise optimum is taken. Nothing here calls
//! into the library's solvers or graph algorithms.

#![allow(dead_code, clippy::needless_range_loop)]

use mdpcheck::gen::{gen_random_mdp, RandomMdpParams};
use mdpcheck::model::{ExtValue, Objective, ObjectiveKind, Opt, SparseMdp, Target, ValueVector};
use mdpcheck::numeric::Rational;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Oracle value of one state: a rational or `None` for +∞.
pub type OracleValue = Option<Rational>;

/// Instances whose policy space is larger than this are resampled.
pub const POLICY_LIMIT: u128 = 20_000;

fn targets(mdp: &SparseMdp, objective: &Objective) -> Vec<bool> {
    let mut is_target = vec![false; mdp.num_states()];
    if let ObjectiveKind::Reach(target) = &objective.kind {
        let states: Vec<usize> = match target {
            Target::Label(l) => mdp.label(l).expect("label exists").to_vec(),
            Target::States(s) => s.clone(),
        };
        for s in states {
            is_target[s] = true;
        }
    }
    is_target
}

/// Number of policies the oracle enumerates (target states are fixed for
/// reachability since their choice is irrelevant).
pub fn policy_count(mdp: &SparseMdp, objective: &Objective) -> u128 {
    let is_target = targets(mdp, objective);
    (0..mdp.num_states())
        .filter(|&s| !is_target[s])
        .map(|s| mdp.num_actions(s) as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Optimal value of every state by exhaustive policy enumeration.
pub fn brute_force(mdp: &SparseMdp, objective: &Objective) -> Vec<OracleValue> {
    let n = mdp.num_states();
    let is_target = targets(mdp, objective);
    let free: Vec<usize> = (0..n)
        .filter(|&s| !is_target[s] && mdp.num_actions(s) > 1)
        .collect();
    let mut policy = vec![0usize; n];
    let mut best: Option<Vec<OracleValue>> = None;
    loop {
        let values = if objective.is_reward() {
            chain_reward(mdp, &policy)
        } else {
            chain_reach(mdp, &policy, &is_target)
        };
        best = Some(match best {
            None => values,
            Some(b) => b
                .into_iter()
                .zip(values)
                .map(|(old, new)| pick(objective.opt, old, new))
                .collect(),
        });
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == free.len() {
                return best.unwrap();
            }
            let s = free[i];
            policy[s] += 1;
            if policy[s] < mdp.num_actions(s) {
                break;
            }
            policy[s] = 0;
            i += 1;
        }
    }
}

fn pick(opt: Opt, a: OracleValue, b: OracleValue) -> OracleValue {
    match (a, b) {
        (None, None) => None,
        (None, Some(v)) | (Some(v), None) => match opt {
            Opt::Max => None,
            Opt::Min => Some(v),
        },
        (Some(x), Some(y)) => Some(match opt {
            Opt::Max => x.max(y),
            Opt::Min => x.min(y),
        }),
    }
}

fn chain_succ(mdp: &SparseMdp, policy: &[usize]) -> Vec<Vec<(usize, Rational)>> {
    (0..mdp.num_states())
        .map(|s| {
            mdp.distribution(mdp.choice(s, policy[s]))
                .map(|(t, p)| (t, p.clone()))
                .collect()
        })
        .collect()
}

/// States of the chain that can reach some state in `goal`.
fn can_reach(succ: &[Vec<(usize, Rational)>], goal: &[bool]) -> Vec<bool> {
    let n = succ.len();
    let mut reach = goal.to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !reach[s] && succ[s].iter().any(|(t, _)| reach[*t]) {
                reach[s] = true;
                changed = true;
            }
        }
    }
    reach
}

fn chain_reach(mdp: &SparseMdp, policy: &[usize], is_target: &[bool]) -> Vec<OracleValue> {
    let succ = chain_succ(mdp, policy);
    let reach = can_reach(&succ, is_target);
    let unknown: Vec<usize> = (0..succ.len())
        .filter(|&s| reach[s] && !is_target[s])
        .collect();
    let constant = |s: usize| -> Rational {
        succ[s]
            .iter()
            .filter(|(t, _)| is_target[*t])
            .fold(Rational::zero(), |acc, (_, p)| acc + p)
    };
    let solved = solve_linear(&succ, &unknown, constant);
    let mut out = vec![Some(Rational::zero()); succ.len()];
    for s in 0..succ.len() {
        if is_target[s] {
            out[s] = Some(Rational::one());
        }
    }
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = Some(solved[i].clone());
    }
    out
}

fn chain_reward(mdp: &SparseMdp, policy: &[usize]) -> Vec<OracleValue> {
    let succ = chain_succ(mdp, policy);
    let n = succ.len();
    let positive: Vec<bool> = (0..n).map(|s| mdp.reward(s).is_positive()).collect();
    // bottom SCCs: s is in a bottom SCC iff every state reachable from s can reach s back
    let reach_from: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for (t, _) in &succ[u] {
                    if !seen[*t] {
                        seen[*t] = true;
                        stack.push(*t);
                    }
                }
            }
            seen
        })
        .collect();
    let bottom: Vec<bool> = (0..n)
        .map(|s| (0..n).all(|t| !reach_from[s][t] || reach_from[t][s]))
        .collect();
    let hot: Vec<bool> = (0..n)
        .map(|s| bottom[s] && (0..n).any(|t| reach_from[s][t] && positive[t]))
        .collect();
    let infinite = can_reach(&succ, &hot);
    let earns = can_reach(&succ, &positive);
    let unknown: Vec<usize> = (0..n).filter(|&s| earns[s] && !infinite[s]).collect();
    let solved = solve_linear(&succ, &unknown, |s| mdp.reward(s));
    let mut out = vec![Some(Rational::zero()); n];
    for s in 0..n {
        if infinite[s] {
            out[s] = None;
        }
    }
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = Some(solved[i].clone());
    }
    out
}

/// Solves `x_s = c(s) + Σ_{t ∈ unknown} P(s,t) x_t` over `unknown`.
fn solve_linear(
    succ: &[Vec<(usize, Rational)>],
    unknown: &[usize],
    constant: impl Fn(usize) -> Rational,
) -> Vec<Rational> {
    let m = unknown.len();
    if m == 0 {
        return Vec::new();
    }
    let mut index = vec![usize::MAX; succ.len()];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    // (I - P) x = c, as rationals
    let mut a = vec![vec![Rational::zero(); m + 1]; m];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] = Rational::one();
        for (t, p) in &succ[s] {
            if index[*t] != usize::MAX {
                a[i][index[*t]] -= p;
            }
        }
        a[i][m] = constant(s);
    }
    integer_solve(&a).unwrap_or_else(|| rational_solve(a))
}

/// Fraction-free Gauss-Jordan in `i128`; `None` on overflow or if the
/// result fails the back-check.
fn integer_solve(a: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    let m = a.len();
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(m);
    for row in a {
        let mut lcm = BigInt::one();
        for v in row {
            lcm = num_integer::Integer::lcm(&lcm, v.denom());
        }
        let scaled: Option<Vec<i128>> = row
            .iter()
            .map(|v| (v.numer() * (&lcm / v.denom())).to_i128())
            .collect();
        rows.push(scaled?);
    }
    let original = rows.clone();
    let mut prev: i128 = 1;
    for k in 0..m {
        let pivot = (k..m).find(|&r| rows[r][k] != 0)?;
        rows.swap(k, pivot);
        for i in 0..m {
            if i == k {
                continue;
            }
            for j in 0..=m {
                if j == k {
                    continue;
                }
                let v = rows[k][k]
                    .checked_mul(rows[i][j])?
                    .checked_sub(rows[i][k].checked_mul(rows[k][j])?)?;
                rows[i][j] = v / prev;
            }
            rows[i][k] = 0;
        }
        // the pivot row itself is scaled like the others on later steps
        prev = rows[k][k];
    }
    // After Gauss-Jordan the diagonal entries all equal det up to the row
    // order; x_i = rows[i][m] / rows[i][i].
    let x: Vec<(i128, i128)> = (0..m).map(|i| (rows[i][m], rows[i][i])).collect();
    if x.iter().any(|&(_, d)| d == 0) {
        return None;
    }
    let result: Vec<Rational> = x
        .iter()
        .map(|&(num, den)| Rational::new(BigInt::from(num), BigInt::from(den)))
        .collect();
    // back-check against the scaled system in exact arithmetic
    for row in &original {
        let lhs = (0..m).fold(Rational::zero(), |acc, j| {
            acc + Rational::from_integer(BigInt::from(row[j])) * &result[j]
        });
        if lhs != Rational::from_integer(BigInt::from(row[m])) {
            return None;
        }
    }
    Some(result)
}

fn rational_solve(mut a: Vec<Vec<Rational>>) -> Vec<Rational> {
    let m = a.len();
    for k in 0..m {
        let pivot = (k..m)
            .find(|&r| !a[r][k].is_zero())
            .expect("chain system is nonsingular");
        a.swap(k, pivot);
        let inv = a[k][k].recip();
        for j in k..=m {
            a[k][j] = &a[k][j] * &inv;
        }
        for i in 0..m {
            if i != k && !a[i][k].is_zero() {
                let f = a[i][k].clone();
                for j in k..=m {
                    let d = &f * &a[k][j];
                    a[i][j] -= d;
                }
            }
        }
    }
    a.into_iter().map(|row| row[m].clone()).collect()
}

/// Oracle values as an `f64` vector (+∞ for infinite values).
pub fn to_f64(values: &[OracleValue]) -> Vec<f64> {
    values
        .iter()
        .map(|v| v.as_ref().map_or(f64::INFINITY, |r| r.to_f64().unwrap()))
        .collect()
}

/// Compares an exact library result to the oracle state by state.
pub fn matches_exact(values: &ValueVector<Rational>, oracle: &[OracleValue]) -> Result<(), String> {
    if values.len() != oracle.len() {
        return Err(format!(
            "length {} vs oracle {}",
            values.len(),
            oracle.len()
        ));
    }
    for (s, (v, o)) in values.iter().zip(oracle).enumerate() {
        let ok = match (v, o) {
            (ExtValue::Infinite, None) => true,
            (ExtValue::Finite(x), Some(y)) => x == y,
            _ => false,
        };
        if !ok {
            return Err(format!("state {s}: got {v}, oracle {o:?}"));
        }
    }
    Ok(())
}

/// A seeded random instance whose policy space fits the oracle for all
/// four objectives in [`objectives`]. Sizes range over `2..=max_states`.
pub fn random_instance(seed: u64, max_states: usize) -> SparseMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let params = RandomMdpParams {
            seed: rng.gen(),
            num_states: rng.gen_range(2..=max_states),
            max_actions: 3,
            density: rng.gen_range(0.15..0.6),
            target_fraction: rng.gen_range(0.05..0.3),
            max_reward: Some(4),
        };
        let mdp = gen_random_mdp(&params).unwrap();
        if objectives()
            .iter()
            .all(|o| policy_count(&mdp, o) <= POLICY_LIMIT)
        {
            return mdp;
        }
    }
}

/// Min and max reachability of "goal" and min and max total reward.
pub fn objectives() -> Vec<Objective> {
    vec![
        Objective::reach(Opt::Min, "goal"),
        Objective::reach(Opt::Max, "goal"),
        Objective::total_reward(Opt::Min),
        Objective::total_reward(Opt::Max),
    ]
}

/// Relative distance, with absolute distance near zero.
pub fn rel_err(value: f64, reference: f64) -> f64 {
    if value == reference {
        return 0.0;
    }
    (value - reference).abs() / reference.abs().max(1e-12)
}
