//! Qualitative analysis and structural transformations.
//!
//! Everything here is a pure graph computation: probability-0/1 state
//! sets, strongly connected components in topological order, maximal end
//! components, and the quotient model that the numerical solvers run on.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{build_mdp, ModelError, Objective, Opt, Policy, RawMdp, SparseMdp};
use crate::numeric::{rational_int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state {state} lies in an end component with positive reward, its value is infinite")]
    RewardInMec { state: usize },
}

/// A set of state indices below a fixed universe size.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn new(universe: usize) -> Self {
        StateSet {
            bits: vec![false; universe],
        }
    }

    pub fn full(universe: usize) -> Self {
        StateSet {
            bits: vec![true; universe],
        }
    }

    pub fn from_indices(universe: usize, states: impl IntoIterator<Item = usize>) -> Self {
        let mut set = StateSet::new(universe);
        for s in states {
            set.insert(s);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.bits[state]
    }

    /// Returns `true` if the state was not yet present.
    pub fn insert(&mut self, state: usize) -> bool {
        !std::mem::replace(&mut self.bits[state], true)
    }

    pub fn remove(&mut self, state: usize) -> bool {
        std::mem::replace(&mut self.bits[state], false)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(s, &b)| b.then_some(s))
    }

    pub fn complement(&self) -> StateSet {
        StateSet {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        !self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Reverse adjacency: for every state, the choices that can move into it.
struct Predecessors {
    choice_state: Vec<usize>,
    pred_choices: Vec<Vec<usize>>,
}

impl Predecessors {
    fn new(mdp: &SparseMdp) -> Self {
        let mut choice_state = vec![0; mdp.num_choices()];
        let mut pred_choices = vec![Vec::new(); mdp.num_states()];
        for s in 0..mdp.num_states() {
            for c in mdp.choices(s) {
                choice_state[c] = s;
                for &t in mdp.successors(c) {
                    pred_choices[t].push(c);
                }
            }
        }
        Predecessors {
            choice_state,
            pred_choices,
        }
    }
}

/// States that can reach `goal` along any transitions, never passing
/// through a state in `blocked` (goal states themselves are always included).
fn backward_reach(
    mdp: &SparseMdp,
    pred: &Predecessors,
    goal: &StateSet,
    blocked: Option<&StateSet>,
) -> StateSet {
    let mut reached = goal.clone();
    let mut queue: Vec<usize> = goal.iter().collect();
    while let Some(t) = queue.pop() {
        for &c in &pred.pred_choices[t] {
            let s = pred.choice_state[c];
            if blocked.is_some_and(|b| b.contains(s)) {
                continue;
            }
            if reached.insert(s) {
                queue.push(s);
            }
        }
    }
    debug_assert_eq!(reached.universe(), mdp.num_states());
    reached
}

/// Greatest set `X` inside `within` such that every state of `X` has a
/// choice whose support stays in `X`.
fn safe_core(mdp: &SparseMdp, pred: &Predecessors, within: &StateSet) -> StateSet {
    let mut core = within.clone();
    let mut leaks = vec![false; mdp.num_choices()];
    let mut good_choices = vec![0usize; mdp.num_states()];
    for (s, good) in good_choices.iter_mut().enumerate() {
        for c in mdp.choices(s) {
            leaks[c] = mdp.successors(c).iter().any(|&t| !core.contains(t));
            if !leaks[c] {
                *good += 1;
            }
        }
    }
    let mut queue: Vec<usize> = core.iter().filter(|&s| good_choices[s] == 0).collect();
    for &s in &queue {
        core.remove(s);
    }
    while let Some(t) = queue.pop() {
        for &c in &pred.pred_choices[t] {
            if leaks[c] {
                continue;
            }
            leaks[c] = true;
            let s = pred.choice_state[c];
            good_choices[s] -= 1;
            if good_choices[s] == 0 && core.remove(s) {
                queue.push(s);
            }
        }
    }
    core
}

/// States whose optimal probability of reaching `target` is exactly 0.
///
/// For `Max` these are the states that cannot reach the target at all;
/// for `Min` the states where some policy avoids the target forever.
pub fn prob0(mdp: &SparseMdp, target: &StateSet, opt: Opt) -> StateSet {
    let pred = Predecessors::new(mdp);
    match opt {
        Opt::Max => backward_reach(mdp, &pred, target, None).complement(),
        Opt::Min => safe_core(mdp, &pred, &target.complement()),
    }
}

/// States whose optimal probability of reaching `target` is exactly 1.
pub fn prob1(mdp: &SparseMdp, target: &StateSet, opt: Opt) -> StateSet {
    let pred = Predecessors::new(mdp);
    match opt {
        Opt::Max => prob1_max(mdp, &pred, target),
        Opt::Min => {
            let avoid = safe_core(mdp, &pred, &target.complement());
            backward_reach(mdp, &pred, &avoid, Some(target)).complement()
        }
    }
}

fn prob1_max(mdp: &SparseMdp, pred: &Predecessors, target: &StateSet) -> StateSet {
    let mut candidates = StateSet::full(mdp.num_states());
    loop {
        let stays: Vec<bool> = (0..mdp.num_choices())
            .map(|c| mdp.successors(c).iter().all(|&t| candidates.contains(t)))
            .collect();
        let mut reached = target.clone();
        let mut queue: Vec<usize> = target.iter().collect();
        while let Some(t) = queue.pop() {
            for &c in &pred.pred_choices[t] {
                let s = pred.choice_state[c];
                if stays[c] && candidates.contains(s) && reached.insert(s) {
                    queue.push(s);
                }
            }
        }
        if reached == candidates {
            return reached;
        }
        candidates = reached;
    }
}

/// Tarjan's algorithm without recursion. Components are returned in reverse
/// topological order (every component after all components it can reach),
/// each sorted ascending.
pub(crate) fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut calls: Vec<(usize, usize)> = Vec::new();
    let mut components = Vec::new();
    let mut next = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        calls.push((root, 0));

        while let Some(&(v, edge)) = calls.last() {
            if edge < adj[v].len() {
                calls.last_mut().unwrap().1 += 1;
                let w = adj[v][edge];
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(&(u, _)) = calls.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

fn adjacency(mdp: &SparseMdp) -> Vec<Vec<usize>> {
    (0..mdp.num_states())
        .map(|s| {
            let mut succ: Vec<usize> = mdp
                .choices(s)
                .flat_map(|c| mdp.successors(c).iter().copied())
                .collect();
            succ.sort_unstable();
            succ.dedup();
            succ
        })
        .collect()
}

/// Strongly connected components, successors before predecessors.
pub fn scc_topological(mdp: &SparseMdp) -> Vec<Vec<usize>> {
    tarjan(&adjacency(mdp))
}

/// A maximal end component: states plus, per state, the retained local
/// action indices (aligned with `states`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    pub actions: Vec<Vec<usize>>,
}

impl EndComponent {
    pub fn state_set(&self, universe: usize) -> StateSet {
        StateSet::from_indices(universe, self.states.iter().copied())
    }
}

pub fn mec_decomposition(mdp: &SparseMdp) -> Vec<EndComponent> {
    end_components(mdp, &StateSet::full(mdp.num_states()), |_| true)
}

/// Maximal end components of the sub-MDP on `states` using only choices
/// accepted by `usable` whose support stays inside `states`.
fn end_components(
    mdp: &SparseMdp,
    states: &StateSet,
    usable: impl Fn(usize) -> bool,
) -> Vec<EndComponent> {
    let n = mdp.num_states();
    let pred = Predecessors::new(mdp);
    let mut candidates = states.clone();
    let mut allowed: Vec<bool> = (0..mdp.num_choices())
        .map(|c| {
            candidates.contains(pred.choice_state[c])
                && usable(c)
                && mdp.successors(c).iter().all(|&t| candidates.contains(t))
        })
        .collect();

    loop {
        // drop states left without choices, which in turn disables choices into them
        let mut queue: Vec<usize> = candidates
            .iter()
            .filter(|&s| !mdp.choices(s).any(|c| allowed[c]))
            .collect();
        while let Some(t) = queue.pop() {
            if !candidates.remove(t) {
                continue;
            }
            for &c in &pred.pred_choices[t] {
                if allowed[c] {
                    allowed[c] = false;
                    let s = pred.choice_state[c];
                    if candidates.contains(s) && !mdp.choices(s).any(|c| allowed[c]) {
                        queue.push(s);
                    }
                }
            }
        }

        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                mdp.choices(s)
                    .filter(|&c| allowed[c])
                    .flat_map(|c| mdp.successors(c).iter().copied())
                    .collect()
            })
            .collect();
        let components = tarjan(&adj);
        let mut component_of = vec![usize::MAX; n];
        for (i, comp) in components.iter().enumerate() {
            for &s in comp {
                component_of[s] = i;
            }
        }

        let mut changed = false;
        for s in candidates.iter() {
            for c in mdp.choices(s) {
                if allowed[c]
                    && mdp
                        .successors(c)
                        .iter()
                        .any(|&t| component_of[t] != component_of[s])
                {
                    allowed[c] = false;
                    changed = true;
                }
            }
        }

        if !changed {
            let mut result: Vec<EndComponent> = components
                .into_iter()
                .filter(|comp| candidates.contains(comp[0]))
                .map(|comp| {
                    let actions = comp
                        .iter()
                        .map(|&s| {
                            let first = mdp.choices(s).start;
                            mdp.choices(s)
                                .filter(|&c| allowed[c])
                                .map(|c| c - first)
                                .collect()
                        })
                        .collect();
                    EndComponent {
                        states: comp,
                        actions,
                    }
                })
                .collect();
            result.sort_by_key(|ec| ec.states[0]);
            return result;
        }
    }
}

fn positive_reward_states(mdp: &SparseMdp) -> StateSet {
    let n = mdp.num_states();
    StateSet::from_indices(n, (0..n).filter(|&s| mdp.reward(s).is_positive()))
}

/// States whose optimal expected total reward is infinite.
///
/// For `Max`, the states that can reach an end component containing a
/// positive reward. For `Min`, the states from which no policy reaches the
/// zero-reward absorbing region with probability one.
pub fn reward_finiteness_check(mdp: &SparseMdp, objective: &Objective) -> StateSet {
    let n = mdp.num_states();
    if !objective.is_reward() || !mdp.has_rewards() {
        return StateSet::new(n);
    }
    let positive = positive_reward_states(mdp);
    match objective.opt {
        Opt::Max => {
            let mut hot = StateSet::new(n);
            for ec in mec_decomposition(mdp) {
                if ec.states.iter().any(|&s| positive.contains(s)) {
                    for &s in &ec.states {
                        hot.insert(s);
                    }
                }
            }
            backward_reach(mdp, &Predecessors::new(mdp), &hot, None)
        }
        Opt::Min => {
            let zero = prob0(mdp, &positive, Opt::Min);
            prob1(mdp, &zero, Opt::Max).complement()
        }
    }
}

/// Where an original state ended up in the quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateImage {
    Quotient(usize),
    /// Removed because its expected reward is infinite.
    Infinite,
}

/// The preprocessed model all numerical solvers consume.
///
/// Quotient states `0..num_maybe()` carry non-trivial values; they are
/// followed by one absorbing target state and one absorbing sink state.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub mdp: SparseMdp,
    pub state_map: Vec<StateImage>,
    pub target: usize,
    pub sink: usize,
    pub opt: Opt,
    pub reward: bool,
    /// Initial state of the original model.
    pub original_initial: usize,
    /// Original choice behind every quotient choice (absorbing loops map to
    /// `usize::MAX`).
    pub choice_origin: Vec<usize>,
}

impl Quotient {
    pub fn num_maybe(&self) -> usize {
        self.target
    }

    pub fn image(&self, state: usize) -> StateImage {
        self.state_map[state]
    }

    /// Whether every action of every non-absorbing quotient state can still
    /// reach the target or the sink.
    pub fn exits_reachable(&self) -> bool {
        let n = self.mdp.num_states();
        let exits = StateSet::from_indices(n, [self.target, self.sink]);
        let reach = backward_reach(&self.mdp, &Predecessors::new(&self.mdp), &exits, None);
        (0..self.num_maybe()).all(|s| {
            self.mdp
                .choices(s)
                .all(|c| self.mdp.successors(c).iter().any(|&t| reach.contains(t)))
        })
    }

    /// Translates a policy of the original model: each quotient state takes
    /// the choice its first member selects, or its first choice if that
    /// one did not survive preprocessing.
    pub fn translate_policy(&self, original: &SparseMdp, policy: &Policy) -> Vec<usize> {
        let mut first_member = vec![usize::MAX; self.num_maybe()];
        for (s, image) in self.state_map.iter().enumerate() {
            if let StateImage::Quotient(q) = *image {
                if q < self.num_maybe() && first_member[q] == usize::MAX {
                    first_member[q] = s;
                }
            }
        }
        (0..self.num_maybe())
            .map(|q| {
                let wanted = original.choice(first_member[q], policy.0[first_member[q]]);
                self.mdp
                    .choices(q)
                    .position(|c| self.choice_origin[c] == wanted)
                    .unwrap_or(0)
            })
            .collect()
    }

    /// End components left among the non-absorbing quotient states.
    pub fn remaining_end_components(&self) -> Vec<EndComponent> {
        let maybe = StateSet::from_indices(self.mdp.num_states(), 0..self.num_maybe());
        end_components(&self.mdp, &maybe, |_| true)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Class {
    Target,
    Sink,
    Infinite,
    Maybe,
}

/// Qualitative preprocessing followed by end-component collapsing.
///
/// Fails with [`GraphError::RewardInMec`] if some state has infinite
/// expected reward; [`preprocess`] maps such states to
/// [`StateImage::Infinite`] instead.
pub fn collapse_mecs(mdp: &SparseMdp, objective: &Objective) -> Result<Quotient, GraphError> {
    build_quotient(mdp, objective, false)
}

/// The full preprocessing pipeline: prob0, prob1 (reachability only),
/// removal of infinite-reward states, then end-component collapsing.
pub fn preprocess(mdp: &SparseMdp, objective: &Objective) -> Result<Quotient, GraphError> {
    build_quotient(mdp, objective, true)
}

fn build_quotient(
    mdp: &SparseMdp,
    objective: &Objective,
    allow_infinite: bool,
) -> Result<Quotient, GraphError> {
    let n = mdp.num_states();
    let target = objective.resolve(mdp)?;
    let opt = objective.opt;
    let reward = objective.is_reward();

    let mut class = vec![Class::Maybe; n];
    if reward {
        let zero = prob0(mdp, &positive_reward_states(mdp), opt);
        let infinite = reward_finiteness_check(mdp, objective);
        if let (false, Some(state)) = (allow_infinite, infinite.iter().next()) {
            return Err(GraphError::RewardInMec { state });
        }
        for s in zero.iter() {
            class[s] = Class::Sink;
        }
        for s in infinite.iter() {
            class[s] = Class::Infinite;
        }
    } else {
        for s in prob0(mdp, &target, opt).iter() {
            class[s] = Class::Sink;
        }
        for s in prob1(mdp, &target, opt).iter() {
            class[s] = Class::Target;
        }
    }

    let infinite: Vec<bool> = class.iter().map(|&c| c == Class::Infinite).collect();
    let usable = |c: usize| mdp.successors(c).iter().all(|&t| !infinite[t]);
    let maybe = StateSet::from_indices(n, (0..n).filter(|&s| class[s] == Class::Maybe));

    // Maximising policies gain nothing by staying inside an end component,
    // so each one becomes a single state offering only its leaving choices.
    // Minimising reward policies keep their (positive-reward) components.
    let mut component_of = vec![usize::MAX; n];
    let mut retained = vec![false; mdp.num_choices()];
    let mut components = Vec::new();
    if opt == Opt::Max {
        for ec in end_components(mdp, &maybe, usable) {
            if let (true, Some(&s)) = (
                reward,
                ec.states.iter().find(|&&s| mdp.reward(s).is_positive()),
            ) {
                return Err(GraphError::RewardInMec { state: s });
            }
            for (&s, actions) in ec.states.iter().zip(&ec.actions) {
                for &a in actions {
                    retained[mdp.choice(s, a)] = true;
                }
            }
            let leaves = ec
                .states
                .iter()
                .any(|&s| mdp.choices(s).any(|c| usable(c) && !retained[c]));
            for &s in &ec.states {
                if leaves {
                    component_of[s] = components.len();
                } else {
                    class[s] = Class::Sink;
                }
            }
            if leaves {
                components.push(ec.states);
            }
        }
    }

    // groups in order of their smallest member
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if class[s] != Class::Maybe || group_of[s] != usize::MAX {
            continue;
        }
        let members = match component_of[s] {
            usize::MAX => vec![s],
            comp => components[comp].clone(),
        };
        for &m in &members {
            group_of[m] = groups.len();
        }
        groups.push(members);
    }

    let k = groups.len();
    let (target_q, sink_q) = (k, k + 1);
    let image = |t: usize| match class[t] {
        Class::Target => target_q,
        Class::Sink => sink_q,
        Class::Maybe => group_of[t],
        Class::Infinite => unreachable!("choices into infinite states are filtered"),
    };

    let mut raw = RawMdp::new(k + 2);
    let mut choice_origin = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        for &s in members {
            for c in mdp.choices(s) {
                if !usable(c) || retained[c] {
                    continue;
                }
                choice_origin.push(c);
                let mut dist: BTreeMap<usize, Rational> = BTreeMap::new();
                for (t, p) in mdp.distribution(c) {
                    *dist.entry(image(t)).or_insert_with(Rational::zero) += p;
                }
                raw.transitions[g].push(dist.into_iter().collect());
            }
        }
    }
    raw.action(target_q, vec![(target_q, rational_int(1))]);
    raw.action(sink_q, vec![(sink_q, rational_int(1))]);
    choice_origin.extend([usize::MAX, usize::MAX]);
    if reward {
        let mut rewards = vec![Rational::zero(); k + 2];
        for (g, members) in groups.iter().enumerate() {
            if let [single] = members.as_slice() {
                rewards[g] = mdp.reward(*single);
            }
        }
        raw.rewards = Some(rewards);
    }
    raw.label("target", vec![target_q]);
    raw.label("sink", vec![sink_q]);

    let state_map: Vec<StateImage> = (0..n)
        .map(|s| match class[s] {
            Class::Infinite => StateImage::Infinite,
            _ => StateImage::Quotient(image(s)),
        })
        .collect();
    raw.initial = match state_map[mdp.initial()] {
        StateImage::Quotient(q) => q,
        StateImage::Infinite => sink_q,
    };

    Ok(Quotient {
        mdp: build_mdp(raw)?,
        state_map,
        target: target_q,
        sink: sink_q,
        opt,
        reward,
        original_initial: mdp.initial(),
        choice_origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_hard_mn, gen_pi_trap, hard_mn_index};
    use crate::numeric::rational;

    fn chain(n: usize) -> SparseMdp {
        let mut raw = RawMdp::new(n);
        for s in 0..n {
            raw.action(s, vec![((s + 1).min(n - 1), rational_int(1))]);
        }
        raw.label("goal", vec![n - 1]);
        build_mdp(raw).unwrap()
    }

    fn set(n: usize, states: &[usize]) -> StateSet {
        StateSet::from_indices(n, states.iter().copied())
    }

    #[test]
    fn rewards_are_ignored_for_reachability() {
        let mut raw = RawMdp::new(3);
        raw.action(0, vec![(0, rational_int(1))])
            .action(0, vec![(1, rational(1, 2)), (2, rational(1, 2))])
            .action(1, vec![(1, rational_int(1))])
            .action(2, vec![(2, rational_int(1))])
            .label("goal", vec![1]);
        raw.rewards = Some(vec![rational_int(1), rational_int(0), rational_int(0)]);
        let mdp = build_mdp(raw).unwrap();
        let q = collapse_mecs(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        assert_eq!(q.num_maybe(), 1);
        assert_eq!(q.mdp.num_actions(0), 1);
        assert!(collapse_mecs(&mdp, &Objective::total_reward(Opt::Max)).is_err());
    }

    #[test]
    fn prob0_on_hard_family() {
        let n = 4;
        let mdp = gen_hard_mn(n).unwrap();
        let target = set(mdp.num_states(), &[hard_mn_index(n as i64, n)]);
        let expected = set(mdp.num_states(), &[hard_mn_index(-(n as i64), n)]);
        assert_eq!(prob0(&mdp, &target, Opt::Max), expected);
        assert_eq!(prob0(&mdp, &target, Opt::Min), expected);
    }

    #[test]
    fn qualitative_sets_on_pi_trap() {
        let mdp = gen_pi_trap(rational(1, 10)).unwrap();
        let goal = set(5, &[4]);
        assert_eq!(prob0(&mdp, &goal, Opt::Max), set(5, &[3]));
        assert_eq!(prob1(&mdp, &goal, Opt::Max), set(5, &[4]));
        assert_eq!(prob1(&mdp, &goal, Opt::Min), set(5, &[4]));
    }

    #[test]
    fn prob1_max_on_hard_family() {
        let n = 5;
        let mdp = gen_hard_mn(n).unwrap();
        let goal = hard_mn_index(n as i64, n);
        let target = set(mdp.num_states(), &[goal]);
        assert_eq!(prob1(&mdp, &target, Opt::Max), target);
    }

    #[test]
    fn prob1_min_needs_all_policies() {
        // 0: {a: -> 1}, {b: -> 0}; 1 is the target
        let mut raw = RawMdp::new(2);
        raw.action(0, vec![(1, rational_int(1))])
            .action(0, vec![(0, rational_int(1))])
            .action(1, vec![(1, rational_int(1))]);
        let mdp = build_mdp(raw).unwrap();
        let target = set(2, &[1]);
        assert_eq!(prob1(&mdp, &target, Opt::Max), set(2, &[0, 1]));
        assert_eq!(prob1(&mdp, &target, Opt::Min), set(2, &[1]));
        assert_eq!(prob0(&mdp, &target, Opt::Min), set(2, &[0]));
    }

    #[test]
    fn sccs_of_acyclic_chain() {
        let sccs = scc_topological(&chain(4));
        assert_eq!(sccs, vec![vec![3], vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn sccs_of_hard_family() {
        let n = 3;
        let mdp = gen_hard_mn(n).unwrap();
        let sccs = scc_topological(&mdp);
        assert_eq!(sccs.len(), 3);
        let top = hard_mn_index(n as i64, n);
        let bottom = hard_mn_index(-(n as i64), n);
        let mut singles = vec![sccs[0][0], sccs[1][0]];
        singles.sort();
        let mut expected = vec![top, bottom];
        expected.sort();
        assert_eq!(singles, expected);
        assert_eq!(sccs[2].len(), 2 * n - 1);
    }

    #[test]
    fn single_self_loop_scc_and_mec() {
        let mut raw = RawMdp::new(1);
        raw.action(0, vec![(0, rational_int(1))]);
        let mdp = build_mdp(raw).unwrap();
        assert_eq!(scc_topological(&mdp), vec![vec![0]]);
        assert_eq!(
            mec_decomposition(&mdp),
            vec![EndComponent {
                states: vec![0],
                actions: vec![vec![0]]
            }]
        );
    }

    #[test]
    fn mecs_of_hard_family() {
        let n = 4;
        let mdp = gen_hard_mn(n).unwrap();
        let mecs = mec_decomposition(&mdp);
        let mut states: Vec<Vec<usize>> = mecs.iter().map(|m| m.states.clone()).collect();
        states.sort();
        let mut expected = vec![
            vec![hard_mn_index(n as i64, n)],
            vec![hard_mn_index(-(n as i64), n)],
        ];
        expected.sort();
        assert_eq!(states, expected);
    }

    #[test]
    fn two_state_cycle_is_one_mec() {
        let mut raw = RawMdp::new(2);
        raw.action(0, vec![(1, rational_int(1))])
            .action(1, vec![(0, rational_int(1))]);
        let mdp = build_mdp(raw).unwrap();
        let mecs = mec_decomposition(&mdp);
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].states, vec![0, 1]);
    }

    #[test]
    fn collapsing_keeps_only_leaving_actions() {
        // 0 <-> 1 deterministic cycle, 1 also escapes to the target 2
        let mut raw = RawMdp::new(3);
        raw.action(0, vec![(1, rational_int(1))])
            .action(1, vec![(0, rational_int(1))])
            .action(1, vec![(2, rational_int(1))])
            .action(2, vec![(2, rational_int(1))])
            .label("goal", vec![2]);
        let mdp = build_mdp(raw).unwrap();
        // the escape has probability one, so prob1 already settles everything
        let q = collapse_mecs(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        assert_eq!(q.num_maybe(), 0);

        // make the escape risky so the cycle survives qualitative analysis
        let mut raw = RawMdp::new(4);
        raw.action(0, vec![(1, rational_int(1))])
            .action(1, vec![(0, rational_int(1))])
            .action(1, vec![(2, rational(1, 2)), (3, rational(1, 2))])
            .action(2, vec![(2, rational_int(1))])
            .action(3, vec![(3, rational_int(1))])
            .label("goal", vec![2]);
        let mdp = build_mdp(raw).unwrap();
        let q = collapse_mecs(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        assert_eq!(q.num_maybe(), 1);
        assert_eq!(q.image(0), q.image(1));
        assert_eq!(q.mdp.num_actions(0), 1);
        assert_eq!(q.mdp.successors(0), &[q.target, q.sink]);
        assert!(q.exits_reachable());
        assert!(q.remaining_end_components().is_empty());
    }

    #[test]
    fn quotient_without_mecs_keeps_structure() {
        let mdp = gen_pi_trap(rational(1, 10)).unwrap();
        let q = preprocess(&mdp, &Objective::reach(Opt::Max, "goal")).unwrap();
        assert_eq!(q.num_maybe(), 3);
        assert_eq!(q.mdp.num_states(), 5);
        assert_eq!(q.image(4), StateImage::Quotient(q.target));
        assert_eq!(q.image(3), StateImage::Quotient(q.sink));
        assert_eq!(q.mdp.num_choices(), 2 + 1 + 1 + 2);
    }

    fn reward_model(
        rewards: Vec<Rational>,
        transitions: Vec<Vec<Vec<(usize, Rational)>>>,
    ) -> SparseMdp {
        let n = rewards.len();
        build_mdp(RawMdp {
            num_states: n,
            initial: 0,
            transitions,
            rewards: Some(rewards),
            labels: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn finiteness_of_reward_self_loop() {
        let mdp = reward_model(
            vec![rational_int(1)],
            vec![vec![vec![(0, rational_int(1))]]],
        );
        for opt in [Opt::Min, Opt::Max] {
            let inf = reward_finiteness_check(&mdp, &Objective::total_reward(opt));
            assert_eq!(inf, set(1, &[0]));
            assert_eq!(
                collapse_mecs(&mdp, &Objective::total_reward(opt)).unwrap_err(),
                GraphError::RewardInMec { state: 0 }
            );
            let q = preprocess(&mdp, &Objective::total_reward(opt)).unwrap();
            assert_eq!(q.image(0), StateImage::Infinite);
        }
    }

    #[test]
    fn finiteness_of_geometric_chain() {
        let mdp = reward_model(
            vec![rational_int(1), rational_int(0)],
            vec![
                vec![vec![(0, rational(1, 2)), (1, rational(1, 2))]],
                vec![vec![(1, rational_int(1))]],
            ],
        );
        for opt in [Opt::Min, Opt::Max] {
            assert!(reward_finiteness_check(&mdp, &Objective::total_reward(opt)).is_empty());
        }
    }

    #[test]
    fn reward_free_model_is_finite() {
        let mdp = reward_model(
            vec![rational_int(0); 2],
            vec![
                vec![vec![(1, rational_int(1))]],
                vec![vec![(0, rational_int(1))]],
            ],
        );
        assert!(reward_finiteness_check(&mdp, &Objective::total_reward(Opt::Max)).is_empty());
    }

    #[test]
    fn min_reward_drops_actions_into_infinite_states() {
        // 0 -a-> 1 (reward loop), 0 -b-> 2 (zero absorbing); 0 has reward 1
        let mdp = reward_model(
            vec![rational_int(1), rational_int(1), rational_int(0)],
            vec![
                vec![vec![(1, rational_int(1))], vec![(2, rational_int(1))]],
                vec![vec![(1, rational_int(1))]],
                vec![vec![(2, rational_int(1))]],
            ],
        );
        let q = preprocess(&mdp, &Objective::total_reward(Opt::Min)).unwrap();
        assert_eq!(q.image(1), StateImage::Infinite);
        assert_eq!(q.image(2), StateImage::Quotient(q.sink));
        assert_eq!(q.mdp.num_actions(0), 1);
        let q = preprocess(&mdp, &Objective::total_reward(Opt::Max)).unwrap();
        assert_eq!(q.image(0), StateImage::Infinite);
    }
}
