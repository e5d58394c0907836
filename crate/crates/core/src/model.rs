//! Sparse MDP and Markov chain representation.
//!
//! Transition probabilities are stored as exact rationals. A float copy of
//! every probability is rounded once at construction so that exact and
//! floating-point solvers read the same model object.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::graph::StateSet;
use crate::numeric::{format_rational, rational_to_f64, Number, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("state {state}, action {action}: probabilities sum to {sum}, not 1")]
    NonStochastic {
        state: usize,
        action: usize,
        sum: String,
    },
    #[error("state {state} has no enabled action")]
    EmptyActionSet { state: usize },
    #[error("state {state}, action {action}: successor {successor} out of range")]
    BadIndex {
        state: usize,
        action: usize,
        successor: usize,
    },
    #[error("state {state}, action {action}: probability {prob} is not positive")]
    NonPositiveProbability {
        state: usize,
        action: usize,
        prob: String,
    },
    #[error("state {state} has negative reward")]
    NegativeReward { state: usize },
    #[error("expected {expected} states, found {found}")]
    StateCount { expected: usize, found: usize },
    #[error("{what} index {index} out of range")]
    BadStateRef { what: String, index: usize },
    #[error("state {state}: policy picks action {choice} but only {available} are enabled")]
    BadPolicyIndex {
        state: usize,
        choice: usize,
        available: usize,
    },
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("reachability target is empty")]
    EmptyTarget,
    #[error("reward objective on a model without rewards")]
    MissingRewards,
}

/// Unvalidated model description handed to [`build_mdp`].
#[derive(Debug, Clone, Default)]
pub struct RawMdp {
    pub num_states: usize,
    pub initial: usize,
    /// `transitions[s][a]` is the distribution of action `a` in state `s`.
    pub transitions: Vec<Vec<Vec<(usize, Rational)>>>,
    pub rewards: Option<Vec<Rational>>,
    pub labels: BTreeMap<String, Vec<usize>>,
}

impl RawMdp {
    pub fn new(num_states: usize) -> Self {
        RawMdp {
            num_states,
            transitions: vec![Vec::new(); num_states],
            ..Default::default()
        }
    }

    pub fn action(&mut self, state: usize, dist: Vec<(usize, Rational)>) -> &mut Self {
        self.transitions[state].push(dist);
        self
    }

    pub fn label(&mut self, name: &str, states: Vec<usize>) -> &mut Self {
        self.labels.insert(name.to_string(), states);
        self
    }
}

/// A validated, immutable MDP in compressed sparse form.
///
/// Actions are identified by their position in the state's action list.
/// Successors within an action are sorted ascending and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMdp {
    num_states: usize,
    /// Global choice range of state `s` is `state_choices[s]..state_choices[s + 1]`.
    state_choices: Vec<usize>,
    /// Entry range of choice `c` is `choice_entries[c]..choice_entries[c + 1]`.
    choice_entries: Vec<usize>,
    successors: Vec<usize>,
    probs: Vec<Rational>,
    probs_f64: Vec<f64>,
    rewards: Option<Vec<Rational>>,
    labels: BTreeMap<String, Vec<usize>>,
    initial: usize,
}

pub fn build_mdp(raw: RawMdp) -> Result<SparseMdp, ModelError> {
    let n = raw.num_states;
    if raw.transitions.len() != n {
        return Err(ModelError::StateCount {
            expected: n,
            found: raw.transitions.len(),
        });
    }
    if raw.initial >= n {
        return Err(ModelError::BadStateRef {
            what: "initial state".into(),
            index: raw.initial,
        });
    }

    let mut state_choices = Vec::with_capacity(n + 1);
    let mut choice_entries = vec![0];
    let mut successors = Vec::new();
    let mut probs = Vec::new();
    state_choices.push(0);

    for (state, actions) in raw.transitions.into_iter().enumerate() {
        if actions.is_empty() {
            return Err(ModelError::EmptyActionSet { state });
        }
        for (action, dist) in actions.into_iter().enumerate() {
            let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
            for (succ, p) in dist {
                if succ >= n {
                    return Err(ModelError::BadIndex {
                        state,
                        action,
                        successor: succ,
                    });
                }
                if !p.is_positive() {
                    return Err(ModelError::NonPositiveProbability {
                        state,
                        action,
                        prob: format_rational(&p),
                    });
                }
                *merged.entry(succ).or_insert_with(Rational::zero) += p;
            }
            let sum: Rational = merged.values().cloned().sum();
            if !sum.is_one() {
                return Err(ModelError::NonStochastic {
                    state,
                    action,
                    sum: format_rational(&sum),
                });
            }
            for (succ, p) in merged {
                successors.push(succ);
                probs.push(p);
            }
            choice_entries.push(successors.len());
        }
        state_choices.push(choice_entries.len() - 1);
    }

    if let Some(rewards) = &raw.rewards {
        if rewards.len() != n {
            return Err(ModelError::StateCount {
                expected: n,
                found: rewards.len(),
            });
        }
        if let Some(state) = rewards.iter().position(|r| r.is_negative()) {
            return Err(ModelError::NegativeReward { state });
        }
    }

    let mut labels = BTreeMap::new();
    for (name, mut states) in raw.labels {
        if let Some(&bad) = states.iter().find(|&&s| s >= n) {
            return Err(ModelError::BadStateRef {
                what: format!("label '{name}'"),
                index: bad,
            });
        }
        states.sort_unstable();
        states.dedup();
        labels.insert(name, states);
    }

    let probs_f64 = probs.iter().map(rational_to_f64).collect();
    Ok(SparseMdp {
        num_states: n,
        state_choices,
        choice_entries,
        successors,
        probs,
        probs_f64,
        rewards: raw.rewards,
        labels,
        initial: raw.initial,
    })
}

impl SparseMdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Total number of state-action pairs.
    pub fn num_choices(&self) -> usize {
        self.choice_entries.len() - 1
    }

    pub fn num_transitions(&self) -> usize {
        self.successors.len()
    }

    /// Global choice indices of the actions enabled in `state`.
    pub fn choices(&self, state: usize) -> Range<usize> {
        self.state_choices[state]..self.state_choices[state + 1]
    }

    pub fn num_actions(&self, state: usize) -> usize {
        self.state_choices[state + 1] - self.state_choices[state]
    }

    /// Global choice index of the `action`-th action of `state`.
    pub fn choice(&self, state: usize, action: usize) -> usize {
        debug_assert!(action < self.num_actions(state));
        self.state_choices[state] + action
    }

    pub fn entries(&self, choice: usize) -> Range<usize> {
        self.choice_entries[choice]..self.choice_entries[choice + 1]
    }

    pub fn successors(&self, choice: usize) -> &[usize] {
        &self.successors[self.entries(choice)]
    }

    pub fn probs(&self, choice: usize) -> &[Rational] {
        &self.probs[self.entries(choice)]
    }

    pub fn probs_f64(&self, choice: usize) -> &[f64] {
        &self.probs_f64[self.entries(choice)]
    }

    pub fn entry_successor(&self, entry: usize) -> usize {
        self.successors[entry]
    }

    pub fn entry_prob(&self, entry: usize) -> &Rational {
        &self.probs[entry]
    }

    pub fn entry_prob_f64(&self, entry: usize) -> f64 {
        self.probs_f64[entry]
    }

    /// `(successor, probability)` pairs of a choice.
    pub fn distribution(&self, choice: usize) -> impl Iterator<Item = (usize, &Rational)> + '_ {
        self.successors(choice)
            .iter()
            .copied()
            .zip(self.probs(choice))
    }

    pub fn rewards(&self) -> Option<&[Rational]> {
        self.rewards.as_deref()
    }

    pub fn has_rewards(&self) -> bool {
        self.rewards.is_some()
    }

    pub fn reward(&self, state: usize) -> Rational {
        self.rewards
            .as_ref()
            .map(|r| r[state].clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&[usize]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Whether every state has exactly one action.
    pub fn is_chain(&self) -> bool {
        (0..self.num_states).all(|s| self.num_actions(s) == 1)
    }

    /// Converts back into the raw description, e.g. to derive a modified model.
    pub fn to_raw(&self) -> RawMdp {
        let transitions = (0..self.num_states)
            .map(|s| {
                self.choices(s)
                    .map(|c| self.distribution(c).map(|(t, p)| (t, p.clone())).collect())
                    .collect()
            })
            .collect();
        RawMdp {
            num_states: self.num_states,
            initial: self.initial,
            transitions,
            rewards: self.rewards.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Optimisation direction of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opt {
    Min,
    Max,
}

impl Opt {
    /// `true` if `candidate` is strictly better than `incumbent` in this direction.
    pub fn better<F: PartialOrd>(self, candidate: &F, incumbent: &F) -> bool {
        match self {
            Opt::Max => candidate > incumbent,
            Opt::Min => candidate < incumbent,
        }
    }
}

impl fmt::Display for Opt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Opt::Min => "min",
            Opt::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Label(String),
    States(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectiveKind {
    Reach(Target),
    TotalReward,
}

/// Reachability probability or expected total reward, minimised or maximised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub opt: Opt,
}

impl Objective {
    pub fn reach(opt: Opt, label: &str) -> Self {
        Objective {
            kind: ObjectiveKind::Reach(Target::Label(label.to_string())),
            opt,
        }
    }

    pub fn reach_states(opt: Opt, states: Vec<usize>) -> Self {
        Objective {
            kind: ObjectiveKind::Reach(Target::States(states)),
            opt,
        }
    }

    pub fn total_reward(opt: Opt) -> Self {
        Objective {
            kind: ObjectiveKind::TotalReward,
            opt,
        }
    }

    pub fn is_reward(&self) -> bool {
        matches!(self.kind, ObjectiveKind::TotalReward)
    }

    /// Checks the objective against `mdp` and returns the target set
    /// (empty for reward objectives).
    pub fn resolve(&self, mdp: &SparseMdp) -> Result<StateSet, ModelError> {
        match &self.kind {
            ObjectiveKind::TotalReward => {
                if !mdp.has_rewards() {
                    return Err(ModelError::MissingRewards);
                }
                Ok(StateSet::new(mdp.num_states()))
            }
            ObjectiveKind::Reach(target) => {
                let states = match target {
                    Target::Label(name) => mdp
                        .label(name)
                        .ok_or_else(|| ModelError::UnknownLabel(name.clone()))?,
                    Target::States(states) => states.as_slice(),
                };
                if let Some(&bad) = states.iter().find(|&&s| s >= mdp.num_states()) {
                    return Err(ModelError::BadStateRef {
                        what: "target".into(),
                        index: bad,
                    });
                }
                if states.is_empty() {
                    return Err(ModelError::EmptyTarget);
                }
                Ok(StateSet::from_indices(
                    mdp.num_states(),
                    states.iter().copied(),
                ))
            }
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ObjectiveKind::Reach(Target::Label(l)) => write!(f, "reach:{}:{}", self.opt, l),
            ObjectiveKind::Reach(Target::States(s)) => {
                let list: Vec<String> = s.iter().map(usize::to_string).collect();
                write!(f, "reach:{}:[{}]", self.opt, list.join(","))
            }
            ObjectiveKind::TotalReward => write!(f, "reward:{}", self.opt),
        }
    }
}

/// Memoryless deterministic policy: one local action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    /// The policy picking the first action everywhere.
    pub fn first_action(mdp: &SparseMdp) -> Self {
        Policy(vec![0; mdp.num_states()])
    }

    pub fn choice(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn validate(&self, mdp: &SparseMdp) -> Result<(), ModelError> {
        if self.0.len() != mdp.num_states() {
            return Err(ModelError::StateCount {
                expected: mdp.num_states(),
                found: self.0.len(),
            });
        }
        for (state, &choice) in self.0.iter().enumerate() {
            let available = mdp.num_actions(state);
            if choice >= available {
                return Err(ModelError::BadPolicyIndex {
                    state,
                    choice,
                    available,
                });
            }
        }
        Ok(())
    }
}

/// The Markov chain obtained by fixing a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMc {
    pub chain: SparseMdp,
    pub policy: Policy,
    /// Number of choices of the source MDP, a cheap identity check.
    pub source_choices: usize,
}

pub fn induced_mc(mdp: &SparseMdp, policy: &Policy) -> Result<InducedMc, ModelError> {
    policy.validate(mdp)?;
    let mut raw = mdp.to_raw();
    for (state, actions) in raw.transitions.iter_mut().enumerate() {
        let kept = actions.swap_remove(policy.choice(state));
        *actions = vec![kept];
    }
    Ok(InducedMc {
        chain: build_mdp(raw)?,
        policy: policy.clone(),
        source_choices: mdp.num_choices(),
    })
}

/// A value that may be the distinguished infinity of expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtValue<F> {
    Finite(F),
    Infinite,
}

impl<F> ExtValue<F> {
    pub fn finite(&self) -> Option<&F> {
        match self {
            ExtValue::Finite(v) => Some(v),
            ExtValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtValue::Infinite)
    }
}

impl<F: Number> ExtValue<F> {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtValue::Finite(v) => v.to_f64(),
            ExtValue::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtValue<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(v) => f.write_str(&format_rational(v)),
            ExtValue::Infinite => f.write_str("inf"),
        }
    }
}

impl fmt::Display for ExtValue<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(v) => write!(f, "{v}"),
            ExtValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Per-state values of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<F>(pub Vec<ExtValue<F>>);

impl<F> ValueVector<F> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, state: usize) -> &ExtValue<F> {
        &self.0[state]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExtValue<F>> {
        self.0.iter()
    }
}
