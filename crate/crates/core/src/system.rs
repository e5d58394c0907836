//! The numeric form of a preprocessed model.
//!
//! Each non-absorbing quotient state owns a group of rows, one per action.
//! Row `r` of state `s` stands for `b_r + Σ_j A_rj x_j`, where `x` ranges
//! over non-absorbing states only. Mass into the target, the reward of `s`
//! and values of already-solved states are folded into the constant `b_r`.

use std::ops::Range;

use crate::graph::Quotient;
use crate::model::Opt;
use crate::numeric::Number;

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSystem<F> {
    opt: Opt,
    row_groups: Vec<usize>,
    row_starts: Vec<usize>,
    cols: Vec<usize>,
    coeffs: Vec<F>,
    constants: Vec<F>,
    /// Whether the row moves mass out of the system.
    exits: Vec<bool>,
}

/// One row while assembling a system: coefficients, constant, exit flag.
pub type RowSpec<F> = (Vec<(usize, F)>, F, bool);

impl<F: Number> ChoiceSystem<F> {
    pub fn from_quotient(q: &Quotient) -> Self {
        let k = q.num_maybe();
        let groups = (0..k)
            .map(|s| {
                q.mdp
                    .choices(s)
                    .map(|c| {
                        let mut row = Vec::new();
                        let mut constant = if q.reward {
                            F::from_rational(&q.mdp.reward(s))
                        } else {
                            F::zero()
                        };
                        let mut exit = false;
                        for e in q.mdp.entries(c) {
                            let t = q.mdp.entry_successor(e);
                            if t < k {
                                row.push((t, F::transition_prob(&q.mdp, e)));
                            } else {
                                exit = true;
                                if t == q.target && !q.reward {
                                    constant = constant + F::transition_prob(&q.mdp, e);
                                }
                            }
                        }
                        (row, constant, exit)
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(q.opt, groups)
    }

    /// Builds a system from explicit rows, grouped by state.
    pub fn from_rows(opt: Opt, groups: Vec<Vec<RowSpec<F>>>) -> Self {
        let mut row_groups = vec![0];
        let mut row_starts = vec![0];
        let mut cols = Vec::new();
        let mut coeffs = Vec::new();
        let mut constants = Vec::new();
        let mut exits = Vec::new();
        for rows in groups {
            for (entries, constant, exit) in rows {
                for (col, coeff) in entries {
                    cols.push(col);
                    coeffs.push(coeff);
                }
                row_starts.push(cols.len());
                constants.push(constant);
                exits.push(exit);
            }
            row_groups.push(constants.len());
        }
        ChoiceSystem {
            opt,
            row_groups,
            row_starts,
            cols,
            coeffs,
            constants,
            exits,
        }
    }

    pub fn opt(&self) -> Opt {
        self.opt
    }

    pub fn num_states(&self) -> usize {
        self.row_groups.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.constants.len()
    }

    pub fn rows(&self, state: usize) -> Range<usize> {
        self.row_groups[state]..self.row_groups[state + 1]
    }

    pub fn row(&self, row: usize) -> (&[usize], &[F]) {
        let range = self.row_starts[row]..self.row_starts[row + 1];
        (&self.cols[range.clone()], &self.coeffs[range])
    }

    pub fn constant(&self, row: usize) -> &F {
        &self.constants[row]
    }

    pub fn is_exit(&self, row: usize) -> bool {
        self.exits[row]
    }

    /// `b_r + Σ_j A_rj x_j`.
    pub fn backup(&self, row: usize, x: &[F]) -> F {
        let (cols, coeffs) = self.row(row);
        cols.iter()
            .zip(coeffs)
            .fold(self.constants[row].clone(), |acc, (&j, a)| {
                acc + a.clone() * x[j].clone()
            })
    }

    /// Best local action and its backed-up value; ties go to the lowest index.
    pub fn best_action(&self, state: usize, x: &[F]) -> (usize, F) {
        let mut rows = self.rows(state);
        let first = rows.start;
        let mut best = (0, self.backup(rows.next().expect("state without rows"), x));
        for r in rows {
            let value = self.backup(r, x);
            if self.opt.better(&value, &best.1) {
                best = (r - first, value);
            }
        }
        best
    }

    /// One application of the Bellman operator.
    pub fn bellman(&self, x: &[F]) -> Vec<F> {
        (0..self.num_states())
            .map(|s| self.best_action(s, x).1)
            .collect()
    }

    /// Greedy policy with respect to `x`.
    pub fn greedy(&self, x: &[F]) -> Vec<usize> {
        (0..self.num_states())
            .map(|s| self.best_action(s, x).0)
            .collect()
    }

    /// The Markov chain system keeping only the chosen row of every state.
    pub fn restrict(&self, policy: &[usize]) -> ChoiceSystem<F> {
        let groups = (0..self.num_states())
            .map(|s| vec![self.row_spec(self.rows(s).start + policy[s])])
            .collect();
        Self::from_rows(self.opt, groups)
    }

    fn row_spec(&self, row: usize) -> RowSpec<F> {
        let (cols, coeffs) = self.row(row);
        (
            cols.iter().copied().zip(coeffs.iter().cloned()).collect(),
            self.constants[row].clone(),
            self.exits[row],
        )
    }

    /// The system restricted to `states`, with every column outside them
    /// replaced by the constant `known[col]`.
    pub fn subsystem(&self, states: &[usize], known: &[F]) -> ChoiceSystem<F> {
        let mut local = vec![usize::MAX; self.num_states()];
        for (i, &s) in states.iter().enumerate() {
            local[s] = i;
        }
        let groups = states
            .iter()
            .map(|&s| {
                self.rows(s)
                    .map(|r| {
                        let (cols, coeffs) = self.row(r);
                        let mut entries = Vec::new();
                        let mut constant = self.constants[r].clone();
                        let mut exit = self.exits[r];
                        for (&j, a) in cols.iter().zip(coeffs) {
                            if local[j] == usize::MAX {
                                constant = constant + a.clone() * known[j].clone();
                                exit = true;
                            } else {
                                entries.push((local[j], a.clone()));
                            }
                        }
                        (entries, constant, exit)
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(self.opt, groups)
    }

    /// Successor states of `state` over all of its rows, sorted and unique.
    pub fn successors(&self, state: usize) -> Vec<usize> {
        let mut succ: Vec<usize> = self
            .rows(state)
            .flat_map(|r| self.row(r).0.iter().copied())
            .collect();
        succ.sort_unstable();
        succ.dedup();
        succ
    }

    /// States that reach an exit row under `policy`.
    fn proper_states(&self, policy: &[usize]) -> Vec<bool> {
        let n = self.num_states();
        let mut preds = vec![Vec::new(); n];
        let mut proper = vec![false; n];
        let mut queue = Vec::new();
        for s in 0..n {
            let r = self.rows(s).start + policy[s];
            for &t in self.row(r).0 {
                preds[t].push(s);
            }
            if self.exits[r] {
                proper[s] = true;
                queue.push(s);
            }
        }
        while let Some(t) = queue.pop() {
            for &s in &preds[t] {
                if !proper[s] {
                    proper[s] = true;
                    queue.push(s);
                }
            }
        }
        proper
    }

    /// Re-routes states that would never leave the system under `policy`
    /// along an attractor towards the exits. Returns the first state for
    /// which no such route exists.
    pub fn make_proper(&self, policy: &mut [usize]) -> Result<(), usize> {
        let mut proper = self.proper_states(policy);
        loop {
            let mut changed = false;
            for s in 0..self.num_states() {
                if proper[s] {
                    continue;
                }
                let first = self.rows(s).start;
                let route = self
                    .rows(s)
                    .find(|&r| self.exits[r] || self.row(r).0.iter().any(|&t| proper[t]));
                if let Some(r) = route {
                    policy[s] = r - first;
                    proper[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        match proper.iter().position(|p| !p) {
            Some(s) => Err(s),
            None => Ok(()),
        }
    }
}
