//! Dense bounded-variable two-phase primal simplex with Bland's rule.

use crate::numeric::Number;
use crate::result::{Deadline, SolveError};

use super::{LpProblem, Relation, Sense};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSettings<F> {
    pub feasibility_tol: F,
    pub pivot_tol: F,
    pub max_iterations: Option<u64>,
    pub deadline: Deadline,
}

impl<F: Number> SimplexSettings<F> {
    /// Zero tolerances for exact fields, `1e-9` otherwise.
    pub fn for_field() -> Self {
        let tol = if F::EXACT {
            F::zero()
        } else {
            F::from_f64(1e-9)
        };
        SimplexSettings {
            feasibility_tol: tol.clone(),
            pivot_tol: tol,
            max_iterations: None,
            deadline: Deadline::none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<F> {
    pub x: Vec<F>,
    pub objective: F,
    /// Pivots plus bound flips over both phases.
    pub iterations: u64,
    /// Whether a starting vertex was feasible without a first phase.
    pub skipped_phase_one: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

enum Leave {
    Flip,
    Row(usize, bool),
}

struct Tableau<'a, F> {
    rows: Vec<Vec<F>>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<F>,
    lb: Vec<F>,
    ub: Vec<Option<F>>,
    settings: &'a SimplexSettings<F>,
    iterations: u64,
}

impl<F: Number> Tableau<'_, F> {
    fn ncols(&self) -> usize {
        self.x.len()
    }

    fn reduced_costs(&self, cost: &[F]) -> Vec<F> {
        let mut d = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &cost[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in row.iter().enumerate() {
                if !a.is_zero() {
                    d[j] = d[j].clone() - cb.clone() * a.clone();
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [F]) {
        let p = self.rows[r][j].clone();
        let nz: Vec<usize> = (0..self.ncols())
            .filter(|&k| !self.rows[r][k].is_zero())
            .collect();
        for &k in &nz {
            self.rows[r][k] = self.rows[r][k].clone() / p.clone();
        }
        self.rows[r][j] = F::one();
        let pivot_row: Vec<(usize, F)> = nz.iter().map(|&k| (k, self.rows[r][k].clone())).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][j].is_zero() {
                continue;
            }
            let f = self.rows[i][j].clone();
            for (k, a) in &pivot_row {
                self.rows[i][*k] = self.rows[i][*k].clone() - f.clone() * a.clone();
            }
            self.rows[i][j] = F::zero();
        }
        if !d[j].is_zero() {
            let f = d[j].clone();
            for (k, a) in &pivot_row {
                d[*k] = d[*k].clone() - f.clone() * a.clone();
            }
            d[j] = F::zero();
        }
    }

    /// Minimises `cost · x` from the current basic feasible solution.
    fn run(&mut self, cost: &[F]) -> Result<(), SolveError> {
        let ptol = self.settings.pivot_tol.clone();
        let ftol = self.settings.feasibility_tol.clone();
        let mut d = self.reduced_costs(cost);
        loop {
            if let Some(limit) = self.settings.max_iterations {
                if self.iterations >= limit {
                    return Err(SolveError::IterationLimit { limit });
                }
            }
            self.settings.deadline.check(self.iterations)?;

            // Bland: smallest index with an improving direction
            let entering = (0..self.ncols()).find_map(|j| {
                let fixed = self.ub[j].as_ref().is_some_and(|u| *u == self.lb[j]);
                match self.status[j] {
                    Status::AtLower if !fixed && d[j] < -ptol.clone() => Some((j, true)),
                    Status::AtUpper if !fixed && d[j] > ptol => Some((j, false)),
                    _ => None,
                }
            });
            let Some((j, increase)) = entering else {
                return Ok(());
            };

            // ratio test; ties go to the smallest variable index
            let mut best: Option<(F, usize, Leave)> = self.ub[j]
                .as_ref()
                .map(|u| (u.clone() - self.lb[j].clone(), j, Leave::Flip));
            for i in 0..self.rows.len() {
                let alpha = if increase {
                    self.rows[i][j].clone()
                } else {
                    -self.rows[i][j].clone()
                };
                let b = self.basis[i];
                let (theta, to_upper) = if alpha > ptol {
                    ((self.x[b].clone() - self.lb[b].clone()) / alpha, false)
                } else if alpha < -ptol.clone() {
                    match &self.ub[b] {
                        Some(u) => ((u.clone() - self.x[b].clone()) / -alpha, true),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let theta = if theta < F::zero() { F::zero() } else { theta };
                let better = match &best {
                    None => true,
                    Some((t, idx, _)) => {
                        theta < t.clone() - ftol.clone()
                            || (theta <= t.clone() + ftol.clone() && b < *idx)
                    }
                };
                if better {
                    best = Some((theta, b, Leave::Row(i, to_upper)));
                }
            }
            let Some((theta, _, leave)) = best else {
                return Err(SolveError::Unbounded);
            };

            let step = if increase { theta } else { -theta };
            if !step.is_zero() {
                self.x[j] = self.x[j].clone() + step.clone();
                for i in 0..self.rows.len() {
                    let a = &self.rows[i][j];
                    if !a.is_zero() {
                        let b = self.basis[i];
                        self.x[b] = self.x[b].clone() - a.clone() * step.clone();
                    }
                }
            }
            self.iterations += 1;
            match leave {
                Leave::Flip => {
                    if increase {
                        self.status[j] = Status::AtUpper;
                        self.x[j] = self.ub[j].clone().expect("flip needs an upper bound");
                    } else {
                        self.status[j] = Status::AtLower;
                        self.x[j] = self.lb[j].clone();
                    }
                }
                Leave::Row(r, to_upper) => {
                    let out = self.basis[r];
                    if to_upper {
                        self.status[out] = Status::AtUpper;
                        self.x[out] = self.ub[out].clone().expect("leaving at upper bound");
                    } else {
                        self.status[out] = Status::AtLower;
                        self.x[out] = self.lb[out].clone();
                    }
                    self.pivot(r, j, &mut d);
                    self.basis[r] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
    }
}

fn slack_feasible<F: Number>(relation: Relation, residual: &F, tol: &F) -> bool {
    match relation {
        Relation::Ge => *residual <= tol.clone(),
        Relation::Le => *residual >= -tol.clone(),
        Relation::Eq => residual.abs() <= *tol,
    }
}

/// Solves `lp`. Starts from the all-lower-bound vertex, or the
/// all-upper-bound vertex when that one satisfies every row, and only runs
/// a first phase for rows neither start satisfies.
pub fn simplex_solve<F: Number>(
    lp: &LpProblem<F>,
    settings: &SimplexSettings<F>,
) -> Result<LpSolution<F>, SolveError> {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    let tol = &settings.feasibility_tol;

    let residuals = |point: &[F]| -> Vec<F> {
        lp.constraints
            .iter()
            .map(|c| {
                c.coeffs.iter().fold(c.rhs.clone(), |acc, (j, a)| {
                    acc - a.clone() * point[*j].clone()
                })
            })
            .collect()
    };
    let all_feasible = |point: &[F]| {
        residuals(point)
            .iter()
            .zip(&lp.constraints)
            .all(|(r, c)| slack_feasible(c.relation, r, tol))
    };

    let lower_start: Vec<F> = lp.lower.clone();
    let mut start = lower_start.clone();
    let mut at_upper = false;
    if !all_feasible(&start) && lp.upper.iter().all(Option::is_some) {
        let upper_start: Vec<F> = lp.upper.iter().map(|u| u.clone().unwrap()).collect();
        if all_feasible(&upper_start) {
            start = upper_start;
            at_upper = true;
        }
    }
    let residual = residuals(&start);

    let slack_cols: Vec<Option<usize>> = {
        let mut next = n;
        lp.constraints
            .iter()
            .map(|c| match c.relation {
                Relation::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let num_slacks = slack_cols.iter().flatten().count();
    let needs_artificial: Vec<bool> = lp
        .constraints
        .iter()
        .zip(&residual)
        .map(|(c, r)| c.relation == Relation::Eq || !slack_feasible(c.relation, r, tol))
        .collect();
    let num_artificial = needs_artificial.iter().filter(|&&a| a).count();
    let ncols = n + num_slacks + num_artificial;

    let mut rows = vec![vec![F::zero(); ncols]; m];
    let mut basis = vec![0; m];
    let mut x = vec![F::zero(); ncols];
    x[..n].clone_from_slice(&start);
    let mut status = vec![
        if at_upper {
            Status::AtUpper
        } else {
            Status::AtLower
        };
        ncols
    ];
    let mut lb = vec![F::zero(); ncols];
    lb[..n].clone_from_slice(&lp.lower);
    let mut ub: Vec<Option<F>> = vec![None; ncols];
    ub[..n].clone_from_slice(&lp.upper);
    for s in status.iter_mut().skip(n) {
        *s = Status::AtLower;
    }

    // slacks: a·x - s = rhs for >=, a·x + s = rhs for <=, with s >= 0
    let mut next_artificial = n + num_slacks;
    for (i, c) in lp.constraints.iter().enumerate() {
        for (j, a) in &c.coeffs {
            rows[i][*j] = rows[i][*j].clone() + a.clone();
        }
        if let Some(sc) = slack_cols[i] {
            rows[i][sc] = match c.relation {
                Relation::Ge => -F::one(),
                _ => F::one(),
            };
        }
        let r = residual[i].clone();
        if needs_artificial[i] {
            // a·x ± s + sign·art = rhs with art = |residual| at the start
            let art = next_artificial;
            next_artificial += 1;
            let negative = r < F::zero();
            if negative {
                for v in rows[i].iter_mut() {
                    *v = -v.clone();
                }
            }
            rows[i][art] = F::one();
            x[art] = r.abs();
            basis[i] = art;
            status[art] = Status::Basic;
        } else {
            let sc = slack_cols[i].expect("feasible rows without slack are equalities");
            let value = match c.relation {
                Relation::Ge => -r,
                _ => r,
            };
            x[sc] = if value < F::zero() { F::zero() } else { value };
            if rows[i][sc] < F::zero() {
                for v in rows[i].iter_mut() {
                    *v = -v.clone();
                }
            }
            basis[i] = sc;
            status[sc] = Status::Basic;
        }
    }

    let mut tableau = Tableau {
        rows,
        basis,
        status,
        x,
        lb,
        ub,
        settings,
        iterations: 0,
    };

    if num_artificial > 0 {
        let mut cost = vec![F::zero(); ncols];
        for c in cost.iter_mut().skip(n + num_slacks) {
            *c = F::one();
        }
        tableau.run(&cost)?;
        let infeasibility = tableau.x[n + num_slacks..]
            .iter()
            .fold(F::zero(), |acc, v| acc + v.clone());
        if infeasibility > *tol {
            return Err(SolveError::Infeasible);
        }
        for art in n + num_slacks..ncols {
            tableau.ub[art] = Some(F::zero());
            if tableau.status[art] != Status::Basic {
                tableau.status[art] = Status::AtLower;
                tableau.x[art] = F::zero();
            }
        }
    }

    let mut cost = vec![F::zero(); ncols];
    for (j, c) in lp.objective.iter().enumerate() {
        cost[j] = match lp.sense {
            Sense::Minimize => c.clone(),
            Sense::Maximize => -c.clone(),
        };
    }
    tableau.run(&cost)?;

    let x: Vec<F> = tableau.x[..n].to_vec();
    Ok(LpSolution {
        objective: lp.objective_value(&x),
        x,
        iterations: tableau.iterations,
        skipped_phase_one: num_artificial == 0,
    })
}
