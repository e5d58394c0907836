//! Linear programming formulation of optimal values.
//!
//! For maximisation every choice row gives `x_s >= b_r + Σ_j A_rj x_j` and
//! `Σ x_s` is minimised; minimisation flips both.

pub mod simplex;

use std::fmt::Write as _;
use std::time::Instant;

use num_traits::{One, Signed, Zero};

use crate::graph::Quotient;
use crate::model::Opt;
use crate::numeric::{format_rational, Number, Rational};
use crate::result::{Deadline, Guarantee, Solution, SolveError, SystemSolution};
use crate::system::ChoiceSystem;

pub use simplex::{simplex_solve, LpSolution, SimplexSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<F> {
    pub coeffs: Vec<(usize, F)>,
    pub relation: Relation,
    pub rhs: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<F> {
    pub sense: Sense,
    pub objective: Vec<F>,
    pub lower: Vec<F>,
    pub upper: Vec<Option<F>>,
    pub constraints: Vec<Constraint<F>>,
    pub names: Vec<String>,
}

impl<F: Number> LpProblem<F> {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn map<G>(&self, f: impl Fn(&F) -> G) -> LpProblem<G> {
        LpProblem {
            sense: self.sense,
            objective: self.objective.iter().map(&f).collect(),
            lower: self.lower.iter().map(&f).collect(),
            upper: self.upper.iter().map(|u| u.as_ref().map(&f)).collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    coeffs: c.coeffs.iter().map(|(j, a)| (*j, f(a))).collect(),
                    relation: c.relation,
                    rhs: f(&c.rhs),
                })
                .collect(),
            names: self.names.clone(),
        }
    }

    pub fn objective_value(&self, x: &[F]) -> F {
        self.objective
            .iter()
            .zip(x)
            .fold(F::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// Whether `x` satisfies every bound and row up to `tol`.
    pub fn satisfies(&self, x: &[F], tol: &F) -> bool {
        let bounds = (0..self.num_vars()).all(|j| {
            x[j] >= self.lower[j].clone() - tol.clone()
                && self.upper[j]
                    .as_ref()
                    .is_none_or(|u| x[j] <= u.clone() + tol.clone())
        });
        bounds
            && self.constraints.iter().all(|c| {
                let lhs = c
                    .coeffs
                    .iter()
                    .fold(F::zero(), |acc, (j, a)| acc + a.clone() * x[*j].clone());
                match c.relation {
                    Relation::Ge => lhs >= c.rhs.clone() - tol.clone(),
                    Relation::Le => lhs <= c.rhs.clone() + tol.clone(),
                    Relation::Eq => (lhs - c.rhs.clone()).abs() <= *tol,
                }
            })
    }
}

impl LpProblem<Rational> {
    /// CPLEX LP text.
    pub fn to_lp_text(&self) -> String {
        let expr = |terms: Vec<(usize, &Rational)>| {
            if terms.is_empty() {
                return "0".to_string();
            }
            let parts: Vec<String> = terms
                .iter()
                .enumerate()
                .map(|(k, (j, a))| {
                    let mag = Number::abs(*a);
                    let coef = if mag.is_one() {
                        String::new()
                    } else {
                        format!("{} ", format_rational(&mag))
                    };
                    let sign = match (k == 0, a.is_negative()) {
                        (_, true) => "- ",
                        (true, false) => "",
                        (false, false) => "+ ",
                    };
                    format!("{sign}{coef}{}", self.names[*j])
                })
                .collect();
            parts.join(" ")
        };
        let mut text = String::new();
        text.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        let obj = expr(
            self.objective
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_zero())
                .collect(),
        );
        let _ = writeln!(text, " obj: {obj}");
        text.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs = expr(c.coeffs.iter().map(|(j, a)| (*j, a)).collect());
            let rel = match c.relation {
                Relation::Ge => ">=",
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            let _ = writeln!(text, " c{i}: {lhs} {rel} {}", format_rational(&c.rhs));
        }
        text.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let lo = format_rational(&self.lower[j]);
            match &self.upper[j] {
                Some(u) => {
                    let _ = writeln!(text, " {lo} <= {} <= {}", self.names[j], format_rational(u));
                }
                None => {
                    let _ = writeln!(text, " {} >= {lo}", self.names[j]);
                }
            }
        }
        text.push_str("End\n");
        text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundsMode {
    /// `[0, 1]` for probabilities, `[0, ∞)` for rewards.
    Trivial,
    /// Lower bounds from value estimates, one per quotient state.
    Warm(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    AllStates,
    InitialOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptions {
    pub bounds: BoundsMode,
    pub objective: ObjectiveMode,
    /// Turn the row of every single-action state into an equality.
    pub unique_action_equality: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            bounds: BoundsMode::Trivial,
            objective: ObjectiveMode::AllStates,
            unique_action_equality: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpField {
    Rational,
    Float {
        feasibility_tol: f64,
        pivot_tol: f64,
    },
}

impl LpField {
    pub fn float() -> Self {
        LpField::Float {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConfig {
    pub options: LpOptions,
    pub field: LpField,
    pub max_iterations: Option<u64>,
    pub deadline: Deadline,
}

impl LpConfig {
    pub fn new(field: LpField) -> Self {
        LpConfig {
            options: LpOptions::default(),
            field,
            max_iterations: None,
            deadline: Deadline::none(),
        }
    }
}

/// Float estimates become exact lower bounds after shrinking them by this
/// relative margin, which absorbs the rounding of the float iteration.
const WARM_MARGIN: f64 = 1e-9;

pub(crate) fn warm_lower<F: Number>(estimate: f64) -> F {
    F::from_f64((estimate * (1.0 - WARM_MARGIN)).max(0.0))
}

/// The LP of a system. `lower` holds optional lower bounds per state;
/// `objective_states` restricts the objective (all states if `None`).
pub fn build_lp_system<F: Number>(
    sys: &ChoiceSystem<F>,
    reward: bool,
    lower: Option<&[F]>,
    objective_states: Option<&[usize]>,
    unique_action_equality: bool,
) -> LpProblem<F> {
    let n = sys.num_states();
    let zero = F::zero();
    let one = F::one();
    let (sense, relation) = match sys.opt() {
        Opt::Max => (Sense::Minimize, Relation::Ge),
        Opt::Min => (Sense::Maximize, Relation::Le),
    };
    let mut objective = vec![zero.clone(); n];
    match objective_states {
        Some(states) => {
            for &s in states {
                objective[s] = one.clone();
            }
        }
        None => objective.fill(one.clone()),
    }
    let mut constraints = Vec::with_capacity(sys.num_rows());
    for s in 0..n {
        let rows = sys.rows(s);
        let single = rows.len() == 1;
        for r in rows {
            let (cols, coeffs) = sys.row(r);
            let mut own = one.clone();
            let mut others: Vec<(usize, F)> = Vec::new();
            for (&j, a) in cols.iter().zip(coeffs) {
                if j == s {
                    own = own - a.clone();
                } else {
                    others.push((j, -a.clone()));
                }
            }
            let mut row = vec![(s, own)];
            row.extend(others);
            row.sort_by_key(|(j, _)| *j);
            let rhs = sys.constant(r).clone();
            if single && unique_action_equality {
                constraints.push(Constraint {
                    coeffs: row,
                    relation: Relation::Eq,
                    rhs,
                });
            } else {
                constraints.push(Constraint {
                    coeffs: row,
                    relation,
                    rhs,
                });
            }
        }
    }
    LpProblem {
        sense,
        objective,
        lower: lower.map_or_else(|| vec![zero.clone(); n], <[F]>::to_vec),
        upper: vec![if reward { None } else { Some(one) }; n],
        constraints,
        names: (0..n).map(|s| format!("x{s}")).collect(),
    }
}

/// The LP of a preprocessed model, over its non-absorbing states.
pub fn build_lp(q: &Quotient, options: &LpOptions) -> Result<LpProblem<Rational>, SolveError> {
    let sys = ChoiceSystem::<Rational>::from_quotient(q);
    let lower = match &options.bounds {
        BoundsMode::Trivial => None,
        BoundsMode::Warm(estimates) => {
            if estimates.len() != q.mdp.num_states() {
                return Err(SolveError::DimensionMismatch {
                    expected: q.mdp.num_states(),
                    found: estimates.len(),
                });
            }
            Some(
                estimates[..q.num_maybe()]
                    .iter()
                    .map(|&e| warm_lower(e))
                    .collect::<Vec<_>>(),
            )
        }
    };
    let initial = q.mdp.initial();
    let objective_states = match options.objective {
        ObjectiveMode::AllStates => None,
        ObjectiveMode::InitialOnly => Some(if initial < q.num_maybe() {
            vec![initial]
        } else {
            Vec::new()
        }),
    };
    Ok(build_lp_system(
        &sys,
        q.reward,
        lower.as_deref(),
        objective_states.as_deref(),
        options.unique_action_equality,
    ))
}

/// Solves a system's LP in the requested field. With an objective on a
/// subset of states only those states are guaranteed optimal.
pub(crate) fn lp_system<F: Number>(
    problem: &LpProblem<F>,
    config: &LpConfig,
    sys: &ChoiceSystem<F>,
) -> Result<SystemSolution<F>, SolveError> {
    let mut settings = SimplexSettings::<F>::for_field();
    if let LpField::Float {
        feasibility_tol,
        pivot_tol,
    } = config.field
    {
        settings.feasibility_tol = F::from_f64(feasibility_tol);
        settings.pivot_tol = F::from_f64(pivot_tol);
    }
    settings.max_iterations = config.max_iterations;
    settings.deadline = config.deadline;
    let sol = simplex_solve(problem, &settings)?;
    Ok(SystemSolution {
        policy: Some(sys.greedy(&sol.x)),
        values: sol.x,
        upper: None,
        guarantee: if F::EXACT {
            Guarantee::Exact
        } else {
            Guarantee::Unsound
        },
        iterations: sol.iterations,
    })
}

/// Solves a preprocessed model by linear programming.
pub fn solve_lp(q: &Quotient, config: &LpConfig) -> Result<Solution, SolveError> {
    let started = Instant::now();
    let lp = build_lp(q, &config.options)?;
    Ok(match config.field {
        LpField::Rational => {
            let sys = ChoiceSystem::<Rational>::from_quotient(q);
            Solution::Exact(lp_system(&lp, config, &sys)?.into_result(q, started))
        }
        LpField::Float { .. } => {
            let sys = ChoiceSystem::<f64>::from_quotient(q);
            let lp = lp.map(Number::to_f64);
            Solution::Float(lp_system(&lp, config, &sys)?.into_result(q, started))
        }
    })
}
