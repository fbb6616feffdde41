//! Linear programs in a solver-neutral form, a dense two-phase simplex and a
//! sparse backend for large instances.

mod dense;
mod sparse;
mod text;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dense::DenseSimplex;
pub use sparse::SparseSimplex;
pub use text::to_lp_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c.x` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<Option<f64>>,
    names: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[0, inf)` and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.add_bounded_var(name, cost, 0.0, None)
    }

    pub fn add_bounded_var(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        lower: f64,
        upper: Option<f64>,
    ) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    /// Adds a row; repeated indices are summed.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn add_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] += cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[Option<f64>] {
        &self.upper
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks indices, finiteness and bound consistency.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Argument(format!("objective coefficient of {} is {c}", self.names[j])));
            }
            if !self.lower[j].is_finite() {
                return Err(Error::Argument(format!("lower bound of {} must be finite", self.names[j])));
            }
            if let Some(u) = self.upper[j] {
                if !u.is_finite() {
                    return Err(Error::Argument(format!("upper bound of {} is {u}", self.names[j])));
                }
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Argument(format!("row {i} has rhs {}", row.rhs)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::Dimension(format!("row {i} references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(Error::Argument(format!("row {i} has coefficient {a}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Optimality evidence from the dense solver. The dual bound is valid
/// whenever `dual_residual` is (numerically) zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub dual_bound: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub x: Vec<f64>,
    /// Row duals in the sign convention `c - A^T y >= 0` for a minimization.
    pub duals: Option<Vec<f64>>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub solver: &'static str,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize, solver: &'static str) -> Self {
        LpSolution {
            status,
            objective_value: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
            x: Vec::new(),
            duals: None,
            certificate: None,
            iterations,
            solver,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// The solution, or an error naming `context` when it is not optimal.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::NotOptimal {
                status: self.status.to_string(),
                context: context.to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Smallest-index entering and leaving choices; never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, switching to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// `None` means `50 * (rows + columns)`.
    pub max_iters: Option<usize>,
    pub pivot: PivotRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iters: None,
            pivot: PivotRule::Bland,
        }
    }
}

/// Anything that can solve a [`LinearProgram`].
pub trait LpSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;
}

/// Solves with the dense simplex.
pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    DenseSimplex::new(*opts).solve(lp)
}

/// Which solver a formulation is handed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Dense,
    Sparse,
    /// Dense when the tableau is small enough, sparse otherwise.
    #[default]
    Auto,
}

/// Tableau entries above which `Backend::Auto` switches to the sparse solver.
pub const DENSE_AUTO_LIMIT: usize = 200_000;

impl Backend {
    pub fn solver_for(self, lp: &LinearProgram) -> Box<dyn LpSolver> {
        let dense = || Box::new(DenseSimplex::new(SolveOptions::default())) as Box<dyn LpSolver>;
        match self {
            Backend::Dense => dense(),
            Backend::Sparse => Box::new(SparseSimplex),
            Backend::Auto => {
                let bounded = lp.upper().iter().filter(|u| u.is_some()).count();
                let rows = lp.num_constraints() + bounded;
                let cols = lp.num_vars() + 2 * rows;
                if rows.saturating_mul(cols) <= DENSE_AUTO_LIMIT {
                    dense()
                } else {
                    Box::new(SparseSimplex)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub objective: f64,
    pub max_constraint_violation: f64,
    /// Index of the most violated row, if any row is violated at all.
    pub worst_constraint: Option<usize>,
    pub max_bound_violation: f64,
    pub worst_bound: Option<usize>,
    pub tolerance: f64,
}

impl ResidualReport {
    pub fn is_feasible(&self) -> bool {
        self.max_constraint_violation <= self.tolerance && self.max_bound_violation <= self.tolerance
    }
}

/// Evaluates a candidate point against every row and bound of `lp`.
pub fn check_solution(lp: &LinearProgram, x: &[f64], tol: f64) -> Result<ResidualReport> {
    if x.len() != lp.num_vars() {
        return Err(Error::Dimension(format!(
            "point has {} entries, LP has {} variables",
            x.len(),
            lp.num_vars()
        )));
    }
    let mut worst = (0.0, None);
    for (i, row) in lp.constraints().iter().enumerate() {
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let viol = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        if viol > worst.0 {
            worst = (viol, Some(i));
        }
    }
    let mut worst_bound = (0.0, None);
    for j in 0..lp.num_vars() {
        let mut viol = lp.lower()[j] - x[j];
        if let Some(u) = lp.upper()[j] {
            viol = viol.max(x[j] - u);
        }
        if viol > worst_bound.0 {
            worst_bound = (viol, Some(j));
        }
    }
    Ok(ResidualReport {
        objective: lp.objective_value(x),
        max_constraint_violation: worst.0,
        worst_constraint: worst.1,
        max_bound_violation: worst_bound.0,
        worst_bound: worst_bound.1,
        tolerance: tol,
    })
}
