use std::collections::BTreeMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{LinearProgram, LpSolution, LpSolver, LpStatus, Relation};
use crate::error::{Error, Result};

/// Sparse LU-based simplex from the `microlp` crate, for LPs too large for
/// the dense tableau. It does not report duals.
#[derive(Debug, Clone, Copy, Default)]
pub struct SparseSimplex;

impl LpSolver for SparseSimplex {
    fn name(&self) -> &'static str {
        "sparse-simplex"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        lp.validate()?;
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..lp.num_vars())
            .map(|j| {
                let upper = lp.upper()[j].unwrap_or(f64::INFINITY);
                problem.add_var(lp.objective()[j], (lp.lower()[j], upper))
            })
            .collect();
        for row in lp.constraints() {
            let mut merged = BTreeMap::new();
            for &(j, a) in &row.coeffs {
                *merged.entry(j).or_insert(0.0) += a;
            }
            let terms: Vec<_> = merged
                .into_iter()
                .filter(|(_, a)| *a != 0.0)
                .map(|(j, a)| (vars[j], a))
                .collect();
            let op = match row.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Eq => ComparisonOp::Eq,
                Relation::Ge => ComparisonOp::Ge,
            };
            problem.add_constraint(terms.as_slice(), op, row.rhs);
        }
        let outcome = match problem.solve() {
            Ok(outcome) => outcome,
            Err(microlp::Error::Infeasible) => {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, 0, self.name()))
            }
            Err(microlp::Error::Unbounded) => {
                return Ok(LpSolution::without_point(LpStatus::Unbounded, 0, self.name()))
            }
            Err(e) => return Err(Error::Backend(e.to_string())),
        };
        let solution = outcome
            .into_solution()
            .map_err(|_| Error::Backend("solve was interrupted".into()))?;
        let x: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective_value: lp.objective_value(&x),
            x,
            duals: None,
            certificate: None,
            iterations: 0,
            solver: self.name(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_with_dense_on_small_lp() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        let y = lp.add_bounded_var("y", 2.0, 0.0, Some(1.0));
        lp.add_constraint(vec![(x, 1.0), (y, 1.0), (x, 1.0)], Relation::Ge, 3.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        let sparse = SparseSimplex.solve(&lp).unwrap();
        let dense = super::super::solve(&lp, &Default::default()).unwrap();
        assert!((sparse.objective_value - dense.objective_value).abs() < 1e-9);
        assert!((dense.objective_value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_status() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, -1.0);
        assert_eq!(SparseSimplex.solve(&lp).unwrap().status, LpStatus::Infeasible);
    }
}
