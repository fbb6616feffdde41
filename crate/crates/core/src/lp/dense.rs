use super::{
    Certificate, LinearProgram, LpSolution, LpSolver, LpStatus, PivotRule, Relation, SolveOptions,
};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-14;
const RATIO_TIE: f64 = 1e-12;
/// Consecutive degenerate Dantzig pivots tolerated before switching to Bland
/// for the rest of the degenerate run.
const DEGENERATE_RUN: usize = 50;

/// Two-phase primal simplex on a dense tableau.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseSimplex {
    pub options: SolveOptions,
}

impl DenseSimplex {
    pub fn new(options: SolveOptions) -> Self {
        DenseSimplex { options }
    }
}

impl LpSolver for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-simplex"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        lp.validate()?;
        Solver::build(lp, self.options).run(lp)
    }
}

/// Standard form `A' x' (=) b', x' >= 0` where `x = lower + x'`, upper bounds
/// become rows, and rows are flipped so that `b' >= 0`.
struct Solver {
    opts: SolveOptions,
    m: usize,
    n_struct: usize,
    /// First artificial column; columns `n_struct..art_start` are slacks.
    art_start: usize,
    ncols: usize,
    /// `(m + 1) x (ncols + 1)`, row `m` holds reduced costs, last column rhs.
    tab: Vec<f64>,
    basis: Vec<usize>,
    /// Column forming the identity block for each row (slack or artificial).
    unit_col: Vec<usize>,
    /// Original standard-form data, kept for the certificate.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    flipped: Vec<bool>,
    slack_sign: Vec<f64>,
    iterations: usize,
    infeasible_bounds: bool,
}

impl Solver {
    fn build(lp: &LinearProgram, opts: SolveOptions) -> Solver {
        let n = lp.num_vars();
        let lower = lp.lower();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut rels = Vec::new();
        let mut rhs = Vec::new();
        let mut infeasible_bounds = false;
        for c in lp.constraints() {
            let mut dense_row: Vec<(usize, f64)> = Vec::with_capacity(c.coeffs.len());
            let mut merged = std::collections::BTreeMap::new();
            for &(j, a) in &c.coeffs {
                *merged.entry(j).or_insert(0.0) += a;
            }
            let mut b = c.rhs;
            for (j, a) in merged {
                if a != 0.0 {
                    b -= a * lower[j];
                    dense_row.push((j, a));
                }
            }
            rows.push(dense_row);
            rels.push(c.relation);
            rhs.push(b);
        }
        for j in 0..n {
            if let Some(u) = lp.upper()[j] {
                if u < lower[j] - opts.feas_tol {
                    infeasible_bounds = true;
                }
                rows.push(vec![(j, 1.0)]);
                rels.push(Relation::Le);
                rhs.push((u - lower[j]).max(0.0));
            }
        }
        let m = rows.len();
        let mut flipped = vec![false; m];
        for i in 0..m {
            if rhs[i] < 0.0 {
                flipped[i] = true;
                rhs[i] = -rhs[i];
                for e in rows[i].iter_mut() {
                    e.1 = -e.1;
                }
                rels[i] = match rels[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        let num_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
        let num_art = rels.iter().filter(|r| **r != Relation::Le).count();
        let art_start = n + num_slack;
        let ncols = art_start + num_art;
        let width = ncols + 1;
        let mut tab = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let mut unit_col = vec![0; m];
        let mut slack_sign = vec![0.0; m];
        let mut next_slack = n;
        let mut next_art = art_start;
        for i in 0..m {
            let row = &mut tab[i * width..(i + 1) * width];
            for &(j, a) in &rows[i] {
                row[j] = a;
            }
            row[ncols] = rhs[i];
            match rels[i] {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    slack_sign[i] = 1.0;
                    basis[i] = next_slack;
                    unit_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    slack_sign[i] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    unit_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    unit_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Solver {
            opts,
            m,
            n_struct: n,
            art_start,
            ncols,
            tab,
            basis,
            unit_col,
            rows,
            rhs,
            flipped,
            slack_sign,
            iterations: 0,
            infeasible_bounds,
        }
    }

    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.tab[i * self.width() + j]
    }

    fn iteration_limit(&self) -> usize {
        self.opts
            .max_iters
            .unwrap_or(50 * (self.m + self.ncols).max(100))
    }

    /// Sets the reduced-cost row for column costs `cost`.
    fn price(&mut self, cost: &dyn Fn(usize) -> f64) {
        let w = self.width();
        let obj = self.m * w;
        for j in 0..self.ncols {
            self.tab[obj + j] = cost(j);
        }
        self.tab[obj + self.ncols] = 0.0;
        for i in 0..self.m {
            let cb = cost(self.basis[i]);
            if cb != 0.0 {
                for j in 0..w {
                    self.tab[obj + j] -= cb * self.tab[i * w + j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.tab[r * w + c];
        let (before, rest) = self.tab.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[c] = 1.0;
        let update = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    if *pv != 0.0 {
                        *v -= f * pv;
                        if v.abs() < ZERO_TOL {
                            *v = 0.0;
                        }
                    }
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(update);
        after.chunks_mut(w).for_each(update);
        self.basis[r] = c;
    }

    /// Runs simplex iterations on the current objective row. `allowed`
    /// limits entering columns. Returns `false` if unbounded.
    fn iterate(&mut self, allowed: usize) -> Result<bool> {
        let w = self.width();
        let obj = self.m * w;
        let limit = self.iteration_limit();
        let mut rule = self.opts.pivot;
        let mut degenerate = 0usize;
        loop {
            let entering = match rule {
                PivotRule::Bland => (0..allowed).find(|&j| self.tab[obj + j] < -self.opts.opt_tol),
                PivotRule::Dantzig => {
                    let mut best: Option<(usize, f64)> = None;
                    for j in 0..allowed {
                        let d = self.tab[obj + j];
                        if d < -self.opts.opt_tol && best.map_or(true, |(_, b)| d < b) {
                            best = Some((j, d));
                        }
                    }
                    best.map(|(j, _)| j)
                }
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.tab[i * w + c];
                if a > PIVOT_TOL {
                    let ratio = self.tab[i * w + self.ncols].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - RATIO_TIE
                                || (ratio <= br + RATIO_TIE && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio.min(br)))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if self.iterations >= limit {
                return Err(Error::IterationLimit(limit));
            }
            self.iterations += 1;
            if ratio <= RATIO_TIE {
                degenerate += 1;
                if rule == PivotRule::Dantzig && degenerate >= DEGENERATE_RUN {
                    rule = PivotRule::Bland;
                }
            } else {
                degenerate = 0;
                rule = self.opts.pivot;
            }
            self.pivot(r, c);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        const NAME: &str = "dense-simplex";
        if self.infeasible_bounds {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, 0, NAME));
        }
        let art_start = self.art_start;
        let ncols = self.ncols;
        if art_start < ncols {
            self.price(&|j| if j >= art_start { 1.0 } else { 0.0 });
            self.iterate(art_start)?;
            let w = self.width();
            let phase1 = -self.tab[self.m * w + ncols];
            let scale = self.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if phase1 > self.opts.feas_tol * scale {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iterations, NAME));
            }
            // Pivot remaining artificials out where possible; rows where no
            // structural or slack column is available are redundant and keep
            // a zero-valued artificial.
            for r in 0..self.m {
                if self.basis[r] >= art_start {
                    let mut best: Option<(usize, f64)> = None;
                    for j in 0..art_start {
                        let a = self.at(r, j).abs();
                        if a > PIVOT_TOL && best.map_or(true, |(_, b)| a > b) {
                            best = Some((j, a));
                        }
                    }
                    if let Some((j, _)) = best {
                        self.pivot(r, j);
                    }
                }
            }
        }
        let cost = lp.objective().to_vec();
        let n = self.n_struct;
        self.price(&|j| if j < n { cost[j] } else { 0.0 });
        if !self.iterate(art_start)? {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, self.iterations, NAME));
        }
        let w = self.width();
        let mut xs = vec![0.0; n];
        for i in 0..self.m {
            if self.basis[i] < n {
                xs[self.basis[i]] = self.tab[i * w + ncols].max(0.0);
            }
        }
        let x: Vec<f64> = xs.iter().zip(lp.lower()).map(|(v, l)| v + l).collect();
        let objective_value = lp.objective_value(&x);

        // y_i = -(reduced cost of row i's identity column).
        let y: Vec<f64> = (0..self.m)
            .map(|i| -self.tab[self.m * w + self.unit_col[i]])
            .collect();
        let certificate = self.certificate(lp, &xs, &y, objective_value);
        let constraint_count = lp.num_constraints();
        let duals = (0..constraint_count)
            .map(|i| if self.flipped[i] { -y[i] } else { y[i] })
            .collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective_value,
            x,
            duals: Some(duals),
            certificate: Some(certificate),
            iterations: self.iterations,
            solver: NAME,
        })
    }

    /// Recomputes residuals from the standard-form data, independently of
    /// the tableau.
    fn certificate(&self, lp: &LinearProgram, xs: &[f64], y: &[f64], primal: f64) -> Certificate {
        let n = self.n_struct;
        let mut reduced: Vec<f64> = lp.objective().to_vec();
        let mut primal_residual = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut lhs = 0.0;
            for &(j, a) in row {
                reduced[j] -= a * y[i];
                lhs += a * xs[j];
            }
            // The slack absorbs inequality rows; only its sign is constrained.
            let slack = self.rhs[i] - lhs;
            let viol = if self.slack_sign[i] == 0.0 {
                slack.abs()
            } else {
                (-slack * self.slack_sign[i]).max(0.0)
            };
            primal_residual = primal_residual.max(viol);
        }
        let mut dual_residual = reduced[..n].iter().fold(0.0f64, |acc, d| acc.max(-d));
        for (i, &yi) in y.iter().enumerate() {
            // Slack column cost 0: need -sign * y_i >= 0.
            if self.slack_sign[i] != 0.0 {
                dual_residual = dual_residual.max(self.slack_sign[i] * yi);
            }
        }
        let offset: f64 = lp
            .objective()
            .iter()
            .zip(lp.lower())
            .map(|(c, l)| c * l)
            .sum();
        let dual_bound = self.rhs.iter().zip(y).map(|(b, yi)| b * yi).sum::<f64>() + offset;
        Certificate {
            primal_residual,
            dual_residual,
            dual_bound,
            duality_gap: (primal - dual_bound).abs(),
        }
    }
}
