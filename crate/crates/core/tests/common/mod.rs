//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use cachecraft::formulations::VarLabel;
use cachecraft::lp::{check_solution, LinearProgram, Relation};
use cachecraft::{
    zipf_popularities, Backend, BuiltProblem, CacheClasses, Placement, Subset, SystemConfig,
};
use rand::Rng;

/// Six files in length-first order.
pub const PAIRED_LENGTHS: [f64; 6] = [9.0 / 6.0, 8.0 / 6.0, 7.0 / 6.0, 5.0 / 6.0, 4.0 / 6.0, 3.0 / 6.0];
/// Popularity rank (zero-based) of each length-first file.
pub const PAIRED_POPULARITY_RANK: [usize; 6] = [4, 2, 1, 5, 0, 3];
/// Listed four-decimal popularities of the length-first files.
pub const PAIRED_LISTED_POPULARITIES: [f64; 6] = [0.1176, 0.1566, 0.1965, 0.1062, 0.2897, 0.1333];
pub const ZIPF_EXPONENT: f64 = 0.56;

pub fn zipf6() -> Vec<f64> {
    zipf_popularities(6, ZIPF_EXPONENT).unwrap()
}

pub fn paired_popularities() -> Vec<f64> {
    let z = zipf6();
    PAIRED_POPULARITY_RANK.iter().map(|&r| z[r]).collect()
}

/// K = 4, N = 6, every user with cache `m`, Zipf popularities, unit files.
pub fn popularity_config(m: f64) -> SystemConfig {
    SystemConfig::uniform(4, 6, m).unwrap().with_popularities(zipf6()).unwrap()
}

/// K = 4, N = 6, uniform popularity, six unequal lengths.
pub fn length_config(m: f64) -> SystemConfig {
    SystemConfig::uniform(4, 6, m)
        .unwrap()
        .with_file_lengths(PAIRED_LENGTHS.to_vec())
        .unwrap()
}

/// K = 4, N = 6 with the paired lengths and popularities.
pub fn paired_config(m: f64) -> SystemConfig {
    length_config(m).with_popularities(paired_popularities()).unwrap()
}

/// Two small users with `0.8 m` and two large users with `1.2 m`.
pub fn with_two_classes(cfg: &SystemConfig, m: f64) -> SystemConfig {
    cfg.with_classes(CacheClasses {
        small_users: 2,
        small_cache: 0.8 * m,
        large_cache: 1.2 * m,
    })
    .unwrap()
}

/// A rounded published solution: listed rows, everything else zero.
pub struct ListedTable {
    pub rows: Vec<(Subset, Vec<f64>)>,
}

impl ListedTable {
    /// `rows` uses one-based user labels.
    pub fn new(rows: &[(&[usize], [f64; 6])]) -> Self {
        ListedTable {
            rows: rows
                .iter()
                .map(|(users, v)| {
                    let zero: Vec<usize> = users.iter().map(|u| u - 1).collect();
                    (Subset::from_users(&zero), v.to_vec())
                })
                .collect(),
        }
    }

    pub fn value(&self, file: usize, s: Subset) -> f64 {
        self.rows
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, v)| v[file])
    }

    pub fn placement(&self, k: usize, n: usize) -> Placement {
        let sizes = (0..n)
            .map(|l| (0..1u32 << k).map(|m| self.value(l, Subset::from_mask(m))).collect())
            .collect();
        Placement::from_sizes(k, sizes).unwrap()
    }
}

pub fn general_listing() -> ListedTable {
    let single = [0.167, 0.188, 0.188, 0.167, 0.167, 0.125];
    ListedTable::new(&[
        (&[], [0.833, 0.583, 0.417, 0.167, 0.0, 0.0]),
        (&[1], single),
        (&[2], single),
        (&[3], single),
        (&[4], single),
    ])
}

pub const GENERAL_LISTING_MEMORY: [f64; 6] = [0.167, 0.188, 0.188, 0.167, 0.167, 0.125];

pub fn uniform_two_class_listing() -> ListedTable {
    let pair = [0.056; 6];
    ListedTable::new(&[
        (&[1, 2], pair),
        (&[1, 3], pair),
        (&[1, 4], pair),
        (&[2, 3], pair),
        (&[2, 4], pair),
        (&[3, 4], pair),
        (&[1, 2, 3], [0.033; 6]),
        (&[1, 2, 4], [0.033; 6]),
        (&[1, 3, 4], [0.300; 6]),
        (&[2, 3, 4], [0.300; 6]),
    ])
}

pub const UNIFORM_TWO_CLASS_LARGE_MEMORY: f64 = 0.800;
pub const UNIFORM_TWO_CLASS_SMALL_MEMORY: f64 = 0.533;

pub fn paired_two_class_listing() -> ListedTable {
    let single = [0.178, 0.178, 0.178, 0.178, 0.165, 0.085];
    let cross = [0.090, 0.090, 0.090, 0.008, 0.0, 0.0];
    ListedTable::new(&[
        (&[1], single),
        (&[2], single),
        (&[3], single),
        (&[4], single),
        (&[1, 2], [0.0, 0.077, 0.008, 0.0, 0.0, 0.0]),
        (&[1, 3], cross),
        (&[1, 4], cross),
        (&[2, 3], cross),
        (&[2, 4], cross),
        (&[3, 4], [0.431, 0.188, 0.090, 0.090, 0.008, 0.0]),
    ])
}

/// Optimum of the general problem restricted to subfile sizes within
/// `half_width` of the listed (rounded) values. It equals the unrestricted
/// optimum exactly when some optimal solution rounds to the listing.
pub fn rounding_box_optimum(cfg: &SystemConfig, table: &ListedTable, half_width: f64) -> f64 {
    let mut bp = cachecraft::Method::General.build(cfg).unwrap();
    let bounds: Vec<(usize, f64)> = bp
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, label)| match label {
            VarLabel::Subfile { file, subset } => Some((i, table.value(*file, *subset))),
            _ => None,
        })
        .collect();
    for (i, v) in bounds {
        bp.lp_mut().set_bounds(i, (v - half_width).max(0.0), Some(v + half_width));
    }
    bp.solve(Backend::Auto).unwrap().objective
}

/// A feasible point of `bp`: a random convex combination of optimal
/// vertices for `vertices` random objectives.
pub fn random_feasible_point(bp: &BuiltProblem, rng: &mut impl Rng, vertices: usize) -> Vec<f64> {
    let n = bp.lp().num_vars();
    let mut weights: Vec<f64> = (0..vertices).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut x = vec![0.0; n];
    for w in weights {
        let mut probe = bp.clone();
        for j in 0..n {
            probe.lp_mut().set_cost(j, rng.gen_range(-1.0..1.0));
        }
        let sol = probe.solve(Backend::Dense).unwrap();
        for (xi, vi) in x.iter_mut().zip(&sol.lp.x) {
            *xi += w * vi;
        }
    }
    assert!(check_solution(bp.lp(), &x, 1e-9).unwrap().is_feasible());
    x
}

/// Solves a small linear system by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Minimum of a bounded LP by enumerating basic solutions: every vertex has
/// some set of tight rows `T` and as many variables strictly between their
/// bounds, with every other variable at a bound. Returns `None` when no
/// vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram, tol: f64) -> Option<f64> {
    let n = lp.num_vars();
    let upper: Vec<f64> = lp.upper().iter().map(|u| u.expect("bounded LP")).collect();
    let lower = lp.lower().to_vec();
    let rows = lp.constraints();
    let m = rows.len();
    let dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut a = vec![0.0; n];
            for &(j, v) in &r.coeffs {
                a[j] += v;
            }
            a
        })
        .collect();
    let feasible = |x: &[f64]| {
        rows.iter().zip(&dense).all(|(r, a)| {
            let lhs: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
            match r.relation {
                Relation::Le => lhs <= r.rhs + tol,
                Relation::Ge => lhs >= r.rhs - tol,
                Relation::Eq => (lhs - r.rhs).abs() <= tol,
            }
        }) && x
            .iter()
            .zip(lower.iter().zip(&upper))
            .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    };
    let mut best: Option<f64> = None;
    for tight in 0u32..1 << m {
        let t: Vec<usize> = (0..m).filter(|i| tight & 1 << i != 0).collect();
        if t.len() > n {
            continue;
        }
        for basic in combinations(n, t.len()) {
            let nonbasic: Vec<usize> = (0..n).filter(|j| !basic.contains(j)).collect();
            for at_upper in 0u32..1 << nonbasic.len() {
                let mut x = vec![0.0; n];
                for (pos, &j) in nonbasic.iter().enumerate() {
                    x[j] = if at_upper & 1 << pos != 0 { upper[j] } else { lower[j] };
                }
                if !t.is_empty() {
                    let a: Vec<Vec<f64>> = t.iter().map(|&i| basic.iter().map(|&j| dense[i][j]).collect()).collect();
                    let b: Vec<f64> = t
                        .iter()
                        .map(|&i| rows[i].rhs - nonbasic.iter().map(|&j| dense[i][j] * x[j]).sum::<f64>())
                        .collect();
                    let Some(sol) = solve_square(a, b) else { continue };
                    for (&j, v) in basic.iter().zip(sol) {
                        x[j] = v;
                    }
                }
                if feasible(&x) {
                    let obj = lp.objective_value(&x);
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
    }
    best
}

/// All `r`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// A random LP with every variable boxed. About a third of the instances use
/// small integer data and zero right-hand sides to provoke degeneracy.
pub fn random_bounded_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.gen_range(1..=12);
    let m = rng.gen_range(1..=4);
    let degenerate = rng.gen_bool(1.0 / 3.0);
    let mut lp = LinearProgram::new();
    for j in 0..n {
        let cost = if degenerate {
            rng.gen_range(-3..=3) as f64
        } else {
            rng.gen_range(-1.0..1.0)
        };
        let (lo, hi) = if degenerate {
            (0.0, rng.gen_range(1..=3) as f64)
        } else {
            let lo = rng.gen_range(-2.0..1.0);
            (lo, lo + rng.gen_range(0.1..3.0))
        };
        lp.add_bounded_var(format!("x{j}"), cost, lo, Some(hi));
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if !rng.gen_bool(0.7) {
                continue;
            }
            let a = if degenerate {
                rng.gen_range(-2..=2) as f64
            } else {
                rng.gen_range(-1.0..1.0)
            };
            coeffs.push((j, a));
        }
        let relation = match rng.gen_range(0..6) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = if degenerate { 0.0 } else { rng.gen_range(-1.0..2.0) };
        lp.add_constraint(coeffs, relation, rhs);
    }
    lp
}
