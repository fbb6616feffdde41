use super::two_tier::{Shape, CLASSES};
use super::{build_length_first, BuiltProblem, Method, VarLabel};
use crate::error::Result;
use crate::lp::Relation;
use crate::model::{SubsetClass, SystemConfig};
use crate::probability::{binom_f, group_order_stat_pmf, order_stat_pmf};

/// The weight `nu(n, j)` multiplying `Pr[Y_{n-1} = l] v^M_{l,j}` for mixed
/// subsets with at least two users of each class.
pub fn nu(ks: i64, kl: i64, n: i64, j: i64) -> f64 {
    let k = ks + kl;
    let nu1 = |m: i64, i: i64| {
        (ks - m) as f64 / (k - n + 1) as f64 * binom_f(ks - m - 1, i) * binom_f(kl - n + 1 + m, j - i)
    };
    let nu2 = |m: i64, i: i64| {
        (kl - n + 1 + m) as f64 / (k - n + 1) as f64 * binom_f(ks - m, i) * binom_f(kl - n + m, j - i)
    };
    (0..n)
        .map(|m| {
            let weight = binom_f(ks, m) * binom_f(kl, n - 1 - m) / binom_f(k, n - 1);
            let inner: f64 = (1..=j - 2).map(|i| nu1(m, i)).sum::<f64>() + (2..=j - 1).map(|i| nu2(m, i)).sum::<f64>();
            weight * inner
        })
        .sum()
}

/// Per-file class variables `v^S_{l,j}`, `v^L_{l,j}`, `v^M_{l,j}` with the
/// shared `v_{l,0}`, files ranked by decreasing length. Class memory
/// inequalities hold across all pairs of files, and each class ranks files
/// by length for `j in [0:K-1]`. Degenerate class profiles collapse to the
/// length-first problem.
pub fn build_full_het(cfg: &SystemConfig) -> Result<BuiltProblem> {
    let shape = Shape::new(cfg)?;
    if shape.degenerate() {
        return build_length_first(cfg);
    }
    let classes = *cfg.classes().expect("checked by Shape::new");
    let Shape { k, ks, kl } = shape;
    let order = cfg.length_order();
    let n = order.len();
    let p: Vec<f64> = order.iter().map(|&f| cfg.popularities()[f]).collect();
    let y = order_stat_pmf(&p, k as usize)?;
    let ys = group_order_stat_pmf(&p, ks as usize)?;
    let yl = group_order_stat_pmf(&p, kl as usize)?;
    let maxc = ks.max(kl);
    let nu_table: Vec<Vec<f64>> = (0..=k).map(|j| (0..=k).map(|nn| if nn >= 1 { nu(ks, kl, nn, j) } else { 0.0 }).collect()).collect();

    let cost = |r: usize, c: Option<SubsetClass>, j: i64| -> f64 {
        let sum_over = |rows: i64, f: &dyn Fn(i64) -> f64| (0..rows).map(f).sum::<f64>();
        match c {
            None => sum_over(k, &|i| y.prob(i as usize, r)),
            Some(SubsetClass::Large) => {
                let mut total = 0.0;
                if j < kl {
                    total += sum_over(kl, &|i| binom_f(kl - 1 - i, j) * yl.prob(i as usize, r));
                }
                total + sum_over(ks, &|i| binom_f(kl, j) * ys.prob(i as usize, r))
            }
            Some(SubsetClass::Small) => {
                if j < ks {
                    sum_over(ks, &|i| binom_f(ks - 1 - i, j) * ys.prob(i as usize, r))
                } else {
                    0.0
                }
            }
            Some(SubsetClass::Mixed) => {
                let mut total = 0.0;
                // One large user with j small users.
                if j <= ks {
                    total += sum_over(ks, &|i| binom_f(ks - 1 - i, j - 1) * kl as f64 * ys.prob(i as usize, r));
                }
                if j > maxc && j < k {
                    total += sum_over(k, &|i| binom_f(k - 1 - i, j) * y.prob(i as usize, r));
                }
                if (3..=maxc).contains(&j) {
                    total += (1..=k)
                        .map(|nn| y.prob(nn as usize - 1, r) * nu_table[j as usize][nn as usize])
                        .sum::<f64>();
                }
                total
            }
        }
    };

    let mut bp = BuiltProblem::new(Method::FullHet, cfg, order.clone(), 1.0);
    // ids[r][class index][j], None when the variable is a structural zero.
    let mut v0 = vec![0usize; n];
    let mut ids = vec![[vec![None; k as usize + 1], vec![None; k as usize + 1], vec![None; k as usize + 1]]; n];
    for (r, &file) in order.iter().enumerate() {
        v0[r] = bp.var(VarLabel::FileClassGrouped { file, class: None, j: 0 }, cost(r, None, 0));
        for (ci, c) in CLASSES.into_iter().enumerate() {
            ids[r][ci][0] = Some(v0[r]);
            for j in shape.min_j(c)..=shape.max_j(c) {
                let id = bp.var(
                    VarLabel::FileClassGrouped { file, class: Some(c), j: j as usize },
                    cost(r, Some(c), j),
                );
                ids[r][ci][j as usize] = Some(id);
            }
        }
    }
    let class_index = |c: SubsetClass| CLASSES.iter().position(|&x| x == c).expect("listed");
    let mu: Vec<[usize; 2]> = order
        .iter()
        .map(|&file| {
            [
                bp.var(VarLabel::FileClassCache { file, class: SubsetClass::Small }, 0.0),
                bp.var(VarLabel::FileClassCache { file, class: SubsetClass::Large }, 0.0),
            ]
        })
        .collect();

    for (r, &file) in order.iter().enumerate() {
        let mut recon = vec![(v0[r], 1.0)];
        for c in CLASSES {
            for j in shape.min_j(c)..=shape.max_j(c) {
                recon.push((ids[r][class_index(c)][j as usize].expect("exists"), shape.count(c, j)));
            }
        }
        bp.lp.add_constraint(recon, Relation::Eq, cfg.file_length(file));
        for (slot, own) in [SubsetClass::Small, SubsetClass::Large].into_iter().enumerate() {
            let mut row = vec![(mu[r][slot], -1.0)];
            for c in CLASSES {
                for j in shape.min_j(c)..=shape.max_j(c) {
                    let a = shape.containing(own, c, j);
                    if a != 0.0 {
                        row.push((ids[r][class_index(c)][j as usize].expect("exists"), a));
                    }
                }
            }
            bp.lp.add_constraint(row, Relation::Eq, 0.0);
        }
    }
    for (slot, cache) in [classes.small_cache, classes.large_cache].into_iter().enumerate() {
        bp.lp
            .add_constraint(mu.iter().map(|m| (m[slot], 1.0)).collect(), Relation::Le, cache);
    }
    // Class inequalities across every ordered pair of files (including a
    // file with itself).
    for (hi, lo, range) in shape.class_inequalities() {
        for j in range {
            for r1 in 0..n {
                for r2 in 0..n {
                    let a = ids[r1][class_index(hi)][j as usize];
                    let b = ids[r2][class_index(lo)][j as usize];
                    if let (Some(a), Some(b)) = (a, b) {
                        bp.lp.add_constraint(vec![(a, 1.0), (b, -1.0)], Relation::Ge, 0.0);
                    }
                }
            }
        }
    }
    // Length ranking within each class.
    for r1 in 0..n {
        for r2 in r1 + 1..n {
            bp.lp.add_constraint(vec![(v0[r1], 1.0), (v0[r2], -1.0)], Relation::Ge, 0.0);
            for c in CLASSES {
                for j in 1..k {
                    let a = ids[r1][class_index(c)][j as usize];
                    let b = ids[r2][class_index(c)][j as usize];
                    if let (Some(a), Some(b)) = (a, b) {
                        bp.lp.add_constraint(vec![(a, 1.0), (b, -1.0)], Relation::Ge, 0.0);
                    }
                }
            }
        }
    }
    Ok(bp)
}
