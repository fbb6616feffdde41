use super::{require_uniform_cache, require_uniform_lengths, BuiltProblem, Method, VarLabel};
use crate::error::Result;
use crate::lp::Relation;
use crate::model::SystemConfig;
use crate::probability::{binom_f, order_stat_pmf, OrderStatTable};

/// Per-file symmetric variables `v_{l,j}` with a per-file cache share
/// `mu_l`. `order[r]` is the file with rank `r`; ranks are ordered by the
/// memory inequality `v_{r1,j} >= v_{r2,j}` for `r1 < r2` and `j` in
/// `ordered_j`. `cost(r, j)` is the objective coefficient of `v_{r,j}`.
fn build_per_file(
    cfg: &SystemConfig,
    method: Method,
    order: Vec<usize>,
    ordered_j: std::ops::Range<usize>,
    cost: impl Fn(usize, usize) -> f64,
) -> Result<BuiltProblem> {
    let k = cfg.num_users();
    let n = cfg.num_files();
    let mut bp = BuiltProblem::new(method, cfg, order.clone(), 1.0);
    let mut v = vec![vec![0usize; k + 1]; n];
    for (r, &file) in order.iter().enumerate() {
        for j in 0..=k {
            v[r][j] = bp.var(VarLabel::FileGrouped { file, j }, cost(r, j));
        }
    }
    let mu: Vec<usize> = order.iter().map(|&file| bp.var(VarLabel::FileCache { file }, 0.0)).collect();
    let ki = k as i64;
    for (r, &file) in order.iter().enumerate() {
        bp.lp.add_constraint(
            (0..=k).map(|j| (v[r][j], binom_f(ki, j as i64))).collect(),
            Relation::Eq,
            cfg.file_length(file),
        );
        let mut row: Vec<(usize, f64)> = (1..=k).map(|j| (v[r][j], binom_f(ki - 1, j as i64 - 1))).collect();
        row.push((mu[r], -1.0));
        bp.lp.add_constraint(row, Relation::Le, 0.0);
    }
    bp.lp.add_constraint(
        mu.iter().map(|&m| (m, 1.0)).collect(),
        Relation::Le,
        cfg.cache_sizes()[0],
    );
    for r1 in 0..n {
        for r2 in r1 + 1..n {
            for j in ordered_j.clone() {
                bp.lp.add_constraint(vec![(v[r1][j], 1.0), (v[r2][j], -1.0)], Relation::Ge, 0.0);
            }
        }
    }
    Ok(bp)
}

/// `sum_i binom(K-1-i, j) Pr[Y_i = r]`.
fn order_weight(table: &OrderStatTable, k: usize, r: usize, j: usize) -> f64 {
    (0..k)
        .map(|i| binom_f(k as i64 - 1 - i as i64, j as i64) * table.prob(i, r))
        .sum()
}

fn permuted_popularities(cfg: &SystemConfig, order: &[usize]) -> Vec<f64> {
    order.iter().map(|&f| cfg.popularities()[f]).collect()
}

/// Equal-length files ranked by decreasing popularity, with the memory
/// inequality on `j in [1:K]`.
pub fn build_popularity_first(cfg: &SystemConfig) -> Result<BuiltProblem> {
    require_uniform_lengths(cfg, "pop-first")?;
    require_uniform_cache(cfg, "pop-first")?;
    let k = cfg.num_users();
    let order = cfg.popularity_order();
    let table = order_stat_pmf(&permuted_popularities(cfg, &order), k)?;
    build_per_file(cfg, Method::PopularityFirst, order, 1..k + 1, |r, j| match j {
        // Singleton transmissions: every request contributes its own v_{l,0}.
        0 => (0..k).map(|i| table.prob(k - 1 - i, r)).sum(),
        _ if j < k => order_weight(&table, k, r, j),
        _ => 0.0,
    })
}

/// Files ranked by decreasing length (ties by popularity), with the memory
/// inequality on `j in [0:K-1]`.
pub fn build_length_first(cfg: &SystemConfig) -> Result<BuiltProblem> {
    require_uniform_cache(cfg, "length-first")?;
    let k = cfg.num_users();
    let order = cfg.length_order();
    let table = order_stat_pmf(&permuted_popularities(cfg, &order), k)?;
    build_per_file(cfg, Method::LengthFirst, order, 0..k, |r, j| {
        if j < k {
            order_weight(&table, k, r, j)
        } else {
            0.0
        }
    })
}
