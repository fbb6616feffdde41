use super::{
    require_uniform_cache, require_uniform_lengths, require_uniform_popularity, BuiltProblem, Method,
    VarLabel,
};
use crate::error::Result;
use crate::lp::Relation;
use crate::model::SystemConfig;
use crate::probability::binom_f;

fn check(cfg: &SystemConfig, method: &'static str) -> Result<()> {
    require_uniform_lengths(cfg, method)?;
    require_uniform_popularity(cfg, method)?;
    require_uniform_cache(cfg, method)
}

/// Symmetric scheme `v_0..v_K` for identical files and caches. The LP works
/// with unit file length; values and objective are rescaled on output.
pub fn build_homogeneous(cfg: &SystemConfig) -> Result<BuiltProblem> {
    check(cfg, "homogeneous")?;
    let k = cfg.num_users() as i64;
    let f = cfg.file_length(0);
    let m = cfg.cache_sizes()[0];
    let n = cfg.num_files();
    let mut bp = BuiltProblem::new(Method::Homogeneous, cfg, (0..n).collect(), f);
    let v: Vec<usize> = (0..=k)
        .map(|j| bp.var(VarLabel::Grouped { j: j as usize }, binom_f(k, j + 1)))
        .collect();
    bp.lp.add_constraint(
        (0..=k).map(|j| (v[j as usize], binom_f(k, j))).collect(),
        Relation::Eq,
        1.0,
    );
    bp.lp.add_constraint(
        (1..=k).map(|j| (v[j as usize], binom_f(k - 1, j - 1))).collect(),
        Relation::Le,
        m / (n as f64 * f),
    );
    Ok(bp)
}

/// The homogeneous problem over the simplex: `a_j = binom(K, j) v_j`,
/// `sum a_j = 1`, `sum j a_j <= t = KM/(NF)`, cost `(K - j)/(j + 1)`.
pub fn build_simplex_form(cfg: &SystemConfig) -> Result<BuiltProblem> {
    check(cfg, "simplex")?;
    let k = cfg.num_users();
    let f = cfg.file_length(0);
    let n = cfg.num_files();
    let t = k as f64 * cfg.cache_sizes()[0] / (n as f64 * f);
    let mut bp = BuiltProblem::new(Method::Simplex, cfg, (0..n).collect(), f);
    let a: Vec<usize> = (0..=k)
        .map(|j| bp.var(VarLabel::SimplexWeight { j }, (k - j) as f64 / (j + 1) as f64))
        .collect();
    bp.lp.add_constraint(a.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
    bp.lp.add_constraint(
        a.iter().enumerate().skip(1).map(|(j, &v)| (v, j as f64)).collect(),
        Relation::Le,
        t,
    );
    Ok(bp)
}
