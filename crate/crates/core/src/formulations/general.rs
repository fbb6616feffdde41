use super::{BuiltProblem, Method, VarLabel};
use crate::error::Result;
use crate::lp::Relation;
use crate::model::{Demand, SystemConfig};
use crate::probability::{check_enumeration, demand_count};
use crate::subset::{all_subsets, Subset};

/// The unrestricted problem over all `N 2^K` subfile sizes.
///
/// The max in each delivery term is linearized with one epigraph variable per
/// nonempty subset `S` with `|S| >= 2` and per assignment of files to the
/// members of `S`. A term only depends on the requests of the members of `S`,
/// so this is an exact reformulation of one epigraph variable per (demand,
/// subset) pair, with the marginal probability of the assignment as cost.
/// Singleton terms need no epigraph: they are `|W_emptyset^(d_k)|` directly.
pub fn build_general(cfg: &SystemConfig) -> Result<BuiltProblem> {
    let k = cfg.num_users();
    let n = cfg.num_files();
    let guard = demand_count(k, n).saturating_mul((1u128 << k) - 1);
    check_enumeration(guard)?;
    let p = cfg.popularities();
    let mut bp = BuiltProblem::new(Method::General, cfg, (0..n).collect(), 1.0);

    let mut w = vec![vec![0usize; 1 << k]; n];
    for (file, row) in w.iter_mut().enumerate() {
        for subset in all_subsets(k) {
            let cost = if subset.is_empty() { k as f64 * p[file] } else { 0.0 };
            row[subset.index()] = bp.var(VarLabel::Subfile { file, subset }, cost);
        }
    }
    let mut mu = vec![vec![0usize; n]; k];
    for (user, row) in mu.iter_mut().enumerate() {
        for (file, slot) in row.iter_mut().enumerate() {
            *slot = bp.var(VarLabel::UserFileCache { user, file }, 0.0);
        }
    }

    for (file, row) in w.iter().enumerate() {
        bp.lp
            .add_constraint(row.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, cfg.file_length(file));
    }
    for user in 0..k {
        for file in 0..n {
            let mut coeffs: Vec<(usize, f64)> = all_subsets(k)
                .filter(|s| s.contains(user))
                .map(|s| (w[file][s.index()], 1.0))
                .collect();
            coeffs.push((mu[user][file], -1.0));
            bp.lp.add_constraint(coeffs, Relation::Le, 0.0);
        }
        bp.lp.add_constraint(
            mu[user].iter().map(|&v| (v, 1.0)).collect(),
            Relation::Le,
            cfg.cache_sizes()[user],
        );
    }

    for subset in all_subsets(k).filter(|s| s.len() >= 2) {
        let members: Vec<usize> = subset.members().collect();
        for assignment in Demand::all(members.len(), n) {
            let files = assignment.files().to_vec();
            let cost = assignment.probability(p);
            let t = bp.var(VarLabel::Epigraph { subset, files: files.clone() }, cost);
            for (pos, &user) in members.iter().enumerate() {
                let rest: Subset = subset.without(user);
                bp.lp.add_constraint(
                    vec![(t, 1.0), (w[files[pos]][rest.index()], -1.0)],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    Ok(bp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Backend;

    #[test]
    fn two_users_two_files_half_cache() {
        // t = KM/N = 1: the optimal rate is (K - t)/(t + 1) = 1/2.
        let cfg = SystemConfig::uniform(2, 2, 1.0).unwrap();
        let sol = build_general(&cfg).unwrap().solve(Backend::Dense).unwrap();
        assert!((sol.objective - 0.5).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn nothing_cached() {
        let cfg = SystemConfig::new(
            3,
            2,
            vec![2.0, 1.0],
            vec![0.25, 0.75],
            vec![0.0; 3],
            None,
        )
        .unwrap();
        let sol = build_general(&cfg).unwrap().solve(Backend::Auto).unwrap();
        assert!((sol.objective - 3.0 * cfg.expected_length()).abs() < 1e-9);
    }

    #[test]
    fn size_guard() {
        let cfg = SystemConfig::uniform(12, 10, 1.0).unwrap();
        assert!(matches!(build_general(&cfg), Err(crate::Error::EnumerationCap { .. })));
    }
}
