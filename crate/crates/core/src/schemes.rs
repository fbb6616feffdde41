//! Closed-form schemes, random-caching baselines and the expansion of grouped
//! schemes into full placements.

use crate::error::{Error, Result};
use crate::model::{GroupedScheme, Placement, SubsetClass, SystemConfig};
use crate::probability::binom_f;
use crate::subset::{all_subsets, Subset};

const INTEGER_TOL: f64 = 1e-12;

/// Optimal symmetric scheme for identical unit-length files and caches of
/// size `M`: all mass on subsets of size `t = KM/N`, or split between
/// `floor(t)` and `ceil(t)` with weight `s = ceil(t) - t` on the
/// lower size.
pub fn centralized_scheme(num_users: usize, num_files: usize, cache: f64) -> Result<GroupedScheme> {
    if num_files == 0 || num_users == 0 {
        return Err(Error::Argument("K and N must be positive".into()));
    }
    if !(0.0..=num_files as f64).contains(&cache) {
        return Err(Error::Argument(format!("cache size {cache} outside [0, {num_files}]")));
    }
    let k = num_users;
    let t = k as f64 * cache / num_files as f64;
    let mut v = vec![0.0; k + 1];
    let rounded = t.round();
    if (t - rounded).abs() <= INTEGER_TOL {
        let t = rounded as usize;
        v[t] = 1.0 / binom_f(k as i64, t as i64);
    } else {
        let lo = t.floor() as usize;
        let hi = lo + 1;
        let s = hi as f64 - t;
        v[lo] = s / binom_f(k as i64, lo as i64);
        v[hi] = (1.0 - s) / binom_f(k as i64, hi as i64);
    }
    Ok(GroupedScheme::Homogeneous { v })
}

/// Large-file limit of decentralized random caching with caching
/// probability `q`: `v_j = q^j (1 - q)^(K - j)`.
pub fn decentralized_scheme(num_users: usize, q: f64) -> Result<GroupedScheme> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Argument(format!("caching probability {q} outside [0, 1]")));
    }
    let k = num_users as i32;
    Ok(GroupedScheme::Homogeneous {
        v: (0..=k).map(|j| q.powi(j) * (1.0 - q).powi(k - j)).collect(),
    })
}

/// Subfile sizes for independent per-user caching of a file of length `f`
/// where user `k` keeps each bit with probability `q[k]`.
fn independent_caching_sizes(f: f64, q: &[f64]) -> Vec<f64> {
    all_subsets(q.len())
        .map(|s| {
            f * q
                .iter()
                .enumerate()
                .map(|(k, &qk)| if s.contains(k) { qk } else { 1.0 - qk })
                .product::<f64>()
        })
        .collect()
}

/// Fills `budget` by first giving file `l` `min(target[l], cap[l])` and then
/// topping files up to their caps in ascending index order.
fn sequential_allocation(targets: &[f64], caps: &[f64], budget: f64) -> Vec<f64> {
    let mut alloc: Vec<f64> = targets.iter().zip(caps).map(|(t, c)| t.min(*c)).collect();
    let mut remaining = budget - alloc.iter().sum::<f64>();
    for (a, &c) in alloc.iter_mut().zip(caps) {
        if remaining <= 0.0 {
            break;
        }
        let add = (c - *a).min(remaining);
        *a += add;
        remaining -= add;
    }
    alloc
}

/// Random caching with popularity-proportional memory: file `n` gets a
/// cache fraction `min(M p_n / F, 1)`, and leftover memory tops files up in
/// ascending index order. Requires equal file lengths and cache sizes.
pub fn random_popularity_baseline(cfg: &SystemConfig) -> Result<Placement> {
    if !cfg.has_uniform_lengths() || !cfg.has_uniform_cache() {
        return Err(Error::Unsupported {
            method: "random-pop",
            requirement: "equal file lengths and cache sizes".into(),
        });
    }
    let f = cfg.file_length(0);
    let budget = cfg.cache_sizes()[0] / f;
    let targets: Vec<f64> = cfg.popularities().iter().map(|p| budget * p).collect();
    let fractions = sequential_allocation(&targets, &vec![1.0; cfg.num_files()], budget);
    let k = cfg.num_users();
    let sizes = fractions
        .iter()
        .map(|&q| independent_caching_sizes(f, &vec![q; k]))
        .collect();
    Placement::from_sizes(k, sizes)
}

/// Random caching with length-proportional memory: user `k` gives file `l`
/// `M_k F_l / sum F` (capped at `F_l`, leftover topped up in index order) and
/// caches each bit of it independently. With unequal cache sizes this is the
/// per-class variant of the baseline.
pub fn random_length_baseline(cfg: &SystemConfig) -> Result<Placement> {
    let total = cfg.total_length();
    let lengths = cfg.file_lengths();
    let per_user: Vec<Vec<f64>> = cfg
        .cache_sizes()
        .iter()
        .map(|&m| {
            let targets: Vec<f64> = lengths.iter().map(|f| m * f / total).collect();
            sequential_allocation(&targets, lengths, m)
                .iter()
                .zip(lengths)
                .map(|(mu, f)| (mu / f).min(1.0))
                .collect()
        })
        .collect();
    let sizes = (0..cfg.num_files())
        .map(|l| {
            let q: Vec<f64> = per_user.iter().map(|row| row[l]).collect();
            independent_caching_sizes(lengths[l], &q)
        })
        .collect();
    Placement::from_sizes(cfg.num_users(), sizes)
}

/// Size assigned by `gs` to file `l` and subset `s`.
fn grouped_size(cfg: &SystemConfig, gs: &GroupedScheme, l: usize, s: Subset) -> f64 {
    let j = s.len();
    let class = || cfg.classes().map(|c| SubsetClass::of(s, c));
    let pick = |small: f64, large: f64, mixed: f64| {
        if j == 0 {
            return mixed;
        }
        match class() {
            Some(SubsetClass::Small) => small,
            Some(SubsetClass::Large) => large,
            _ => mixed,
        }
    };
    match gs {
        GroupedScheme::Homogeneous { v } => v[j],
        GroupedScheme::PerFile { v } => v[l][j],
        GroupedScheme::TwoTier { small, large, mixed } => pick(small[j], large[j], mixed[j]),
        GroupedScheme::FullHet { small, large, mixed } => pick(small[l][j], large[l][j], mixed[l][j]),
    }
}

/// Assigns every subset the grouped value for its size and class
/// composition; allocations equal the cached amounts.
pub fn expand_to_placement(cfg: &SystemConfig, gs: &GroupedScheme) -> Result<Placement> {
    gs.validate_structure(cfg)?;
    let k = cfg.num_users();
    let sizes = (0..cfg.num_files())
        .map(|l| all_subsets(k).map(|s| grouped_size(cfg, gs, l, s)).collect())
        .collect();
    Placement::from_sizes(k, sizes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Homogeneous,
    PerFile,
    TwoTier,
    FullHet,
}

/// Inverse of [`expand_to_placement`]: reads the grouped values back and
/// fails if the placement is not symmetric in the required way.
pub fn group_placement(cfg: &SystemConfig, pl: &Placement, kind: SchemeKind, tol: f64) -> Result<GroupedScheme> {
    let k = cfg.num_users();
    let n = cfg.num_files();
    if pl.num_users() != k || pl.num_files() != n {
        return Err(Error::Dimension("placement does not match config".into()));
    }
    let classes = match kind {
        SchemeKind::TwoTier | SchemeKind::FullHet => Some(*cfg.classes().ok_or(Error::MissingClasses)?),
        _ => None,
    };
    // key: (file or 0, class slot, j) -> value; class slot 0 = small, 1 = large, 2 = mixed/any
    let per_file = matches!(kind, SchemeKind::PerFile | SchemeKind::FullHet);
    let files = if per_file { n } else { 1 };
    let mut table = vec![vec![[None::<f64>; 3]; k + 1]; files];
    for l in 0..n {
        for s in all_subsets(k) {
            let slot = match classes {
                Some(c) if !s.is_empty() => match SubsetClass::of(s, &c) {
                    SubsetClass::Small => 0,
                    SubsetClass::Large => 1,
                    SubsetClass::Mixed => 2,
                },
                _ => 2,
            };
            let row = if per_file { l } else { 0 };
            let v = pl.size(l, s);
            match table[row][s.len()][slot] {
                None => table[row][s.len()][slot] = Some(v),
                Some(prev) if (prev - v).abs() <= tol => {}
                Some(prev) => {
                    return Err(Error::Structure(format!(
                        "file {} subset {s} has size {v}, but an equivalent subset has {prev}",
                        l + 1
                    )))
                }
            }
        }
    }
    let get = |row: usize, j: usize, slot: usize| -> f64 {
        let cell = table[row][j];
        if j == 0 {
            cell[2].unwrap_or(0.0)
        } else {
            cell[slot].unwrap_or(0.0)
        }
    };
    Ok(match kind {
        SchemeKind::Homogeneous => GroupedScheme::Homogeneous {
            v: (0..=k).map(|j| get(0, j, 2)).collect(),
        },
        SchemeKind::PerFile => GroupedScheme::PerFile {
            v: (0..n).map(|l| (0..=k).map(|j| get(l, j, 2)).collect()).collect(),
        },
        SchemeKind::TwoTier => GroupedScheme::TwoTier {
            small: (0..=k).map(|j| get(0, j, 0)).collect(),
            large: (0..=k).map(|j| get(0, j, 1)).collect(),
            mixed: (0..=k).map(|j| get(0, j, 2)).collect(),
        },
        SchemeKind::FullHet => {
            let m = |slot: usize| (0..n).map(|l| (0..=k).map(|j| get(l, j, slot)).collect()).collect();
            GroupedScheme::FullHet {
                small: m(0),
                large: m(1),
                mixed: m(2),
            }
        }
    })
}
