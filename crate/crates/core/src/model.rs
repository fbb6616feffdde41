//! Problem instances, placements and grouped (symmetric) schemes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::{self, Subset, MAX_USERS};

/// Tolerance for checking tables that were published rounded to three decimals.
pub const PUBLISHED_TOL: f64 = 5e-3;
/// Tolerance for checking solver output.
pub const SOLVER_TOL: f64 = 1e-6;

const POPULARITY_RENORMALIZE_TOL: f64 = 1e-9;
const UNIFORM_TOL: f64 = 1e-12;

/// Two cache-size classes: users `0..small_users` have `small_cache`, the rest
/// `large_cache`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheClasses {
    #[serde(rename = "K_S")]
    pub small_users: usize,
    #[serde(rename = "M_S")]
    pub small_cache: f64,
    #[serde(rename = "M_L")]
    pub large_cache: f64,
}

impl CacheClasses {
    pub fn large_users(&self, num_users: usize) -> usize {
        num_users - self.small_users
    }

    /// Bitmask of the small-cache users.
    pub fn small_mask(&self) -> Subset {
        Subset::from_mask(((1u64 << self.small_users) - 1) as u32)
    }
}

/// A validated problem instance `(K, N, F, p, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    num_users: usize,
    num_files: usize,
    file_lengths: Vec<f64>,
    popularities: Vec<f64>,
    cache_sizes: Vec<f64>,
    classes: Option<CacheClasses>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(rename = "K")]
    num_users: usize,
    #[serde(rename = "N")]
    num_files: usize,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    file_lengths: Option<ScalarOrVec>,
    #[serde(rename = "p", default, skip_serializing_if = "Option::is_none")]
    popularities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zipf_s: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    cache_sizes: Option<ScalarOrVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<CacheClasses>,
}

impl SystemConfig {
    pub fn new(
        num_users: usize,
        num_files: usize,
        file_lengths: Vec<f64>,
        popularities: Vec<f64>,
        cache_sizes: Vec<f64>,
        classes: Option<CacheClasses>,
    ) -> Result<Self> {
        if num_users == 0 || num_users > MAX_USERS {
            return Err(Error::config(
                "K",
                format!("number of users must be in 1..={MAX_USERS}, got {num_users}"),
            ));
        }
        if num_files == 0 {
            return Err(Error::config("N", "number of files must be positive"));
        }
        if file_lengths.len() != num_files {
            return Err(Error::config(
                "F",
                format!("expected {num_files} file lengths, got {}", file_lengths.len()),
            ));
        }
        if let Some(f) = file_lengths.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(Error::config(
                "F",
                format!("file lengths must be strictly positive, got {f}"),
            ));
        }
        if popularities.len() != num_files {
            return Err(Error::config(
                "p",
                format!("expected {num_files} popularities, got {}", popularities.len()),
            ));
        }
        if let Some(p) = popularities
            .iter()
            .find(|p| !(p.is_finite() && **p > 0.0 && **p <= 1.0))
        {
            return Err(Error::config(
                "p",
                format!("popularities must lie in (0, 1], got {p}"),
            ));
        }
        let total: f64 = popularities.iter().sum();
        if (total - 1.0).abs() > POPULARITY_RENORMALIZE_TOL {
            return Err(Error::config(
                "p",
                format!("popularities must sum to 1 (sum is {total})"),
            ));
        }
        let popularities = popularities.into_iter().map(|p| p / total).collect();
        if cache_sizes.len() != num_users {
            return Err(Error::config(
                "M",
                format!("expected {num_users} cache sizes, got {}", cache_sizes.len()),
            ));
        }
        if let Some(m) = cache_sizes.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::config(
                "M",
                format!("cache sizes must be non-negative, got {m}"),
            ));
        }
        if let Some(c) = &classes {
            if c.small_users > num_users {
                return Err(Error::config(
                    "classes",
                    format!("K_S = {} exceeds K = {num_users}", c.small_users),
                ));
            }
            if !(c.small_cache >= 0.0 && c.small_cache.is_finite() && c.large_cache.is_finite()) {
                return Err(Error::config("classes", "class cache sizes must be non-negative"));
            }
            if c.small_cache > c.large_cache {
                return Err(Error::config("classes", "M_S must not exceed M_L"));
            }
            for (k, &m) in cache_sizes.iter().enumerate() {
                let want = if k < c.small_users {
                    c.small_cache
                } else {
                    c.large_cache
                };
                if (m - want).abs() > UNIFORM_TOL * want.max(1.0) {
                    return Err(Error::config(
                        "M",
                        format!("user {} has cache {m} but its class prescribes {want}", k + 1),
                    ));
                }
            }
        }
        Ok(SystemConfig {
            num_users,
            num_files,
            file_lengths,
            popularities,
            cache_sizes,
            classes,
        })
    }

    /// Unit-length, equally popular files with identical caches of size `cache`.
    pub fn uniform(num_users: usize, num_files: usize, cache: f64) -> Result<Self> {
        Self::new(
            num_users,
            num_files,
            vec![1.0; num_files],
            vec![1.0 / num_files as f64; num_files],
            vec![cache; num_users],
            None,
        )
    }

    /// Same files, with a two-class cache profile.
    pub fn with_classes(&self, classes: CacheClasses) -> Result<Self> {
        let caches = (0..self.num_users)
            .map(|k| {
                if k < classes.small_users {
                    classes.small_cache
                } else {
                    classes.large_cache
                }
            })
            .collect();
        Self::new(
            self.num_users,
            self.num_files,
            self.file_lengths.clone(),
            self.popularities.clone(),
            caches,
            Some(classes),
        )
    }

    /// Same files, every user with cache `cache`, no class annotation.
    pub fn with_uniform_cache(&self, cache: f64) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_files,
            self.file_lengths.clone(),
            self.popularities.clone(),
            vec![cache; self.num_users],
            None,
        )
    }

    pub fn with_cache_sizes(&self, caches: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_files,
            self.file_lengths.clone(),
            self.popularities.clone(),
            caches,
            None,
        )
    }

    pub fn with_popularities(&self, popularities: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_files,
            self.file_lengths.clone(),
            popularities,
            self.cache_sizes.clone(),
            self.classes,
        )
    }

    pub fn with_file_lengths(&self, lengths: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_files,
            lengths,
            self.popularities.clone(),
            self.cache_sizes.clone(),
            self.classes,
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn file_lengths(&self) -> &[f64] {
        &self.file_lengths
    }

    pub fn file_length(&self, file: usize) -> f64 {
        self.file_lengths[file]
    }

    pub fn popularities(&self) -> &[f64] {
        &self.popularities
    }

    pub fn cache_sizes(&self) -> &[f64] {
        &self.cache_sizes
    }

    pub fn classes(&self) -> Option<&CacheClasses> {
        self.classes.as_ref()
    }

    pub fn total_length(&self) -> f64 {
        self.file_lengths.iter().sum()
    }

    /// `E[F_d]` for a single request.
    pub fn expected_length(&self) -> f64 {
        self.file_lengths
            .iter()
            .zip(&self.popularities)
            .map(|(f, p)| f * p)
            .sum()
    }

    pub fn has_uniform_lengths(&self) -> bool {
        all_close(&self.file_lengths)
    }

    pub fn has_uniform_popularity(&self) -> bool {
        all_close(&self.popularities)
    }

    pub fn has_uniform_cache(&self) -> bool {
        all_close(&self.cache_sizes)
    }

    /// File indices from most to least popular; ties go to the lower index.
    pub fn popularity_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_files).collect();
        order.sort_by(|&a, &b| self.popularities[b].total_cmp(&self.popularities[a]));
        order
    }

    /// File indices from longest to shortest; ties by decreasing popularity,
    /// then by index.
    pub fn length_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_files).collect();
        order.sort_by(|&a, &b| {
            self.file_lengths[b]
                .total_cmp(&self.file_lengths[a])
                .then(self.popularities[b].total_cmp(&self.popularities[a]))
        });
        order
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: ConfigDoc) -> Result<Self> {
        let n = doc.num_files;
        let k = doc.num_users;
        let file_lengths = match doc.file_lengths {
            None => vec![1.0; n],
            Some(ScalarOrVec::Scalar(f)) => vec![f; n],
            Some(ScalarOrVec::Vec(v)) => v,
        };
        let popularities = match (doc.popularities, doc.zipf_s) {
            (Some(_), Some(_)) => {
                return Err(Error::config("p", "give either p or zipf_s, not both"));
            }
            (Some(p), None) => p,
            (None, Some(s)) => zipf_popularities(n, s)?,
            (None, None) => vec![1.0 / n.max(1) as f64; n],
        };
        let cache_sizes = match (doc.cache_sizes, &doc.classes) {
            (Some(ScalarOrVec::Scalar(m)), _) => vec![m; k],
            (Some(ScalarOrVec::Vec(v)), _) => v,
            (None, Some(c)) => (0..k)
                .map(|u| if u < c.small_users { c.small_cache } else { c.large_cache })
                .collect(),
            (None, None) => return Err(Error::config("M", "cache sizes are required")),
        };
        Self::new(k, n, file_lengths, popularities, cache_sizes, doc.classes)
    }

    pub fn to_json_string(&self) -> String {
        let doc = ConfigDoc {
            num_users: self.num_users,
            num_files: self.num_files,
            file_lengths: Some(ScalarOrVec::Vec(self.file_lengths.clone())),
            popularities: Some(self.popularities.clone()),
            zipf_s: None,
            cache_sizes: Some(ScalarOrVec::Vec(self.cache_sizes.clone())),
            classes: self.classes,
        };
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }
}

fn all_close(values: &[f64]) -> bool {
    match values.first() {
        None => true,
        Some(&first) => values
            .iter()
            .all(|v| (v - first).abs() <= UNIFORM_TOL * first.abs().max(1.0)),
    }
}

/// Reads and validates a JSON config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    SystemConfig::from_json_str(&text)
}

/// Zipf popularities `p_l ∝ l^(-s)` in rank order, normalized to sum to one.
pub fn zipf_popularities(num_files: usize, s: f64) -> Result<Vec<f64>> {
    if num_files == 0 {
        return Err(Error::config("N", "number of files must be positive"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::config("zipf_s", format!("must be non-negative, got {s}")));
    }
    let weights: Vec<f64> = (1..=num_files).map(|l| (l as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// A demand vector: `files[k]` is the zero-based index of the file user `k`
/// requests.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand(Vec<usize>);

impl Demand {
    pub fn new(files: Vec<usize>, num_files: usize) -> Result<Self> {
        if let Some(f) = files.iter().find(|&&f| f >= num_files) {
            return Err(Error::Dimension(format!(
                "demand names file {} but only {num_files} exist",
                f + 1
            )));
        }
        Ok(Demand(files))
    }

    pub fn files(&self) -> &[usize] {
        &self.0
    }

    pub fn file(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn num_users(&self) -> usize {
        self.0.len()
    }

    pub fn probability(&self, popularities: &[f64]) -> f64 {
        self.0.iter().map(|&f| popularities[f]).product()
    }

    /// Lexicographic enumeration of `[N]^K` (last user varies fastest).
    pub fn all(num_users: usize, num_files: usize) -> DemandIter {
        DemandIter {
            current: if num_files == 0 { None } else { Some(vec![0; num_users]) },
            num_files,
        }
    }

    /// The `index`-th demand in the order of [`Demand::all`].
    pub fn from_index(mut index: u64, num_users: usize, num_files: usize) -> Self {
        let mut files = vec![0; num_users];
        for slot in files.iter_mut().rev() {
            *slot = (index % num_files as u64) as usize;
            index /= num_files as u64;
        }
        Demand(files)
    }
}

impl std::fmt::Display for Demand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| (d + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub struct DemandIter {
    current: Option<Vec<usize>>,
    num_files: usize,
}

impl Iterator for DemandIter {
    type Item = Demand;

    fn next(&mut self) -> Option<Demand> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < self.num_files {
                break;
            }
            cur[pos] = 0;
        }
        Some(Demand(out))
    }
}

/// Expected delivery rate, optionally with the per-demand breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct RateResult {
    pub expected_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_demand: Option<Vec<(Demand, f64)>>,
}

/// Subfile sizes `|W_S^(l)|` together with the per-user, per-file cache
/// allocation `mu[k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    num_users: usize,
    sizes: Vec<Vec<f64>>,
    per_file_cache: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PlacementDoc {
    #[serde(rename = "K")]
    num_users: usize,
    #[serde(rename = "N")]
    num_files: usize,
    sizes: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<Vec<f64>>>,
}

impl Placement {
    /// `sizes[l][mask]` must have length `2^K` for each file; `mu` is `K x N`.
    pub fn new(num_users: usize, sizes: Vec<Vec<f64>>, per_file_cache: Vec<Vec<f64>>) -> Result<Self> {
        let width = 1usize << num_users;
        if let Some(row) = sizes.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension(format!(
                "expected {width} subset sizes per file, got {}",
                row.len()
            )));
        }
        if per_file_cache.len() != num_users
            || per_file_cache.iter().any(|r| r.len() != sizes.len())
        {
            return Err(Error::Dimension(format!(
                "cache allocation must be {num_users} x {}",
                sizes.len()
            )));
        }
        Ok(Placement {
            num_users,
            sizes,
            per_file_cache,
        })
    }

    /// Builds a placement whose allocation equals what each user actually
    /// caches.
    pub fn from_sizes(num_users: usize, sizes: Vec<Vec<f64>>) -> Result<Self> {
        let n = sizes.len();
        let mut out = Placement::new(num_users, sizes, vec![vec![0.0; n]; num_users])?;
        out.per_file_cache = out.cache_usage();
        Ok(out)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_files(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, file: usize, subset: Subset) -> f64 {
        self.sizes[file][subset.index()]
    }

    pub fn sizes(&self) -> &[Vec<f64>] {
        &self.sizes
    }

    pub fn per_file_cache(&self) -> &[Vec<f64>] {
        &self.per_file_cache
    }

    /// `sum_{S contains k} |W_S^(l)|` for every user and file.
    pub fn cache_usage(&self) -> Vec<Vec<f64>> {
        (0..self.num_users)
            .map(|k| {
                self.sizes
                    .iter()
                    .map(|row| {
                        subset::all_subsets(self.num_users)
                            .filter(|s| s.contains(k))
                            .map(|s| row[s.index()])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-file cache usage averaged over users.
    pub fn mean_file_usage(&self) -> Vec<f64> {
        let usage = self.cache_usage();
        (0..self.num_files())
            .map(|l| usage.iter().map(|row| row[l]).sum::<f64>() / self.num_users as f64)
            .collect()
    }

    /// Per-file cache usage averaged over the users in `users`.
    pub fn mean_file_usage_over(&self, users: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
        let usage = self.cache_usage();
        let count = users.clone().count().max(1) as f64;
        (0..self.num_files())
            .map(|l| users.clone().map(|k| usage[k][l]).sum::<f64>() / count)
            .collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut sizes = serde_json::Map::new();
        for s in subset::canonical_order(self.num_users) {
            let row: Vec<f64> = self.sizes.iter().map(|r| r[s.index()]).collect();
            sizes.insert(s.key(), serde_json::json!(row));
        }
        serde_json::to_value(PlacementDoc {
            num_users: self.num_users,
            num_files: self.num_files(),
            sizes,
            mu: Some(self.per_file_cache.clone()),
        })
        .expect("placement serializes")
    }

    /// Parses the JSON placement format. Subsets that are absent have size
    /// zero; a missing `mu` is replaced by the actual cache usage.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: PlacementDoc = serde_json::from_str(text)?;
        let k = doc.num_users;
        if k == 0 || k > MAX_USERS {
            return Err(Error::Dimension(format!("unsupported number of users {k}")));
        }
        let mut sizes = vec![vec![0.0; 1 << k]; doc.num_files];
        for (key, value) in &doc.sizes {
            let s = Subset::parse_key(key, k)?;
            let row: Vec<f64> = serde_json::from_value(value.clone())?;
            if row.len() != doc.num_files {
                return Err(Error::Dimension(format!(
                    "subset {key:?} lists {} sizes for {} files",
                    row.len(),
                    doc.num_files
                )));
            }
            for (l, v) in row.into_iter().enumerate() {
                sizes[l][s.index()] = v;
            }
        }
        match doc.mu {
            Some(mu) => Placement::new(k, sizes, mu),
            None => Placement::from_sizes(k, sizes),
        }
    }
}

/// Which kind of user subset a grouped variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetClass {
    Small,
    Large,
    Mixed,
}

impl SubsetClass {
    /// Class of a non-empty subset under `classes`.
    pub fn of(subset: Subset, classes: &CacheClasses) -> SubsetClass {
        let small = subset.intersection(classes.small_mask()).len();
        if small == subset.len() {
            SubsetClass::Small
        } else if small == 0 {
            SubsetClass::Large
        } else {
            SubsetClass::Mixed
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SubsetClass::Small => "S",
            SubsetClass::Large => "L",
            SubsetClass::Mixed => "M",
        }
    }
}

/// Symmetric parameterizations in which a subfile size depends only on the
/// subset size (and on the file and/or the subset's class composition).
///
/// Per-file matrices are indexed `[file][j]` in the configuration's original
/// file order; class vectors are indexed by `j` in `0..=K`. The `j = 0` entry
/// of every class must hold the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupedScheme {
    Homogeneous {
        v: Vec<f64>,
    },
    PerFile {
        v: Vec<Vec<f64>>,
    },
    TwoTier {
        small: Vec<f64>,
        large: Vec<f64>,
        mixed: Vec<f64>,
    },
    FullHet {
        small: Vec<Vec<f64>>,
        large: Vec<Vec<f64>>,
        mixed: Vec<Vec<f64>>,
    },
}

const STRUCTURAL_TOL: f64 = 1e-12;

impl GroupedScheme {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GroupedScheme::Homogeneous { .. } => "homogeneous",
            GroupedScheme::PerFile { .. } => "per_file",
            GroupedScheme::TwoTier { .. } => "two_tier",
            GroupedScheme::FullHet { .. } => "full_het",
        }
    }

    /// Checks dimensions, non-negativity and the structural zeros implied by
    /// the class sizes.
    pub fn validate_structure(&self, cfg: &SystemConfig) -> Result<()> {
        let k = cfg.num_users();
        let n = cfg.num_files();
        let check_len = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != k + 1 {
                return Err(Error::Structure(format!(
                    "{name} has {} entries, expected K+1 = {}",
                    v.len(),
                    k + 1
                )));
            }
            if let Some(x) = v.iter().find(|x| x.is_nan() || **x < -STRUCTURAL_TOL) {
                return Err(Error::Structure(format!("{name} has negative entry {x}")));
            }
            Ok(())
        };
        let check_rows = |name: &str, m: &[Vec<f64>]| -> Result<()> {
            if m.len() != n {
                return Err(Error::Structure(format!(
                    "{name} has {} rows, expected N = {n}",
                    m.len()
                )));
            }
            m.iter().try_for_each(|row| check_len(name, row))
        };
        match self {
            GroupedScheme::Homogeneous { v } => check_len("v", v),
            GroupedScheme::PerFile { v } => check_rows("v", v),
            GroupedScheme::TwoTier { small, large, mixed } => {
                let classes = cfg.classes().ok_or(Error::MissingClasses)?;
                check_len("v_S", small)?;
                check_len("v_L", large)?;
                check_len("v_M", mixed)?;
                check_class_structure(classes, k, small, large, mixed, "")
            }
            GroupedScheme::FullHet { small, large, mixed } => {
                let classes = cfg.classes().ok_or(Error::MissingClasses)?;
                check_rows("v^S", small)?;
                check_rows("v^L", large)?;
                check_rows("v^M", mixed)?;
                (0..n).try_for_each(|l| {
                    check_class_structure(
                        classes,
                        k,
                        &small[l],
                        &large[l],
                        &mixed[l],
                        &format!(" (file {})", l + 1),
                    )
                })
            }
        }
    }
}

fn check_class_structure(
    classes: &CacheClasses,
    k: usize,
    small: &[f64],
    large: &[f64],
    mixed: &[f64],
    context: &str,
) -> Result<()> {
    let ks = classes.small_users;
    let kl = classes.large_users(k);
    let nonzero = |x: f64| x.abs() > STRUCTURAL_TOL;
    for j in 1..=k {
        if j > ks && nonzero(small[j]) {
            return Err(Error::Structure(format!(
                "v_{{{j},S}}{context} must be 0 since only {ks} small users exist"
            )));
        }
        if j > kl && nonzero(large[j]) {
            return Err(Error::Structure(format!(
                "v_{{{j},L}}{context} must be 0 since only {kl} large users exist"
            )));
        }
    }
    if nonzero(mixed[1]) {
        return Err(Error::Structure(format!(
            "v_{{1,M}}{context} must be 0: a single user cannot form a mixed subset"
        )));
    }
    let tol = STRUCTURAL_TOL * mixed[0].abs().max(1.0);
    if (small[0] - mixed[0]).abs() > tol || (large[0] - mixed[0]).abs() > tol {
        return Err(Error::Structure(format!(
            "v_{{0,S}}, v_{{0,L}} and v_{{0,M}}{context} must coincide"
        )));
    }
    Ok(())
}

/// One violated constraint of the placement feasibility set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// A subfile has negative size.
    NegativeSize { file: usize, subset: String, value: f64 },
    /// The subfiles of a file do not add up to its length.
    Reconstruction { file: usize, total: f64, expected: f64 },
    /// A user caches more of a file than its allocation.
    FileAllocation { user: usize, file: usize, cached: f64, allocated: f64 },
    /// A user's allocations exceed its cache.
    CacheBudget { user: usize, allocated: f64, capacity: f64 },
}

impl Violation {
    /// How far outside the constraint the placement lies.
    pub fn excess(&self) -> f64 {
        match *self {
            Violation::NegativeSize { value, .. } => -value,
            Violation::Reconstruction { total, expected, .. } => (total - expected).abs(),
            Violation::FileAllocation { cached, allocated, .. } => cached - allocated,
            Violation::CacheBudget { allocated, capacity, .. } => allocated - capacity,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub tolerance: f64,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_excess(&self) -> f64 {
        self.violations.iter().map(Violation::excess).fold(0.0, f64::max)
    }
}

/// Checks non-negativity, file reconstruction, per-file allocation and cache
/// budgets. File and user indices in the report are one-based.
pub fn validate_placement(cfg: &SystemConfig, pl: &Placement, tol: f64) -> Result<FeasibilityReport> {
    if pl.num_users() != cfg.num_users() || pl.num_files() != cfg.num_files() {
        return Err(Error::Dimension(format!(
            "placement is for K={}, N={} but config has K={}, N={}",
            pl.num_users(),
            pl.num_files(),
            cfg.num_users(),
            cfg.num_files()
        )));
    }
    let mut violations = Vec::new();
    for (l, row) in pl.sizes().iter().enumerate() {
        for s in subset::canonical_order(cfg.num_users()) {
            let v = row[s.index()];
            if v < -tol {
                violations.push(Violation::NegativeSize {
                    file: l + 1,
                    subset: s.key(),
                    value: v,
                });
            }
        }
        let total: f64 = row.iter().sum();
        if (total - cfg.file_length(l)).abs() > tol {
            violations.push(Violation::Reconstruction {
                file: l + 1,
                total,
                expected: cfg.file_length(l),
            });
        }
    }
    let usage = pl.cache_usage();
    for k in 0..cfg.num_users() {
        for l in 0..cfg.num_files() {
            let allocated = pl.per_file_cache()[k][l];
            if usage[k][l] > allocated + tol {
                violations.push(Violation::FileAllocation {
                    user: k + 1,
                    file: l + 1,
                    cached: usage[k][l],
                    allocated,
                });
            }
        }
        let allocated: f64 = pl.per_file_cache()[k].iter().sum();
        if allocated > cfg.cache_sizes()[k] + tol {
            violations.push(Violation::CacheBudget {
                user: k + 1,
                allocated,
                capacity: cfg.cache_sizes()[k],
            });
        }
    }
    Ok(FeasibilityReport {
        tolerance: tol,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let cfg = SystemConfig::uniform(4, 3, 1.0)
            .unwrap()
            .with_file_lengths(vec![1.5, 1.0, 0.5])
            .unwrap()
            .with_classes(CacheClasses {
                small_users: 1,
                small_cache: 0.5,
                large_cache: 1.5,
            })
            .unwrap();
        std::fs::write(&path, cfg.to_json_string()).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back.to_json_string(), cfg.to_json_string());
        assert_eq!(back.cache_sizes(), &[0.5, 1.5, 1.5, 1.5]);
        let missing = load_config(dir.path().join("none.json")).unwrap_err();
        assert_eq!(missing.kind(), "io");
    }

    #[test]
    fn uniform_config_parses() {
        let cfg = SystemConfig::from_json_str(
            r#"{"K":4,"N":6,"F":[1,1,1,1,1,1],"p":[0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666666],"M":[1,1,1,1]}"#,
        )
        .unwrap();
        assert_eq!(cfg.num_users(), 4);
        assert!(cfg.has_uniform_lengths() && cfg.has_uniform_popularity() && cfg.has_uniform_cache());
        assert!((cfg.popularities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn popularities_must_sum_to_one() {
        let err = SystemConfig::from_json_str(r#"{"K":2,"N":2,"p":[0.5,0.4],"M":1}"#).unwrap_err();
        assert!(err.to_string().contains("popularities must sum to 1"), "{err}");
    }

    #[test]
    fn tiny_popularity_drift_is_renormalized() {
        let cfg = SystemConfig::from_json_str(r#"{"K":2,"N":2,"p":[0.5,0.5000000001],"M":1}"#).unwrap();
        let total: f64 = cfg.popularities().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_length_names_field() {
        let err = SystemConfig::from_json_str(r#"{"K":2,"N":2,"F":[1,-1],"M":1}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "F", .. }));
    }

    #[test]
    fn classes_fill_cache_sizes() {
        let cfg = SystemConfig::from_json_str(
            r#"{"K":4,"N":6,"classes":{"K_S":2,"M_S":3.2,"M_L":4.8}}"#,
        )
        .unwrap();
        assert_eq!(cfg.cache_sizes(), &[3.2, 3.2, 4.8, 4.8]);
        let bad = SystemConfig::from_json_str(
            r#"{"K":4,"N":6,"M":[3.2,4.8,4.8,4.8],"classes":{"K_S":2,"M_S":3.2,"M_L":4.8}}"#,
        );
        assert!(bad.is_err());
        let inverted =
            SystemConfig::from_json_str(r#"{"K":2,"N":2,"classes":{"K_S":1,"M_S":2,"M_L":1}}"#);
        assert!(inverted.is_err());
    }

    #[test]
    fn zipf_edge_cases() {
        assert_eq!(zipf_popularities(1, 3.0).unwrap(), vec![1.0]);
        for p in zipf_popularities(6, 0.0).unwrap() {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
        let p = zipf_popularities(6, 0.56).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        assert!(zipf_popularities(3, -1.0).is_err());
    }

    #[test]
    fn orders_break_ties_by_index() {
        let cfg = SystemConfig::new(
            2,
            4,
            vec![1.0, 2.0, 2.0, 0.5],
            vec![0.25, 0.25, 0.3, 0.2],
            vec![1.0, 1.0],
            None,
        )
        .unwrap();
        assert_eq!(cfg.popularity_order(), vec![2, 0, 1, 3]);
        assert_eq!(cfg.length_order(), vec![2, 1, 0, 3]);
    }

    #[test]
    fn demand_enumeration_is_lexicographic() {
        let all: Vec<Demand> = Demand::all(2, 3).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].files(), &[0, 0]);
        assert_eq!(all[1].files(), &[0, 1]);
        assert_eq!(all[8].files(), &[2, 2]);
        for (i, d) in all.iter().enumerate() {
            assert_eq!(&Demand::from_index(i as u64, 2, 3), d);
        }
        assert!(Demand::new(vec![0, 3], 3).is_err());
    }

    #[test]
    fn negative_size_is_reported() {
        let cfg = SystemConfig::uniform(2, 1, 0.5).unwrap();
        let pl = Placement::from_sizes(2, vec![vec![1.2, -0.1, -0.1, 0.0]]).unwrap();
        let report = validate_placement(&cfg, &pl, 1e-9).unwrap();
        assert!(!report.is_feasible());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NegativeSize { subset, .. } if subset == "1")));
    }

    #[test]
    fn placement_json_round_trip() {
        let sizes = vec![vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 0.0, 0.0, 0.0]];
        let pl = Placement::from_sizes(2, sizes).unwrap();
        let text = pl.to_json_value().to_string();
        assert!(text.contains("\"1,2\""));
        let back = Placement::from_json_str(&text).unwrap();
        assert_eq!(back, pl);
    }

    #[test]
    fn placement_dimension_errors() {
        assert!(Placement::from_sizes(2, vec![vec![1.0; 3]]).is_err());
        assert!(Placement::new(2, vec![vec![1.0; 4]], vec![vec![0.0; 2]; 2]).is_err());
    }
}
