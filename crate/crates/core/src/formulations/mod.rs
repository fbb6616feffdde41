//! Builders that turn a [`SystemConfig`] into a linear program for one of the
//! placement families, plus the maps back from LP variables to schemes and
//! placements.
//!
//! Grouped builders relabel files internally (by popularity or by length) and
//! keep the permutation; every public output uses the original file order.

mod full_het;
mod general;
mod homogeneous;
mod per_file;
mod two_tier;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{to_lp_text, Backend, LinearProgram, LpSolution};
use crate::model::{GroupedScheme, Placement, SubsetClass, SystemConfig};
use crate::schemes::expand_to_placement;
use crate::subset::Subset;

pub use full_het::{build_full_het, nu};
pub use general::build_general;
pub use homogeneous::{build_homogeneous, build_simplex_form};
pub use per_file::{build_length_first, build_popularity_first};
pub use two_tier::build_two_tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "general")]
    General,
    #[serde(rename = "homogeneous")]
    Homogeneous,
    #[serde(rename = "simplex")]
    Simplex,
    #[serde(rename = "pop-first")]
    PopularityFirst,
    #[serde(rename = "length-first")]
    LengthFirst,
    #[serde(rename = "two-tier")]
    TwoTier,
    #[serde(rename = "full-het")]
    FullHet,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::General,
        Method::Homogeneous,
        Method::Simplex,
        Method::PopularityFirst,
        Method::LengthFirst,
        Method::TwoTier,
        Method::FullHet,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::General => "general",
            Method::Homogeneous => "homogeneous",
            Method::Simplex => "simplex",
            Method::PopularityFirst => "pop-first",
            Method::LengthFirst => "length-first",
            Method::TwoTier => "two-tier",
            Method::FullHet => "full-het",
        }
    }

    pub fn build(self, cfg: &SystemConfig) -> Result<BuiltProblem> {
        match self {
            Method::General => build_general(cfg),
            Method::Homogeneous => build_homogeneous(cfg),
            Method::Simplex => build_simplex_form(cfg),
            Method::PopularityFirst => build_popularity_first(cfg),
            Method::LengthFirst => build_length_first(cfg),
            Method::TwoTier => build_two_tier(cfg),
            Method::FullHet => build_full_het(cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Argument(format!("unknown formulation {s:?}")))
    }
}

/// Meaning of an LP variable. File indices are in the original labelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarLabel {
    /// `|W_S^(l)|`.
    Subfile { file: usize, subset: Subset },
    /// `mu_{k,l}`.
    UserFileCache { user: usize, file: usize },
    /// Epigraph of `max_{k in S} |W_{S\k}^(d_k)|` given the requests of the
    /// members of `S` (ascending user order).
    Epigraph { subset: Subset, files: Vec<usize> },
    /// `v_j`.
    Grouped { j: usize },
    /// `a_j = binom(K, j) v_j`.
    SimplexWeight { j: usize },
    /// `v_{l,j}`.
    FileGrouped { file: usize, j: usize },
    /// `v_{j,S/L/M}`; `class` is `None` for the shared `v_0`.
    ClassGrouped { class: Option<SubsetClass>, j: usize },
    /// `v^{S/L/M}_{l,j}`; `class` is `None` for the shared `v_{l,0}`.
    FileClassGrouped { file: usize, class: Option<SubsetClass>, j: usize },
    /// `mu_l`.
    FileCache { file: usize },
    /// `mu^S_l` or `mu^L_l`.
    FileClassCache { file: usize, class: SubsetClass },
}

impl VarLabel {
    pub fn is_auxiliary(&self) -> bool {
        matches!(self, VarLabel::Epigraph { .. })
    }
}

impl fmt::Display for VarLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarLabel::Subfile { file, subset } => write!(f, "W[{},{subset}]", file + 1),
            VarLabel::UserFileCache { user, file } => write!(f, "mu[{},{}]", user + 1, file + 1),
            VarLabel::Epigraph { subset, files } => {
                let d: Vec<String> = files.iter().map(|x| (x + 1).to_string()).collect();
                write!(f, "t[{subset}|{}]", d.join(","))
            }
            VarLabel::Grouped { j } => write!(f, "v[{j}]"),
            VarLabel::SimplexWeight { j } => write!(f, "a[{j}]"),
            VarLabel::FileGrouped { file, j } => write!(f, "v[{},{j}]", file + 1),
            VarLabel::ClassGrouped { class: None, j } => write!(f, "v[{j}]"),
            VarLabel::ClassGrouped { class: Some(c), j } => write!(f, "v_{}[{j}]", c.label()),
            VarLabel::FileClassGrouped { file, class: None, j } => write!(f, "v[{},{j}]", file + 1),
            VarLabel::FileClassGrouped { file, class: Some(c), j } => {
                write!(f, "v_{}[{},{j}]", c.label(), file + 1)
            }
            VarLabel::FileCache { file } => write!(f, "mu[{}]", file + 1),
            VarLabel::FileClassCache { file, class } => write!(f, "mu_{}[{}]", class.label(), file + 1),
        }
    }
}

/// An LP together with the meaning of its variables.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    method: Method,
    cfg: SystemConfig,
    lp: LinearProgram,
    labels: Vec<VarLabel>,
    index: HashMap<VarLabel, usize>,
    file_order: Vec<usize>,
    /// Factor converting LP values (and objective) back to file-length units.
    scale: f64,
}

/// Result of solving a [`BuiltProblem`].
#[derive(Debug, Clone)]
pub struct FormulationSolution {
    pub method: Method,
    /// Optimal expected rate in file-length units.
    pub objective: f64,
    pub lp: LpSolution,
    pub scheme: Option<GroupedScheme>,
    pub placement: Placement,
}

impl BuiltProblem {
    fn new(method: Method, cfg: &SystemConfig, file_order: Vec<usize>, scale: f64) -> Self {
        BuiltProblem {
            method,
            cfg: cfg.clone(),
            lp: LinearProgram::new(),
            labels: Vec::new(),
            index: HashMap::new(),
            file_order,
            scale,
        }
    }

    fn var(&mut self, label: VarLabel, cost: f64) -> usize {
        let id = self.lp.add_var(label.to_string(), cost);
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    /// The formulation that was actually built; degenerate class profiles
    /// collapse to a simpler family.
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    /// Mutable access, e.g. to fix or box variables before solving.
    pub fn lp_mut(&mut self) -> &mut LinearProgram {
        &mut self.lp
    }

    pub fn labels(&self) -> &[VarLabel] {
        &self.labels
    }

    pub fn var_index(&self, label: &VarLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// `file_order()[r]` is the original index of the file with internal
    /// rank `r`.
    pub fn file_order(&self) -> &[usize] {
        &self.file_order
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The objective at LP point `x`, in file-length units.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.lp.objective_value(x) * self.scale
    }

    /// Values of every variable, rescaled to file-length units, keyed by
    /// semantic name.
    pub fn named_values(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.labels
            .iter()
            .zip(x)
            .map(|(label, v)| {
                let v = match label {
                    VarLabel::SimplexWeight { .. } => *v,
                    _ => v * self.scale,
                };
                (label.to_string(), v)
            })
            .collect()
    }

    pub fn to_lp_text(&self) -> String {
        to_lp_text(
            &self.lp,
            &format!(
                "{} formulation, K={}, N={}",
                self.method,
                self.cfg.num_users(),
                self.cfg.num_files()
            ),
        )
    }

    fn value(&self, x: &[f64], label: &VarLabel) -> f64 {
        self.var_index(label).map_or(0.0, |i| x[i].max(0.0) * self.scale)
    }

    /// The grouped scheme encoded by `x`; `None` for the general problem.
    pub fn scheme_from_x(&self, x: &[f64]) -> Result<Option<GroupedScheme>> {
        let k = self.cfg.num_users();
        let n = self.cfg.num_files();
        let scheme = match self.method {
            Method::General => return Ok(None),
            Method::Homogeneous => GroupedScheme::Homogeneous {
                v: (0..=k).map(|j| self.value(x, &VarLabel::Grouped { j })).collect(),
            },
            Method::Simplex => GroupedScheme::Homogeneous {
                v: (0..=k)
                    .map(|j| {
                        let a = self.var_index(&VarLabel::SimplexWeight { j }).map_or(0.0, |i| x[i].max(0.0));
                        a / crate::probability::binom_f(k as i64, j as i64) * self.scale
                    })
                    .collect(),
            },
            Method::PopularityFirst | Method::LengthFirst => GroupedScheme::PerFile {
                v: (0..n)
                    .map(|file| (0..=k).map(|j| self.value(x, &VarLabel::FileGrouped { file, j })).collect())
                    .collect(),
            },
            Method::TwoTier => {
                let v0 = self.value(x, &VarLabel::ClassGrouped { class: None, j: 0 });
                let class_vec = |c: SubsetClass| -> Vec<f64> {
                    (0..=k)
                        .map(|j| {
                            if j == 0 {
                                v0
                            } else {
                                self.value(x, &VarLabel::ClassGrouped { class: Some(c), j })
                            }
                        })
                        .collect()
                };
                GroupedScheme::TwoTier {
                    small: class_vec(SubsetClass::Small),
                    large: class_vec(SubsetClass::Large),
                    mixed: class_vec(SubsetClass::Mixed),
                }
            }
            Method::FullHet => {
                let matrix = |c: SubsetClass| -> Vec<Vec<f64>> {
                    (0..n)
                        .map(|file| {
                            (0..=k)
                                .map(|j| {
                                    let class = if j == 0 { None } else { Some(c) };
                                    self.value(x, &VarLabel::FileClassGrouped { file, class, j })
                                })
                                .collect()
                        })
                        .collect()
                };
                GroupedScheme::FullHet {
                    small: matrix(SubsetClass::Small),
                    large: matrix(SubsetClass::Large),
                    mixed: matrix(SubsetClass::Mixed),
                }
            }
        };
        Ok(Some(scheme))
    }

    /// The full placement encoded by `x`. Per-file cache allocations are the
    /// amounts actually cached, which may be below slack LP allocations.
    pub fn placement_from_x(&self, x: &[f64]) -> Result<Placement> {
        match self.scheme_from_x(x)? {
            Some(gs) => expand_to_placement(&self.cfg, &gs),
            None => {
                let k = self.cfg.num_users();
                let sizes = (0..self.cfg.num_files())
                    .map(|file| {
                        crate::subset::all_subsets(k)
                            .map(|subset| self.value(x, &VarLabel::Subfile { file, subset }))
                            .collect()
                    })
                    .collect();
                Placement::from_sizes(k, sizes)
            }
        }
    }

    /// Solves with `backend` and decodes the optimum.
    pub fn solve(&self, backend: Backend) -> Result<FormulationSolution> {
        let solver = backend.solver_for(&self.lp);
        let lp = solver
            .solve(&self.lp)?
            .require_optimal(&format!("{} formulation", self.method))?;
        let objective = self.objective_at(&lp.x);
        let scheme = self.scheme_from_x(&lp.x)?;
        let placement = self.placement_from_x(&lp.x)?;
        Ok(FormulationSolution {
            method: self.method,
            objective,
            lp,
            scheme,
            placement,
        })
    }

    /// LP point for a placement of the general problem: sizes, per-user
    /// usage as allocation, and tight epigraph values.
    pub fn x_from_placement(&self, pl: &Placement) -> Result<Vec<f64>> {
        if self.method != Method::General {
            return Err(Error::Argument(format!(
                "{} formulation has no per-subset variables",
                self.method
            )));
        }
        let usage = pl.cache_usage();
        let x = self
            .labels
            .iter()
            .map(|label| match label {
                VarLabel::Subfile { file, subset } => pl.size(*file, *subset),
                VarLabel::UserFileCache { user, file } => usage[*user][*file],
                VarLabel::Epigraph { subset, files } => subset
                    .members()
                    .zip(files)
                    .map(|(k, &f)| pl.size(f, subset.without(k)))
                    .fold(f64::NEG_INFINITY, f64::max),
                _ => 0.0,
            })
            .map(|v| v / self.scale)
            .collect();
        Ok(x)
    }

    /// LP point for a grouped scheme of this formulation's family; cache
    /// allocation variables are set to the scheme's usage.
    pub fn x_from_scheme(&self, gs: &GroupedScheme) -> Result<Vec<f64>> {
        gs.validate_structure(&self.cfg)?;
        let k = self.cfg.num_users();
        let mismatch = || {
            Error::Structure(format!(
                "a {} scheme does not parameterize the {} formulation",
                gs.kind_name(),
                self.method
            ))
        };
        let binom = |n: usize, r: usize| crate::probability::binom_f(n as i64, r as i64);
        let mut x = vec![0.0; self.labels.len()];
        for (i, label) in self.labels.iter().enumerate() {
            x[i] = match (label, gs) {
                (VarLabel::Grouped { j }, GroupedScheme::Homogeneous { v }) => v[*j],
                (VarLabel::SimplexWeight { j }, GroupedScheme::Homogeneous { v }) => v[*j] * binom(k, *j),
                (VarLabel::FileGrouped { file, j }, GroupedScheme::PerFile { v }) => v[*file][*j],
                (VarLabel::FileCache { file }, GroupedScheme::PerFile { v }) => {
                    (1..=k).map(|j| binom(k - 1, j - 1) * v[*file][j]).sum()
                }
                (VarLabel::ClassGrouped { class, j }, GroupedScheme::TwoTier { small, large, mixed }) => {
                    match class {
                        None | Some(SubsetClass::Mixed) => mixed[*j],
                        Some(SubsetClass::Small) => small[*j],
                        Some(SubsetClass::Large) => large[*j],
                    }
                }
                (VarLabel::FileClassGrouped { file, class, j }, GroupedScheme::FullHet { small, large, mixed }) => {
                    match class {
                        None | Some(SubsetClass::Mixed) => mixed[*file][*j],
                        Some(SubsetClass::Small) => small[*file][*j],
                        Some(SubsetClass::Large) => large[*file][*j],
                    }
                }
                (VarLabel::FileClassCache { file, class }, GroupedScheme::FullHet { small, large, mixed }) => {
                    let classes = self.cfg.classes().ok_or(Error::MissingClasses)?;
                    let own = if *class == SubsetClass::Small {
                        (classes.small_users, &small[*file])
                    } else {
                        (classes.large_users(k), &large[*file])
                    };
                    class_usage(k, own.0, own.1, &mixed[*file])
                }
                _ => return Err(mismatch()),
            } / self.scale;
        }
        Ok(x)
    }

    /// The formulation's closed-form objective evaluated at a grouped scheme.
    pub fn closed_form_objective(&self, gs: &GroupedScheme) -> Result<f64> {
        let x = self.x_from_scheme(gs)?;
        Ok(self.objective_at(&x))
    }
}

/// Per-file cache usage of one user in a class of `class_size` users, where
/// `own` holds that class's grouped sizes.
pub(crate) fn class_usage(k: usize, class_size: usize, own: &[f64], mixed: &[f64]) -> f64 {
    let binom = |n: i64, r: i64| crate::probability::binom_f(n, r);
    (1..=k)
        .map(|j| {
            let j = j as i64;
            let pure = binom(class_size as i64 - 1, j - 1);
            let mix = binom(k as i64 - 1, j - 1) - pure;
            pure * own[j as usize] + mix * mixed[j as usize]
        })
        .sum()
}

pub(crate) fn require_uniform_cache(cfg: &SystemConfig, method: &'static str) -> Result<()> {
    if !cfg.has_uniform_cache() {
        return Err(Error::Unsupported {
            method,
            requirement: "identical cache sizes".into(),
        });
    }
    Ok(())
}

pub(crate) fn require_uniform_lengths(cfg: &SystemConfig, method: &'static str) -> Result<()> {
    if !cfg.has_uniform_lengths() {
        return Err(Error::Unsupported {
            method,
            requirement: "equal file lengths".into(),
        });
    }
    Ok(())
}

pub(crate) fn require_uniform_popularity(cfg: &SystemConfig, method: &'static str) -> Result<()> {
    if !cfg.has_uniform_popularity() {
        return Err(Error::Unsupported {
            method,
            requirement: "equal file popularities".into(),
        });
    }
    Ok(())
}
