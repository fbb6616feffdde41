use super::{build_homogeneous, require_uniform_lengths, require_uniform_popularity, BuiltProblem, Method, VarLabel};
use crate::error::{Error, Result};
use crate::lp::Relation;
use crate::model::{SubsetClass, SystemConfig};
use crate::probability::binom_f;

/// Class sizes of a two-class user population.
#[derive(Debug, Clone, Copy)]
pub(super) struct Shape {
    pub k: i64,
    pub ks: i64,
    pub kl: i64,
}

impl Shape {
    pub fn new(cfg: &SystemConfig) -> Result<Shape> {
        let classes = cfg.classes().ok_or(Error::MissingClasses)?;
        let k = cfg.num_users() as i64;
        let ks = classes.small_users as i64;
        Ok(Shape { k, ks, kl: k - ks })
    }

    pub fn degenerate(&self) -> bool {
        self.ks == 0 || self.kl == 0
    }

    /// Largest `j` for which a class-`c` variable exists.
    pub fn max_j(&self, c: SubsetClass) -> i64 {
        match c {
            SubsetClass::Small => self.ks,
            SubsetClass::Large => self.kl,
            SubsetClass::Mixed => self.k,
        }
    }

    /// Smallest `j >= 1` for which a class-`c` variable exists.
    pub fn min_j(&self, c: SubsetClass) -> i64 {
        if c == SubsetClass::Mixed {
            2
        } else {
            1
        }
    }

    /// Number of size-`j` subsets of class `c`, i.e. the coefficient in the
    /// reconstruction constraint.
    pub fn count(&self, c: SubsetClass, j: i64) -> f64 {
        match c {
            SubsetClass::Small => binom_f(self.ks, j),
            SubsetClass::Large => binom_f(self.kl, j),
            SubsetClass::Mixed => binom_f(self.k, j) - binom_f(self.ks, j) - binom_f(self.kl, j),
        }
    }

    /// Number of size-`j` subsets of class `c` that contain a given user of
    /// class `own` (small or large).
    pub fn containing(&self, own: SubsetClass, c: SubsetClass, j: i64) -> f64 {
        let own_size = if own == SubsetClass::Small { self.ks } else { self.kl };
        let pure = binom_f(own_size - 1, j - 1);
        if c == own {
            pure
        } else if c == SubsetClass::Mixed {
            binom_f(self.k - 1, j - 1) - pure
        } else {
            0.0
        }
    }

    /// `(lhs class, rhs class, j range)` for the class memory inequalities
    /// `v_lhs >= v_rhs`.
    pub fn class_inequalities(&self) -> [(SubsetClass, SubsetClass, std::ops::RangeInclusive<i64>); 3] {
        [
            (SubsetClass::Large, SubsetClass::Mixed, 2..=self.kl),
            (SubsetClass::Mixed, SubsetClass::Small, 2..=self.ks),
            (SubsetClass::Large, SubsetClass::Small, 1..=self.kl),
        ]
    }
}

pub(super) const CLASSES: [SubsetClass; 3] = [SubsetClass::Small, SubsetClass::Large, SubsetClass::Mixed];

/// Equal files, two cache classes: `v_{j,S}`, `v_{j,L}`, `v_{j,M}` and a
/// shared `v_0`. Each user class may use at most its cache divided equally
/// over the files. Degenerate class profiles collapse to the homogeneous
/// problem.
pub fn build_two_tier(cfg: &SystemConfig) -> Result<BuiltProblem> {
    let shape = Shape::new(cfg)?;
    require_uniform_lengths(cfg, "two-tier")?;
    require_uniform_popularity(cfg, "two-tier")?;
    if shape.degenerate() {
        return build_homogeneous(cfg);
    }
    let classes = *cfg.classes().expect("checked by Shape::new");
    let n = cfg.num_files();
    let f = cfg.file_length(0);
    let mut bp = BuiltProblem::new(Method::TwoTier, cfg, (0..n).collect(), 1.0);
    let Shape { k, ks, kl } = shape;

    let v0 = bp.var(VarLabel::ClassGrouped { class: None, j: 0 }, k as f64);
    let mut vars: Vec<(SubsetClass, i64, usize)> = Vec::new();
    for c in CLASSES {
        for j in shape.min_j(c)..=shape.max_j(c) {
            let cost = if j >= k {
                0.0
            } else {
                match c {
                    SubsetClass::Small => binom_f(ks, j + 1),
                    SubsetClass::Large => binom_f(kl, j + 1) + ks as f64 * binom_f(kl, j),
                    SubsetClass::Mixed => {
                        binom_f(k, j + 1) - binom_f(ks, j + 1) - binom_f(kl, j + 1) - ks as f64 * binom_f(kl, j)
                    }
                }
            };
            let id = bp.var(VarLabel::ClassGrouped { class: Some(c), j: j as usize }, cost);
            vars.push((c, j, id));
        }
    }
    let find = |c: SubsetClass, j: i64| vars.iter().find(|e| e.0 == c && e.1 == j).map(|e| e.2);

    let mut recon = vec![(v0, 1.0)];
    recon.extend(vars.iter().map(|&(c, j, id)| (id, shape.count(c, j))));
    bp.lp.add_constraint(recon, Relation::Eq, f);
    for (own, cache) in [(SubsetClass::Small, classes.small_cache), (SubsetClass::Large, classes.large_cache)] {
        let row: Vec<(usize, f64)> = vars
            .iter()
            .map(|&(c, j, id)| (id, shape.containing(own, c, j)))
            .filter(|e| e.1 != 0.0)
            .collect();
        bp.lp.add_constraint(row, Relation::Le, cache / n as f64);
    }
    for (hi, lo, range) in shape.class_inequalities() {
        for j in range {
            if let (Some(a), Some(b)) = (find(hi, j), find(lo, j)) {
                bp.lp.add_constraint(vec![(a, 1.0), (b, -1.0)], Relation::Ge, 0.0);
            }
        }
    }
    Ok(bp)
}
