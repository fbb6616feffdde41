//! Exact expected-rate evaluation and rate-memory sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::Method;
use crate::lp::Backend;
use crate::model::{CacheClasses, Demand, Placement, RateResult, SystemConfig};
use crate::probability::{check_enumeration, demand_count};
use crate::schemes::{
    decentralized_scheme, expand_to_placement, random_length_baseline, random_popularity_baseline,
    centralized_scheme,
};

const CHUNK: u64 = 1 << 12;

/// Cache sizes used for class configs on a sweep: `M_S = 0.8 M`, `M_L = 1.2 M`.
pub const SMALL_CLASS_FACTOR: f64 = 0.8;
pub const LARGE_CLASS_FACTOR: f64 = 1.2;

fn check_dims(pl: &Placement, num_users: usize, num_files: usize) -> Result<()> {
    if pl.num_users() != num_users || pl.num_files() != num_files {
        return Err(Error::Dimension(format!(
            "placement has K={}, N={} but K={num_users}, N={num_files} expected",
            pl.num_users(),
            pl.num_files()
        )));
    }
    Ok(())
}

/// Load of one demand: for every nonempty `S`, the longest of the
/// subfiles `W^(d_k)_{S \ k}`, `k in S`.
pub fn rate_for_demand(pl: &Placement, d: &Demand) -> Result<f64> {
    check_dims(pl, d.num_users(), pl.num_files())?;
    if let Some(&f) = d.files().iter().find(|&&f| f >= pl.num_files()) {
        return Err(Error::Dimension(format!("demand names file {}", f + 1)));
    }
    Ok(rate_unchecked(pl.sizes(), d.files()))
}

fn rate_unchecked(sizes: &[Vec<f64>], d: &[usize]) -> f64 {
    let k = d.len();
    let mut total = 0.0;
    for mask in 1u32..(1u32 << k) {
        let mut best = 0.0f64;
        let mut rest = mask;
        while rest != 0 {
            let user = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            best = best.max(sizes[d[user]][(mask & !(1 << user)) as usize]);
        }
        total += best;
    }
    total
}

/// True when every file has the same subfile sizes, so that the load is the
/// same for every demand.
fn file_symmetric(pl: &Placement) -> bool {
    let sizes = pl.sizes();
    sizes.iter().all(|row| row == &sizes[0])
}

/// Expected load over i.i.d. demands drawn from the configured popularities.
///
/// By linearity the expectation splits over subsets, and the summand for `S`
/// only depends on the requests of the users in `S`, so the work is
/// `(N+1)^K - 1` terms instead of `2^K N^K`. File-symmetric placements need a
/// single demand. The enumeration cap applies to the number of terms.
pub fn expected_rate(cfg: &SystemConfig, pl: &Placement) -> Result<RateResult> {
    let k = cfg.num_users();
    let n = cfg.num_files();
    check_dims(pl, k, n)?;
    if file_symmetric(pl) {
        return Ok(RateResult {
            expected_rate: rate_unchecked(pl.sizes(), &vec![0; k]),
            per_demand: None,
        });
    }
    check_enumeration(demand_count(k, n + 1).saturating_sub(1))?;
    let p = cfg.popularities();
    let sizes = pl.sizes();
    let per_subset: Vec<f64> = (1u32..(1u32 << k))
        .into_par_iter()
        .map(|mask| {
            let users: Vec<usize> = (0..k).filter(|u| mask & (1 << u) != 0).collect();
            let count = (n as u64).pow(users.len() as u32);
            let mut files = vec![0usize; users.len()];
            let mut acc = 0.0;
            for idx in 0..count {
                let mut rem = idx;
                for slot in files.iter_mut().rev() {
                    *slot = (rem % n as u64) as usize;
                    rem /= n as u64;
                }
                let mut prob = 1.0;
                let mut best = 0.0f64;
                for (&user, &file) in users.iter().zip(&files) {
                    prob *= p[file];
                    best = best.max(sizes[file][(mask & !(1 << user)) as usize]);
                }
                acc += prob * best;
            }
            acc
        })
        .collect();
    Ok(RateResult {
        expected_rate: per_subset.iter().sum(),
        per_demand: None,
    })
}

/// Expected load by enumerating every demand vector, keeping the per-demand
/// loads. Partial sums are reduced in a fixed chunk order.
pub fn expected_rate_exhaustive(cfg: &SystemConfig, pl: &Placement) -> Result<RateResult> {
    let k = cfg.num_users();
    let n = cfg.num_files();
    check_dims(pl, k, n)?;
    let count = demand_count(k, n);
    check_enumeration(count)?;
    let count = count as u64;
    let p = cfg.popularities();
    let chunks: Vec<(f64, Vec<(Demand, f64)>)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(count);
            let mut acc = 0.0;
            let mut rows = Vec::with_capacity((end - c * CHUNK) as usize);
            for idx in c * CHUNK..end {
                let d = Demand::from_index(idx, k, n);
                let rate = rate_unchecked(pl.sizes(), d.files());
                acc += d.probability(p) * rate;
                rows.push((d, rate));
            }
            (acc, rows)
        })
        .collect();
    let mut expected = 0.0;
    let mut per_demand = Vec::with_capacity(count as usize);
    for (acc, rows) in chunks {
        expected += acc;
        per_demand.extend(rows);
    }
    Ok(RateResult {
        expected_rate: expected,
        per_demand: Some(per_demand),
    })
}

/// What a sweep evaluates at each cache size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    Formulation(Method),
    Centralized,
    Decentralized,
    RandomPopularity,
    RandomLength,
}

impl CurveMethod {
    pub fn id(self) -> &'static str {
        match self {
            CurveMethod::Formulation(m) => m.id(),
            CurveMethod::Centralized => "centralized",
            CurveMethod::Decentralized => "decentralized",
            CurveMethod::RandomPopularity => "random-pop",
            CurveMethod::RandomLength => "random-len",
        }
    }
}

impl FromStr for CurveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "centralized" => CurveMethod::Centralized,
            "decentralized" => CurveMethod::Decentralized,
            "random-pop" => CurveMethod::RandomPopularity,
            "random-len" => CurveMethod::RandomLength,
            other => CurveMethod::Formulation(other.parse()?),
        })
    }
}

impl fmt::Display for CurveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "M")]
    pub cache: f64,
    pub method: String,
    pub expected_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percent_increase: Option<f64>,
}

/// The template with cache size `m`: every user gets `m`, or for a class
/// template small users get `0.8 m` and large users `1.2 m`.
pub fn config_at(template: &SystemConfig, m: f64) -> Result<SystemConfig> {
    match template.classes() {
        Some(c) => template.with_classes(CacheClasses {
            small_users: c.small_users,
            small_cache: SMALL_CLASS_FACTOR * m,
            large_cache: LARGE_CLASS_FACTOR * m,
        }),
        None => template.with_uniform_cache(m),
    }
}

fn symmetric_scheme(cfg: &SystemConfig, method: CurveMethod) -> Result<Placement> {
    if !cfg.has_uniform_lengths() || !cfg.has_uniform_cache() {
        return Err(Error::Unsupported {
            method: if method == CurveMethod::Centralized { "centralized" } else { "decentralized" },
            requirement: "equal file lengths and cache sizes".into(),
        });
    }
    let f = cfg.file_length(0);
    let m = cfg.cache_sizes()[0] / f;
    let k = cfg.num_users();
    let n = cfg.num_files();
    let gs = if method == CurveMethod::Centralized {
        centralized_scheme(k, n, m)?
    } else {
        decentralized_scheme(k, (m / n as f64).min(1.0))?
    };
    let unit = expand_to_placement(&cfg.with_file_lengths(vec![1.0; n])?, &gs)?;
    let sizes = unit.sizes().iter().map(|row| row.iter().map(|v| v * f).collect()).collect();
    Placement::from_sizes(k, sizes)
}

/// Placement produced by `method` for `cfg`.
pub fn placement_for(cfg: &SystemConfig, method: CurveMethod, backend: Backend) -> Result<Placement> {
    match method {
        CurveMethod::Formulation(m) => Ok(m.build(cfg)?.solve(backend)?.placement),
        CurveMethod::Centralized | CurveMethod::Decentralized => symmetric_scheme(cfg, method),
        CurveMethod::RandomPopularity => random_popularity_baseline(cfg),
        CurveMethod::RandomLength => random_length_baseline(cfg),
    }
}

/// Evaluates every method at every grid point, in grid-major order.
pub fn sweep_curve(
    template: &SystemConfig,
    grid: &[f64],
    methods: &[CurveMethod],
    backend: Backend,
) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::Argument("empty cache grid".into()));
    }
    if methods.is_empty() {
        return Err(Error::Argument("no methods given".into()));
    }
    let mut out = Vec::with_capacity(grid.len() * methods.len());
    for &m in grid {
        let cfg = config_at(template, m).map_err(|e| at_point(m, "config", e))?;
        for &method in methods {
            let rate = placement_for(&cfg, method, backend)
                .and_then(|pl| expected_rate(&cfg, &pl))
                .map_err(|e| at_point(m, method.id(), e))?;
            out.push(CurvePoint {
                cache: m,
                method: method.id().to_string(),
                expected_rate: rate.expected_rate,
                percent_increase: None,
            });
        }
    }
    Ok(out)
}

fn at_point(m: f64, method: &str, e: Error) -> Error {
    Error::Argument(format!("M={m}, {method}: {e}"))
}

/// Fills `percent_increase = 100 (R - R_ref) / R_ref` against the
/// `reference` method at the same cache size. A zero reference rate gives 0
/// when the rates agree.
pub fn add_percent_increase(points: &mut [CurvePoint], reference: &str) -> Result<()> {
    let refs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.method == reference)
        .map(|p| (p.cache, p.expected_rate))
        .collect();
    for p in points.iter_mut() {
        let r = refs
            .iter()
            .find(|(m, _)| *m == p.cache)
            .map(|r| r.1)
            .ok_or_else(|| Error::Argument(format!("no {reference} rate at M={}", p.cache)))?;
        let diff = p.expected_rate - r;
        p.percent_increase = Some(if r.abs() < 1e-12 {
            if diff.abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            100.0 * diff / r
        });
    }
    Ok(())
}

/// `M,method,expected_rate[,percent_increase]` with `precision` decimals,
/// or shortest round-trip formatting when `None`.
pub fn curve_csv(points: &[CurvePoint], precision: Option<usize>) -> String {
    let fmt = |x: f64| match precision {
        Some(d) => format!("{x:.d$}"),
        None => format!("{x}"),
    };
    let percent = points.iter().any(|p| p.percent_increase.is_some());
    let mut out = String::from("M,method,expected_rate");
    if percent {
        out.push_str(",percent_increase");
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}", p.cache, p.method, fmt(p.expected_rate)));
        if percent {
            out.push(',');
            out.push_str(&p.percent_increase.map(fmt).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}
