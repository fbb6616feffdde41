//! Order statistics of i.i.d. demands and combinatorial helpers.
//!
//! `Y_m` is the `(m+1)`-th smallest requested file index among `K` users whose
//! requests are independent draws from `p`. Tables use zero-based file indices.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default bound on exhaustively enumerated items (demand vectors, epigraph
/// rows).
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;
pub const ENUM_CAP_ENV: &str = "CACHECRAFT_ENUM_CAP";

const CLAMP_TOL: f64 = 1e-12;
const ORACLE_CHUNK: u64 = 1 << 14;

/// The enumeration cap, honouring `CACHECRAFT_ENUM_CAP` when it parses.
pub fn enumeration_cap() -> u64 {
    std::env::var(ENUM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Errors when `count` exceeds the current enumeration cap.
pub fn check_enumeration(count: u128) -> Result<()> {
    let cap = enumeration_cap();
    if count > cap as u128 {
        return Err(Error::EnumerationCap {
            requested: count,
            cap,
        });
    }
    Ok(())
}

/// `N^K` as an exact integer, saturating.
pub fn demand_count(num_users: usize, num_files: usize) -> u128 {
    (0..num_users).fold(1u128, |acc, _| acc.saturating_mul(num_files as u128))
}

/// Binomial coefficient with `C(n, k) = 0` whenever `n < 0`, `k < 0` or `k > n`.
pub fn binom(n: i64, k: i64) -> u128 {
    if n < 0 || k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc = 1u128;
    for i in 0..k {
        // Exact: acc * (n - i) is divisible by i + 1 at every step.
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// [`binom`] as a float.
pub fn binom_f(n: i64, k: i64) -> f64 {
    binom(n, k) as f64
}

/// A multinomial coefficient `n! / (k_1! ... k_r!)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multinomial {
    n: u32,
    parts: Vec<u32>,
}

impl Multinomial {
    pub fn new(parts: Vec<u32>) -> Self {
        Multinomial {
            n: parts.iter().sum(),
            parts,
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Product of binomials `C(k_1, k_1) C(k_1 + k_2, k_2) ...`, exact.
    pub fn coefficient(&self) -> u128 {
        let mut seen = 0i64;
        let mut acc = 1u128;
        for &k in &self.parts {
            seen += k as i64;
            acc *= binom(seen, k as i64);
        }
        acc
    }
}

/// `probs[m][i] = Pr[Y_m = i]` for `m in 0..K`, `i in 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStatTable {
    probs: Vec<Vec<f64>>,
}

impl OrderStatTable {
    pub fn from_rows(probs: Vec<Vec<f64>>) -> Self {
        OrderStatTable { probs }
    }

    pub fn num_rows(&self) -> usize {
        self.probs.len()
    }

    pub fn num_files(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    /// `Pr[Y_m = file]`, with `file` zero-based.
    pub fn prob(&self, m: usize, file: usize) -> f64 {
        self.probs[m][file]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn max_abs_diff(&self, other: &OrderStatTable) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with a header `m,1,2,...,N` and one row per order statistic.
    pub fn to_csv(&self, precision: Option<usize>) -> String {
        let mut out = String::from("m");
        for i in 1..=self.num_files() {
            out.push_str(&format!(",{i}"));
        }
        out.push('\n');
        for (m, row) in self.probs.iter().enumerate() {
            out.push_str(&m.to_string());
            for v in row {
                match precision {
                    Some(d) => out.push_str(&format!(",{v:.d$}")),
                    None => out.push_str(&format!(",{v}")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_popularities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::config("p", "at least one file is required"));
    }
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0 && **x <= 1.0)) {
        return Err(Error::config("p", format!("popularities must lie in [0, 1], got {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config("p", format!("popularities must sum to 1 (sum is {total})")));
    }
    Ok(())
}

/// `a^n - b^n` given `a - b = diff >= 0`, without subtracting two powers.
fn pow_diff(a: f64, b: f64, diff: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as i32;
    diff * (0..n).map(|i| a.powi(i) * b.powi(n - 1 - i)).sum::<f64>()
}

fn clamp(value: f64, m: usize, i: usize) -> Result<f64> {
    if value >= 0.0 {
        Ok(value.min(1.0))
    } else if value >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::Numeric(format!(
            "Pr[Y_{m} = {}] evaluated to {value}",
            i + 1
        )))
    }
}

/// Closed-form PMFs of the demand order statistics.
pub fn order_stat_pmf(p: &[f64], num_users: usize) -> Result<OrderStatTable> {
    check_popularities(p)?;
    let n = p.len();
    let k = num_users;
    // tail[i] = sum_{l >= i} p_l, head[i] = sum_{l < i} p_l.
    let mut tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] + p[i];
    }
    let mut head = vec![0.0; n + 1];
    for i in 0..n {
        head[i + 1] = head[i] + p[i];
    }
    let kf = k as f64;
    let mut probs = vec![vec![0.0; n]; k];
    for m in 0..k {
        for i in 0..n {
            let value = match m {
                0 => pow_diff(tail[i], tail[i + 1], p[i], k as u32),
                1 => {
                    let y0 = pow_diff(tail[i], tail[i + 1], p[i], k as u32);
                    let e = (k - 1) as u32;
                    let bracket = head[i] * pow_diff(tail[i], tail[i + 1], p[i], e)
                        - p[i] * tail[i + 1].powi(e as i32);
                    y0 + kf * bracket
                }
                _ if i == 0 => (0..k - m)
                    .map(|extra| {
                        let r = m + 1 + extra;
                        binom_f(k as i64, r as i64)
                            * p[0].powi(r as i32)
                            * tail[1].powi((k - r) as i32)
                    })
                    .sum(),
                _ => {
                    let e = (k - m) as u32;
                    let mut total = binom_f(k as i64, e as i64)
                        * pow_diff(tail[i], tail[i + 1], p[i], e)
                        * head[i].powi(m as i32);
                    for extra in 0..=k - 2 {
                        let lo = (m as i64 - 1 - extra as i64).max(0) as usize;
                        let hi = (m - 1).min(k - 2 - extra);
                        for b in lo..=hi {
                            let rest = k - 2 - extra - b;
                            let coef =
                                Multinomial::new(vec![2 + extra as u32, b as u32, rest as u32])
                                    .coefficient() as f64;
                            total += coef
                                * p[i].powi(2 + extra as i32)
                                * head[i].powi(b as i32)
                                * tail[i + 1].powi(rest as i32);
                        }
                    }
                    total
                }
            };
            probs[m][i] = clamp(value, m, i)?;
        }
    }
    Ok(OrderStatTable { probs })
}

/// Order statistics of a group of `group_size` users drawing from `p`.
/// A group of size zero yields an empty table.
pub fn group_order_stat_pmf(p: &[f64], group_size: usize) -> Result<OrderStatTable> {
    if group_size == 0 {
        check_popularities(p)?;
        return Ok(OrderStatTable { probs: Vec::new() });
    }
    order_stat_pmf(p, group_size)
}

/// Exhaustive enumeration of all `N^K` demand vectors. Work is split into
/// fixed chunks whose partial tables are summed in chunk order, so results do
/// not depend on the thread count.
pub fn order_stat_oracle(p: &[f64], num_users: usize) -> Result<OrderStatTable> {
    check_popularities(p)?;
    let n = p.len();
    let k = num_users;
    let count = demand_count(k, n);
    check_enumeration(count)?;
    let count = count as u64;
    let chunks = count.div_ceil(ORACLE_CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; k * n];
            let mut z = vec![0usize; k];
            let mut sorted = vec![0usize; k];
            let end = ((c + 1) * ORACLE_CHUNK).min(count);
            for idx in c * ORACLE_CHUNK..end {
                let mut rem = idx;
                for slot in z.iter_mut().rev() {
                    *slot = (rem % n as u64) as usize;
                    rem /= n as u64;
                }
                let prob: f64 = z.iter().map(|&f| p[f]).product();
                sorted.copy_from_slice(&z);
                sorted.sort_unstable();
                for (m, &f) in sorted.iter().enumerate() {
                    acc[m * n + f] += prob;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; k * n];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(OrderStatTable {
        probs: total.chunks(n.max(1)).take(k).map(<[f64]>::to_vec).collect(),
    })
}
