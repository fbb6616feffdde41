//! Bit-level placement and coded delivery.
//!
//! Each file is split contiguously into subfiles in canonical subset order.
//! User `k` caches every subfile `W_S` with `k in S`; for every nonempty `S`
//! the server sends the XOR of the zero-padded `W^(d_k)_{S \ k}`, `k in S`.

use std::io::Write;
use std::ops::Range;

use bitvec::prelude::*;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluator::rate_for_demand;
use crate::model::{Demand, Placement, SystemConfig};
use crate::probability::{check_enumeration, demand_count};
use crate::subset::{canonical_order, Subset};

pub const DEFAULT_UNIT_BITS: u64 = 2400;

pub type Bits = BitVec<u8, Msb0>;

/// Files as bit strings plus their subfile layout.
#[derive(Debug, Clone)]
pub struct BitCatalog {
    num_users: usize,
    unit_bits: u64,
    files: Vec<Bits>,
    layout: Vec<Vec<(Subset, Range<usize>)>>,
}

/// Integer parts of `quotas` scaled to sum to `total`, with leftover units
/// going to the largest fractional remainders (earlier entries win ties).
pub fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = quotas.iter().sum();
    if sum <= 0.0 {
        let mut out = vec![0; quotas.len()];
        if let Some(first) = out.first_mut() {
            *first = total;
        }
        return out;
    }
    let scaled: Vec<f64> = quotas.iter().map(|q| q.max(0.0) * total as f64 / sum).collect();
    let mut out: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Lays out every file as `round(F_l * unit_bits)` pseudo-random bits
/// (seeded) split into subfiles of `round(|W_S| * unit_bits)` bits.
pub fn materialize(cfg: &SystemConfig, pl: &Placement, unit_bits: u64, seed: u64) -> Result<BitCatalog> {
    let k = cfg.num_users();
    if pl.num_users() != k || pl.num_files() != cfg.num_files() {
        return Err(Error::Dimension("placement does not match config".into()));
    }
    if unit_bits == 0 {
        return Err(Error::Argument("unit_bits must be positive".into()));
    }
    let order = canonical_order(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut files = Vec::with_capacity(cfg.num_files());
    let mut layout = Vec::with_capacity(cfg.num_files());
    for l in 0..cfg.num_files() {
        let len = (cfg.file_length(l) * unit_bits as f64).round() as usize;
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let mut bits = Bits::from_vec(bytes);
        bits.truncate(len);
        files.push(bits);
        let quotas: Vec<f64> = order.iter().map(|&s| pl.size(l, s)).collect();
        let lengths = largest_remainder(&quotas, len);
        let mut start = 0;
        layout.push(
            order
                .iter()
                .zip(lengths)
                .map(|(&s, n)| {
                    let r = start..start + n;
                    start += n;
                    (s, r)
                })
                .collect(),
        );
    }
    Ok(BitCatalog {
        num_users: k,
        unit_bits,
        files,
        layout,
    })
}

impl BitCatalog {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_files(&self) -> usize {
        self.files.len()
    }

    pub fn unit_bits(&self) -> u64 {
        self.unit_bits
    }

    pub fn file(&self, l: usize) -> &BitSlice<u8, Msb0> {
        &self.files[l]
    }

    /// `(subset, bit range)` pairs of file `l` in canonical order.
    pub fn layout(&self, l: usize) -> &[(Subset, Range<usize>)] {
        &self.layout[l]
    }

    pub fn subfile_range(&self, l: usize, s: Subset) -> Range<usize> {
        self.layout[l]
            .iter()
            .find(|(t, _)| *t == s)
            .map(|(_, r)| r.clone())
            .expect("every subset is laid out")
    }

    pub fn subfile(&self, l: usize, s: Subset) -> &BitSlice<u8, Msb0> {
        &self.files[l][self.subfile_range(l, s)]
    }

    /// Subfiles held by user `k`: `W_S^(l)` for every file and every `S`
    /// containing `k`.
    pub fn user_cache(&self, k: usize) -> UserCache {
        let entries = (0..self.num_files())
            .flat_map(|l| {
                self.layout[l]
                    .iter()
                    .filter(|(s, _)| s.contains(k))
                    .map(move |(s, r)| ((l, *s), self.files[l][r.clone()].to_bitvec()))
            })
            .collect();
        UserCache { user: k, entries }
    }
}

/// One user's cache contents.
#[derive(Debug, Clone)]
pub struct UserCache {
    user: usize,
    entries: std::collections::HashMap<(usize, Subset), Bits>,
}

impl UserCache {
    pub fn user(&self) -> usize {
        self.user
    }

    pub fn get(&self, file: usize, s: Subset) -> Option<&Bits> {
        self.entries.get(&(file, s))
    }

    pub fn stored_bits(&self) -> usize {
        self.entries.values().map(|b| b.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubfileId {
    pub user: usize,
    pub file: usize,
    pub subset: Subset,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transmission {
    pub subset: Subset,
    pub bits: usize,
    pub constituents: Vec<SubfileId>,
    #[serde(skip)]
    pub payload: Bits,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransmissionLog {
    pub demand: Demand,
    pub unit_bits: u64,
    pub total_bits: usize,
    pub transmissions: Vec<Transmission>,
}

impl TransmissionLog {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("log serializes")
    }

    /// Payloads in log order, each padded to whole bytes.
    pub fn write_payloads(&self, mut out: impl Write) -> Result<()> {
        for t in &self.transmissions {
            out.write_all(t.payload.as_raw_slice()).map_err(|source| Error::Io {
                path: "payload dump".into(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn find(&self, s: Subset) -> Option<&Transmission> {
        self.transmissions.iter().find(|t| t.subset == s)
    }

    pub fn find_mut(&mut self, s: Subset) -> Option<&mut Transmission> {
        self.transmissions.iter_mut().find(|t| t.subset == s)
    }
}

fn xor_into(acc: &mut BitSlice<u8, Msb0>, part: &BitSlice<u8, Msb0>) {
    let n = part.len();
    *acc.get_mut(..n).expect("payload is at least as long as each part") ^= part;
}

fn check_demand(cat: &BitCatalog, d: &Demand) -> Result<()> {
    if d.num_users() != cat.num_users {
        return Err(Error::Dimension(format!(
            "demand has {} users, catalog {}",
            d.num_users(),
            cat.num_users
        )));
    }
    if let Some(&f) = d.files().iter().find(|&&f| f >= cat.num_files()) {
        return Err(Error::Dimension(format!("demand names file {}", f + 1)));
    }
    Ok(())
}

/// Coded transmissions for demand `d`; zero-length payloads are omitted.
pub fn deliver(cat: &BitCatalog, d: &Demand) -> Result<TransmissionLog> {
    check_demand(cat, d)?;
    let mut transmissions = Vec::new();
    for s in canonical_order(cat.num_users) {
        if s.is_empty() {
            continue;
        }
        let constituents: Vec<SubfileId> = s
            .members()
            .map(|k| SubfileId {
                user: k,
                file: d.file(k),
                subset: s.without(k),
            })
            .collect();
        let bits = constituents
            .iter()
            .map(|c| cat.subfile_range(c.file, c.subset).len())
            .max()
            .unwrap_or(0);
        if bits == 0 {
            continue;
        }
        let mut payload = Bits::repeat(false, bits);
        for c in &constituents {
            xor_into(&mut payload, cat.subfile(c.file, c.subset));
        }
        transmissions.push(Transmission {
            subset: s,
            bits,
            constituents,
            payload,
        });
    }
    Ok(TransmissionLog {
        demand: d.clone(),
        unit_bits: cat.unit_bits,
        total_bits: transmissions.iter().map(|t| t.bits).sum(),
        transmissions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeFailure {
    pub subset: Subset,
    /// First wrong bit, counted from the start of the requested file.
    pub offset: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserDecode {
    pub user: usize,
    pub file: usize,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<DecodeFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecodeReport {
    pub demand: Demand,
    pub users: Vec<UserDecode>,
}

impl DecodeReport {
    pub fn decoded(&self) -> usize {
        self.users.iter().filter(|u| u.success).count()
    }

    pub fn all_decoded(&self) -> bool {
        self.decoded() == self.users.len()
    }
}

/// User `k` rebuilds its file from its cache and the log, knowing only the
/// subfile layout; the result is compared bit for bit with the original.
fn decode_user(cat: &BitCatalog, log: &TransmissionLog, d: &Demand, k: usize) -> UserDecode {
    let cache = cat.user_cache(k);
    let file = d.file(k);
    let mut rebuilt = Bits::with_capacity(cat.files[file].len());
    let mut missing = None;
    for (t, range) in cat.layout(file) {
        let need = range.len();
        if t.contains(k) {
            rebuilt.extend_from_bitslice(cache.get(file, *t).expect("own subfile cached"));
            continue;
        }
        if need == 0 {
            continue;
        }
        let s = t.with(k);
        match log.find(s) {
            Some(tx) if tx.bits >= need => {
                let mut buf = tx.payload.clone();
                for other in s.members().filter(|&u| u != k) {
                    let part = cache
                        .get(d.file(other), s.without(other))
                        .expect("other users' pieces are cached");
                    xor_into(&mut buf, part);
                }
                rebuilt.extend_from_bitslice(&buf[..need]);
            }
            _ => {
                missing.get_or_insert((*t, range.start));
                rebuilt.extend(std::iter::repeat(false).take(need));
            }
        }
    }
    let truth = &cat.files[file];
    let mismatch = rebuilt.iter().by_vals().zip(truth.iter().by_vals()).position(|(a, b)| a != b);
    let failure = match (missing, mismatch) {
        (Some((subset, offset)), _) => Some(DecodeFailure {
            subset,
            offset,
            reason: "transmission missing".into(),
        }),
        (None, Some(offset)) => {
            let subset = cat
                .layout(file)
                .iter()
                .find(|(_, r)| r.contains(&offset))
                .map(|(s, _)| *s)
                .expect("offset lies in some subfile");
            Some(DecodeFailure {
                subset,
                offset,
                reason: "bit mismatch".into(),
            })
        }
        (None, None) => None,
    };
    UserDecode {
        user: k,
        file,
        success: failure.is_none(),
        failure,
    }
}

pub fn decode_all(cat: &BitCatalog, log: &TransmissionLog, d: &Demand) -> Result<DecodeReport> {
    check_demand(cat, d)?;
    Ok(DecodeReport {
        demand: d.clone(),
        users: (0..cat.num_users).map(|k| decode_user(cat, log, d, k)).collect(),
    })
}

/// Result of delivering one demand.
#[derive(Debug, Clone, Serialize)]
pub struct DemandOutcome {
    pub demand: Demand,
    pub decoded: usize,
    pub users: usize,
    pub transmitted_bits: usize,
    /// `rate_for_demand * unit_bits`.
    pub expected_bits: f64,
}

impl DemandOutcome {
    pub fn bit_gap(&self) -> f64 {
        (self.transmitted_bits as f64 - self.expected_bits).abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub unit_bits: u64,
    pub seed: u64,
    pub demands: usize,
    pub decoded_users: usize,
    pub total_users: usize,
    pub transmitted_bits: usize,
    pub max_bit_gap: f64,
    pub outcomes: Vec<DemandOutcome>,
}

impl SimulationSummary {
    pub fn success_rate(&self) -> f64 {
        if self.total_users == 0 {
            1.0
        } else {
            self.decoded_users as f64 / self.total_users as f64
        }
    }
}

/// Materializes once and delivers and decodes each demand, in parallel,
/// keeping the input order.
pub fn simulate(
    cfg: &SystemConfig,
    pl: &Placement,
    demands: &[Demand],
    unit_bits: u64,
    seed: u64,
) -> Result<SimulationSummary> {
    let cat = materialize(cfg, pl, unit_bits, seed)?;
    let outcomes: Vec<DemandOutcome> = demands
        .par_iter()
        .map(|d| {
            let log = deliver(&cat, d)?;
            let report = decode_all(&cat, &log, d)?;
            Ok(DemandOutcome {
                demand: d.clone(),
                decoded: report.decoded(),
                users: report.users.len(),
                transmitted_bits: log.total_bits,
                expected_bits: rate_for_demand(pl, d)? * unit_bits as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SimulationSummary {
        unit_bits,
        seed,
        demands: outcomes.len(),
        decoded_users: outcomes.iter().map(|o| o.decoded).sum(),
        total_users: outcomes.iter().map(|o| o.users).sum(),
        transmitted_bits: outcomes.iter().map(|o| o.transmitted_bits).sum(),
        max_bit_gap: outcomes.iter().map(DemandOutcome::bit_gap).fold(0.0, f64::max),
        outcomes,
    })
}

/// [`simulate`] over all `N^K` demands.
pub fn simulate_all(cfg: &SystemConfig, pl: &Placement, unit_bits: u64, seed: u64) -> Result<SimulationSummary> {
    check_enumeration(demand_count(cfg.num_users(), cfg.num_files()))?;
    let demands: Vec<Demand> = Demand::all(cfg.num_users(), cfg.num_files()).collect();
    simulate(cfg, pl, &demands, unit_bits, seed)
}

/// `count` independent demands drawn from the popularity profile.
pub fn sample_demands(cfg: &SystemConfig, count: usize, seed: u64) -> Result<Vec<Demand>> {
    let dist = WeightedIndex::new(cfg.popularities()).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let files = (0..cfg.num_users()).map(|_| dist.sample(&mut rng)).collect();
            Demand::new(files, cfg.num_files())
        })
        .collect()
}
