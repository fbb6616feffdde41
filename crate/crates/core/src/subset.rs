//! User subsets as bitmasks over `[K]`.
//!
//! User `k` (zero-based) is bit `k`. The external key format is the sorted
//! one-based member list joined by commas (`"1,3,4"`), with `""` for the empty
//! set.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest supported number of users; placements hold `N * 2^K` sizes.
pub const MAX_USERS: usize = 20;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u32) -> Self {
        Subset(mask)
    }

    pub fn full(num_users: usize) -> Self {
        Subset(((1u64 << num_users) - 1) as u32)
    }

    pub fn from_users(users: &[usize]) -> Self {
        Subset(users.iter().fold(0u32, |m, &k| m | (1 << k)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn with(self, user: usize) -> Self {
        Subset(self.0 | (1 << user))
    }

    pub fn without(self, user: usize) -> Self {
        Subset(self.0 & !(1 << user))
    }

    pub fn intersection(self, other: Subset) -> Self {
        Subset(self.0 & other.0)
    }

    /// Members in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    pub fn key(self) -> String {
        self.members()
            .map(|k| (k + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_key(key: &str, num_users: usize) -> Result<Self> {
        let key = key.trim();
        if key.is_empty() || key == "{}" {
            return Ok(Subset::EMPTY);
        }
        let mut mask = 0u32;
        for part in key.split(',') {
            let user: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad subset key {key:?}")))?;
            if user == 0 || user > num_users {
                return Err(Error::Dimension(format!(
                    "subset key {key:?} names user {user} outside 1..={num_users}"
                )));
            }
            mask |= 1 << (user - 1);
        }
        Ok(Subset(mask))
    }

    /// Ordering by size, then by the lexicographic order of member lists.
    pub fn canonical_cmp(&self, other: &Subset) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.members().cmp(other.members()))
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

#[derive(Clone)]
pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let k = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(k)
    }
}

/// Every subset of `[K]`, sorted by size and then lexicographically.
pub fn canonical_order(num_users: usize) -> Vec<Subset> {
    let mut all: Vec<Subset> = (0..1u32 << num_users).map(Subset).collect();
    all.sort_by(Subset::canonical_cmp);
    all
}

/// All subsets of `[K]` in mask order (`0..2^K`).
pub fn all_subsets(num_users: usize) -> impl Iterator<Item = Subset> {
    (0..1u32 << num_users).map(Subset)
}

impl serde::Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}
