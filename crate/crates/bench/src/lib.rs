//! Fixtures shared by the benchmarks in `benches/`.

use cachecraft::{zipf_popularities, CacheClasses, SystemConfig};

pub const LENGTHS: [f64; 6] = [9.0 / 6.0, 8.0 / 6.0, 7.0 / 6.0, 5.0 / 6.0, 4.0 / 6.0, 3.0 / 6.0];

/// `k` users, `n` files with Zipf(0.56) popularity and cache `m`.
pub fn zipf_config(k: usize, n: usize, m: f64) -> SystemConfig {
    SystemConfig::uniform(k, n, m)
        .unwrap()
        .with_popularities(zipf_popularities(n, 0.56).unwrap())
        .unwrap()
}

/// Four users, six unequal files, Zipf popularity, two cache classes.
pub fn two_class_config(m: f64) -> SystemConfig {
    zipf_config(4, 6, m)
        .with_file_lengths(LENGTHS.to_vec())
        .unwrap()
        .with_classes(CacheClasses {
            small_users: 2,
            small_cache: 0.8 * m,
            large_cache: 1.2 * m,
        })
        .unwrap()
}
