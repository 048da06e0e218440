//! Shared fixtures and brute-force oracles for integration tests.
//!
//! The oracles here recompute results from raw counts by the most direct
//! route available and do not call into the code paths they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dqkit::manifest::{Manifest, SampleRecord};
use dqkit::ClassHistogram;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Head-class count with integer arithmetic: round_half_up(k·C/100), at least 1.
pub fn oracle_head_count(k_percent: u64, classes: u64) -> u64 {
    ((2 * k_percent * classes + 100) / 200).max(1)
}

/// Left-skewedness by repeated maximum extraction over raw counts.
pub fn oracle_left_skew(counts: &[u64], k_percent: u64) -> f64 {
    let m = oracle_head_count(k_percent, counts.len() as u64);
    let mut remaining: Vec<u64> = counts.to_vec();
    let mut head = 0u64;
    for _ in 0..m {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .fold((usize::MAX, 0u64), |best, (i, &c)| {
                if best.0 == usize::MAX || c > best.1 {
                    (i, c)
                } else {
                    best
                }
            });
        head += remaining.swap_remove(idx);
    }
    let total: u64 = counts.iter().sum();
    100.0 * head as f64 / total as f64
}

/// Long-tailedness by counting classes strictly below `k`.
pub fn oracle_long_tail(counts: &[u64], k: u64) -> f64 {
    let mut below = 0usize;
    for &c in counts {
        if c < k {
            below += 1;
        }
    }
    100.0 * below as f64 / counts.len() as f64
}

/// Histogram by plain counting of primary labels into a fresh map.
pub fn oracle_counts(records: &[SampleRecord]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.labels()[0].clone()).or_insert(0) += 1;
    }
    m
}

pub fn histogram(counts: &[(String, u64)]) -> ClassHistogram {
    ClassHistogram::from_counts(counts.iter().cloned()).unwrap()
}

pub fn random_counts(rng: &mut ChaCha8Rng, max_classes: usize, max_count: u64) -> Vec<(String, u64)> {
    let c = rng.random_range(1..=max_classes);
    (0..c)
        .map(|i| (format!("k{i:03}"), rng.random_range(0..=max_count)))
        .collect()
}

/// Random manifest: up to `max_classes` classes with up to `max_per_class`
/// records each, in shuffled order. Ids are unique across the manifest.
pub fn random_manifest(
    rng: &mut ChaCha8Rng,
    max_classes: usize,
    max_per_class: usize,
    tag: &str,
) -> Manifest {
    let c = rng.random_range(1..=max_classes);
    let mut records = Vec::new();
    for class in 0..c {
        let n = rng.random_range(0..=max_per_class);
        for i in 0..n {
            records.push(
                SampleRecord::new(
                    format!("{tag}{class}-{i}-{:x}", rng.random::<u32>()),
                    vec![format!("class{class:02}")],
                    Some(tag.to_string()),
                )
                .unwrap(),
            );
        }
    }
    records.shuffle(rng);
    Manifest::from_records(records, None).unwrap()
}

pub fn shuffled(m: &Manifest, rng: &mut ChaCha8Rng) -> Manifest {
    let mut records = m.records().to_vec();
    records.shuffle(rng);
    Manifest::from_records(records, m.declared_label_set().cloned()).unwrap()
}

/// Columns of the bundled class-balance results table.
pub const BAL_ACC: [f64; 9] = [85.3, 82.5, 82.2, 79.3, 76.6, 73.9, 73.4, 67.7, 58.2];
pub const BAL_LT500: [f64; 9] = [0.0, 0.0, 0.0, 0.0, 0.0, 9.0, 9.0, 64.0, 67.0];
pub const BAL_LT100: [f64; 9] = [0.0, 0.0, 0.0, 0.0, 0.0, 9.0, 9.0, 9.0, 9.0];
pub const BAL_SKEW: [f64; 9] = [5.0, 5.0, 45.0, 13.0, 25.0, 31.0, 12.0, 64.0, 18.0];
pub const BAL_SIZE: [f64; 9] = [
    125_000.0, 130_000.0, 190_000.0, 101_000.0, 90_000.0, 135_000.0, 105_000.0, 135_000.0,
    53_000.0,
];

/// Pairs where the higher-indicator item also has the higher accuracy
/// (discordant under "higher indicator is worse"), by enumerating all pairs.
pub fn oracle_discordant_higher_worse(x: &[f64], y: &[f64]) -> u64 {
    let mut d = 0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if x[i] > x[j] && y[i] > y[j] {
                d += 1;
            }
        }
    }
    d
}
