//! Synthetic histograms and manifests: Zipfian, balanced, or realizing a
//! given histogram exactly.
//!
//! Class ids are `c0001`, `c0002`, … in rank order (zero padded to at least
//! four digits so byte order matches rank order). Record ids are
//! `<class>-<index>-<hash>`, where the hash suffix is keyed by the seed.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::keyed_hash;
use crate::histogram::ClassHistogram;
use crate::manifest::{Manifest, SampleRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

const SYNTH_SOURCE: &str = "synth";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub num_classes: u64,
    pub total_samples: u64,
    /// Rank exponent; 0 gives a balanced histogram, 1 is classic Zipf.
    pub exponent: f64,
    pub seed: u64,
}

fn digits(n: u64) -> usize {
    n.max(1).ilog10() as usize + 1
}

/// Class identifier for 1-based `rank` among `num_classes` classes.
pub fn class_id(rank: u64, num_classes: u64) -> String {
    let width = digits(num_classes).max(4);
    format!("c{rank:0width$}")
}

/// Largest-remainder apportionment of `total` over `weights`: every share is
/// the floor of its exact quota, and the leftover units go to the largest
/// fractional parts, ties to the lower index.
pub fn apportion(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut shares: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = shares.iter().sum();

    let mut order: Vec<usize> = (0..weights.len()).collect();
    let frac = |i: usize| quotas[i] - quotas[i].floor();
    if assigned <= total {
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle().take((total - assigned) as usize) {
            shares[i] += 1;
        }
    } else {
        // rounding noise pushed the floors over the total; take back from the smallest fractions
        order.retain(|&i| shares[i] > 0);
        order.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(b.cmp(&a)));
        for &i in order.iter().take((assigned - total) as usize) {
            shares[i] -= 1;
        }
    }
    shares
}

impl ZipfSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_classes == 0 {
            return Err(SynthError::InvalidSpec("num_classes must be at least 1".into()));
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "exponent must be a finite non-negative number, got {}",
                self.exponent
            )));
        }
        Ok(())
    }
}

/// Class at rank r receives a share of N proportional to r^(−s).
pub fn zipf_histogram(spec: &ZipfSpec) -> Result<ClassHistogram, SynthError> {
    spec.validate()?;
    let weights: Vec<f64> = (1..=spec.num_classes)
        .map(|r| (r as f64).powf(-spec.exponent))
        .collect();
    let counts = apportion(&weights, spec.total_samples);
    let h = ClassHistogram::from_counts(
        counts
            .into_iter()
            .enumerate()
            .map(|(i, n)| (class_id(i as u64 + 1, spec.num_classes), n)),
    )
    .expect("shares sum to total_samples");
    Ok(h)
}

fn record_id(class: &str, index: u64, width: usize, seed: u64) -> String {
    let suffix = keyed_hash(seed, &[class.as_bytes(), &index.to_le_bytes()]);
    format!("{class}-{index:0width$}-{suffix:016x}")
}

fn class_records(class: &str, n: u64, seed: u64) -> impl Iterator<Item = SampleRecord> + '_ {
    let width = digits(n.saturating_sub(1)).max(6);
    (0..n).map(move |i| {
        SampleRecord::new(
            record_id(class, i, width, seed),
            vec![class.to_string()],
            Some(SYNTH_SOURCE.to_string()),
        )
        .expect("synthetic record is valid")
    })
}

/// Records realizing `h` exactly; every class of `h` (zero-count ones too) is
/// declared.
pub fn manifest_from_histogram(h: &ClassHistogram, seed: u64) -> Manifest {
    let declared: BTreeSet<String> = h.counts().keys().cloned().collect();
    let records: Vec<SampleRecord> = h
        .counts()
        .iter()
        .flat_map(|(class, &n)| class_records(class, n, seed))
        .collect();
    Manifest::from_records(records, Some(declared)).expect("synthetic ids are unique")
}

/// `num_classes` × `per_class` synthetic records.
pub fn balanced_manifest(num_classes: u64, per_class: u64, seed: u64) -> Result<Manifest, SynthError> {
    if num_classes == 0 || per_class == 0 {
        return Err(SynthError::InvalidSpec(
            "num_classes and per_class must be at least 1".into(),
        ));
    }
    let h = ClassHistogram::from_counts(
        (1..=num_classes).map(|r| (class_id(r, num_classes), per_class)),
    )
    .expect("balanced counts fit");
    Ok(manifest_from_histogram(&h, seed))
}

/// Streams the canonical JSONL of `manifest_from_histogram(h, seed)` without
/// building it in memory.
pub fn write_histogram_jsonl<W: Write>(h: &ClassHistogram, seed: u64, mut out: W) -> io::Result<()> {
    for (class, &n) in h.counts() {
        for record in class_records(class, n, seed) {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}
