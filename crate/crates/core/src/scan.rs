//! Streaming histogram construction over manifest files.
//!
//! Records are never held in memory. Duplicate ids are detected with 64-bit id
//! fingerprints: the first pass counts every record and collects fingerprints,
//! which are then sorted to find repeats. Only if repeats exist does a second
//! pass re-read the files to settle them: identical records are dropped,
//! conflicting records are an error, and distinct ids that share a fingerprint
//! are dropped as duplicates. The chance of at least one such false drop among
//! `n` ids is about `n² / 2⁶⁵` (≈3·10⁻⁶ for 10⁷ ids).
//!
//! Files are scanned concurrently; each file is read sequentially.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::hash::id_fingerprint;
use crate::histogram::{ClassHistogram, HistogramError, LabelMode};
use crate::manifest::{open_records, ManifestError, ManifestFormat, SampleRecord};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("{}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: ManifestError,
    },
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanInput {
    pub path: PathBuf,
    pub format: ManifestFormat,
}

#[derive(Clone, Debug, Default)]
pub struct ScanOptions {
    pub mode: LabelMode,
    pub declared: Option<BTreeSet<String>>,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanOutcome {
    pub histogram: ClassHistogram,
    /// Records read, including dropped duplicates.
    pub records_read: u64,
    pub duplicates_dropped: u64,
    /// Distinct ids dropped because their fingerprint matched an earlier id.
    pub fingerprint_collisions: u64,
}

struct FilePass {
    histogram: ClassHistogram,
    fingerprints: Vec<u64>,
}

fn first_pass(input: &ScanInput, opts: &ScanOptions) -> Result<FilePass, ScanError> {
    let wrap = |source| ScanError::Manifest {
        path: input.path.clone(),
        source,
    };
    let mut histogram = ClassHistogram::new();
    let mut fingerprints = Vec::new();
    for item in open_records(&input.path, input.format).map_err(wrap)? {
        let (_, record) = item.map_err(wrap)?;
        check_declared(&record, opts.declared.as_ref()).map_err(wrap)?;
        for label in opts.mode.labels(&record) {
            histogram.increment(label)?;
        }
        fingerprints.push(id_fingerprint(record.id()));
    }
    Ok(FilePass {
        histogram,
        fingerprints,
    })
}

fn check_declared(
    record: &SampleRecord,
    declared: Option<&BTreeSet<String>>,
) -> Result<(), ManifestError> {
    if let Some(declared) = declared {
        if let Some(label) = record.labels().iter().find(|l| !declared.contains(*l)) {
            return Err(ManifestError::UndeclaredLabel {
                id: record.id().to_string(),
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// Builds the histogram of the union of `inputs` without materializing records.
pub fn scan_histogram(inputs: &[ScanInput], opts: &ScanOptions) -> Result<ScanOutcome, ScanError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| ScanError::Pool(e.to_string()))?;
    let passes: Vec<FilePass> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| first_pass(input, opts))
            .collect::<Result<_, _>>()
    })?;

    let mut histogram = ClassHistogram::new();
    if let Some(declared) = &opts.declared {
        for class in declared {
            histogram.declare(class.as_str());
        }
    }
    let mut fingerprints: Vec<u64> = Vec::new();
    for pass in passes {
        histogram = histogram.merge(&pass.histogram)?;
        if fingerprints.is_empty() {
            fingerprints = pass.fingerprints;
        } else {
            fingerprints.extend_from_slice(&pass.fingerprints);
        }
    }
    let records_read = fingerprints.len() as u64;

    fingerprints.sort_unstable();
    let repeated: HashSet<u64> = fingerprints
        .windows(2)
        .filter(|w| w[0] == w[1])
        .map(|w| w[0])
        .collect();
    drop(fingerprints);

    let mut outcome = ScanOutcome {
        histogram,
        records_read,
        duplicates_dropped: 0,
        fingerprint_collisions: 0,
    };
    if !repeated.is_empty() {
        settle_repeats(inputs, opts.mode, &repeated, &mut outcome)?;
    }
    Ok(outcome)
}

fn settle_repeats(
    inputs: &[ScanInput],
    mode: LabelMode,
    repeated: &HashSet<u64>,
    outcome: &mut ScanOutcome,
) -> Result<(), ScanError> {
    let mut first_seen: HashMap<u64, SampleRecord> = HashMap::new();
    for input in inputs {
        let wrap = |source| ScanError::Manifest {
            path: input.path.clone(),
            source,
        };
        for item in open_records(&input.path, input.format).map_err(wrap)? {
            let (pos, record) = item.map_err(wrap)?;
            let fp = id_fingerprint(record.id());
            if !repeated.contains(&fp) {
                continue;
            }
            match first_seen.get(&fp) {
                None => {
                    first_seen.insert(fp, record);
                }
                Some(seen) => {
                    if seen.id() == record.id() {
                        if *seen != record {
                            return Err(wrap(ManifestError::ConflictingDuplicate {
                                id: record.id().to_string(),
                                line: Some(pos.line),
                            }));
                        }
                        outcome.duplicates_dropped += 1;
                    } else {
                        outcome.fingerprint_collisions += 1;
                    }
                    for label in mode.labels(&record) {
                        outcome.histogram.decrement(label);
                    }
                }
            }
        }
    }
    Ok(())
}
