//! Evaluation-protocol helpers over score matrices: restricted-label-space
//! argmax, top-1 accuracy and average robustness.
//!
//! Restricting the label space ("masking" the scores of classes outside the
//! evaluation set) is done by excluding those columns from the argmax, which
//! is equivalent to setting them to −∞. Literal zeroing would let a masked
//! class win over allowed classes with negative logits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score matrix: {0}")]
    InvalidMatrix(String),
    #[error("score file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("allowed class `{0}` is not a score column")]
    UnknownClass(String),
    #[error("allowed class set is empty")]
    EmptyAllowed,
    #[error("length mismatch: {predicted} predictions, {truth} truth labels")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("no rows to score")]
    Empty,
    #[error("accuracy {0} is not a percentage")]
    NotAPercentage(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("accuracies file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-sample scores over an ordered set of training classes (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    classes: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(classes: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        if classes.is_empty() {
            return Err(EvalError::InvalidMatrix("no class columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(EvalError::InvalidMatrix("empty class identifier".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(EvalError::InvalidMatrix(format!("duplicate column `{c}`")));
            }
        }
        let mut values = Vec::with_capacity(rows.len() * classes.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != classes.len() {
                return Err(EvalError::InvalidMatrix(format!(
                    "row {i} has {} scores, expected {}",
                    row.len(),
                    classes.len()
                )));
            }
            if row.iter().any(|v| v.is_nan()) {
                return Err(EvalError::InvalidMatrix(format!("row {i} contains NaN")));
            }
            values.extend(row);
        }
        Ok(ScoreMatrix { classes, values })
    }

    /// CSV with a header row of class identifiers and one row of scores per sample.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut lines = reader.lines().enumerate();
        let classes: Vec<String> = loop {
            match lines.next() {
                None => return Err(EvalError::InvalidMatrix("missing header row".into())),
                Some((_, line)) => {
                    let line = line?;
                    let line = line.trim_end_matches('\r');
                    if !line.trim().is_empty() {
                        break line.split(',').map(str::to_string).collect();
                    }
                }
            }
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EvalError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        ScoreMatrix::new(classes, rows)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_rows(&self) -> usize {
        self.values.len() / self.classes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.classes.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Per-row argmax over the `allowed` columns only. Ties go to the smallest
    /// class identifier.
    pub fn mask_and_argmax(&self, allowed: &BTreeSet<String>) -> Result<Vec<&str>, EvalError> {
        if allowed.is_empty() {
            return Err(EvalError::EmptyAllowed);
        }
        let index: BTreeMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        // BTreeSet iteration gives the columns in identifier order
        let columns: Vec<usize> = allowed
            .iter()
            .map(|c| {
                index
                    .get(c.as_str())
                    .copied()
                    .ok_or_else(|| EvalError::UnknownClass(c.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(self
            .values
            .par_chunks(self.classes.len())
            .map(|row| {
                let mut best = columns[0];
                for &c in &columns[1..] {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                self.classes[best].as_str()
            })
            .collect())
    }
}

pub fn mask_and_argmax<'a>(
    scores: &'a ScoreMatrix,
    allowed: &BTreeSet<String>,
) -> Result<Vec<&'a str>, EvalError> {
    scores.mask_and_argmax(allowed)
}

/// Percentage of rows where prediction equals truth.
pub fn top1_accuracy<P: AsRef<str>, T: AsRef<str>>(
    predicted: &[P],
    truth: &[T],
) -> Result<f64, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.as_ref() == t.as_ref())
        .count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

/// Mean accuracy over a set of distribution-shift test sets.
pub fn average_robustness(shift_accuracies: &[f64]) -> Result<f64, EvalError> {
    if shift_accuracies.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&bad) = shift_accuracies.iter().find(|v| !(0.0..=100.0).contains(*v)) {
        return Err(EvalError::NotAPercentage(bad));
    }
    Ok(shift_accuracies.iter().sum::<f64>() / shift_accuracies.len() as f64)
}

/// Shift accuracies as a JSON object `{"shift": acc, ...}` or an array.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ShiftAccuracies {
    Named(BTreeMap<String, f64>),
    List(Vec<f64>),
}

impl ShiftAccuracies {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ShiftAccuracies::Named(m) => m.values().copied().collect(),
            ShiftAccuracies::List(v) => v.clone(),
        }
    }
}

/// One class identifier per line, blank lines skipped. Used for truth files
/// and allowed-class lists.
pub fn read_class_lines<R: BufRead>(reader: R) -> Result<Vec<String>, EvalError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if !line.trim().is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}
