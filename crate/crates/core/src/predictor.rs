//! Predicted quality ordering of candidate datasets, and concordance checks of
//! an indicator against observed accuracies.
//!
//! The ordering key is long-tailedness at each threshold, largest threshold
//! first (fewer tail classes is better), then dataset size (larger is better).
//! Left-skewedness is reported but not part of the key. Candidates that agree
//! on the whole key share a rank group.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{IndicatorConfig, IndicatorReport};

#[derive(Debug, Error, PartialEq)]
pub enum PredictError {
    #[error("no candidates")]
    NoCandidates,
    #[error("candidate `{0}` was audited with a different indicator config")]
    MixedConfigs(String),
    #[error("candidate `{name}` has no long-tail value at threshold {threshold}")]
    MissingThreshold { name: String, threshold: u64 },
    #[error("candidate `{name}`: {field} = {value} is not a percentage")]
    InvalidPercentage {
        name: String,
        field: &'static str,
        value: f64,
    },
    #[error("length mismatch: {indicators} indicator values, {accuracies} accuracies")]
    LengthMismatch { indicators: usize, accuracies: usize },
    #[error("concordance needs at least 2 entries, got {0}")]
    TooFew(usize),
    #[error("non-finite value in concordance input")]
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub name: String,
    pub report: IndicatorReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_robustness: Option<f64>,
}

impl CandidateEntry {
    pub fn new(name: impl Into<String>, report: IndicatorReport) -> Self {
        CandidateEntry {
            name: name.into(),
            report,
            observed_accuracy: None,
            observed_robustness: None,
        }
    }

    fn validate(&self) -> Result<(), PredictError> {
        for (field, value) in [
            ("observed_accuracy", self.observed_accuracy),
            ("observed_robustness", self.observed_robustness),
        ] {
            if let Some(v) = value {
                if !(0.0..=100.0).contains(&v) {
                    return Err(PredictError::InvalidPercentage {
                        name: self.name.clone(),
                        field,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The values the ordering is computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankKey {
    /// Long-tail percentages ordered by descending threshold.
    pub long_tail: Vec<f64>,
    pub total_samples: u64,
}

impl RankKey {
    fn cmp_quality(&self, other: &RankKey) -> Ordering {
        for (a, b) in self.long_tail.iter().zip(&other.long_tail) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        other.total_samples.cmp(&self.total_samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankGroup {
    /// 1-based; the best group is rank 1.
    pub rank: usize,
    pub members: Vec<String>,
    pub key: RankKey,
}

pub fn rank_key(report: &IndicatorReport, name: &str) -> Result<RankKey, PredictError> {
    let mut thresholds = report.config.tail_thresholds.clone();
    thresholds.sort_unstable_by(|a, b| b.cmp(a));
    let long_tail = thresholds
        .into_iter()
        .map(|t| {
            report.long_tail_at(t).ok_or_else(|| PredictError::MissingThreshold {
                name: name.to_string(),
                threshold: t,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(RankKey {
        long_tail,
        total_samples: report.total_samples,
    })
}

/// Groups named keys best-first. Members of a group are listed by name, so the
/// result does not depend on input order.
pub fn order_by_key(items: &[(String, RankKey)]) -> Vec<RankGroup> {
    let mut sorted: Vec<&(String, RankKey)> = items.iter().collect();
    sorted.sort_by(|a, b| a.1.cmp_quality(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut groups: Vec<RankGroup> = Vec::new();
    for (name, key) in sorted {
        match groups.last_mut() {
            Some(g) if g.key.cmp_quality(key) == Ordering::Equal => g.members.push(name.clone()),
            _ => groups.push(RankGroup {
                rank: groups.len() + 1,
                members: vec![name.clone()],
                key: key.clone(),
            }),
        }
    }
    groups
}

pub fn predict_order(candidates: &[CandidateEntry]) -> Result<Vec<RankGroup>, PredictError> {
    let first = candidates.first().ok_or(PredictError::NoCandidates)?;
    let config: &IndicatorConfig = &first.report.config;
    let mut items = Vec::with_capacity(candidates.len());
    for c in candidates {
        c.validate()?;
        if c.report.config != *config {
            return Err(PredictError::MixedConfigs(c.name.clone()));
        }
        items.push((c.name.clone(), rank_key(&c.report, &c.name)?));
    }
    Ok(order_by_key(&items))
}

/// Which direction of the indicator is hypothesized to be better.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// A larger indicator predicts lower accuracy (long-tailedness, left-skew).
    HigherIsWorse,
    /// A larger indicator predicts higher accuracy (dataset size).
    HigherIsBetter,
}

/// Pair counts of an indicator against accuracies under a hypothesis.
///
/// A pair is concordant when it is ordered the way the hypothesis predicts and
/// discordant when it is ordered the opposite way; pairs tied on either side
/// are neither. `kendall_tau_b` uses the same orientation, so +1 means perfect
/// agreement with the hypothesis. It is `None` when either side is constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concordance {
    pub concordant_pairs: u64,
    pub discordant_pairs: u64,
    pub kendall_tau_b: Option<f64>,
    pub pairs: u64,
    pub tied_indicator_pairs: u64,
    pub tied_accuracy_pairs: u64,
}

pub fn concordance(
    indicator_values: &[f64],
    accuracies: &[f64],
    hypothesis: Hypothesis,
) -> Result<Concordance, PredictError> {
    if indicator_values.len() != accuracies.len() {
        return Err(PredictError::LengthMismatch {
            indicators: indicator_values.len(),
            accuracies: accuracies.len(),
        });
    }
    let n = indicator_values.len();
    if n < 2 {
        return Err(PredictError::TooFew(n));
    }
    if indicator_values.iter().chain(accuracies).any(|v| !v.is_finite()) {
        return Err(PredictError::NonFinite);
    }
    let (mut agree, mut disagree, mut tied_x, mut tied_y) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = indicator_values[i].partial_cmp(&indicator_values[j]).expect("finite");
            let dy = accuracies[i].partial_cmp(&accuracies[j]).expect("finite");
            if dx == Ordering::Equal {
                tied_x += 1;
            }
            if dy == Ordering::Equal {
                tied_y += 1;
            }
            if dx == Ordering::Equal || dy == Ordering::Equal {
                continue;
            }
            // same direction on both sides
            if dx == dy {
                agree += 1;
            } else {
                disagree += 1;
            }
        }
    }
    let (concordant, discordant) = match hypothesis {
        Hypothesis::HigherIsBetter => (agree, disagree),
        Hypothesis::HigherIsWorse => (disagree, agree),
    };
    let pairs = (n * (n - 1) / 2) as u64;
    let denom = (((pairs - tied_x) as f64) * ((pairs - tied_y) as f64)).sqrt();
    let kendall_tau_b = (denom > 0.0).then(|| (concordant as f64 - discordant as f64) / denom);
    Ok(Concordance {
        concordant_pairs: concordant,
        discordant_pairs: discordant,
        kendall_tau_b,
        pairs,
        tied_indicator_pairs: tied_x,
        tied_accuracy_pairs: tied_y,
    })
}

/// One row of an observed-results table: published indicator values and the
/// accuracies a model reached when trained on that dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub name: String,
    pub dataset_size: u64,
    pub left_skew: f64,
    /// Threshold (as a decimal string) → long-tail percentage.
    pub long_tail: BTreeMap<String, f64>,
    pub val_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_robustness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationTable {
    #[serde(default)]
    pub description: String,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConcordance {
    pub concordance: Concordance,
    pub hypothesis: Hypothesis,
    pub indicator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub indicators: Vec<IndicatorConcordance>,
    pub predicted_order: Vec<RankGroup>,
    pub rows: usize,
    pub target: String,
}

impl ValidationTable {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Thresholds present in every row, descending.
    fn thresholds(&self) -> Result<Vec<u64>, PredictError> {
        let mut out: Option<Vec<u64>> = None;
        for row in &self.rows {
            let mut ts: Vec<u64> = row
                .long_tail
                .keys()
                .filter_map(|k| k.parse().ok())
                .collect();
            ts.sort_unstable_by(|a, b| b.cmp(a));
            match &out {
                None => out = Some(ts),
                Some(prev) if *prev != ts => {
                    return Err(PredictError::MixedConfigs(row.name.clone()))
                }
                _ => {}
            }
        }
        Ok(out.unwrap_or_default())
    }
}

/// Concordance of every indicator in the table with validation accuracy, plus
/// the order the predictor would have produced.
pub fn validate_table(table: &ValidationTable) -> Result<ValidationReport, PredictError> {
    let thresholds = table.thresholds()?;
    let acc: Vec<f64> = table.rows.iter().map(|r| r.val_accuracy).collect();
    let mut indicators = Vec::new();
    for t in &thresholds {
        let xs: Vec<f64> = table.rows.iter().map(|r| r.long_tail[&t.to_string()]).collect();
        indicators.push(IndicatorConcordance {
            concordance: concordance(&xs, &acc, Hypothesis::HigherIsWorse)?,
            hypothesis: Hypothesis::HigherIsWorse,
            indicator: format!("long_tail@{t}"),
        });
    }
    let skew: Vec<f64> = table.rows.iter().map(|r| r.left_skew).collect();
    indicators.push(IndicatorConcordance {
        concordance: concordance(&skew, &acc, Hypothesis::HigherIsWorse)?,
        hypothesis: Hypothesis::HigherIsWorse,
        indicator: "left_skew".into(),
    });
    let size: Vec<f64> = table.rows.iter().map(|r| r.dataset_size as f64).collect();
    indicators.push(IndicatorConcordance {
        concordance: concordance(&size, &acc, Hypothesis::HigherIsBetter)?,
        hypothesis: Hypothesis::HigherIsBetter,
        indicator: "dataset_size".into(),
    });

    let items: Vec<(String, RankKey)> = table
        .rows
        .iter()
        .map(|r| {
            (
                r.name.clone(),
                RankKey {
                    long_tail: thresholds.iter().map(|t| r.long_tail[&t.to_string()]).collect(),
                    total_samples: r.dataset_size,
                },
            )
        })
        .collect();
    Ok(ValidationReport {
        indicators,
        predicted_order: order_by_key(&items),
        rows: table.rows.len(),
        target: "val_accuracy".into(),
    })
}
