//! Interaction measurements: typing efficiency, prompt effort, and Raw-TLX.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{char_len, Condition, MetricsRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("expected 6 workload scores, got {0}")]
    WrongArity(usize),
    #[error("workload score {0} is outside [1, 10]")]
    OutOfRange(f64),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Characters of final text produced per second.
pub fn efficiency(final_char_count: u64, elapsed_seconds: f64) -> Result<f64, MetricsError> {
    if elapsed_seconds.is_nan() || elapsed_seconds <= 0.0 || elapsed_seconds.is_infinite() {
        return Err(MetricsError::NonPositiveDuration(elapsed_seconds));
    }
    Ok(final_char_count as f64 / elapsed_seconds)
}

/// Free-text characters plus the characters of every user-added option.
pub fn prompt_char_count<S: AsRef<str>>(free_text_chars: u64, added_option_texts: &[S]) -> u64 {
    free_text_chars
        + added_option_texts
            .iter()
            .map(|t| char_len(t.as_ref()) as u64)
            .sum::<u64>()
}

/// Unweighted mean of the six workload subscales.
pub fn raw_tlx(scores: &[f64]) -> Result<f64, MetricsError> {
    if scores.len() != 6 {
        return Err(MetricsError::WrongArity(scores.len()));
    }
    if let Some(&bad) = scores.iter().find(|s| !(1.0..=10.0).contains(*s)) {
        return Err(MetricsError::OutOfRange(bad));
    }
    let (lo, hi) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    // rounding in the sum can push the mean one ulp outside the scores
    Ok((scores.iter().sum::<f64>() / 6.0).clamp(lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub chars_per_second: f64,
    pub final_char_count: u64,
    pub elapsed_seconds: f64,
}

impl MetricsRecord {
    pub fn efficiency(&self) -> Result<EfficiencyReport, MetricsError> {
        Ok(EfficiencyReport {
            chars_per_second: efficiency(self.final_char_count, self.elapsed_seconds)?,
            final_char_count: self.final_char_count,
            elapsed_seconds: self.elapsed_seconds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    condition: Condition,
    final_char_count: u64,
    elapsed_seconds: f64,
    chars_per_second: f64,
    prompt_char_count: u64,
}

pub const CSV_COLUMNS: [&str; 5] = [
    "condition",
    "final_char_count",
    "elapsed_seconds",
    "chars_per_second",
    "prompt_char_count",
];

pub fn write_csv<W: io::Write>(writer: W, records: &[MetricsRecord]) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(writer);
    if records.is_empty() {
        out.write_record(CSV_COLUMNS)?;
    }
    for record in records {
        out.serialize(CsvRow {
            condition: record.condition,
            final_char_count: record.final_char_count,
            elapsed_seconds: record.elapsed_seconds,
            chars_per_second: efficiency(record.final_char_count, record.elapsed_seconds)?,
            prompt_char_count: record.prompt_char_count,
        })?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads records; the `chars_per_second` column is ignored and recomputed.
pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<MetricsRecord>, MetricsError> {
    let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    input
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(MetricsRecord {
                condition: row.condition,
                final_char_count: row.final_char_count,
                elapsed_seconds: row.elapsed_seconds,
                prompt_char_count: row.prompt_char_count,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub records: usize,
    pub mean_chars_per_second: f64,
    pub mean_prompt_char_count: f64,
}

/// Per-condition means, ordered by condition.
pub fn summarize(records: &[MetricsRecord]) -> Result<Vec<ConditionSummary>, MetricsError> {
    let mut groups: BTreeMap<Condition, (usize, f64, u64)> = BTreeMap::new();
    for record in records {
        let eff = efficiency(record.final_char_count, record.elapsed_seconds)?;
        let entry = groups.entry(record.condition).or_default();
        entry.0 += 1;
        entry.1 += eff;
        entry.2 += record.prompt_char_count;
    }
    Ok(groups
        .into_iter()
        .map(|(condition, (n, eff_sum, prompt_sum))| ConditionSummary {
            condition,
            records: n,
            mean_chars_per_second: eff_sum / n as f64,
            mean_prompt_char_count: prompt_sum as f64 / n as f64,
        })
        .collect())
}
