//! Event and summary serialization.
//!
//! JSON lines, one object per trial:
//! `{"trial","outcome","correction_c1","correction_c2","verifier_setting","passed"}`
//! with `"outcome":"lost"` and null correction fields for undetected trials.
//! CSV summaries print reals with 17 significant digits.

use std::fmt::Display;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::bell::EfficiencyRow;
use crate::measurement::{Detection, EventRecord};
use crate::protocol::OutcomeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?}; expected jsonl or csv")),
        }
    }
}

pub const LOST: &str = "lost";

#[derive(Serialize)]
struct EventLine<'a> {
    trial: u64,
    outcome: &'a str,
    correction_c1: Option<bool>,
    correction_c2: Option<bool>,
    verifier_setting: Option<u8>,
    passed: Option<bool>,
}

pub fn write_jsonl<O: Display, W: Write>(records: &[EventRecord<O>], sink: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(sink);
    for r in records {
        let outcome = match &r.outcome {
            Detection::Fired(o) => o.to_string(),
            Detection::Lost => LOST.to_string(),
        };
        let line = EventLine {
            trial: r.trial,
            outcome: &outcome,
            correction_c1: r.correction.map(|c| c.fire_c1),
            correction_c2: r.correction.map(|c| c.fire_c2),
            verifier_setting: r.verifier_setting,
            passed: r.passed,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub outcome: String,
    pub count: u64,
    /// Trials in this row that met a verifier.
    pub checked: u64,
    pub pass_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub total: u64,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn row(&self, outcome: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.outcome == outcome)
    }

    pub fn frequency(&self, outcome: &str) -> Option<f64> {
        let r = self.row(outcome)?;
        (self.total > 0).then(|| r.count as f64 / self.total as f64)
    }
}

impl SummaryRow {
    pub fn pass_rate(&self) -> Option<f64> {
        (self.checked > 0).then(|| self.pass_count as f64 / self.checked as f64)
    }
}

/// Rows for `labels` in the given order, then any other fired label in order
/// of first appearance, then `lost`.
pub fn summarize<O: Display>(records: &[EventRecord<O>], labels: &[String]) -> Summary {
    let mut rows: Vec<SummaryRow> = labels
        .iter()
        .map(|l| SummaryRow {
            outcome: l.clone(),
            count: 0,
            checked: 0,
            pass_count: 0,
        })
        .collect();
    let mut lost = SummaryRow {
        outcome: LOST.into(),
        count: 0,
        checked: 0,
        pass_count: 0,
    };
    for r in records {
        let row = match &r.outcome {
            Detection::Lost => &mut lost,
            Detection::Fired(o) => {
                let label = o.to_string();
                let i = match rows.iter().position(|x| x.outcome == label) {
                    Some(i) => i,
                    None => {
                        rows.push(SummaryRow {
                            outcome: label,
                            count: 0,
                            checked: 0,
                            pass_count: 0,
                        });
                        rows.len() - 1
                    }
                };
                &mut rows[i]
            }
        };
        row.count += 1;
        if let Some(p) = r.passed {
            row.checked += 1;
            row.pass_count += u64::from(p);
        }
    }
    rows.push(lost);
    Summary {
        total: records.len() as u64,
        rows,
    }
}

/// 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn write_summary_csv<W: Write>(summary: &Summary, sink: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(sink);
    writeln!(w, "outcome,count,frequency,pass_count,pass_rate")?;
    for r in &summary.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.outcome,
            r.count,
            opt_real(summary.frequency(&r.outcome)),
            r.pass_count,
            opt_real(r.pass_rate())
        )?;
    }
    w.flush()
}

/// Events as JSON lines, or their per-outcome summary as CSV.
pub fn write_events<O: Display, W: Write>(
    records: &[EventRecord<O>],
    labels: &[String],
    sink: W,
    format: Format,
) -> io::Result<()> {
    match format {
        Format::Jsonl => write_jsonl(records, sink),
        Format::Csv => write_summary_csv(&summarize(records, labels), sink),
    }
}

/// `D1`..`D4`.
pub fn standard_labels() -> Vec<String> {
    OutcomeId::ALL.iter().map(|k| k.to_string()).collect()
}

pub fn write_efficiency_csv<W: Write>(rows: &[EfficiencyRow], sink: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(sink);
    writeln!(
        w,
        "eta,exact_s,empirical_s,sigma,coincidence_rate,trials,detected"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            real(r.eta),
            real(r.exact_s),
            opt_real(r.empirical_s),
            opt_real(r.sigma),
            real(r.coincidence_rate),
            r.trials,
            r.detected
        )?;
    }
    w.flush()
}
