//! Evaluation reports: one CSV row per rollout plus an aggregate row.

use std::collections::BTreeMap;
use std::io::Write;

use c2sim_core::train::{mean, std_dev, EvalReport, Rollout};
use serde::{Deserialize, Serialize};

pub const COLUMNS: [&str; 6] =
    ["rollout_id", "total_reward", "blue_casualties", "red_casualties", "length", "termination"];
pub const AGGREGATE_ID: &str = "aggregate";

/// One data row; also the body of a session's `episode_end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rollout_id: usize,
    pub total_reward: f64,
    pub blue_casualties: u32,
    pub red_casualties: u32,
    pub length: u64,
    pub termination: String,
}

impl ReportRow {
    pub fn new(id: usize, r: &Rollout) -> Self {
        Self {
            rollout_id: id,
            total_reward: r.total_reward,
            blue_casualties: r.blue_casualties,
            red_casualties: r.red_casualties,
            length: r.length,
            termination: r.termination.as_str().to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), std: std_dev(xs) }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}±{}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub total_reward: MeanStd,
    pub blue_casualties: MeanStd,
    pub red_casualties: MeanStd,
    pub length: MeanStd,
    pub terminations: BTreeMap<String, usize>,
}

pub fn summarize(report: &EvalReport) -> Summary {
    let mut terminations = BTreeMap::new();
    for r in &report.rollouts {
        *terminations.entry(r.termination.as_str().to_string()).or_insert(0) += 1;
    }
    Summary {
        n: report.rollouts.len(),
        total_reward: MeanStd::of(&report.rewards()),
        blue_casualties: MeanStd::of(&report.column(|r| r.blue_casualties as f64)),
        red_casualties: MeanStd::of(&report.column(|r| r.red_casualties as f64)),
        length: MeanStd::of(&report.column(|r| r.length as f64)),
        terminations,
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rollouts        {}", self.n)?;
        writeln!(f, "total reward    {:.4} ± {:.4}", self.total_reward.mean, self.total_reward.std)?;
        writeln!(f, "blue casualties {:.3} ± {:.3}", self.blue_casualties.mean, self.blue_casualties.std)?;
        writeln!(f, "red casualties  {:.3} ± {:.3}", self.red_casualties.mean, self.red_casualties.std)?;
        writeln!(f, "length          {:.1} ± {:.1}", self.length.mean, self.length.std)?;
        let t: Vec<String> = self.terminations.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        write!(f, "terminations    {}", t.join(" "))
    }
}

/// Write the CSV. Numeric cells of the aggregate row hold `mean±std` (sample
/// standard deviation); its termination cell counts each outcome.
pub fn write_report<W: Write>(report: &EvalReport, out: W) -> csv::Result<Summary> {
    assert!(!report.rollouts.is_empty(), "empty report");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for (i, r) in report.rollouts.iter().enumerate() {
        w.serialize(ReportRow::new(i, r))?;
    }
    let s = summarize(report);
    let t: Vec<String> = s.terminations.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    w.write_record([
        AGGREGATE_ID.to_string(),
        s.total_reward.to_string(),
        s.blue_casualties.to_string(),
        s.red_casualties.to_string(),
        s.length.to_string(),
        t.join(";"),
    ])?;
    w.flush()?;
    Ok(s)
}
