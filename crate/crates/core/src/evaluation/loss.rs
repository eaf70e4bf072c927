//! Average-loss curves from darknet training logs.

use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use crate::error::{Error, Result};

/// Darknet reports a model as trained well enough once average loss drops below this.
pub const DEFAULT_LOSS_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossPoint {
    pub iteration: u64,
    pub avg_loss: f64,
}

/// Average loss per iteration, iterations strictly increasing.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LossSeries {
    points: Vec<LossPoint>,
}

impl LossSeries {
    pub fn new(points: Vec<LossPoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].iteration >= w[1].iteration) {
            return Err(Error::InvalidParameter(
                "loss series iterations must be strictly increasing".into(),
            ));
        }
        if points
            .iter()
            .any(|p| p.iteration == 0 || !p.avg_loss.is_finite() || p.avg_loss < 0.0)
        {
            return Err(Error::InvalidParameter(
                "loss points need a positive iteration and a finite non-negative loss".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[LossPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&LossPoint> {
        self.points.last()
    }
}

fn summary_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // " 1000: 2.314621, 2.117000 avg loss, 0.001300 rate, ..."
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*:\s*([^,\s]+)\s*,\s*([^,\s]+)\s+avg\b").unwrap())
}

/// Extracts `(iteration, avg_loss)` from darknet's per-iteration summary lines.
///
/// When training is resumed from saved weights the log restarts at an earlier
/// iteration; the points from the resumed run replace the ones they overlap.
pub fn parse_training_log(text: &str) -> Result<LossSeries> {
    let re = summary_line();
    let mut points: Vec<LossPoint> = Vec::new();
    for line in text.split(['\n', '\r']) {
        let Some(caps) = re.captures(line) else {
            continue;
        };
        let Ok(iteration) = caps[1].parse::<u64>() else {
            continue;
        };
        let Ok(avg_loss) = caps[3].parse::<f64>() else {
            continue;
        };
        if iteration == 0 || !avg_loss.is_finite() || avg_loss < 0.0 {
            continue;
        }
        while points.last().is_some_and(|p| p.iteration >= iteration) {
            points.pop();
        }
        points.push(LossPoint {
            iteration,
            avg_loss,
        });
    }
    if points.is_empty() {
        return Err(Error::NoLossLines);
    }
    LossSeries::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossVerdict {
    pub final_iteration: u64,
    pub final_avg_loss: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Passes when the final average loss is strictly below `threshold`.
pub fn loss_verdict(series: &LossSeries, threshold: f64) -> Result<LossVerdict> {
    let last = series.last().ok_or(Error::EmptySeries)?;
    Ok(LossVerdict {
        final_iteration: last.iteration,
        final_avg_loss: last.avg_loss,
        threshold,
        passed: last.avg_loss < threshold,
    })
}

/// `iteration,avg_loss` CSV for external plotting.
pub fn emit_loss_table(series: &LossSeries) -> String {
    let mut out = String::from("iteration,avg_loss\n");
    for p in series.points() {
        writeln!(out, "{},{}", p.iteration, p.avg_loss).unwrap();
    }
    out
}
