use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, TaskResult};

/// Episode-level score used for deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub pc: f64,
    pub success: bool,
}

impl From<&TaskResult> for Outcome {
    fn from(r: &TaskResult) -> Self {
        Self {
            pc: r.percent_complete,
            success: r.success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilOutcome {
    pub episode_id: String,
    pub outcome: Outcome,
    pub references: Vec<String>,
}

/// All values in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub episode_id: String,
    pub pc: f64,
    pub sr: f64,
    pub ref_pc: f64,
    pub ref_sr: f64,
    pub delta_pc: f64,
    pub delta_sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub rows: Vec<DeltaRow>,
    pub mean_delta_pc: f64,
    pub mean_delta_sr: f64,
}

/// Difference of two percentages.
pub fn pp_delta(util_pct: f64, acq_pct: f64) -> f64 {
    util_pct - acq_pct
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Each utilization score minus the mean of its acquisition references.
pub fn delta_metrics(acq: &BTreeMap<String, Outcome>, util: &[UtilOutcome]) -> Result<DeltaReport, EvalError> {
    let mut rows = Vec::with_capacity(util.len());
    for u in util {
        if u.references.is_empty() {
            return Err(EvalError::MissingReference {
                episode: u.episode_id.clone(),
                reference: "<none>".into(),
            });
        }
        let refs = u
            .references
            .iter()
            .map(|r| {
                acq.get(r).ok_or_else(|| EvalError::MissingReference {
                    episode: u.episode_id.clone(),
                    reference: r.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ref_pc = 100.0 * mean(refs.iter().map(|o| o.pc));
        let ref_sr = 100.0 * mean(refs.iter().map(|o| if o.success { 1.0 } else { 0.0 }));
        let pc = 100.0 * u.outcome.pc;
        let sr = if u.outcome.success { 100.0 } else { 0.0 };
        rows.push(DeltaRow {
            episode_id: u.episode_id.clone(),
            pc,
            sr,
            ref_pc,
            ref_sr,
            delta_pc: pp_delta(pc, ref_pc),
            delta_sr: pp_delta(sr, ref_sr),
        });
    }
    Ok(DeltaReport {
        mean_delta_pc: mean(rows.iter().map(|r| r.delta_pc)),
        mean_delta_sr: mean(rows.iter().map(|r| r.delta_sr)),
        rows,
    })
}
