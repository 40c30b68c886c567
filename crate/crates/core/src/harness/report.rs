use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::dataset::{KnowledgeType, Stage, Subtype, TaskKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode_id: String,
    pub stage: Stage,
    pub task: TaskKind,
    pub knowledge_type: KnowledgeType,
    pub subtype: Subtype,
    pub pc: f64,
    pub success: bool,
    pub planning_cycles: u32,
    pub sim_steps: u64,
    pub cycle_limit_hit: bool,
    /// Percentage points against the mean of the referenced acquisitions.
    pub delta_pc: Option<f64>,
    pub delta_sr: Option<f64>,
    pub memory_condition: String,
    /// Fraction of gold memories in the top-k before injection.
    pub gold_recall: Option<f64>,
    /// Whether every gold memory reached the prompt.
    pub gold_present: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Means over a group of rows. PC, SR and deltas are in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub episodes: usize,
    pub planning_cycles: f64,
    pub sim_steps: f64,
    pub pc: f64,
    pub sr: f64,
    pub delta_pc: Option<f64>,
    pub delta_sr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub memory_condition: String,
    pub rows: Vec<EpisodeRow>,
    /// Grouped by stage and task kind.
    pub by_task: Vec<Aggregate>,
    /// Grouped by task kind and knowledge type.
    pub by_knowledge: Vec<Aggregate>,
    pub recall_at_k: Option<f64>,
    pub gold_presence: Option<f64>,
    pub infrastructure_errors: usize,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

fn aggregate(group: String, rows: &[&EpisodeRow]) -> Aggregate {
    let col = |f: &dyn Fn(&EpisodeRow) -> f64| mean(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
    Aggregate {
        group,
        episodes: rows.len(),
        planning_cycles: col(&|r| r.planning_cycles as f64),
        sim_steps: col(&|r| r.sim_steps as f64),
        pc: 100.0 * col(&|r| r.pc),
        sr: 100.0 * col(&|r| if r.success { 1.0 } else { 0.0 }),
        delta_pc: mean_opt(rows.iter().map(|r| r.delta_pc)),
        delta_sr: mean_opt(rows.iter().map(|r| r.delta_sr)),
    }
}

fn grouped<K: Ord>(rows: &[EpisodeRow], key: impl Fn(&EpisodeRow) -> (K, String)) -> Vec<Aggregate> {
    let mut groups: BTreeMap<K, (String, Vec<&EpisodeRow>)> = BTreeMap::new();
    for r in rows {
        let (k, label) = key(r);
        groups.entry(k).or_insert_with(|| (label, Vec::new())).1.push(r);
    }
    groups.into_values().map(|(label, rs)| aggregate(label, &rs)).collect()
}

impl RunReport {
    pub fn from_rows(memory_condition: String, rows: Vec<EpisodeRow>) -> Self {
        let by_task = grouped(&rows, |r| (r.task, r.task.as_str().to_string()));
        let by_knowledge = grouped(&rows, |r| {
            ((r.task, r.knowledge_type), format!("{}/{}", r.task, r.knowledge_type.as_str()))
        });
        let util: Vec<&EpisodeRow> = rows.iter().filter(|r| r.stage == Stage::Utilization).collect();
        let recall_at_k = mean_opt(util.iter().map(|r| r.gold_recall));
        let gold_presence = mean_opt(util.iter().map(|r| r.gold_present.map(|p| if p { 1.0 } else { 0.0 })));
        let infrastructure_errors = rows.iter().filter(|r| r.error.is_some()).count();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            memory_condition,
            rows,
            by_task,
            by_knowledge,
            recall_at_k,
            gold_presence,
            infrastructure_errors,
        }
    }

    /// Recomputes every aggregate from the rows.
    pub fn verify(&self) -> Result<(), HarnessError> {
        let fresh = Self::from_rows(self.memory_condition.clone(), self.rows.clone());
        if &fresh != self {
            return Err(HarnessError::InconsistentReport(format!(
                "expected {:?}, found {:?}",
                fresh.by_task, self.by_task
            )));
        }
        Ok(())
    }

    pub fn aggregate(&self, group: &str) -> Option<&Aggregate> {
        self.by_task.iter().chain(&self.by_knowledge).find(|a| a.group == group)
    }

    pub fn rows_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    fn csv(aggs: &[Aggregate]) -> String {
        let mut s = String::from("group,episodes,planning_cycles,sim_steps,pc,sr,delta_pc,delta_sr\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        for a in aggs {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
                a.group,
                a.episodes,
                a.planning_cycles,
                a.sim_steps,
                a.pc,
                a.sr,
                opt(a.delta_pc),
                opt(a.delta_sr)
            );
        }
        s
    }

    /// Writes rows, report JSON, markdown tables and plot CSVs.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        self.verify()?;
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = [
            ("rows.jsonl", self.rows_jsonl()),
            ("report.json", self.to_json()),
            ("report.md", render_markdown(self)),
            ("plot_by_task.csv", Self::csv(&self.by_task)),
            ("plot_by_knowledge.csv", Self::csv(&self.by_knowledge)),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(io_err(&p))?;
        }
        Ok(())
    }
}

fn table(out: &mut String, title: &str, aggs: &[Aggregate]) {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:+.1}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(out, "## {title}\n");
    out.push_str("| group | n | planning cycles | sim steps | PC % | SR % | ΔPC | ΔSR |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for a in aggs {
        let _ = writeln!(
            out,
            "| {} | {} | {:.1} | {:.1} | {:.1} | {:.1} | {} | {} |",
            a.group,
            a.episodes,
            a.planning_cycles,
            a.sim_steps,
            a.pc,
            a.sr,
            opt(a.delta_pc),
            opt(a.delta_sr)
        );
    }
    out.push('\n');
}

pub fn render_markdown(report: &RunReport) -> String {
    let mut out = format!("# Run report\n\nmemory: {}\n\n", report.memory_condition);
    table(&mut out, "By task", &report.by_task);
    table(&mut out, "By knowledge type", &report.by_knowledge);
    if let Some(r) = report.recall_at_k {
        let _ = writeln!(out, "gold recall@k before injection: {:.1}%", 100.0 * r);
    }
    if let Some(p) = report.gold_presence {
        let _ = writeln!(out, "gold memories in prompt: {:.1}%", 100.0 * p);
    }
    let _ = writeln!(out, "infrastructure errors: {}", report.infrastructure_errors);
    out
}

/// Rebuilds the report of a finished run directory from its row file.
pub fn report_dir(dir: &Path) -> Result<RunReport, HarnessError> {
    let p = dir.join("rows.jsonl");
    if !p.exists() {
        return Err(HarnessError::MissingArtifacts(p.display().to_string()));
    }
    let raw = std::fs::read_to_string(&p).map_err(io_err(&p))?;
    let mut rows = Vec::new();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let row: EpisodeRow = serde_json::from_str(line)
            .map_err(|e| HarnessError::MissingArtifacts(format!("{}: {e}", p.display())))?;
        rows.push(row);
    }
    let condition = rows.first().map(|r| r.memory_condition.clone()).unwrap_or_default();
    Ok(RunReport::from_rows(condition, rows))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn row(id: &str, task: TaskKind, pc: f64, ok: bool, delta: Option<f64>) -> EpisodeRow {
        EpisodeRow {
            episode_id: id.into(),
            stage: if task == TaskKind::Acquisition { Stage::Acquisition } else { Stage::Utilization },
            task,
            knowledge_type: KnowledgeType::ObjectSemantics,
            subtype: Subtype::Ownership,
            pc,
            success: ok,
            planning_cycles: 10,
            sim_steps: 100,
            cycle_limit_hit: false,
            delta_pc: delta,
            delta_sr: delta,
            memory_condition: "k=5".into(),
            gold_recall: None,
            gold_present: None,
            error: None,
        }
    }

    #[test]
    fn aggregates_match_hand_computation() {
        let rows = vec![
            row("a1", TaskKind::Acquisition, 1.0, true, None),
            row("a2", TaskKind::Acquisition, 0.5, false, None),
            row("u1", TaskKind::Single, 1.0, true, Some(0.0)),
            row("u2", TaskKind::Single, 0.0, false, Some(-100.0)),
        ];
        let r = RunReport::from_rows("k=5".into(), rows);
        let acq = r.aggregate("acquisition").unwrap();
        assert_eq!((acq.pc, acq.sr, acq.delta_sr), (75.0, 50.0, None));
        let single = r.aggregate("single").unwrap();
        assert_eq!(single.delta_sr, Some(-50.0));
        r.verify().unwrap();
        let md = render_markdown(&r);
        assert!(md.contains("| single | 2 |"));
    }

    #[test]
    fn acquisition_only_run_has_empty_deltas() {
        let r = RunReport::from_rows("k=5".into(), vec![row("a1", TaskKind::Acquisition, 1.0, true, None)]);
        assert!(r.by_task.iter().all(|a| a.delta_sr.is_none()));
        assert!(render_markdown(&r).contains("| - | - |"));
    }

    #[test]
    fn report_dir_roundtrip_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report_dir(dir.path()), Err(HarnessError::MissingArtifacts(_))));
        let r = RunReport::from_rows("k=5".into(), vec![row("a1", TaskKind::Acquisition, 1.0, true, None)]);
        r.write(dir.path()).unwrap();
        assert_eq!(report_dir(dir.path()).unwrap(), r);
    }
}
