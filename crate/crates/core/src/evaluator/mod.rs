//! Goal checking over state traces.
//!
//! A proposition is credited at the moment it becomes true while its
//! dependencies and ordering constraints allow it. Propositions that other
//! propositions wait on ("milestones": dependency triggers and every
//! non-final entry of a `temporal_order` list) latch their credit the first
//! time they are achieved. All other propositions are judged on the final
//! state: they must hold at the end, and the run of states in which they
//! hold must have started at an admissible moment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{distance, Relation, Scene, WorldState};

mod delta;

pub use delta::{delta_metrics, pp_delta, DeltaReport, DeltaRow, Outcome, UtilOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("malformed goal: {0}")]
    MalformedGoal(String),
    #[error("unknown handle {0}")]
    UnknownHandle(String),
    #[error("missing acquisition reference {reference} for {episode}")]
    MissingReference { episode: String, reference: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropositionKind {
    IsOnTop,
    IsInside,
    IsNextTo,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub kind: PropositionKind,
    /// Any-of object ids (`entity_handles_a` for next_to).
    #[serde(alias = "entity_handles_a")]
    pub object_handles: Vec<String>,
    /// Any-of receptacle ids (`entity_handles_b` for next_to).
    #[serde(alias = "entity_handles_b")]
    pub receptacle_handles: Vec<String>,
    #[serde(default = "one")]
    pub number: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Proposition {
    pub fn on_top(objects: &[&str], receptacles: &[&str]) -> Self {
        Self::build(PropositionKind::IsOnTop, objects, receptacles, None)
    }

    pub fn inside(objects: &[&str], receptacles: &[&str]) -> Self {
        Self::build(PropositionKind::IsInside, objects, receptacles, None)
    }

    pub fn next_to(a: &[&str], b: &[&str], l2_threshold: f64) -> Self {
        Self::build(PropositionKind::IsNextTo, a, b, Some(l2_threshold))
    }

    fn build(kind: PropositionKind, a: &[&str], b: &[&str], l2: Option<f64>) -> Self {
        Self {
            kind,
            object_handles: a.iter().map(|s| s.to_string()).collect(),
            receptacle_handles: b.iter().map(|s| s.to_string()).collect(),
            number: 1,
            l2_threshold: l2,
            description: None,
        }
    }

    pub fn with_number(mut self, number: u32) -> Self {
        self.number = number;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyKind {
    AfterSatisfied,
    AfterUnsatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub kind: DependencyKind,
    pub gated: usize,
    pub triggers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// Entries must be credited in list order.
    TemporalOrder { order: Vec<usize> },
    /// Each pair of propositions must be satisfied by a common object.
    SameObjectAcrossSteps { pairs: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub propositions: Vec<Proposition>,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl GoalSpec {
    pub fn new(propositions: Vec<Proposition>) -> Self {
        Self {
            propositions,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let n = self.propositions.len();
        let bad = |m: String| Err(EvalError::MalformedGoal(m));
        for (i, p) in self.propositions.iter().enumerate() {
            if p.number == 0 {
                return bad(format!("proposition {i}: number must be at least 1"));
            }
            if p.object_handles.is_empty() || p.receptacle_handles.is_empty() {
                return bad(format!("proposition {i}: empty handle list"));
            }
            match (p.kind, p.l2_threshold) {
                (PropositionKind::IsNextTo, Some(t)) if t >= 0.0 => {}
                (PropositionKind::IsNextTo, _) => {
                    return bad(format!("proposition {i}: is_next_to needs a nonnegative l2_threshold"))
                }
                (_, Some(_)) => return bad(format!("proposition {i}: l2_threshold only applies to is_next_to")),
                _ => {}
            }
        }
        let check = |idx: usize, what: &str| {
            if idx >= n {
                Err(EvalError::MalformedGoal(format!("{what} index {idx} out of range")))
            } else {
                Ok(())
            }
        };
        for d in &self.dependencies {
            check(d.gated, "dependency")?;
            if d.triggers.is_empty() {
                return bad("dependency without triggers".into());
            }
            for &t in &d.triggers {
                check(t, "dependency trigger")?;
            }
        }
        for c in &self.constraints {
            match c {
                Constraint::TemporalOrder { order } => {
                    if order.len() < 2 {
                        return bad("temporal_order needs at least two entries".into());
                    }
                    let distinct: BTreeSet<_> = order.iter().collect();
                    if distinct.len() != order.len() {
                        return bad("temporal_order repeats an entry".into());
                    }
                    for &i in order {
                        check(i, "temporal_order")?;
                    }
                }
                Constraint::SameObjectAcrossSteps { pairs } => {
                    if pairs.is_empty() {
                        return bad("same_object_across_steps without pairs".into());
                    }
                    for &[a, b] in pairs {
                        check(a, "same_object")?;
                        check(b, "same_object")?;
                    }
                }
            }
        }
        // Waiting relations: gated waits on triggers, later list entries
        // wait on earlier ones. They must not form a cycle.
        let mut waits: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for d in &self.dependencies {
            waits[d.gated].extend(d.triggers.iter().copied());
        }
        for c in &self.constraints {
            if let Constraint::TemporalOrder { order } = c {
                for (k, &i) in order.iter().enumerate() {
                    waits[i].extend(order[..k].iter().copied());
                }
            }
        }
        if has_cycle(&waits) {
            return bad("dependency cycle".into());
        }
        Ok(())
    }

    /// Propositions that others wait on.
    pub fn milestones(&self) -> BTreeSet<usize> {
        let mut m: BTreeSet<usize> = self
            .dependencies
            .iter()
            .flat_map(|d| d.triggers.iter().copied())
            .collect();
        for c in &self.constraints {
            if let Constraint::TemporalOrder { order } = c {
                m.extend(order[..order.len() - 1].iter().copied());
            }
        }
        m
    }

    /// Every id referenced by a proposition.
    pub fn handles(&self) -> BTreeSet<&str> {
        self.propositions
            .iter()
            .flat_map(|p| p.object_handles.iter().chain(&p.receptacle_handles))
            .map(String::as_str)
            .collect()
    }

    /// Concatenates goals, shifting indices of the appended goal.
    pub fn concat(&self, other: &GoalSpec) -> GoalSpec {
        let off = self.propositions.len();
        let mut out = self.clone();
        out.propositions.extend(other.propositions.iter().cloned());
        out.dependencies.extend(other.dependencies.iter().map(|d| Dependency {
            kind: d.kind,
            gated: d.gated + off,
            triggers: d.triggers.iter().map(|t| t + off).collect(),
        }));
        out.constraints.extend(other.constraints.iter().map(|c| match c {
            Constraint::TemporalOrder { order } => Constraint::TemporalOrder {
                order: order.iter().map(|i| i + off).collect(),
            },
            Constraint::SameObjectAcrossSteps { pairs } => Constraint::SameObjectAcrossSteps {
                pairs: pairs.iter().map(|[a, b]| [a + off, b + off]).collect(),
            },
        }));
        out
    }
}

fn has_cycle(waits: &[BTreeSet<usize>]) -> bool {
    // 0 unvisited, 1 on stack, 2 done
    fn visit(i: usize, waits: &[BTreeSet<usize>], mark: &mut [u8]) -> bool {
        match mark[i] {
            1 => return true,
            2 => return false,
            _ => {}
        }
        mark[i] = 1;
        for &j in &waits[i] {
            if visit(j, waits, mark) {
                return true;
            }
        }
        mark[i] = 2;
        false
    }
    let mut mark = vec![0u8; waits.len()];
    (0..waits.len()).any(|i| visit(i, waits, &mut mark))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub percent_complete: f64,
    pub success: bool,
    /// Trace index at which each credited proposition was credited.
    pub first_satisfied_step: BTreeMap<usize, usize>,
    pub constraints_satisfied: bool,
}

impl TaskResult {
    pub fn sr(&self) -> f64 {
        if self.success {
            1.0
        } else {
            0.0
        }
    }
}

fn ensure_known(scene: &Scene, id: &str) -> Result<(), EvalError> {
    if scene.contains(id) {
        Ok(())
    } else {
        Err(EvalError::UnknownHandle(id.to_string()))
    }
}

/// Objects that witness the proposition in `state`. For next_to these are
/// the `a` side of every qualifying pair.
pub fn witnesses(prop: &Proposition, state: &WorldState, scene: &Scene) -> Result<BTreeSet<String>, EvalError> {
    for h in prop.object_handles.iter().chain(&prop.receptacle_handles) {
        ensure_known(scene, h)?;
    }
    let anchored = |id: &str, rel: Relation| -> bool {
        state.placement(id).is_some_and(|p| {
            let rel_ok = p.relation == rel
                || (rel == Relation::OnTop && p.relation == Relation::OnFloor);
            rel_ok && p.anchor.as_ref().is_some_and(|a| prop.receptacle_handles.contains(a))
        })
    };
    let out = match prop.kind {
        PropositionKind::IsOnTop => prop
            .object_handles
            .iter()
            .filter(|o| anchored(o, Relation::OnTop))
            .cloned()
            .collect(),
        PropositionKind::IsInside => prop
            .object_handles
            .iter()
            .filter(|o| anchored(o, Relation::Inside))
            .cloned()
            .collect(),
        PropositionKind::IsNextTo => {
            let threshold = prop.l2_threshold.unwrap_or(0.0);
            let mut found = BTreeSet::new();
            for a in &prop.object_handles {
                for b in &prop.receptacle_handles {
                    if a != b && next_to(state, a, b, threshold) {
                        found.insert(a.clone());
                    }
                }
            }
            found
        }
    };
    Ok(out)
}

fn next_to(state: &WorldState, a: &str, b: &str, threshold: f64) -> bool {
    match (state.placement(a), state.placement(b)) {
        (Some(pa), Some(pb)) => {
            pa.anchor.is_some()
                && pa.anchor == pb.anchor
                && distance(pa.position, pb.position) <= threshold
        }
        _ => false,
    }
}

fn satisfied_count(prop: &Proposition, state: &WorldState, scene: &Scene) -> Result<usize, EvalError> {
    if prop.kind != PropositionKind::IsNextTo {
        return Ok(witnesses(prop, state, scene)?.len());
    }
    for h in prop.object_handles.iter().chain(&prop.receptacle_handles) {
        ensure_known(scene, h)?;
    }
    let threshold = prop.l2_threshold.unwrap_or(0.0);
    let mut pairs = 0;
    for a in &prop.object_handles {
        for b in &prop.receptacle_handles {
            if a != b && next_to(state, a, b, threshold) {
                pairs += 1;
            }
        }
    }
    Ok(pairs)
}

pub fn check_proposition(prop: &Proposition, state: &WorldState, scene: &Scene) -> Result<bool, EvalError> {
    Ok(satisfied_count(prop, state, scene)? >= prop.number as usize)
}

pub fn evaluate_final(goal: &GoalSpec, state: &WorldState, scene: &Scene) -> Result<Vec<bool>, EvalError> {
    goal.propositions
        .iter()
        .map(|p| check_proposition(p, state, scene))
        .collect()
}

pub fn evaluate_trace(goal: &GoalSpec, trace: &[WorldState], scene: &Scene) -> Result<TaskResult, EvalError> {
    goal.validate()?;
    if trace.is_empty() {
        return Err(EvalError::MalformedGoal("empty trace".into()));
    }
    let n = goal.propositions.len();
    if n == 0 {
        return Ok(TaskResult {
            percent_complete: 1.0,
            success: true,
            first_satisfied_step: BTreeMap::new(),
            constraints_satisfied: true,
        });
    }
    let len = trace.len();
    let last = len - 1;
    let mut holds = vec![vec![false; len]; n];
    for (i, p) in goal.propositions.iter().enumerate() {
        for (t, s) in trace.iter().enumerate() {
            holds[i][t] = check_proposition(p, s, scene)?;
        }
    }
    let rising = |i: usize, t: usize| holds[i][t] && (t == 0 || !holds[i][t - 1]);
    let fell_by = |i: usize, t: usize| (1..=t).any(|s| holds[i][s - 1] && !holds[i][s]);

    let mut predecessors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for c in &goal.constraints {
        if let Constraint::TemporalOrder { order } = c {
            for (k, &i) in order.iter().enumerate() {
                predecessors[i].extend(order[..k].iter().copied());
            }
        }
    }
    let milestones = goal.milestones();
    let mut credit: Vec<Option<usize>> = vec![None; n];

    let admissible = |i: usize, t: usize, credit: &[Option<usize>]| -> bool {
        let before = |j: usize| credit[j].is_some_and(|c| c < t);
        let deps_ok = goal.dependencies.iter().filter(|d| d.gated == i).all(|d| match d.kind {
            DependencyKind::AfterSatisfied => d.triggers.iter().all(|&j| before(j)),
            DependencyKind::AfterUnsatisfied => d.triggers.iter().any(|&j| fell_by(j, t)),
        });
        deps_ok && predecessors[i].iter().all(|&j| before(j))
    };

    // Milestones latch in time order; admissibility only looks at credit
    // strictly before t, so one sweep is enough.
    for t in 0..len {
        let newly: Vec<usize> = milestones
            .iter()
            .copied()
            .filter(|&i| credit[i].is_none() && rising(i, t) && admissible(i, t, &credit))
            .collect();
        for i in newly {
            credit[i] = Some(t);
        }
    }
    for i in (0..n).filter(|i| !milestones.contains(i)) {
        if !holds[i][last] {
            continue;
        }
        let start = (0..=last).rev().take_while(|&t| holds[i][t]).last().unwrap_or(last);
        if admissible(i, start, &credit) {
            credit[i] = Some(start);
        }
    }

    let credited = credit.iter().filter(|c| c.is_some()).count();
    let percent_complete = credited as f64 / n as f64;
    let mut constraints_satisfied = true;
    for c in &goal.constraints {
        let ok = match c {
            Constraint::TemporalOrder { order } => order
                .windows(2)
                .all(|w| matches!((credit[w[0]], credit[w[1]]), (Some(a), Some(b)) if a < b)),
            Constraint::SameObjectAcrossSteps { pairs } => {
                let mut ok = true;
                for &[a, b] in pairs {
                    ok &= match (credit[a], credit[b]) {
                        (Some(ta), Some(tb)) => {
                            let wa = witnesses(&goal.propositions[a], &trace[ta], scene)?;
                            let wb = witnesses(&goal.propositions[b], &trace[tb], scene)?;
                            !wa.is_disjoint(&wb)
                        }
                        _ => false,
                    };
                }
                ok
            }
        };
        constraints_satisfied &= ok;
    }
    Ok(TaskResult {
        percent_complete,
        success: credited == n && constraints_satisfied,
        first_satisfied_step: credit
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|t| (i, t)))
            .collect(),
        constraints_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{apply_skill, test_scenes::TINY, SkillCall, SpatialRelation};

    fn scene() -> Scene {
        Scene::from_json(TINY).unwrap()
    }

    fn trace(scene: &Scene, calls: &[SkillCall]) -> Vec<WorldState> {
        let mut out = vec![WorldState::initial(scene)];
        for c in calls {
            let t = apply_skill(out.last().unwrap(), scene, c);
            assert!(t.succeeded(), "{c}: {:?}", t.result);
            out.push(t.state);
        }
        out
    }

    fn move_cup_0_to_table() -> Vec<SkillCall> {
        vec![
            SkillCall::Navigate { target: "counter_22".into() },
            SkillCall::Pick { object: "cup_0".into() },
            SkillCall::Navigate { target: "table_7".into() },
            SkillCall::place_next_to("cup_0", "table_7", "cup_1"),
        ]
    }

    #[test]
    fn number_counts_objects() {
        let s = scene();
        let st = WorldState::initial(&s);
        let p = Proposition::on_top(&["cup_0", "cup_1", "toy_2"], &["counter_22"]);
        assert!(check_proposition(&p, &st, &s).unwrap());
        assert!(!check_proposition(&p.clone().with_number(2), &st, &s).unwrap());
        let missing = Proposition::on_top(&["ghost_1"], &["counter_22"]);
        assert_eq!(check_proposition(&missing, &st, &s), Err(EvalError::UnknownHandle("ghost_1".into())));
    }

    #[test]
    fn next_to_at_same_spot() {
        let s = scene();
        let mut st = WorldState::initial(&s);
        let p1 = st.placements["cup_1"].clone();
        let mut p0 = p1.clone();
        p0.object_id = "cup_0".into();
        st.placements.insert("cup_0".into(), p0);
        let p = Proposition::next_to(&["cup_0"], &["cup_1"], 1.0);
        assert!(check_proposition(&p, &st, &s).unwrap());
    }

    #[test]
    fn order_violation_gives_zero() {
        let s = scene();
        let tr = trace(&s, &move_cup_0_to_table());
        let goal = GoalSpec {
            propositions: vec![
                Proposition::on_top(&["cup_0"], &["shelf_2"]),
                Proposition::on_top(&["cup_0"], &["table_7"]),
            ],
            dependencies: vec![],
            constraints: vec![Constraint::TemporalOrder { order: vec![0, 1] }],
        };
        let r = evaluate_trace(&goal, &tr, &s).unwrap();
        assert_eq!(r.percent_complete, 0.0);
        assert!(!r.success);
    }

    #[test]
    fn ordered_route_is_credited() {
        let s = scene();
        let mut calls = vec![
            SkillCall::Navigate { target: "counter_22".into() },
            SkillCall::Pick { object: "cup_0".into() },
            SkillCall::Navigate { target: "shelf_2".into() },
            SkillCall::place("cup_0", SpatialRelation::On, "shelf_2"),
            SkillCall::Pick { object: "cup_0".into() },
        ];
        calls.extend(move_cup_0_to_table()[2..].iter().cloned());
        let tr = trace(&s, &calls);
        let goal = GoalSpec {
            propositions: vec![
                Proposition::on_top(&["cup_0"], &["shelf_2"]),
                Proposition::on_top(&["cup_0"], &["table_7"]),
            ],
            dependencies: vec![],
            constraints: vec![
                Constraint::TemporalOrder { order: vec![0, 1] },
                Constraint::SameObjectAcrossSteps { pairs: vec![[0, 1]] },
            ],
        };
        let r = evaluate_trace(&goal, &tr, &s).unwrap();
        assert_eq!(r.percent_complete, 1.0);
        assert!(r.success);
        assert_eq!(r.first_satisfied_step[&0], 4);
    }

    #[test]
    fn empty_goal_succeeds() {
        let s = scene();
        let r = evaluate_trace(&GoalSpec::default(), &[WorldState::initial(&s)], &s).unwrap();
        assert_eq!((r.percent_complete, r.success), (1.0, true));
    }

    #[test]
    fn after_unsatisfied_waits_for_a_fall() {
        let s = scene();
        let tr = trace(&s, &move_cup_0_to_table());
        let goal = GoalSpec {
            propositions: vec![
                Proposition::on_top(&["cup_0"], &["counter_22"]),
                Proposition::on_top(&["cup_0"], &["table_7"]),
            ],
            dependencies: vec![Dependency {
                kind: DependencyKind::AfterUnsatisfied,
                gated: 1,
                triggers: vec![0],
            }],
            constraints: vec![],
        };
        let r = evaluate_trace(&goal, &tr, &s).unwrap();
        // cup_0 left the counter, so the table placement counts; the counter
        // proposition itself was credited at t = 0.
        assert_eq!(r.first_satisfied_step.get(&1), Some(&4));
        assert_eq!(r.percent_complete, 1.0);
    }

    #[test]
    fn malformed_goals_rejected() {
        let mut p = Proposition::on_top(&["cup_0"], &["table_7"]);
        p.l2_threshold = Some(1.0);
        assert!(GoalSpec::new(vec![p]).validate().is_err());
        let cyc = GoalSpec {
            propositions: vec![
                Proposition::on_top(&["cup_0"], &["table_7"]),
                Proposition::on_top(&["cup_1"], &["table_7"]),
            ],
            dependencies: vec![
                Dependency { kind: DependencyKind::AfterSatisfied, gated: 0, triggers: vec![1] },
                Dependency { kind: DependencyKind::AfterSatisfied, gated: 1, triggers: vec![0] },
            ],
            constraints: vec![],
        };
        assert!(matches!(cyc.validate(), Err(EvalError::MalformedGoal(_))));
    }
}
