use std::collections::BTreeSet;

use super::{DatasetError, Episode, Stage};

/// Objects an episode moves: the object side of every proposition.
pub fn target_objects(episode: &Episode) -> BTreeSet<String> {
    episode
        .goal
        .propositions
        .iter()
        .flat_map(|p| p.object_handles.iter().cloned())
        .collect()
}

/// Joins two or three utilization episodes into one that needs all of
/// their memories. Instructions are concatenated in argument order and goal
/// indices of later parts are shifted. Knowledge type and subtype are taken
/// from the first part.
pub fn compose_joint(parts: &[&Episode]) -> Result<Episode, DatasetError> {
    let [first, rest @ ..] = parts else {
        return Err(DatasetError::InvalidComposition("no episodes given".into()));
    };
    if rest.is_empty() {
        return Err(DatasetError::InvalidComposition("need at least two episodes".into()));
    }
    let mut seen = BTreeSet::new();
    let mut overlap = BTreeSet::new();
    for e in parts {
        if e.stage != Stage::Utilization {
            return Err(DatasetError::InvalidComposition(format!("{} is not a utilization episode", e.episode_id)));
        }
        if e.scene_id != first.scene_id {
            return Err(DatasetError::SceneMismatch(first.scene_id.clone(), e.scene_id.clone()));
        }
        for t in target_objects(e) {
            if !seen.insert(t.clone()) {
                overlap.insert(t);
            }
        }
    }
    if !overlap.is_empty() {
        return Err(DatasetError::OverlappingTargets(overlap.into_iter().collect()));
    }
    let mut goal = first.goal.clone();
    let mut references = first.references.clone();
    let mut instruction = first.instruction.trim().to_string();
    for e in rest {
        goal = goal.concat(&e.goal);
        for r in &e.references {
            if !references.contains(r) {
                references.push(r.clone());
            }
        }
        instruction.push(' ');
        instruction.push_str(e.instruction.trim());
    }
    Ok(Episode {
        episode_id: parts.iter().map(|e| e.episode_id.as_str()).collect::<Vec<_>>().join("+"),
        scene_id: first.scene_id.clone(),
        stage: Stage::Utilization,
        knowledge_type: first.knowledge_type,
        subtype: first.subtype,
        instruction,
        goal,
        references,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::util;
    use crate::evaluator::evaluate_trace;
    use crate::world::test_scenes::TINY;
    use crate::world::{apply_skill, Scene, SkillCall, SpatialRelation, WorldState};

    #[test]
    fn joint_concatenates_and_scores_halves() {
        let scene = Scene::from_json(TINY).unwrap();
        let a = util("u1", "cup_0", "table_7", "a1");
        let b = util("u2", "toy_2", "shelf_2", "a2");
        let j = compose_joint(&[&a, &b]).unwrap();
        assert_eq!(j.goal.propositions.len(), 2);
        assert_eq!(j.references, vec!["a1", "a2"]);
        assert_eq!(j.instruction, format!("{} {}", a.instruction, b.instruction));

        // Only the first half done: PC = 1/2.
        let mut s = WorldState::initial(&scene);
        let mut trace = vec![s.clone()];
        for call in [
            SkillCall::Navigate { target: "cup_0".into() },
            SkillCall::Pick { object: "cup_0".into() },
            SkillCall::Navigate { target: "table_7".into() },
            SkillCall::place("cup_0", SpatialRelation::On, "table_7"),
        ] {
            s = apply_skill(&s, &scene, &call).state;
            trace.push(s.clone());
        }
        let r = evaluate_trace(&j.goal, &trace, &scene).unwrap();
        assert_eq!(r.percent_complete, 0.5);
        assert!(!r.success);
    }

    #[test]
    fn three_way() {
        let parts = [
            util("u1", "cup_0", "table_7", "a1"),
            util("u2", "toy_2", "shelf_2", "a2"),
            util("u3", "bowl_0", "table_7", "a3"),
        ];
        let j = compose_joint(&[&parts[0], &parts[1], &parts[2]]).unwrap();
        assert_eq!(j.references.len(), 3);
        assert_eq!(j.goal.propositions.len(), 3);
        assert_eq!(j.task_kind(), crate::dataset::TaskKind::Joint3);
    }

    #[test]
    fn rejects_overlap_and_scene_mismatch() {
        let a = util("u1", "cup_0", "table_7", "a1");
        let b = util("u2", "cup_0", "shelf_2", "a2");
        assert!(matches!(compose_joint(&[&a, &b]), Err(DatasetError::OverlappingTargets(_))));
        let mut c = util("u3", "toy_2", "shelf_2", "a3");
        c.scene_id = "other".into();
        assert!(matches!(compose_joint(&[&a, &c]), Err(DatasetError::SceneMismatch(..))));
        assert!(compose_joint(&[&a]).is_err());
    }
}
