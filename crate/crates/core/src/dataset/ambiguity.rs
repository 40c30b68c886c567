use serde::{Deserialize, Serialize};

use super::{target_objects, Corpus, Episode, Stage};
use crate::world::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The target has no same-category distractor, so the instruction is
    /// not underspecified.
    NoDistractor { object: String, category: String },
    /// No referenced acquisition episode pins this target to one handle.
    NotNamedUniquely { object: String },
    MissingReference { reference: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub episode_id: String,
    pub violations: Vec<Violation>,
}

impl AmbiguityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Mechanical underspecification check for a utilization episode. The
/// `acquisitions` slice should hold the episodes it references; others are
/// ignored. Acquisition episodes get an empty report.
pub fn check_ambiguity(episode: &Episode, scene: &Scene, acquisitions: &[&Episode]) -> AmbiguityReport {
    let mut report = AmbiguityReport {
        episode_id: episode.episode_id.clone(),
        violations: Vec::new(),
    };
    if episode.stage == Stage::Acquisition {
        return report;
    }
    let refs: Vec<&Episode> = episode
        .references
        .iter()
        .filter_map(|r| {
            let found = acquisitions.iter().find(|a| &a.episode_id == r).copied();
            if found.is_none() {
                report.violations.push(Violation::MissingReference { reference: r.clone() });
            }
            found
        })
        .collect();
    for obj in target_objects(episode) {
        let Some(spec) = scene.object(&obj) else { continue };
        if scene.objects_of_category(&spec.category).count() < 2 {
            report.violations.push(Violation::NoDistractor {
                object: obj.clone(),
                category: spec.category.clone(),
            });
        }
        // Some acquisition proposition must mention exactly this object.
        let unique = refs.iter().any(|a| {
            a.goal
                .propositions
                .iter()
                .any(|p| p.object_handles.len() == 1 && p.object_handles[0] == obj)
        });
        if !unique {
            report.violations.push(Violation::NotNamedUniquely { object: obj });
        }
    }
    report
}

/// Reports for every utilization episode with at least one violation.
pub fn check_corpus(corpus: &Corpus) -> Vec<AmbiguityReport> {
    corpus
        .by_stage(Stage::Utilization)
        .filter_map(|e| {
            let scene = corpus.scene(&e.scene_id)?;
            let acq: Vec<&Episode> = e.references.iter().filter_map(|r| corpus.episode(r)).collect();
            let r = check_ambiguity(e, scene, &acq);
            (!r.is_clean()).then_some(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::{acq, util};
    use crate::world::test_scenes::TINY;

    #[test]
    fn flags_missing_distractor() {
        let scene = Scene::from_json(TINY).unwrap();
        let a = acq("a1", "cup_0", "table_7");
        let u = util("u1", "cup_0", "table_7", "a1");
        assert!(check_ambiguity(&u, &scene, &[&a]).is_clean());
        assert!(check_ambiguity(&a, &scene, &[]).is_clean());

        let a2 = acq("a2", "bowl_0", "table_7");
        let u2 = util("u2", "bowl_0", "table_7", "a2");
        let r = check_ambiguity(&u2, &scene, &[&a2]);
        assert!(matches!(&r.violations[..], [Violation::NoDistractor { category, .. }] if category == "bowl"));

        let r = check_ambiguity(&u, &scene, &[]);
        assert!(r.violations.contains(&Violation::MissingReference { reference: "a1".into() }));
    }
}
