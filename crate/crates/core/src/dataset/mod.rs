//! Episode schema, corpus loading and validation, joint composition and
//! the ambiguity check.
//!
//! On disk a corpus is a directory holding `manifest.json`,
//! `episodes.jsonl` and `scenes/<scene_id>.json`.

mod ambiguity;
mod compose;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::GoalSpec;
use crate::world::{Scene, SceneError};

pub use ambiguity::{check_ambiguity, check_corpus, AmbiguityReport, Violation};
pub use compose::{compose_joint, target_objects};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("episode {episode}: {reason}")]
    SchemaError { episode: String, reason: String },
    #[error("episode {episode}: reference {reference} is not an acquisition episode in the corpus")]
    DanglingReference { episode: String, reference: String },
    #[error("episode {episode}: unknown scene {scene}")]
    UnknownScene { episode: String, scene: String },
    #[error("scene {scene}: {source}")]
    Scene { scene: String, source: SceneError },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("cannot compose episodes from different scenes ({0} vs {1})")]
    SceneMismatch(String, String),
    #[error("episodes share target objects: {0:?}")]
    OverlappingTargets(Vec<String>),
    #[error("cannot compose: {0}")]
    InvalidComposition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Acquisition,
    Utilization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeType {
    ObjectSemantics,
    UserPattern,
}

impl KnowledgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ObjectSemantics => "object_semantics",
            Self::UserPattern => "user_pattern",
        }
    }

    pub fn allows(self, subtype: Subtype) -> bool {
        use Subtype::*;
        match self {
            Self::ObjectSemantics => matches!(subtype, Ownership | Preference | History | Groups),
            Self::UserPattern => matches!(subtype, Routine | Preference),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Ownership,
    Preference,
    History,
    Groups,
    Routine,
}

/// Table grouping of an episode: acquisition, or utilization by how many
/// memories it draws on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Acquisition,
    Single,
    Joint,
    Joint3,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Acquisition => "acquisition",
            Self::Single => "single",
            Self::Joint => "joint",
            Self::Joint3 => "joint3",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub scene_id: String,
    pub stage: Stage,
    pub knowledge_type: KnowledgeType,
    pub subtype: Subtype,
    pub instruction: String,
    pub goal: GoalSpec,
    /// Acquisition episodes this one depends on (utilization only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
}

impl Episode {
    pub fn task_kind(&self) -> TaskKind {
        match (self.stage, self.references.len()) {
            (Stage::Acquisition, _) => TaskKind::Acquisition,
            (_, 0 | 1) => TaskKind::Single,
            (_, 2) => TaskKind::Joint,
            _ => TaskKind::Joint3,
        }
    }

    fn schema(&self, reason: impl Into<String>) -> DatasetError {
        DatasetError::SchemaError {
            episode: self.episode_id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks that hold for an episode in isolation against its scene.
    pub fn validate(&self, scene: &Scene) -> Result<(), DatasetError> {
        if self.episode_id.trim().is_empty() {
            return Err(self.schema("empty episode_id"));
        }
        if !self.knowledge_type.allows(self.subtype) {
            return Err(self.schema(format!(
                "subtype {:?} does not belong to {}",
                self.subtype,
                self.knowledge_type.as_str()
            )));
        }
        if self.instruction.trim().is_empty() {
            return Err(self.schema("empty instruction"));
        }
        match (self.stage, self.references.len()) {
            (Stage::Acquisition, 0) => {}
            (Stage::Acquisition, _) => return Err(self.schema("acquisition episodes carry no references")),
            (Stage::Utilization, 1..=3) => {}
            (Stage::Utilization, n) => return Err(self.schema(format!("utilization needs 1-3 references, has {n}"))),
        }
        if self.goal.propositions.is_empty() {
            return Err(self.schema("goal has no propositions"));
        }
        self.goal.validate().map_err(|e| self.schema(e.to_string()))?;
        for h in self.goal.handles() {
            if !scene.contains(h) {
                return Err(self.schema(format!("goal handle {h} is not in scene {}", scene.id())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenes: Vec<String>,
    /// Episode counts per task kind and per knowledge type.
    pub counts: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn describe(scenes: &BTreeMap<String, Scene>, episodes: &[Episode]) -> Self {
        let mut counts = BTreeMap::new();
        for e in episodes {
            *counts.entry(e.task_kind().as_str().to_string()).or_insert(0) += 1;
            *counts.entry(e.knowledge_type.as_str().to_string()).or_insert(0) += 1;
        }
        Self {
            schema_version: CORPUS_SCHEMA_VERSION,
            scenes: scenes.keys().cloned().collect(),
            counts,
        }
    }
}

/// A validated set of scenes and episodes. Immutable after load.
#[derive(Debug, Clone)]
pub struct Corpus {
    scenes: BTreeMap<String, Scene>,
    episodes: Vec<Episode>,
    index: BTreeMap<String, usize>,
    manifest: Manifest,
}

impl Corpus {
    /// Validates and indexes. Episode order is preserved; it fixes the
    /// order episodes are run in.
    pub fn new(scenes: Vec<Scene>, episodes: Vec<Episode>) -> Result<Self, DatasetError> {
        let scenes: BTreeMap<String, Scene> = scenes.into_iter().map(|s| (s.id().to_string(), s)).collect();
        let mut index = BTreeMap::new();
        for (i, e) in episodes.iter().enumerate() {
            if index.insert(e.episode_id.clone(), i).is_some() {
                return Err(e.schema("duplicate episode_id"));
            }
        }
        for e in &episodes {
            let scene = scenes.get(&e.scene_id).ok_or_else(|| DatasetError::UnknownScene {
                episode: e.episode_id.clone(),
                scene: e.scene_id.clone(),
            })?;
            e.validate(scene)?;
            let mut seen = BTreeSet::new();
            for r in &e.references {
                let target = index
                    .get(r)
                    .map(|&i| &episodes[i])
                    .filter(|t: &&Episode| t.stage == Stage::Acquisition)
                    .ok_or_else(|| DatasetError::DanglingReference {
                        episode: e.episode_id.clone(),
                        reference: r.clone(),
                    })?;
                if target.scene_id != e.scene_id {
                    return Err(e.schema(format!("reference {r} is in scene {}", target.scene_id)));
                }
                if !seen.insert(r) {
                    return Err(e.schema(format!("reference {r} listed twice")));
                }
            }
        }
        let manifest = Manifest::describe(&scenes, &episodes);
        Ok(Self {
            scenes,
            episodes,
            index,
            manifest,
        })
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        load_corpus(dir)
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.get(id)
    }

    pub fn scenes(&self) -> impl Iterator<Item = &Scene> {
        self.scenes.values()
    }

    pub fn episode(&self, id: &str) -> Option<&Episode> {
        self.index.get(id).map(|&i| &self.episodes[i])
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn by_stage(&self, stage: Stage) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(move |e| e.stage == stage)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Writes the on-disk layout. Overwrites existing files.
    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| DatasetError::Io { path, source }
        };
        let scenes_dir = dir.join("scenes");
        std::fs::create_dir_all(&scenes_dir).map_err(io(&scenes_dir))?;
        for s in self.scenes.values() {
            let p = scenes_dir.join(format!("{}.json", s.id()));
            std::fs::write(&p, s.to_json() + "\n").map_err(io(&p))?;
        }
        let mut lines = String::new();
        for e in &self.episodes {
            lines.push_str(&serde_json::to_string(e).expect("episode serializes"));
            lines.push('\n');
        }
        let p = dir.join("episodes.jsonl");
        std::fs::write(&p, lines).map_err(io(&p))?;
        let p = dir.join("manifest.json");
        let m = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        std::fs::write(&p, m).map_err(io(&p))
    }
}

pub fn load_corpus(dir: &Path) -> Result<Corpus, DatasetError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| DatasetError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let manifest: Manifest = serde_json::from_str(&read(&dir.join("manifest.json"))?)
        .map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if manifest.schema_version != CORPUS_SCHEMA_VERSION {
        return Err(DatasetError::Manifest(format!(
            "unsupported schema_version {}",
            manifest.schema_version
        )));
    }
    let mut scenes = Vec::new();
    for id in &manifest.scenes {
        let p = dir.join("scenes").join(format!("{id}.json"));
        let scene = Scene::from_json(&read(&p)?).map_err(|source| DatasetError::Scene {
            scene: id.clone(),
            source,
        })?;
        if scene.id() != id {
            return Err(DatasetError::Manifest(format!("{} declares scene_id {}", p.display(), scene.id())));
        }
        scenes.push(scene);
    }
    let mut episodes = Vec::new();
    for (n, line) in read(&dir.join("episodes.jsonl"))?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: Episode = serde_json::from_str(line).map_err(|err| {
            // Name the episode if its id is at least readable.
            let episode = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("episode_id").and_then(|x| x.as_str()).map(str::to_string))
                .unwrap_or_else(|| format!("line {}", n + 1));
            DatasetError::SchemaError {
                episode,
                reason: err.to_string(),
            }
        })?;
        episodes.push(e);
    }
    let corpus = Corpus::new(scenes, episodes)?;
    if corpus.manifest != manifest {
        return Err(DatasetError::Manifest(format!(
            "declared counts {:?} differ from content {:?}",
            manifest.counts, corpus.manifest.counts
        )));
    }
    Ok(corpus)
}

/// Directory of the corpus shipped with the crate.
pub fn bundled_corpus_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("corpus")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::evaluator::Proposition;
    use crate::world::test_scenes::TINY;

    pub(crate) fn acq(id: &str, obj: &str, recep: &str) -> Episode {
        Episode {
            episode_id: id.into(),
            scene_id: "tiny".into(),
            stage: Stage::Acquisition,
            knowledge_type: KnowledgeType::ObjectSemantics,
            subtype: Subtype::Ownership,
            instruction: format!("Put {obj} on {recep}."),
            goal: GoalSpec::new(vec![Proposition::on_top(&[obj], &[recep])]),
            references: vec![],
        }
    }

    pub(crate) fn util(id: &str, obj: &str, recep: &str, reference: &str) -> Episode {
        Episode {
            stage: Stage::Utilization,
            references: vec![reference.into()],
            instruction: format!("Put my thing on {recep}."),
            ..acq(id, obj, recep)
        }
    }

    fn tiny() -> Scene {
        Scene::from_json(TINY).unwrap()
    }

    #[test]
    fn validates_and_counts() {
        let c = Corpus::new(
            vec![tiny()],
            vec![acq("a1", "cup_0", "table_7"), util("u1", "cup_0", "table_7", "a1")],
        )
        .unwrap();
        assert_eq!(c.manifest().counts["acquisition"], 1);
        assert_eq!(c.manifest().counts["single"], 1);
        assert_eq!(c.manifest().counts["object_semantics"], 2);
    }

    #[test]
    fn rejects_bad_episodes() {
        let bad_handle = acq("a1", "cup_9", "table_7");
        assert!(matches!(
            Corpus::new(vec![tiny()], vec![bad_handle]),
            Err(DatasetError::SchemaError { episode, .. }) if episode == "a1"
        ));
        let mut other = acq("a2", "cup_0", "table_7");
        other.scene_id = "nowhere".into();
        assert!(matches!(
            Corpus::new(vec![tiny()], vec![other]),
            Err(DatasetError::UnknownScene { scene, .. }) if scene == "nowhere"
        ));
        assert!(matches!(
            Corpus::new(vec![tiny()], vec![util("u1", "cup_0", "table_7", "missing")]),
            Err(DatasetError::DanglingReference { .. })
        ));
        let mut wrong = acq("a3", "cup_0", "table_7");
        wrong.subtype = Subtype::Routine;
        assert!(Corpus::new(vec![tiny()], vec![wrong]).is_err());
    }

    #[test]
    fn write_then_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::new(
            vec![tiny()],
            vec![acq("a1", "cup_0", "table_7"), util("u1", "cup_0", "table_7", "a1")],
        )
        .unwrap();
        c.write(dir.path()).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back.episodes(), c.episodes());
        // A tampered manifest is caught.
        let m = dir.path().join("manifest.json");
        let raw = std::fs::read_to_string(&m).unwrap().replace("\"single\": 1", "\"single\": 2");
        std::fs::write(&m, raw).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(DatasetError::Manifest(_))));
    }
}
