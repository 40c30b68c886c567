#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use hearth_core::profile::{update_profile, Decision, NodeType, ProfileConfig, ProfileGraph, UpdateOutcome};
use hearth_core::providers::{HashEmbedder, ScriptedChat};
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Deserialize)]
struct BaseEntry {
    instruction: String,
    extraction: serde_json::Value,
}

#[derive(Deserialize)]
pub struct UpdateCase {
    pub original: String,
    pub instruction: String,
    pub extraction: serde_json::Value,
    pub decision: String,
}

#[derive(Deserialize)]
pub struct ReferenceCase {
    pub instruction: String,
    pub extraction: serde_json::Value,
    pub decision: String,
    pub expected_new: Vec<String>,
}

fn load<T: for<'de> Deserialize<'de>>(name: &str) -> T {
    let raw = std::fs::read_to_string(fixtures().join("profile_noise").join(name)).unwrap();
    serde_json::from_str(&raw).unwrap()
}

/// Graph built from the original instructions, one scripted extraction each.
pub fn base_graph() -> ProfileGraph {
    let entries: Vec<BaseEntry> = load("base.json");
    let embedder = HashEmbedder::new();
    let mut g = ProfileGraph::with_user("user");
    for e in entries {
        // An empty graph asks for no decision; later ones are all adds.
        let chat = ScriptedChat::cursor("base", [e.extraction.to_string(), "add".to_string()]);
        let (next, outcomes) = update_profile(&g, &e.instruction, &chat, &embedder, ProfileConfig::default()).unwrap();
        assert!(outcomes.iter().all(|o| o.decision == Decision::Add));
        g = next;
    }
    g
}

pub struct UpdateResult {
    pub original: String,
    pub outcome: UpdateOutcome,
    pub knowledge_before: usize,
    pub knowledge_after: usize,
    pub graph: ProfileGraph,
}

pub fn replay_updates(base: &ProfileGraph) -> Vec<UpdateResult> {
    let embedder = HashEmbedder::new();
    let cases: Vec<UpdateCase> = load("knowledge_update.json");
    cases
        .into_iter()
        .map(|c| {
            let chat = ScriptedChat::cursor("update", [c.extraction.to_string(), c.decision.clone()]);
            let (g, mut outcomes) =
                update_profile(base, &c.instruction, &chat, &embedder, ProfileConfig::default()).unwrap();
            assert_eq!(outcomes.len(), 1);
            UpdateResult {
                original: c.original,
                outcome: outcomes.remove(0),
                knowledge_before: base.count(NodeType::Knowledge),
                knowledge_after: g.count(NodeType::Knowledge),
                graph: g,
            }
        })
        .collect()
}

pub struct ReferenceResult {
    /// (text, reused) for the first binding of each distinct object or
    /// location reference.
    pub references: Vec<(String, bool)>,
    pub expected_new: Vec<String>,
    pub knowledge_delta: isize,
    pub graph: ProfileGraph,
}

pub fn replay_references(base: &ProfileGraph) -> Vec<ReferenceResult> {
    let embedder = HashEmbedder::new();
    let cases: Vec<ReferenceCase> = load("node_reference.json");
    cases
        .into_iter()
        .map(|c| {
            let chat = ScriptedChat::cursor("reference", [c.extraction.to_string(), c.decision.clone()]);
            let (g, outcomes) =
                update_profile(base, &c.instruction, &chat, &embedder, ProfileConfig::default()).unwrap();
            let mut seen = BTreeSet::new();
            let mut references = Vec::new();
            for o in &outcomes {
                for b in &o.report.bindings {
                    if matches!(b.node_type, NodeType::Object | NodeType::Location) && seen.insert(b.text.clone()) {
                        references.push((b.text.clone(), b.reused));
                    }
                }
            }
            ReferenceResult {
                references,
                expected_new: c.expected_new,
                knowledge_delta: g.count(NodeType::Knowledge) as isize - base.count(NodeType::Knowledge) as isize,
                graph: g,
            }
        })
        .collect()
}
