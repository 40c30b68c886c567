//! User-profile knowledge graph: a user node, knowledge nodes beneath it
//! and element nodes (patterns, objects, locations) beneath those.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{Embedding, ProviderError};

mod extract;
mod retrieve;
mod search;
mod update;

pub use extract::{
    extract_knowledge, ExtractedElement, ExtractedKnowledge, ExtractionResult, LocationElement, ObjectElement,
};
pub use retrieve::{render_subtree, retrieve_profile, ProfileRetrieval};
pub use search::{expand, remove_duplicates, similarity_search, NodeFilter};
pub use update::{
    apply_update, decide_add_or_update, gather_candidates, update_profile, ApplyReport, Candidate, Decision,
    ElementBinding, ProfileConfig, UpdateOutcome,
};

pub const DEFAULT_REUSE_THRESHOLD: f64 = 0.80;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile graph invariant violated: {0}")]
    InvariantViolation(String),
    #[error("could not parse extraction: {0}")]
    UnparseableExtraction(String),
    #[error("could not parse add/update decision: {0}")]
    UnparseableDecision(String),
    #[error("a language-model provider is required")]
    ProviderUnavailable,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invalid profile graph document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSubtype {
    ObjectSemantics,
    UserPattern,
}

impl KnowledgeSubtype {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ObjectSemantics => "object_semantics",
            Self::UserPattern => "user_pattern",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Instance,
    Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    User,
    Knowledge,
    Pattern,
    Object,
    Location,
}

impl NodeType {
    fn prefix(self) -> &'static str {
        match self {
            Self::User => "u",
            Self::Knowledge => "k",
            Self::Pattern => "p",
            Self::Object => "o",
            Self::Location => "l",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeData {
    User {
        name: String,
    },
    Knowledge {
        subtype: KnowledgeSubtype,
        alias: String,
        description: String,
    },
    Pattern {
        name: String,
        args: Vec<String>,
    },
    Object {
        name: String,
        granularity: Granularity,
    },
    Location {
        name: String,
        expression: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileNode {
    pub id: String,
    #[serde(flatten)]
    pub data: NodeData,
}

impl ProfileNode {
    pub fn node_type(&self) -> NodeType {
        match self.data {
            NodeData::User { .. } => NodeType::User,
            NodeData::Knowledge { .. } => NodeType::Knowledge,
            NodeData::Pattern { .. } => NodeType::Pattern,
            NodeData::Object { .. } => NodeType::Object,
            NodeData::Location { .. } => NodeType::Location,
        }
    }

    /// Text used for similarity search.
    pub fn text(&self) -> String {
        match &self.data {
            NodeData::User { name } => name.clone(),
            NodeData::Knowledge { alias, description, .. } => format!("{alias} {description}").trim().to_string(),
            NodeData::Pattern { name, args } => format!("{name} {}", args.join(" ")).trim().to_string(),
            NodeData::Object { name, .. } => name.clone(),
            NodeData::Location { name, expression } => format!("{name} {expression}").trim().to_string(),
        }
    }

    pub fn subtype(&self) -> Option<KnowledgeSubtype> {
        match self.data {
            NodeData::Knowledge { subtype, .. } => Some(subtype),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    Hierarchical,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    RefersTo,
    Entails,
    Target,
    ComposedOf,
    Before,
}

impl Relation {
    pub fn edge_type(self) -> EdgeType {
        if self == Self::Before {
            EdgeType::Temporal
        } else {
            EdgeType::Hierarchical
        }
    }

    fn allows(self, source: NodeType, target: NodeType) -> bool {
        use NodeType::*;
        matches!(
            (self, source, target),
            (Self::RefersTo, User, Knowledge)
                | (Self::Entails, Knowledge, Pattern)
                | (Self::Target, Pattern, Object)
                | (Self::Target, Pattern, Location)
                | (Self::ComposedOf, Knowledge, Object)
                | (Self::Before, Pattern, Pattern)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProfileEdge {
    pub source: String,
    pub target: String,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    pub relation: Relation,
}

impl ProfileEdge {
    pub fn new(source: &str, target: &str, relation: Relation) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            edge_type: relation.edge_type(),
            relation,
        }
    }
}

/// Sort key that orders `k2` before `k10`.
fn id_key(id: &str) -> (String, u64, String) {
    let split = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    let (prefix, num) = id.split_at(split);
    (prefix.to_string(), num.parse().unwrap_or(u64::MAX), id.to_string())
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<ProfileNode>,
    edges: Vec<ProfileEdge>,
}

#[derive(Debug, Default)]
pub struct ProfileGraph {
    nodes: BTreeMap<String, ProfileNode>,
    edges: BTreeSet<ProfileEdge>,
    /// Embeddings keyed by (embedder identity, node text).
    embed_cache: Mutex<BTreeMap<(String, String), Embedding>>,
}

impl Clone for ProfileGraph {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            embed_cache: Mutex::new(self.embed_cache.lock().expect("embed cache poisoned").clone()),
        }
    }
}

impl PartialEq for ProfileGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl ProfileGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph with a single user node `u1`.
    pub fn with_user(name: &str) -> Self {
        let mut g = Self::new();
        g.insert_node(NodeType::User, NodeData::User { name: name.into() });
        g
    }

    pub fn node(&self, id: &str) -> Option<&ProfileNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ProfileNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &ProfileEdge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn count(&self, t: NodeType) -> usize {
        self.nodes.values().filter(|n| n.node_type() == t).count()
    }

    pub fn ids_of(&self, t: NodeType) -> Vec<String> {
        let mut ids: Vec<String> = self
            .nodes
            .values()
            .filter(|n| n.node_type() == t)
            .map(|n| n.id.clone())
            .collect();
        ids.sort_by_key(|id| id_key(id));
        ids
    }

    pub fn user_id(&self) -> Option<String> {
        self.ids_of(NodeType::User).into_iter().next()
    }

    fn next_id(&self, t: NodeType) -> String {
        let prefix = t.prefix();
        let max = self
            .nodes
            .keys()
            .filter_map(|id| id.strip_prefix(prefix)?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        format!("{prefix}{}", max + 1)
    }

    pub(crate) fn insert_node(&mut self, t: NodeType, data: NodeData) -> String {
        let id = self.next_id(t);
        self.nodes.insert(id.clone(), ProfileNode { id: id.clone(), data });
        id
    }

    pub(crate) fn insert_edge(&mut self, source: &str, target: &str, relation: Relation) {
        self.edges.insert(ProfileEdge::new(source, target, relation));
    }

    pub(crate) fn remove_node(&mut self, id: &str) {
        self.nodes.remove(id);
        self.edges.retain(|e| e.source != id && e.target != id);
    }

    pub(crate) fn retain_edges(&mut self, keep: impl FnMut(&ProfileEdge) -> bool) {
        self.edges.retain(keep);
    }

    pub fn children(&self, id: &str) -> impl Iterator<Item = &ProfileEdge> {
        let id = id.to_string();
        self.edges.iter().filter(move |e| e.source == id)
    }

    pub fn parents(&self, id: &str) -> impl Iterator<Item = &ProfileEdge> {
        let id = id.to_string();
        self.edges.iter().filter(move |e| e.target == id)
    }

    /// Patterns entailed by a knowledge node in before-chain order.
    pub fn ordered_patterns(&self, knowledge: &str) -> Vec<String> {
        let pats: BTreeSet<String> = self
            .children(knowledge)
            .filter(|e| e.relation == Relation::Entails)
            .map(|e| e.target.clone())
            .collect();
        let mut indeg: BTreeMap<&str, usize> = pats.iter().map(|p| (p.as_str(), 0)).collect();
        for e in self.edges.iter().filter(|e| e.relation == Relation::Before) {
            if pats.contains(&e.source) {
                if let Some(d) = indeg.get_mut(e.target.as_str()) {
                    *d += 1;
                }
            }
        }
        // Kahn's algorithm with id-ordered ties.
        let mut ready: VecDeque<&str> = {
            let mut r: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(p, _)| *p).collect();
            r.sort_by_key(|p| id_key(p));
            r.into()
        };
        let mut out = Vec::new();
        while let Some(p) = ready.pop_front() {
            out.push(p.to_string());
            let mut next: Vec<&str> = Vec::new();
            for e in self.edges.iter().filter(|e| e.relation == Relation::Before && e.source == p) {
                if let Some(d) = indeg.get_mut(e.target.as_str()) {
                    *d -= 1;
                    if *d == 0 {
                        next.push(e.target.as_str());
                    }
                }
            }
            next.sort_by_key(|p| id_key(p));
            ready.extend(next);
        }
        out
    }

    pub fn check_invariants(&self) -> Result<(), ProfileError> {
        let bad = |m: String| Err(ProfileError::InvariantViolation(m));
        for (id, n) in &self.nodes {
            if id != &n.id {
                return bad(format!("node key {id} holds {}", n.id));
            }
            if !id.starts_with(n.node_type().prefix()) {
                return bad(format!("node {id} has the wrong id prefix"));
            }
        }
        for e in &self.edges {
            let (Some(s), Some(t)) = (self.nodes.get(&e.source), self.nodes.get(&e.target)) else {
                return bad(format!("dangling edge {} -> {}", e.source, e.target));
            };
            if e.edge_type != e.relation.edge_type() {
                return bad(format!("{:?} edge carries {:?}", e.edge_type, e.relation));
            }
            if !e.relation.allows(s.node_type(), t.node_type()) {
                return bad(format!(
                    "{:?} not allowed from {:?} {} to {:?} {}",
                    e.relation,
                    s.node_type(),
                    s.id,
                    t.node_type(),
                    t.id
                ));
            }
        }
        let incoming = |id: &str, rel: Relation| self.parents(id).filter(|e| e.relation == rel).count();
        for n in self.nodes.values() {
            match n.node_type() {
                NodeType::User => {}
                NodeType::Knowledge => {
                    if incoming(&n.id, Relation::RefersTo) != 1 {
                        return bad(format!("knowledge {} must hang under exactly one user", n.id));
                    }
                }
                NodeType::Pattern => {
                    if incoming(&n.id, Relation::Entails) != 1 {
                        return bad(format!("pattern {} must belong to exactly one knowledge", n.id));
                    }
                }
                NodeType::Object | NodeType::Location => {
                    let attached = self
                        .parents(&n.id)
                        .any(|e| matches!(e.relation, Relation::Target | Relation::ComposedOf));
                    if !attached {
                        return bad(format!("element {} is not attached", n.id));
                    }
                }
            }
        }
        // before edges stay within one knowledge and form a single chain.
        let owner = |p: &str| {
            self.parents(p)
                .find(|e| e.relation == Relation::Entails)
                .map(|e| e.source.clone())
        };
        for e in self.edges.iter().filter(|e| e.relation == Relation::Before) {
            if e.source == e.target || owner(&e.source) != owner(&e.target) {
                return bad(format!("before edge {} -> {} crosses knowledge nodes", e.source, e.target));
            }
        }
        for k in self.ids_of(NodeType::Knowledge) {
            let pats: Vec<String> = self
                .children(&k)
                .filter(|e| e.relation == Relation::Entails)
                .map(|e| e.target.clone())
                .collect();
            let before: Vec<&ProfileEdge> = self
                .edges
                .iter()
                .filter(|e| e.relation == Relation::Before && pats.contains(&e.source))
                .collect();
            if pats.len() > 1 && before.len() != pats.len() - 1 {
                return bad(format!("patterns of {k} do not form a single chain"));
            }
            for p in &pats {
                let outs = before.iter().filter(|e| &e.source == p).count();
                let ins = before.iter().filter(|e| &e.target == p).count();
                if outs > 1 || ins > 1 {
                    return bad(format!("pattern {p} branches its before chain"));
                }
            }
            if self.ordered_patterns(&k).len() != pats.len() {
                return bad(format!("before chain under {k} has a cycle"));
            }
        }
        Ok(())
    }

    /// Canonical JSON: nodes and edges in id order.
    pub fn to_json(&self) -> String {
        let mut nodes: Vec<ProfileNode> = self.nodes.values().cloned().collect();
        nodes.sort_by_key(|n| (n.node_type(), id_key(&n.id)));
        let mut edges: Vec<ProfileEdge> = self.edges.iter().cloned().collect();
        edges.sort_by_key(|e| (id_key(&e.source), id_key(&e.target), e.relation));
        serde_json::to_string_pretty(&GraphDoc { nodes, edges }).expect("graph serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self, ProfileError> {
        let doc: GraphDoc = serde_json::from_str(raw).map_err(|e| ProfileError::Parse(e.to_string()))?;
        let mut g = Self::new();
        for n in doc.nodes {
            if g.nodes.insert(n.id.clone(), n.clone()).is_some() {
                return Err(ProfileError::Parse(format!("duplicate node id {}", n.id)));
            }
        }
        g.edges = doc.edges.into_iter().collect();
        g.check_invariants()?;
        Ok(g)
    }

    pub(crate) fn cached_embedding(&self, identity: &str, text: &str) -> Option<Embedding> {
        self.embed_cache
            .lock()
            .expect("embed cache poisoned")
            .get(&(identity.to_string(), text.to_string()))
            .cloned()
    }

    pub(crate) fn cache_embedding(&self, identity: &str, text: &str, e: Embedding) {
        self.embed_cache
            .lock()
            .expect("embed cache poisoned")
            .insert((identity.to_string(), text.to_string()), e);
    }
}
