use serde::{Deserialize, Serialize};

use super::extract::{extract_knowledge, ExtractedElement, ExtractedKnowledge, LocationElement, ObjectElement};
use super::retrieve::render_subtree;
use super::search::{remove_duplicates, similarity_search, NodeFilter};
use super::{NodeData, NodeType, ProfileError, ProfileGraph, ProfileNode, Relation, DEFAULT_REUSE_THRESHOLD};
use crate::providers::{cosine, ChatMessage, ChatProvider, ChatRequest, Embedder};

const DECIDE_SYSTEM: &str = include_str!("../../prompts/profile_decide.txt");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub reuse_threshold: f64,
    /// Nodes returned per similarity search.
    pub candidate_k: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            reuse_threshold: DEFAULT_REUSE_THRESHOLD,
            candidate_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "target", rename_all = "snake_case")]
pub enum Decision {
    Add,
    Update(String),
}

impl Decision {
    /// Accepts `add` or `update <id>` on any line of the reply; `<id>` must
    /// be one of `candidates`.
    pub fn parse(reply: &str, candidates: &[Candidate]) -> Result<Self, ProfileError> {
        for line in reply.lines() {
            let words: Vec<String> = line
                .split(|c: char| c.is_whitespace() || matches!(c, ':' | '`' | '*' | '"' | '[' | ']'))
                .filter(|w| !w.is_empty())
                .map(|w| w.to_ascii_lowercase())
                .collect();
            match words.as_slice() {
                [w] if w == "add" => return Ok(Self::Add),
                [w, id, ..] if w == "update" => {
                    return if candidates.iter().any(|c| &c.knowledge_id == id) {
                        Ok(Self::Update(id.clone()))
                    } else {
                        Err(ProfileError::UnparseableDecision(format!("{id} is not a candidate")))
                    };
                }
                _ => {}
            }
        }
        Err(ProfileError::UnparseableDecision(reply.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub knowledge_id: String,
    pub score: f64,
    pub rendering: String,
}

impl AsRef<str> for Candidate {
    fn as_ref(&self) -> &str {
        &self.knowledge_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementBinding {
    pub node_type: NodeType,
    pub text: String,
    pub node_id: String,
    /// Best similarity to an existing node, if any existed.
    pub score: Option<f64>,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub knowledge_id: String,
    pub replaced: Option<String>,
    pub bindings: Vec<ElementBinding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub alias: String,
    pub candidates: Vec<String>,
    pub decision: Decision,
    pub report: ApplyReport,
}

fn element_query(el: &ExtractedElement) -> (NodeType, String) {
    match el {
        ExtractedElement::Object(o) => (NodeType::Object, o.name.clone()),
        ExtractedElement::Location(l) => (NodeType::Location, format!("{} {}", l.name, l.expression).trim().to_string()),
        ExtractedElement::Pattern { name, args, .. } => {
            (NodeType::Pattern, format!("{name} {}", args.join(" ")).trim().to_string())
        }
    }
}

/// Knowledge nodes similar to the extracted knowledge or owning elements
/// similar to its elements, searched within the same subtype.
pub fn gather_candidates(
    graph: &ProfileGraph,
    knowledge: &ExtractedKnowledge,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<Candidate>, ProfileError> {
    let st = knowledge.subtype;
    let mut hits: Vec<(String, f64)> =
        similarity_search(graph, &knowledge.text(), NodeFilter::within(NodeType::Knowledge, st), k, embedder)?;
    for el in &knowledge.elements {
        let (t, text) = element_query(el);
        for (id, score) in similarity_search(graph, &text, NodeFilter::within(t, st), k, embedder)? {
            for owner in graph.owning_knowledge(&id) {
                if graph.node(&owner).and_then(|n| n.subtype()) == Some(st) {
                    hits.push((owner, score));
                }
            }
        }
    }
    let ids: Vec<String> = remove_duplicates(&hits.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>());
    Ok(ids
        .into_iter()
        .map(|id| {
            let score = hits
                .iter()
                .filter(|(h, _)| *h == id)
                .map(|(_, s)| *s)
                .fold(f64::NEG_INFINITY, f64::max);
            Candidate {
                rendering: render_subtree(graph, &id),
                knowledge_id: id,
                score,
            }
        })
        .collect())
}

pub fn decide_add_or_update(
    instruction: &str,
    knowledge: &ExtractedKnowledge,
    candidates: &[Candidate],
    provider: &dyn ChatProvider,
) -> Result<Decision, ProfileError> {
    if candidates.is_empty() {
        return Ok(Decision::Add);
    }
    let mut user = format!(
        "Instruction: {instruction}\nNew knowledge ({}): {}: {}\nExisting entries:\n",
        knowledge.subtype.as_str(),
        knowledge.alias,
        knowledge.description
    );
    for c in candidates {
        user.push_str(&format!("[{}]\n{}\n", c.knowledge_id, c.rendering));
    }
    let request = ChatRequest::new(vec![ChatMessage::system(DECIDE_SYSTEM), ChatMessage::user(user)]);
    let reply = provider.chat(&request)?;
    Decision::parse(&reply.content, candidates)
}

struct Builder<'a> {
    g: ProfileGraph,
    embedder: &'a dyn Embedder,
    threshold: f64,
    bindings: Vec<ElementBinding>,
}

impl Builder<'_> {
    /// Reuses the most similar node of the same type graph-wide when it
    /// clears the threshold, otherwise creates one.
    fn resolve(&mut self, t: NodeType, data: NodeData) -> Result<String, ProfileError> {
        let text = ProfileNode { id: String::new(), data: data.clone() }.text();
        let best = similarity_search(&self.g, &text, NodeFilter::of(t), 1, self.embedder)?
            .into_iter()
            .next();
        let (id, reused) = match &best {
            Some((id, s)) if *s >= self.threshold => (id.clone(), true),
            _ => (self.g.insert_node(t, data), false),
        };
        self.bindings.push(ElementBinding {
            node_type: t,
            text,
            node_id: id.clone(),
            score: best.map(|(_, s)| s),
            reused,
        });
        Ok(id)
    }

    fn object(&mut self, o: &ObjectElement) -> Result<String, ProfileError> {
        self.resolve(
            NodeType::Object,
            NodeData::Object {
                name: o.name.clone(),
                granularity: o.granularity,
            },
        )
    }

    fn location(&mut self, l: &LocationElement) -> Result<String, ProfileError> {
        self.resolve(
            NodeType::Location,
            NodeData::Location {
                name: l.name.clone(),
                expression: l.expression.clone(),
            },
        )
    }
}

/// Applies one add/update decision to a copy of `graph`. The input is never
/// modified; on an invariant failure the error is returned instead.
pub fn apply_update(
    graph: &ProfileGraph,
    decision: &Decision,
    knowledge: &ExtractedKnowledge,
    embedder: &dyn Embedder,
    reuse_threshold: f64,
) -> Result<(ProfileGraph, ApplyReport), ProfileError> {
    let mut b = Builder {
        g: graph.clone(),
        embedder,
        threshold: reuse_threshold,
        bindings: Vec::new(),
    };
    let user = match b.g.user_id() {
        Some(u) => u,
        None => b.g.insert_node(NodeType::User, NodeData::User { name: "user".into() }),
    };
    let mut spare_patterns: Vec<String> = match decision {
        Decision::Add => Vec::new(),
        Decision::Update(old) => {
            if b.g.node(old).map(|n| n.node_type()) != Some(NodeType::Knowledge) {
                return Err(ProfileError::UnknownNode(old.clone()));
            }
            b.g.ordered_patterns(old)
        }
    };
    // Allocate before removal so the replacement never takes the old id.
    let kid = b.g.insert_node(
        NodeType::Knowledge,
        NodeData::Knowledge {
            subtype: knowledge.subtype,
            alias: knowledge.alias.clone(),
            description: knowledge.description.clone(),
        },
    );
    if let Decision::Update(old) = decision {
        b.g.remove_node(old);
    }
    b.g.insert_edge(&user, &kid, Relation::RefersTo);

    let mut chain: Vec<String> = Vec::new();
    for el in &knowledge.elements {
        match el {
            ExtractedElement::Object(o) => {
                if o.name.trim().is_empty() {
                    continue;
                }
                let oid = b.object(o)?;
                b.g.insert_edge(&kid, &oid, Relation::ComposedOf);
            }
            // No knowledge-to-location edge exists; locations only hang
            // under patterns.
            ExtractedElement::Location(_) => {}
            ExtractedElement::Pattern {
                name,
                args,
                object,
                location,
            } => {
                let data = NodeData::Pattern {
                    name: name.clone(),
                    args: args.clone(),
                };
                let text = ProfileNode { id: String::new(), data: data.clone() }.text();
                let q = embedder.embed(&text)?;
                let mut best: Option<(usize, f64)> = None;
                for (i, p) in spare_patterns.iter().enumerate() {
                    let s = cosine(&q, &b.g.embed_node(p, embedder)?);
                    if best.is_none_or(|(_, bs)| s > bs) {
                        best = Some((i, s));
                    }
                }
                let pid = match best {
                    Some((i, s)) if s >= reuse_threshold => {
                        let pid = spare_patterns.remove(i);
                        b.g.retain_edges(|e| {
                            !(e.source == pid && e.relation == Relation::Target)
                                && !(e.relation == Relation::Before && (e.source == pid || e.target == pid))
                        });
                        b.bindings.push(ElementBinding {
                            node_type: NodeType::Pattern,
                            text,
                            node_id: pid.clone(),
                            score: Some(s),
                            reused: true,
                        });
                        pid
                    }
                    _ => {
                        let pid = b.g.insert_node(NodeType::Pattern, data);
                        b.bindings.push(ElementBinding {
                            node_type: NodeType::Pattern,
                            text,
                            node_id: pid.clone(),
                            score: best.map(|(_, s)| s),
                            reused: false,
                        });
                        pid
                    }
                };
                b.g.insert_edge(&kid, &pid, Relation::Entails);
                if let Some(o) = object.as_ref().filter(|o| !o.name.trim().is_empty()) {
                    let oid = b.object(o)?;
                    b.g.insert_edge(&pid, &oid, Relation::Target);
                }
                if let Some(l) = location.as_ref().filter(|l| !l.name.trim().is_empty()) {
                    let lid = b.location(l)?;
                    b.g.insert_edge(&pid, &lid, Relation::Target);
                }
                chain.push(pid);
            }
        }
    }
    for w in chain.windows(2) {
        b.g.insert_edge(&w[0], &w[1], Relation::Before);
    }

    // Drop patterns left without a knowledge node, then unattached elements.
    for p in b.g.ids_of(NodeType::Pattern) {
        if !b.g.parents(&p).any(|e| e.relation == Relation::Entails) {
            b.g.remove_node(&p);
        }
    }
    for t in [NodeType::Object, NodeType::Location] {
        for id in b.g.ids_of(t) {
            if b.g.parents(&id).next().is_none() {
                b.g.remove_node(&id);
            }
        }
    }
    b.g.check_invariants()?;
    let report = ApplyReport {
        knowledge_id: kid,
        replaced: match decision {
            Decision::Update(old) => Some(old.clone()),
            Decision::Add => None,
        },
        bindings: b.bindings,
    };
    Ok((b.g, report))
}

/// Extracts knowledge from an instruction and folds each piece into the
/// graph, one decision per extracted knowledge.
pub fn update_profile(
    graph: &ProfileGraph,
    instruction: &str,
    provider: &dyn ChatProvider,
    embedder: &dyn Embedder,
    config: ProfileConfig,
) -> Result<(ProfileGraph, Vec<UpdateOutcome>), ProfileError> {
    let extraction = extract_knowledge(instruction, provider)?;
    let mut g = graph.clone();
    let mut outcomes = Vec::new();
    for k in &extraction.knowledges {
        let candidates = gather_candidates(&g, k, embedder, config.candidate_k)?;
        let decision = decide_add_or_update(instruction, k, &candidates, provider)?;
        let (next, report) = apply_update(&g, &decision, k, embedder, config.reuse_threshold)?;
        g = next;
        outcomes.push(UpdateOutcome {
            alias: k.alias.clone(),
            candidates: candidates.into_iter().map(|c| c.knowledge_id).collect(),
            decision,
            report,
        });
    }
    Ok((g, outcomes))
}
