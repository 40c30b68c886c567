use serde::{Deserialize, Serialize};

use super::extract::extract_knowledge;
use super::search::{remove_duplicates, similarity_search, NodeFilter};
use super::{NodeData, NodeType, ProfileError, ProfileGraph, Relation};
use crate::providers::{ChatMessage, ChatProvider, ChatRequest, Embedder, ProviderError};

const REFORMULATE_SYSTEM: &str = include_str!("../../prompts/profile_reformulate.txt");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileRetrieval {
    pub descriptions: Vec<String>,
    /// Set when no provider could be used and raw renderings were returned.
    pub degraded: bool,
}

fn describe(graph: &ProfileGraph, id: &str) -> String {
    match graph.node(id).map(|n| &n.data) {
        Some(NodeData::Object { name, .. }) => name.clone(),
        Some(NodeData::Location { name, expression }) if !expression.is_empty() => format!("{name} ({expression})"),
        Some(NodeData::Location { name, .. }) => name.clone(),
        _ => id.to_string(),
    }
}

/// Plain-text rendering of a knowledge node and everything beneath it.
/// Steps follow the before chain.
pub fn render_subtree(graph: &ProfileGraph, knowledge: &str) -> String {
    let Some(NodeData::Knowledge {
        subtype,
        alias,
        description,
    }) = graph.node(knowledge).map(|n| &n.data)
    else {
        return String::new();
    };
    let mut out = format!("{alias} ({}): {description}", subtype.as_str());
    let objects: Vec<String> = graph
        .children(knowledge)
        .filter(|e| e.relation == Relation::ComposedOf)
        .map(|e| describe(graph, &e.target))
        .collect();
    if !objects.is_empty() {
        out.push_str(&format!("\nObjects: {}", objects.join("; ")));
    }
    for (i, p) in graph.ordered_patterns(knowledge).iter().enumerate() {
        let Some(NodeData::Pattern { name, args }) = graph.node(p).map(|n| &n.data) else {
            continue;
        };
        let targets: Vec<String> = graph
            .children(p)
            .filter(|e| e.relation == Relation::Target)
            .map(|e| describe(graph, &e.target))
            .collect();
        out.push_str(&format!("\nStep {}: {name} [{}]", i + 1, args.join(", ")));
        if !targets.is_empty() {
            out.push_str(&format!(" -> {}", targets.join("; ")));
        }
    }
    out
}

fn reformulate(provider: &dyn ChatProvider, rendering: &str) -> Result<String, ProviderError> {
    let request = ChatRequest::new(vec![
        ChatMessage::system(REFORMULATE_SYSTEM),
        ChatMessage::user(rendering.to_string()),
    ]);
    Ok(provider.chat(&request)?.content.trim().to_string())
}

/// Natural-language descriptions of stored knowledge relevant to an
/// instruction. Without a provider (or when it reports itself unavailable)
/// the search runs on the raw instruction and raw renderings are returned.
pub fn retrieve_profile(
    instruction: &str,
    graph: &ProfileGraph,
    provider: Option<&dyn ChatProvider>,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<ProfileRetrieval, ProfileError> {
    if graph.count(NodeType::Knowledge) == 0 {
        return Ok(ProfileRetrieval::default());
    }
    let degraded_search = || -> Result<ProfileRetrieval, ProfileError> {
        let hits = similarity_search(graph, instruction, NodeFilter::of(NodeType::Knowledge), k, embedder)?;
        Ok(ProfileRetrieval {
            descriptions: hits.iter().map(|(id, _)| render_subtree(graph, id)).collect(),
            degraded: true,
        })
    };
    let Some(provider) = provider else {
        return degraded_search();
    };
    let extraction = match extract_knowledge(instruction, provider) {
        Err(ProfileError::Provider(ProviderError::Unavailable(_))) => return degraded_search(),
        other => other?,
    };
    let mut hits = Vec::new();
    for kn in &extraction.knowledges {
        let filter = NodeFilter::within(NodeType::Knowledge, kn.subtype);
        hits.extend(
            similarity_search(graph, &kn.text(), filter, k, embedder)?
                .into_iter()
                .map(|(id, _)| id),
        );
    }
    let mut descriptions = Vec::new();
    for id in remove_duplicates(&hits) {
        descriptions.push(reformulate(provider, &render_subtree(graph, &id))?);
    }
    Ok(ProfileRetrieval {
        descriptions,
        degraded: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{apply_update, Decision, ExtractionResult, DEFAULT_REUSE_THRESHOLD};
    use crate::providers::{HashEmbedder, ScriptedChat, Transcript};

    const ROUTINE: &str = r#"{"knowledges":[{"alias":"morning routine","subtype":"user_pattern",
        "description":"juice then mug","elements":[
        {"type":"pattern","name":"place","args":["juice","on","counter"],"object":{"name":"juice"},"location":{"name":"counter"}},
        {"type":"pattern","name":"place","args":["mug","on","table"],"object":{"name":"mug"},"location":{"name":"table"}}]}]}"#;

    fn graph() -> ProfileGraph {
        let e = HashEmbedder::new();
        let k = ExtractionResult::parse(ROUTINE).unwrap().knowledges.remove(0);
        apply_update(&ProfileGraph::with_user("u"), &Decision::Add, &k, &e, DEFAULT_REUSE_THRESHOLD)
            .unwrap()
            .0
    }

    #[test]
    fn empty_graph_gives_nothing() {
        let e = HashEmbedder::new();
        let r = retrieve_profile("anything", &ProfileGraph::new(), None, &e, 5).unwrap();
        assert!(r.descriptions.is_empty());
    }

    #[test]
    fn rendering_keeps_step_order() {
        let g = graph();
        let text = render_subtree(&g, "k1");
        let juice = text.find("juice, on, counter").unwrap();
        let mug = text.find("mug, on, table").unwrap();
        assert!(juice < mug);
    }

    #[test]
    fn reformulates_each_hit_once() {
        let g = graph();
        let e = HashEmbedder::new();
        let chat = ScriptedChat::new(
            "r",
            Transcript::cursor([ROUTINE, "Every morning put the juice on the counter, then the mug on the table."]),
        );
        let r = retrieve_profile("do my morning routine", &g, Some(&chat), &e, 5).unwrap();
        assert_eq!(r.descriptions.len(), 1);
        assert!(!r.degraded);
        let fallback = retrieve_profile("do my morning routine", &g, None, &e, 5).unwrap();
        assert!(fallback.degraded);
        assert!(fallback.descriptions[0].contains("Step 2"));
    }
}
