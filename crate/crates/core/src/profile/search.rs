use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};

use super::{id_key, KnowledgeSubtype, NodeType, ProfileError, ProfileGraph, Relation};
use crate::providers::{cosine, Embedder, Embedding};

/// Selects the subgraph searched by [`similarity_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeFilter {
    pub node_type: NodeType,
    /// Knowledge of this subtype, or elements beneath such knowledge.
    pub subtype: Option<KnowledgeSubtype>,
}

impl NodeFilter {
    pub fn of(node_type: NodeType) -> Self {
        Self { node_type, subtype: None }
    }

    pub fn within(node_type: NodeType, subtype: KnowledgeSubtype) -> Self {
        Self {
            node_type,
            subtype: Some(subtype),
        }
    }
}

impl ProfileGraph {
    /// Knowledge nodes above `id` (itself included when it is knowledge).
    pub fn owning_knowledge(&self, id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([id.to_string()]);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            match self.node(&n).map(|x| x.node_type()) {
                Some(NodeType::Knowledge) => {
                    out.insert(n);
                }
                Some(NodeType::User) | None => {}
                Some(_) => {
                    for e in self.parents(&n).filter(|e| e.relation != Relation::Before) {
                        queue.push_back(e.source.clone());
                    }
                }
            }
        }
        out
    }

    pub(crate) fn embed_node(&self, id: &str, embedder: &dyn Embedder) -> Result<Embedding, ProfileError> {
        let text = self.node(id).ok_or_else(|| ProfileError::UnknownNode(id.into()))?.text();
        let identity = embedder.identity();
        if let Some(e) = self.cached_embedding(&identity, &text) {
            return Ok(e);
        }
        let e = embedder.embed(&text)?;
        self.cache_embedding(&identity, &text, e.clone());
        Ok(e)
    }
}

/// Top-k nodes passing `filter` ranked by cosine between `query` and node
/// text; ties broken by node id.
pub fn similarity_search(
    graph: &ProfileGraph,
    query: &str,
    filter: NodeFilter,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<(String, f64)>, ProfileError> {
    let q = embedder.embed(query)?;
    let mut scored = Vec::new();
    for id in graph.ids_of(filter.node_type) {
        if let Some(st) = filter.subtype {
            let ok = graph
                .owning_knowledge(&id)
                .iter()
                .any(|k| graph.node(k).and_then(|n| n.subtype()) == Some(st));
            if !ok {
                continue;
            }
        }
        let score = cosine(&q, &graph.embed_node(&id, embedder)?);
        scored.push((id, score));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| id_key(&a.0).cmp(&id_key(&b.0)))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Descendant closure of `id` over all edges, including `id` itself.
pub fn expand(graph: &ProfileGraph, id: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::from([id.to_string()]);
    while let Some(n) = queue.pop_front() {
        if graph.node(&n).is_none() || !out.insert(n.clone()) {
            continue;
        }
        for e in graph.children(&n) {
            queue.push_back(e.target.clone());
        }
    }
    out
}

/// Drops repeated ids, keeping first occurrences in order.
pub fn remove_duplicates<T: AsRef<str> + Clone>(items: &[T]) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items
        .iter()
        .filter(|x| seen.insert(x.as_ref().to_string()))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Granularity, NodeData};
    use crate::providers::HashEmbedder;

    fn graph() -> ProfileGraph {
        let mut g = ProfileGraph::with_user("u");
        for (alias, desc) in [
            ("gift teapot from grandfather", "black teapot with curved spout"),
            ("favorite relaxation candle", "white candle in a glass jar"),
            ("bedroom organization", "books on the shelf"),
        ] {
            let k = g.insert_node(
                NodeType::Knowledge,
                NodeData::Knowledge {
                    subtype: KnowledgeSubtype::ObjectSemantics,
                    alias: alias.into(),
                    description: desc.into(),
                },
            );
            g.insert_edge("u1", &k, Relation::RefersTo);
            let o = g.insert_node(NodeType::Object, NodeData::Object { name: desc.into(), granularity: Granularity::Instance });
            g.insert_edge(&k, &o, Relation::ComposedOf);
        }
        g
    }

    #[test]
    fn exact_alias_first_and_k_caps() {
        let g = graph();
        let e = HashEmbedder::new();
        let hits = similarity_search(&g, "favorite relaxation candle white candle in a glass jar", NodeFilter::of(NodeType::Knowledge), 2, &e).unwrap();
        assert_eq!(hits[0].0, "k2");
        assert_eq!(hits.len(), 2);
        let all = similarity_search(&g, "x", NodeFilter::of(NodeType::Knowledge), 50, &e).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn paraphrase_ranks_above_unrelated() {
        let g = graph();
        let e = HashEmbedder::new();
        let hits = similarity_search(&g, "grandfather's gifted teakettle", NodeFilter::of(NodeType::Knowledge), 3, &e).unwrap();
        assert_eq!(hits[0].0, "k1");
        assert!(hits[0].1 > hits[1].1);
    }

    #[test]
    fn expand_and_dedupe() {
        let g = graph();
        assert_eq!(expand(&g, "k1"), BTreeSet::from(["k1".to_string(), "o1".to_string()]));
        let d = remove_duplicates(&["k2", "k1", "k2", "k3", "k1"]);
        assert_eq!(d, vec!["k2", "k1", "k3"]);
        assert_eq!(remove_duplicates(&d), d);
    }
}
