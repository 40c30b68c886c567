mod common;

use hearth_core::profile::{Decision, NodeType};

#[test]
fn base_graph_matches_similarity_oracle() {
    let g = common::base_graph();
    g.check_invariants().unwrap();
    assert_eq!(g.count(NodeType::Knowledge), 14);
    // Node counts after threshold merging, computed independently.
    assert_eq!(g.count(NodeType::Object), 19);
    assert_eq!(g.count(NodeType::Location), 9);
}

#[test]
fn paraphrased_knowledge_updates_its_original() {
    let base = common::base_graph();
    let results = common::replay_updates(&base);
    assert_eq!(results.len(), 10);
    for r in &results {
        assert!(r.outcome.candidates.contains(&r.original), "{} not among {:?}", r.original, r.outcome.candidates);
        assert_eq!(r.outcome.decision, Decision::Update(r.original.clone()));
        assert_eq!(r.knowledge_after, r.knowledge_before);
        assert!(r.graph.node(&r.original).is_none());
        r.graph.check_invariants().unwrap();
    }
}

#[test]
fn reference_variants_reuse_nodes_except_documented_misses() {
    let base = common::base_graph();
    let results = common::replay_references(&base);
    assert_eq!(results.len(), 10);
    let mut total = 0;
    let mut reused = 0;
    for r in &results {
        assert_eq!(r.knowledge_delta, 1);
        r.graph.check_invariants().unwrap();
        let new: Vec<String> = r.references.iter().filter(|(_, u)| !u).map(|(t, _)| t.clone()).collect();
        assert_eq!(new, r.expected_new);
        total += r.references.len();
        reused += r.references.iter().filter(|(_, u)| *u).count();
    }
    assert_eq!((reused, total), (20, 25));
    assert!(reused as f64 / total as f64 >= 0.75);
}
