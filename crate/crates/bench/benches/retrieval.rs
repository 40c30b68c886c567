use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hearth_core::episodic::{ensure_gold, retrieve_topk, EpisodeRecord, EpisodicStore, MemoryQuery};
use hearth_core::profile::{similarity_search, NodeFilter, NodeType};
use hearth_core::HashEmbedder;
use std::hint::black_box;

const NOUNS: [&str; 8] = ["mug", "vase", "book", "lamp", "plant", "clock", "toy", "bowl"];
const PLACES: [&str; 6] = ["table", "shelf", "counter", "bed", "sofa", "cabinet"];

fn store(n: usize) -> EpisodicStore {
    let mut s = EpisodicStore::new();
    for i in 0..n {
        let text = format!(
            "move the {} number {i} to the {}",
            NOUNS[i % NOUNS.len()],
            PLACES[(i / NOUNS.len()) % PLACES.len()]
        );
        s.store(EpisodeRecord::new(&format!("r{i:05}"), "scene", &text)).unwrap();
    }
    s
}

fn bench_topk(c: &mut Criterion) {
    let embedder = HashEmbedder::new();
    let mut g = c.benchmark_group("retrieve_topk");
    for n in [100, 1000] {
        let s = store(n);
        let q = MemoryQuery::new("put my favourite mug on the shelf", "scene", 5).with_gold(["r00007"]);
        g.bench_with_input(BenchmarkId::new("records", n), &s, |b, s| {
            b.iter(|| retrieve_topk(black_box(s), &q, &embedder).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("with_gold", n), &s, |b, s| {
            b.iter(|| {
                let ranked = retrieve_topk(s, &q, &embedder).unwrap();
                ensure_gold(s, ranked, &q, 7).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_profile_search(c: &mut Criterion) {
    use hearth_core::profile::{update_profile, ProfileConfig, ProfileGraph};
    use hearth_core::providers::ScriptedChat;

    let embedder = HashEmbedder::new();
    let mut graph = ProfileGraph::with_user("user");
    for (i, noun) in NOUNS.iter().enumerate() {
        let extraction = serde_json::json!({"knowledges": [{
            "alias": format!("my {noun} from trip {i}"), "subtype": "object_semantics",
            "description": format!("{noun} bought on trip {i}"),
            "elements": [{"type": "object", "name": format!("striped {noun}"), "granularity": "instance"}]
        }]});
        let chat = ScriptedChat::cursor("bench", [extraction.to_string(), "add".into()]);
        graph = update_profile(&graph, "x", &chat, &embedder, ProfileConfig::default()).unwrap().0;
    }
    c.bench_function("profile_similarity_search", |b| {
        b.iter(|| similarity_search(&graph, "my lamp from the trip", NodeFilter::of(NodeType::Knowledge), 5, &embedder).unwrap())
    });
}

criterion_group!(benches, bench_topk, bench_profile_search);
criterion_main!(benches);
