use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodicError, EpisodicStore, MemoryQuery};
use crate::providers::{cosine, Embedder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub record_id: String,
    /// Cosine similarity; `None` for gold entries injected after ranking.
    pub score: Option<f64>,
}

/// Same-scene records ranked by instruction cosine, descending, ties by
/// ascending record id. Returns at most `k` entries.
pub fn retrieve_topk(
    store: &EpisodicStore,
    query: &MemoryQuery,
    embedder: &dyn Embedder,
) -> Result<Vec<Ranked>, EpisodicError> {
    if query.k == 0 {
        return Err(EpisodicError::InvalidK);
    }
    let candidates: Vec<_> = store
        .iter()
        .filter(|r| r.scene_id == query.scene_id && !query.exclude_ids.contains(&r.record_id))
        .collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut texts: Vec<&str> = vec![query.instruction.as_str()];
    texts.extend(candidates.iter().map(|r| r.instruction.as_str()));
    let vecs = embedder.embed_batch(&texts)?;
    let q = &vecs[0];
    let mut scored: Vec<Ranked> = candidates
        .iter()
        .zip(&vecs[1..])
        .map(|(r, v)| Ranked {
            record_id: r.record_id.clone(),
            score: Some(cosine(q, v)),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.record_id.cmp(&b.record_id))
    });
    scored.truncate(query.k);
    Ok(scored)
}

/// Makes every gold id present by overwriting uniformly chosen non-gold
/// entries. Missing golds are handled in id order, each with its own draw.
/// Lists shorter than `k` are extended instead.
pub fn ensure_gold(
    store: &EpisodicStore,
    ranked: Vec<Ranked>,
    query: &MemoryQuery,
    seed: u64,
) -> Result<Vec<Ranked>, EpisodicError> {
    let Some(gold) = &query.gold_ids else {
        return Ok(ranked);
    };
    if let Some(missing) = gold.iter().find(|g| !store.contains(g)) {
        return Err(EpisodicError::UnknownRecord(missing.clone()));
    }
    if gold.len() > query.k {
        return Err(EpisodicError::KTooSmall { gold: gold.len(), k: query.k });
    }
    let present: BTreeSet<&str> = ranked.iter().map(|r| r.record_id.as_str()).collect();
    let missing: Vec<String> = gold.iter().filter(|g| !present.contains(g.as_str())).cloned().collect();
    if missing.is_empty() {
        return Ok(ranked);
    }
    let mut out = ranked;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in missing {
        // A short list (fewer candidates than k) has room to grow.
        if out.len() < query.k {
            out.push(Ranked { record_id: g, score: None });
            continue;
        }
        let slots: Vec<usize> = (0..out.len()).filter(|&i| !gold.contains(&out[i].record_id)).collect();
        if slots.is_empty() {
            return Err(EpisodicError::KTooSmall { gold: gold.len(), k: out.len() });
        }
        let slot = slots[rng.random_range(0..slots.len())];
        out[slot] = Ranked { record_id: g, score: None };
    }
    Ok(out)
}

/// Fraction of (query, gold id) pairs whose gold appears in the top-k.
pub fn recall_at_k(
    store: &EpisodicStore,
    queries: &[MemoryQuery],
    embedder: &dyn Embedder,
    k: usize,
) -> Result<f64, EpisodicError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for q in queries {
        let Some(gold) = &q.gold_ids else { continue };
        let q = MemoryQuery { k, ..q.clone() };
        let top = retrieve_topk(store, &q, embedder)?;
        for g in gold {
            total += 1;
            hit += top.iter().any(|r| &r.record_id == g) as usize;
        }
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodic::tests::record;
    use crate::providers::HashEmbedder;

    fn store() -> EpisodicStore {
        let mut s = EpisodicStore::new();
        let texts = [
            "move the red mug to the kitchen counter",
            "put the toy train on the bed",
            "bring the alarm clock to the nightstand",
            "place the blue vase on the shelf",
            "set the candle on the dining table",
            "put the laptop on the desk",
            "move the plant to the window sill",
            "carry the book to the sofa",
            "put the kettle next to the stove",
            "place the jug on the counter",
        ];
        for (i, t) in texts.iter().enumerate() {
            s.store(record(&format!("r{i:02}"), "s1", t, 2)).unwrap();
        }
        s.store(record("other", "s2", "move the red mug to the kitchen counter", 1)).unwrap();
        s
    }

    #[test]
    fn exact_match_ranks_first_and_scene_scoped() {
        let s = store();
        let e = HashEmbedder::new();
        let q = MemoryQuery::new("move the red mug to the kitchen counter", "s1", 5);
        let top = retrieve_topk(&s, &q, &e).unwrap();
        assert_eq!(top.len(), 5);
        assert_eq!(top[0].record_id, "r00");
        assert!((top[0].score.unwrap() - 1.0).abs() < 1e-12);
        assert!(top.iter().all(|r| s.get(&r.record_id).unwrap().scene_id == "s1"));
    }

    #[test]
    fn single_candidate_and_empty_store() {
        let mut s = EpisodicStore::new();
        let e = HashEmbedder::new();
        let q = MemoryQuery::new("anything", "s1", 5);
        assert!(retrieve_topk(&s, &q, &e).unwrap().is_empty());
        s.store(record("only", "s1", "tidy up", 0)).unwrap();
        assert_eq!(retrieve_topk(&s, &q, &e).unwrap().len(), 1);
    }

    #[test]
    fn excluded_ids_never_returned() {
        let s = store();
        let e = HashEmbedder::new();
        let q = MemoryQuery::new("move the red mug to the kitchen counter", "s1", 10).excluding("r00");
        assert!(retrieve_topk(&s, &q, &e).unwrap().iter().all(|r| r.record_id != "r00"));
    }

    #[test]
    fn gold_injection() {
        let s = store();
        let e = HashEmbedder::new();
        let q = MemoryQuery::new("move the red mug to the kitchen counter", "s1", 5).with_gold(["r00"]);
        let top = retrieve_topk(&s, &q, &e).unwrap();
        assert_eq!(ensure_gold(&s, top.clone(), &q, 7).unwrap(), top);

        let q = MemoryQuery::new("red mug kitchen counter", "s1", 5).with_gold(["r07"]);
        let top = retrieve_topk(&s, &q, &e).unwrap();
        assert!(top.iter().all(|r| r.record_id != "r07"));
        let out = ensure_gold(&s, top.clone(), &q, 7).unwrap();
        assert_eq!(out.len(), top.len());
        assert!(out.iter().any(|r| r.record_id == "r07"));
        let removed = top.iter().filter(|r| !out.contains(r)).count();
        assert_eq!(removed, 1);

        let big = MemoryQuery::new("x", "s1", 1).with_gold(["r01", "r02"]);
        assert!(matches!(ensure_gold(&s, vec![], &big, 0), Err(EpisodicError::KTooSmall { .. })));
    }
}
