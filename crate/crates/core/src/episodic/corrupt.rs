use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, EpisodicError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "kind", rename_all = "snake_case")]
pub enum CorruptMode {
    /// Duplicate randomly chosen steps at random positions.
    InjectRandom,
    /// Permute a random subset of step positions.
    Shuffle,
    DropRandom,
    /// Drop steps whose action is of this skill, e.g. `Pick`.
    DropActionKind(String),
}

impl FromStr for CorruptMode {
    type Err = EpisodicError;

    /// `inject_random`, `shuffle`, `drop_random` or `drop_action_kind:<Skill>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("drop_action_kind", kind)) if !kind.is_empty() => Ok(Self::DropActionKind(kind.to_string())),
            None => match s {
                "inject_random" => Ok(Self::InjectRandom),
                "shuffle" => Ok(Self::Shuffle),
                "drop_random" => Ok(Self::DropRandom),
                _ => Err(EpisodicError::InvalidCorruption(s.to_string())),
            },
            _ => Err(EpisodicError::InvalidCorruption(s.to_string())),
        }
    }
}

fn amount(rate: f64, n: usize) -> usize {
    ((rate.clamp(0.0, 1.0) * n as f64).round() as usize).min(n)
}

fn action_kind(action: &str) -> &str {
    action.split('[').next().unwrap_or(action).trim()
}

/// Seeded corrupted copy of `record`; the input is not modified.
pub fn corrupt_memory(record: &EpisodeRecord, mode: &CorruptMode, rate: f64, seed: u64) -> EpisodeRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = record.clone();
    let steps = &mut out.steps;
    let n = steps.len();
    match mode {
        CorruptMode::InjectRandom => {
            for _ in 0..amount(rate, n) {
                let src = steps[rng.random_range(0..n)].clone();
                let at = rng.random_range(0..=steps.len());
                steps.insert(at, src);
            }
        }
        CorruptMode::Shuffle => {
            let mut picked = index::sample(&mut rng, n, amount(rate, n)).into_vec();
            picked.sort_unstable();
            let mut moved: Vec<_> = picked.iter().map(|&i| steps[i].clone()).collect();
            moved.shuffle(&mut rng);
            for (&i, s) in picked.iter().zip(moved) {
                steps[i] = s;
            }
        }
        CorruptMode::DropRandom => {
            let drop: Vec<usize> = index::sample(&mut rng, n, amount(rate, n)).into_vec();
            let mut keep = vec![true; n];
            for i in drop {
                keep[i] = false;
            }
            let mut it = keep.into_iter();
            steps.retain(|_| it.next().unwrap_or(true));
        }
        CorruptMode::DropActionKind(kind) => {
            let matching: Vec<usize> = (0..n).filter(|&i| action_kind(&steps[i].action) == kind).collect();
            let drop = index::sample(&mut rng, matching.len(), amount(rate, matching.len()));
            let mut keep = vec![true; n];
            for j in drop {
                keep[matching[j]] = false;
            }
            let mut it = keep.into_iter();
            steps.retain(|_| it.next().unwrap_or(true));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodic::tests::record;

    #[test]
    fn zero_rate_is_identity() {
        let r = record("a", "s", "x", 6);
        for m in [CorruptMode::DropRandom, CorruptMode::Shuffle, CorruptMode::InjectRandom] {
            assert_eq!(corrupt_memory(&r, &m, 0.0, 3), r);
        }
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        let r = record("a", "s", "x", 8);
        let a = corrupt_memory(&r, &CorruptMode::Shuffle, 1.0, 11);
        assert_eq!(a, corrupt_memory(&r, &CorruptMode::Shuffle, 1.0, 11));
        let mut x: Vec<_> = a.steps.iter().map(|s| s.thought.clone()).collect();
        let mut y: Vec<_> = r.steps.iter().map(|s| s.thought.clone()).collect();
        x.sort();
        y.sort();
        assert_eq!(x, y);
    }

    #[test]
    fn drop_kind_keeps_others_in_order() {
        let r = record("a", "s", "x", 7);
        let out = corrupt_memory(&r, &CorruptMode::DropActionKind("Navigate".into()), 1.0, 0);
        assert!(out.steps.iter().all(|s| !s.action.starts_with("Navigate")));
        let expected: Vec<_> = r.steps.iter().filter(|s| !s.action.starts_with("Navigate")).cloned().collect();
        assert_eq!(out.steps, expected);
    }

    #[test]
    fn counts_follow_rate() {
        let r = record("a", "s", "x", 10);
        assert_eq!(corrupt_memory(&r, &CorruptMode::DropRandom, 0.3, 1).steps.len(), 7);
        assert_eq!(corrupt_memory(&r, &CorruptMode::InjectRandom, 0.3, 1).steps.len(), 13);
        assert_eq!("drop_action_kind:Pick".parse::<CorruptMode>().unwrap(), CorruptMode::DropActionKind("Pick".into()));
    }
}
