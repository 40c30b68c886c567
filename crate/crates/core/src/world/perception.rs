use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{Relation, WorldState};
use super::{EntityRef, Scene};
use crate::text::match_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "query")]
pub enum PerceptionQuery {
    FindObjectTool(String),
    FindReceptacleTool(String),
    FindRoomTool(String),
    DescribeObjectTool(String),
}

impl PerceptionQuery {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FindObjectTool(_) => "FindObjectTool",
            Self::FindReceptacleTool(_) => "FindReceptacleTool",
            Self::FindRoomTool(_) => "FindRoomTool",
            Self::DescribeObjectTool(_) => "DescribeObjectTool",
        }
    }

    pub fn from_parts(name: &str, arg: &str) -> Option<Self> {
        let arg = arg.to_string();
        Some(match name {
            "FindObjectTool" => Self::FindObjectTool(arg),
            "FindReceptacleTool" => Self::FindReceptacleTool(arg),
            "FindRoomTool" => Self::FindRoomTool(arg),
            "DescribeObjectTool" => Self::DescribeObjectTool(arg),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerceptionError {
    #[error("not found: no match for \"{0}\"")]
    NoMatch(String),
}

/// Weighted token bag for one candidate entity.
#[derive(Default)]
struct Bag(BTreeMap<String, u32>);

impl Bag {
    fn add(&mut self, text: &str, weight: u32) {
        for t in match_tokens(text) {
            let w = self.0.entry(t).or_insert(0);
            *w = (*w).max(weight);
        }
    }

    fn score(&self, query: &[String]) -> u32 {
        query.iter().filter_map(|t| self.0.get(t)).sum()
    }
}

/// Resolves a free-text query to entity ids. Only the best-scoring tier is
/// returned, sorted by id. Object and receptacle searches only see explored
/// rooms unless `oracle_scope` is set.
pub fn perceive(
    state: &WorldState,
    scene: &Scene,
    query: &PerceptionQuery,
    oracle_scope: bool,
) -> Result<String, PerceptionError> {
    let visible = |room: &str| oracle_scope || state.explored_rooms.contains(room);
    let no_match = |q: &str| PerceptionError::NoMatch(q.to_string());
    let room_bag = |bag: &mut Bag, room: &str, weight: u32| {
        bag.add(room, weight);
        if let Some(r) = scene.room(room) {
            bag.add(&r.name, weight);
        }
    };

    let candidates: Vec<(String, Bag)> = match query {
        PerceptionQuery::DescribeObjectTool(id) => {
            let id = id.trim();
            return match scene.entity(id) {
                Some(EntityRef::Object(o)) => Ok(o.caption.clone()),
                Some(EntityRef::Furniture(f)) => Ok(f
                    .description
                    .clone()
                    .unwrap_or_else(|| format!("a {} in {}", f.category, f.room_id))),
                Some(EntityRef::Room(r)) => Ok(r.name.clone()),
                None => Err(no_match(id)),
            };
        }
        PerceptionQuery::FindObjectTool(_) => scene
            .objects()
            .filter_map(|o| {
                let room = state.room_of_object(scene, &o.id)?;
                if !visible(&room) {
                    return None;
                }
                let mut bag = Bag::default();
                bag.add(&o.id, 2);
                bag.add(&o.category, 2);
                bag.add(&o.caption, 1);
                room_bag(&mut bag, &room, 1);
                let p = state.placement(&o.id)?;
                if let Some(anchor) = &p.anchor {
                    bag.add(anchor, 1);
                    if let Some(f) = scene.furniture(anchor) {
                        bag.add(&f.category, 1);
                    }
                }
                if p.relation == Relation::OnFloor {
                    bag.add("floor", 1);
                }
                Some((o.id.clone(), bag))
            })
            .collect(),
        PerceptionQuery::FindReceptacleTool(_) => scene
            .furniture_iter()
            .filter(|f| visible(&f.room_id))
            .map(|f| {
                let mut bag = Bag::default();
                bag.add(&f.id, 2);
                bag.add(&f.category, 2);
                if let Some(d) = &f.description {
                    bag.add(d, 1);
                }
                room_bag(&mut bag, &f.room_id, 1);
                (f.id.clone(), bag)
            })
            .collect(),
        PerceptionQuery::FindRoomTool(_) => scene
            .rooms()
            .map(|r| {
                let mut bag = Bag::default();
                room_bag(&mut bag, &r.id, 2);
                (r.id.clone(), bag)
            })
            .collect(),
    };

    let text = match query {
        PerceptionQuery::FindObjectTool(q)
        | PerceptionQuery::FindReceptacleTool(q)
        | PerceptionQuery::FindRoomTool(q) => q,
        PerceptionQuery::DescribeObjectTool(_) => unreachable!("handled above"),
    };
    let q = match_tokens(text);
    let scored: Vec<(u32, String)> = candidates
        .into_iter()
        .map(|(id, bag)| (bag.score(&q), id))
        .filter(|(s, _)| *s > 0)
        .collect();
    let best = scored.iter().map(|(s, _)| *s).max().ok_or_else(|| no_match(text))?;
    let mut ids: Vec<String> = scored
        .into_iter()
        .filter(|(s, _)| *s == best)
        .map(|(_, id)| id)
        .collect();
    ids.sort();
    Ok(ids.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::test_scenes::TINY;

    fn setup() -> (Scene, WorldState) {
        let scene = Scene::from_json(TINY).unwrap();
        let s = WorldState::initial(&scene);
        (scene, s)
    }

    #[test]
    fn describe_returns_caption() {
        let (scene, s) = setup();
        let q = PerceptionQuery::DescribeObjectTool("cup_0".into());
        assert_eq!(perceive(&s, &scene, &q, false).unwrap(), "a blue cup");
    }

    #[test]
    fn kitchen_counter_resolves() {
        let (scene, s) = setup();
        let q = PerceptionQuery::FindReceptacleTool("a kitchen counter".into());
        assert_eq!(perceive(&s, &scene, &q, true).unwrap(), "counter_22");
        // kitchen not yet explored
        assert!(perceive(&s, &scene, &q, false).is_err());
    }

    #[test]
    fn floor_toys_listed_in_order() {
        let (scene, s) = setup();
        let q = PerceptionQuery::FindObjectTool("toys on the floor".into());
        assert_eq!(perceive(&s, &scene, &q, true).unwrap(), "toy_0, toy_1");
    }

    #[test]
    fn no_match_is_marked() {
        let (scene, s) = setup();
        let q = PerceptionQuery::FindRoomTool("spaceship".into());
        let e = perceive(&s, &scene, &q, true).unwrap_err();
        assert!(e.to_string().contains("not found"));
        let q = PerceptionQuery::FindRoomTool("the kitchen".into());
        assert_eq!(perceive(&s, &scene, &q, false).unwrap(), "kitchen_1");
    }
}
