use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Position, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    OnTop,
    Inside,
    OnFloor,
    Held,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::OnTop => "on_top",
            Relation::Inside => "inside",
            Relation::OnFloor => "on_floor",
            Relation::Held => "held",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub object_id: String,
    pub relation: Relation,
    /// Furniture or room id; `None` exactly when held.
    pub anchor: Option<String>,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Articulation {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub placements: BTreeMap<String, Placement>,
    pub articulation: BTreeMap<String, Articulation>,
    pub agent_room: String,
    pub agent_near: Option<String>,
    pub held: Option<String>,
    pub step_count: u64,
    pub explored_rooms: BTreeSet<String>,
}

impl WorldState {
    /// Initial state: objects at their scene placements, every articulable
    /// furniture closed, agent at the start room which counts as explored.
    pub fn initial(scene: &Scene) -> Self {
        let placements = scene
            .objects()
            .map(|o| {
                let p = &o.placement;
                let position = p
                    .position
                    .or_else(|| scene.anchor_position(&p.anchor))
                    .unwrap_or_default();
                (
                    o.id.clone(),
                    Placement {
                        object_id: o.id.clone(),
                        relation: p.relation,
                        anchor: Some(p.anchor.clone()),
                        position,
                    },
                )
            })
            .collect();
        let articulation = scene
            .furniture_iter()
            .filter(|f| f.articulable)
            .map(|f| (f.id.clone(), Articulation::Closed))
            .collect();
        let start = scene.agent_start().to_string();
        Self {
            placements,
            articulation,
            agent_room: start.clone(),
            agent_near: None,
            held: None,
            step_count: 0,
            explored_rooms: BTreeSet::from([start]),
        }
    }

    pub fn placement(&self, object: &str) -> Option<&Placement> {
        self.placements.get(object)
    }

    pub fn is_open(&self, furniture: &str) -> bool {
        self.articulation.get(furniture) == Some(&Articulation::Open)
    }

    /// Room currently containing an object.
    pub fn room_of_object(&self, scene: &Scene, object: &str) -> Option<String> {
        let p = self.placements.get(object)?;
        match (&p.relation, &p.anchor) {
            (Relation::Held, _) => Some(self.agent_room.clone()),
            (Relation::OnFloor, Some(room)) => Some(room.clone()),
            (_, Some(f)) => scene.furniture(f).map(|f| f.room_id.clone()),
            (_, None) => None,
        }
    }

    /// Objects anchored to `anchor`, sorted by id.
    pub fn objects_at<'a>(&'a self, anchor: &'a str) -> impl Iterator<Item = &'a Placement> {
        self.placements
            .values()
            .filter(move |p| p.anchor.as_deref() == Some(anchor))
    }

    /// Structural invariants; returns the first violation.
    pub fn check_invariants(&self, scene: &Scene) -> Result<(), String> {
        let held: Vec<&str> = self
            .placements
            .values()
            .filter(|p| p.relation == Relation::Held)
            .map(|p| p.object_id.as_str())
            .collect();
        if held.len() > 1 {
            return Err(format!("more than one held object: {held:?}"));
        }
        if held.first().copied() != self.held.as_deref() {
            return Err(format!("held field {:?} disagrees with placements {held:?}", self.held));
        }
        for (id, p) in &self.placements {
            if id != &p.object_id {
                return Err(format!("placement key {id} holds {}", p.object_id));
            }
            if (p.relation == Relation::Held) != p.anchor.is_none() {
                return Err(format!("{id}: anchor must be absent exactly when held"));
            }
            if p.relation == Relation::Inside {
                let anchor = p.anchor.as_deref().unwrap_or_default();
                if !scene.furniture(anchor).is_some_and(|f| f.articulable) {
                    return Err(format!("{id} inside non-articulable {anchor}"));
                }
            }
        }
        if let Some(near) = &self.agent_near {
            match scene.furniture(near) {
                Some(f) if f.room_id == self.agent_room => {}
                _ => return Err(format!("agent_near {near} is not furniture in {}", self.agent_room)),
            }
        }
        Ok(())
    }
}
