use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::observation::{render_observation, Observation};
use super::state::{Articulation, Placement, Relation, WorldState};
use super::{costs, EntityRef, Scene, NEXT_TO_EPSILON};

/// Relation word in the second slot of `Place`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRelation {
    On,
    Within,
}

impl SpatialRelation {
    pub fn parse(word: &str) -> Option<Self> {
        match word.trim().to_ascii_lowercase().as_str() {
            "on" | "on_top" => Some(Self::On),
            "within" | "in" | "inside" => Some(Self::Within),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::On => "on",
            Self::Within => "within",
        }
    }
}

/// Optional qualifier in the fourth slot of `Place`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceQualifier {
    NextTo,
}

impl PlaceQualifier {
    pub fn parse(word: &str) -> Option<Self> {
        match word.trim().to_ascii_lowercase().as_str() {
            "next_to" => Some(Self::NextTo),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        "next_to"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkillCall {
    Navigate {
        target: String,
    },
    Pick {
        object: String,
    },
    Place {
        object: String,
        relation: SpatialRelation,
        receptacle: String,
        qualifier: Option<PlaceQualifier>,
        reference: Option<String>,
    },
    Open {
        target: String,
    },
    Close {
        target: String,
    },
    Explore {
        target: String,
    },
    Wait,
}

impl SkillCall {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Navigate { .. } => "Navigate",
            Self::Pick { .. } => "Pick",
            Self::Place { .. } => "Place",
            Self::Open { .. } => "Open",
            Self::Close { .. } => "Close",
            Self::Explore { .. } => "Explore",
            Self::Wait => "Wait",
        }
    }

    pub fn place(object: &str, relation: SpatialRelation, receptacle: &str) -> Self {
        Self::Place {
            object: object.into(),
            relation,
            receptacle: receptacle.into(),
            qualifier: None,
            reference: None,
        }
    }

    pub fn place_next_to(object: &str, receptacle: &str, reference: &str) -> Self {
        Self::Place {
            object: object.into(),
            relation: SpatialRelation::On,
            receptacle: receptacle.into(),
            qualifier: Some(PlaceQualifier::NextTo),
            reference: Some(reference.into()),
        }
    }

    /// Argument slots in call order; `Place` always yields five.
    pub fn args(&self) -> Vec<String> {
        match self {
            Self::Navigate { target }
            | Self::Open { target }
            | Self::Close { target }
            | Self::Explore { target } => vec![target.clone()],
            Self::Pick { object } => vec![object.clone()],
            Self::Place {
                object,
                relation,
                receptacle,
                qualifier,
                reference,
            } => vec![
                object.clone(),
                relation.as_str().to_string(),
                receptacle.clone(),
                qualifier.map_or("None", |q| q.as_str()).to_string(),
                reference.clone().unwrap_or_else(|| "None".into()),
            ],
            Self::Wait => Vec::new(),
        }
    }
}

impl fmt::Display for SkillCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name(), self.args().join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum SkillError {
    #[error("not near {0}; navigate to it first")]
    NotNearTarget(String),
    #[error("hands are full, already holding {0}")]
    HandsFull(String),
    #[error("hands are empty")]
    HandsEmpty,
    #[error("not holding {0}")]
    NotHolding(String),
    #[error("{0} cannot be opened or closed")]
    NotArticulable(String),
    #[error("{0} is closed")]
    ContainerClosed(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("placement rejected: {0}")]
    PlacementRejected(String),
    #[error("{0} is unreachable")]
    Unreachable(String),
}

/// Outcome of one skill. `state` is the successor even on failure, in
/// which case only `step_count` differs from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: WorldState,
    pub result: Result<String, SkillError>,
    pub observation: Observation,
}

impl Transition {
    pub fn succeeded(&self) -> bool {
        self.result.is_ok()
    }

    /// Message line followed by the room rendering.
    pub fn text(&self) -> String {
        let head = match &self.result {
            Ok(msg) => msg.clone(),
            Err(e) => format!("Unexpected failure! {e}."),
        };
        format!("{head}\n{}", self.observation.text)
    }
}

pub fn apply_skill(state: &WorldState, scene: &Scene, call: &SkillCall) -> Transition {
    let mut next = state.clone();
    let outcome = execute(&mut next, scene, call);
    let (state, result) = match outcome {
        Ok((msg, cost)) => {
            next.step_count += cost;
            (next, Ok(msg))
        }
        Err(e) => {
            let mut unchanged = state.clone();
            unchanged.step_count += costs::FAILED;
            (unchanged, Err(e))
        }
    };
    let observation = render_observation(&state, scene);
    Transition {
        state,
        result,
        observation,
    }
}

fn execute(s: &mut WorldState, scene: &Scene, call: &SkillCall) -> Result<(String, u64), SkillError> {
    match call {
        SkillCall::Navigate { target } => navigate(s, scene, target),
        SkillCall::Explore { target } => explore(s, scene, target),
        SkillCall::Pick { object } => pick(s, scene, object),
        SkillCall::Place {
            object,
            relation,
            receptacle,
            qualifier,
            reference,
        } => place(s, scene, object, *relation, receptacle, *qualifier, reference.as_deref()),
        SkillCall::Open { target } => articulate(s, scene, target, Articulation::Open),
        SkillCall::Close { target } => articulate(s, scene, target, Articulation::Closed),
        SkillCall::Wait => Ok(("Waited.".into(), costs::WAIT)),
    }
}

fn unknown(id: &str) -> SkillError {
    SkillError::UnknownEntity(id.to_string())
}

fn hop_cost(scene: &Scene, from: &str, to: &str) -> Result<u64, SkillError> {
    scene
        .hops(from, to)
        .map(|h| h as u64 * costs::NAVIGATE_PER_HOP + costs::NAVIGATE_BASE)
        .ok_or_else(|| SkillError::Unreachable(to.to_string()))
}

fn navigate(s: &mut WorldState, scene: &Scene, target: &str) -> Result<(String, u64), SkillError> {
    // Navigating to an object goes to whatever it currently rests on.
    let (room, near) = match scene.entity(target).ok_or_else(|| unknown(target))? {
        EntityRef::Room(r) => (r.id.clone(), None),
        EntityRef::Furniture(f) => (f.room_id.clone(), Some(f.id.clone())),
        EntityRef::Object(o) => {
            let p = s.placement(&o.id).ok_or_else(|| unknown(target))?;
            match (p.relation, p.anchor.as_deref()) {
                (Relation::Held, _) => (s.agent_room.clone(), s.agent_near.clone()),
                (Relation::OnFloor, Some(room)) => (room.to_string(), None),
                (_, Some(f)) => {
                    let furn = scene.furniture(f).ok_or_else(|| unknown(f))?;
                    (furn.room_id.clone(), Some(furn.id.clone()))
                }
                (_, None) => return Err(unknown(target)),
            }
        }
    };
    let cost = hop_cost(scene, &s.agent_room, &room)?;
    s.agent_room = room.clone();
    s.agent_near = near.clone();
    s.explored_rooms.insert(room.clone());
    let msg = match near {
        Some(f) => format!("Successful execution! Now near {f} in {room}."),
        None => format!("Successful execution! Arrived in {room}."),
    };
    Ok((msg, cost))
}

fn explore(s: &mut WorldState, scene: &Scene, target: &str) -> Result<(String, u64), SkillError> {
    let room = match scene.entity(target).ok_or_else(|| unknown(target))? {
        EntityRef::Room(r) => r.id.clone(),
        EntityRef::Furniture(f) => f.room_id.clone(),
        EntityRef::Object(_) => {
            s.room_of_object(scene, target).ok_or_else(|| unknown(target))?
        }
    };
    let path = scene
        .room_path(&s.agent_room, &room)
        .ok_or_else(|| SkillError::Unreachable(room.clone()))?;
    let mut fresh = 0u64;
    for r in &path {
        if s.explored_rooms.insert(r.clone()) {
            fresh += 1;
        }
    }
    s.agent_room = room.clone();
    s.agent_near = None;
    Ok((
        format!("Successful execution! Explored {room}."),
        costs::EXPLORE_PER_ROOM * fresh.max(1),
    ))
}

fn pick(s: &mut WorldState, scene: &Scene, object: &str) -> Result<(String, u64), SkillError> {
    if scene.object(object).is_none() {
        return Err(unknown(object));
    }
    if let Some(h) = &s.held {
        return Err(SkillError::HandsFull(h.clone()));
    }
    let p = s.placement(object).ok_or_else(|| unknown(object))?.clone();
    let anchor = p.anchor.clone().unwrap_or_default();
    match p.relation {
        Relation::OnFloor => {
            if s.agent_room != anchor {
                return Err(SkillError::NotNearTarget(object.to_string()));
            }
        }
        Relation::OnTop | Relation::Inside => {
            if s.agent_near.as_deref() != Some(anchor.as_str()) {
                return Err(SkillError::NotNearTarget(object.to_string()));
            }
            if p.relation == Relation::Inside && !s.is_open(&anchor) {
                return Err(SkillError::ContainerClosed(anchor));
            }
        }
        Relation::Held => return Err(SkillError::HandsFull(object.to_string())),
    }
    let entry = s.placements.get_mut(object).expect("placement checked above");
    entry.relation = Relation::Held;
    entry.anchor = None;
    s.held = Some(object.to_string());
    Ok((format!("Successful execution! Picked up {object}."), costs::PICK))
}

fn place(
    s: &mut WorldState,
    scene: &Scene,
    object: &str,
    relation: SpatialRelation,
    receptacle: &str,
    qualifier: Option<PlaceQualifier>,
    reference: Option<&str>,
) -> Result<(String, u64), SkillError> {
    if scene.object(object).is_none() {
        return Err(unknown(object));
    }
    let target = scene.entity(receptacle).ok_or_else(|| unknown(receptacle))?;
    match s.held.as_deref() {
        None => return Err(SkillError::HandsEmpty),
        Some(h) if h != object => return Err(SkillError::NotHolding(object.to_string())),
        _ => {}
    }
    let (new_relation, centroid) = match target {
        EntityRef::Room(r) => {
            if s.agent_room != r.id {
                return Err(SkillError::NotNearTarget(receptacle.to_string()));
            }
            if relation != SpatialRelation::On {
                return Err(SkillError::PlacementRejected(format!("cannot place within room {}", r.id)));
            }
            (Relation::OnFloor, r.position)
        }
        EntityRef::Furniture(f) => {
            if s.agent_near.as_deref() != Some(f.id.as_str()) {
                return Err(SkillError::NotNearTarget(receptacle.to_string()));
            }
            match relation {
                SpatialRelation::On => {
                    if !f.surface {
                        return Err(SkillError::PlacementRejected(format!("{} has no surface", f.id)));
                    }
                    (Relation::OnTop, f.position)
                }
                SpatialRelation::Within => {
                    if !f.articulable {
                        return Err(SkillError::NotArticulable(f.id.clone()));
                    }
                    if !s.is_open(&f.id) {
                        return Err(SkillError::ContainerClosed(f.id.clone()));
                    }
                    (Relation::Inside, f.position)
                }
            }
        }
        EntityRef::Object(_) => {
            return Err(SkillError::PlacementRejected(format!("{receptacle} is not a receptacle")))
        }
    };
    let position = match (qualifier, reference) {
        (None, None) => centroid,
        (Some(PlaceQualifier::NextTo), Some(r)) => {
            if scene.object(r).is_none() {
                return Err(unknown(r));
            }
            let rp = s
                .placement(r)
                .filter(|p| p.anchor.as_deref() == Some(receptacle) && p.relation == new_relation)
                .ok_or_else(|| {
                    SkillError::PlacementRejected(format!("{r} is not on {receptacle}"))
                })?;
            [rp.position[0] + NEXT_TO_EPSILON / 2.0, rp.position[1]]
        }
        _ => {
            return Err(SkillError::PlacementRejected(
                "qualifier and reference must be given together".into(),
            ))
        }
    };
    s.placements.insert(
        object.to_string(),
        Placement {
            object_id: object.to_string(),
            relation: new_relation,
            anchor: Some(receptacle.to_string()),
            position,
        },
    );
    s.held = None;
    let mut msg = format!("Successful execution! Placed {object} {} {receptacle}", relation.as_str());
    if let Some(r) = reference {
        msg.push_str(&format!(" next to {r}"));
    }
    msg.push('.');
    Ok((msg, costs::PLACE))
}

fn articulate(
    s: &mut WorldState,
    scene: &Scene,
    target: &str,
    to: Articulation,
) -> Result<(String, u64), SkillError> {
    let f = match scene.entity(target).ok_or_else(|| unknown(target))? {
        EntityRef::Furniture(f) => f,
        _ => return Err(SkillError::NotArticulable(target.to_string())),
    };
    if !f.articulable {
        return Err(SkillError::NotArticulable(target.to_string()));
    }
    if s.agent_near.as_deref() != Some(f.id.as_str()) {
        return Err(SkillError::NotNearTarget(target.to_string()));
    }
    s.articulation.insert(f.id.clone(), to);
    let (verb, cost) = match to {
        Articulation::Open => ("Opened", costs::OPEN),
        Articulation::Closed => ("Closed", costs::CLOSE),
    };
    Ok((format!("Successful execution! {verb} {target}."), cost))
}
