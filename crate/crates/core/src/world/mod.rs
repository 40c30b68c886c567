//! Deterministic household text world.
//!
//! A [`Scene`] is immutable and shareable; a [`WorldState`] is owned by a
//! single episode and only changes through [`apply_skill`]. Every skill,
//! including a failed one, advances `step_count` by a fixed cost so that
//! simulation steps remain an efficiency signal.

mod observation;
mod perception;
mod scene;
mod skill;
mod state;

pub use observation::{render_observation, Observation, ObservedEntity};
pub use perception::{perceive, PerceptionError, PerceptionQuery};
pub use scene::{
    EntityRef, Furniture, InitialPlacement, ObjectSpec, Room, Scene, SceneError, SceneFile,
};
pub use skill::{apply_skill, PlaceQualifier, SkillCall, SkillError, SpatialRelation, Transition};
pub use state::{Articulation, Placement, Relation, WorldState};

/// Step costs charged by [`apply_skill`].
pub mod costs {
    /// Per room-graph hop when navigating.
    pub const NAVIGATE_PER_HOP: u64 = 30;
    /// Fixed overhead of every navigation.
    pub const NAVIGATE_BASE: u64 = 10;
    pub const PICK: u64 = 20;
    pub const PLACE: u64 = 20;
    pub const OPEN: u64 = 10;
    pub const CLOSE: u64 = 10;
    /// Per newly explored room, with a minimum charge of one room.
    pub const EXPLORE_PER_ROOM: u64 = 50;
    pub const WAIT: u64 = 10;
    pub const FAILED: u64 = 5;
}

/// Distance from the reference object at which `next_to` placements land
/// is half of this epsilon.
pub const NEXT_TO_EPSILON: f64 = 0.5;

pub type Position = [f64; 2];

pub fn distance(a: Position, b: Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
