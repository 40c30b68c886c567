use serde::{Deserialize, Serialize};

use super::state::{Articulation, Relation, WorldState};
use super::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedEntity {
    pub id: String,
    pub category: String,
    /// e.g. "on_top table_7", "held", "closed".
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub structured: Vec<ObservedEntity>,
}

/// Renders the agent's room: objects grouped by furniture, then the floor,
/// the held object and articulation of furniture in the room. Contents of
/// closed containers are not visible.
pub fn render_observation(state: &WorldState, scene: &Scene) -> Observation {
    let room = &state.agent_room;
    let mut lines = Vec::new();
    let mut structured = Vec::new();
    let category = |id: &str| scene.object(id).map(|o| o.category.clone()).unwrap_or_default();

    for f in scene.furniture_iter().filter(|f| &f.room_id == room) {
        if f.articulable && !state.is_open(&f.id) {
            continue;
        }
        let mut here: Vec<(&str, Relation)> = state
            .objects_at(&f.id)
            .map(|p| (p.object_id.as_str(), p.relation))
            .collect();
        here.sort();
        for rel in [Relation::OnTop, Relation::Inside] {
            let ids: Vec<&str> = here.iter().filter(|(_, r)| *r == rel).map(|(id, _)| *id).collect();
            if ids.is_empty() {
                continue;
            }
            let word = if rel == Relation::OnTop { "On" } else { "Inside" };
            lines.push(format!("{word} {}: {}", f.id, ids.join(", ")));
            for id in ids {
                structured.push(ObservedEntity {
                    id: id.to_string(),
                    category: category(id),
                    relation: format!("{} {}", rel.as_str(), f.id),
                });
            }
        }
    }
    let floor: Vec<&str> = state
        .objects_at(room)
        .filter(|p| p.relation == Relation::OnFloor)
        .map(|p| p.object_id.as_str())
        .collect();
    if !floor.is_empty() {
        lines.push(format!("On the floor of {room}: {}", floor.join(", ")));
        for id in floor {
            structured.push(ObservedEntity {
                id: id.to_string(),
                category: category(id),
                relation: format!("on_floor {room}"),
            });
        }
    }

    let mut text = if lines.is_empty() {
        format!("No objects found in {room}.")
    } else {
        format!("Objects in {room}:\n{}", lines.join("\n"))
    };
    if let Some(near) = &state.agent_near {
        text.push_str(&format!("\nNear {near}."));
    }
    if let Some(h) = &state.held {
        text.push_str(&format!("\nHolding {h}."));
        structured.push(ObservedEntity {
            id: h.clone(),
            category: category(h),
            relation: "held".into(),
        });
    }
    let articulable: Vec<String> = scene
        .furniture_iter()
        .filter(|f| &f.room_id == room && f.articulable)
        .map(|f| {
            let st = match state.articulation.get(&f.id) {
                Some(Articulation::Open) => "open",
                _ => "closed",
            };
            structured.push(ObservedEntity {
                id: f.id.clone(),
                category: f.category.clone(),
                relation: st.to_string(),
            });
            format!("{} is {st}", f.id)
        })
        .collect();
    if !articulable.is_empty() {
        text.push_str(&format!("\n{}.", articulable.join("; ")));
    }
    Observation { text, structured }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::test_scenes::TINY;

    #[test]
    fn empty_room_says_no_objects() {
        let scene = Scene::from_json(TINY).unwrap();
        let s = WorldState::initial(&scene);
        let obs = render_observation(&s, &scene);
        assert!(obs.text.contains("No objects found"), "{}", obs.text);
        assert_eq!(obs, render_observation(&s, &scene));
    }

    #[test]
    fn lists_objects_and_hides_closed_contents() {
        let scene = Scene::from_json(TINY).unwrap();
        let mut s = WorldState::initial(&scene);
        s.agent_room = "kitchen_1".into();
        let obs = render_observation(&s, &scene);
        assert!(obs.text.contains("On counter_22: cup_0"));
        assert!(!obs.text.contains("bowl_0"));
        assert!(obs.text.contains("cabinet_3 is closed"));
        s.articulation.insert("cabinet_3".into(), Articulation::Open);
        assert!(render_observation(&s, &scene).text.contains("Inside cabinet_3: bowl_0"));
    }
}
