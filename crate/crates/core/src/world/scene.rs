use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Position, Relation};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}invalid scene: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub id: String,
    pub category: String,
    pub room_id: String,
    #[serde(default)]
    pub articulable: bool,
    #[serde(default = "yes")]
    pub surface: bool,
    pub position: Position,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialPlacement {
    pub relation: Relation,
    pub anchor: String,
    /// Explicit coordinates; defaults to the anchor's position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub category: String,
    pub caption: String,
    pub placement: InitialPlacement,
}

/// On-disk scene document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub schema_version: u32,
    pub scene_id: String,
    pub agent_start: String,
    pub rooms: Vec<Room>,
    pub furniture: Vec<Furniture>,
    pub objects: Vec<ObjectSpec>,
    /// Undirected room adjacency pairs.
    pub adjacency: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Copy)]
pub enum EntityRef<'a> {
    Room(&'a Room),
    Furniture(&'a Furniture),
    Object(&'a ObjectSpec),
}

impl EntityRef<'_> {
    pub fn id(&self) -> &str {
        match self {
            EntityRef::Room(r) => &r.id,
            EntityRef::Furniture(f) => &f.id,
            EntityRef::Object(o) => &o.id,
        }
    }
}

/// Validated, indexed scene. Immutable once built.
#[derive(Debug, Clone)]
pub struct Scene {
    file: SceneFile,
    rooms: BTreeMap<String, usize>,
    furniture: BTreeMap<String, usize>,
    objects: BTreeMap<String, usize>,
    neighbours: BTreeMap<String, BTreeSet<String>>,
}

impl Scene {
    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&raw)
    }

    pub fn from_json(raw: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(raw).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::build(file, Some(raw))
    }

    pub fn from_file(file: SceneFile) -> Result<Self, SceneError> {
        Self::build(file, None)
    }

    fn build(file: SceneFile, raw: Option<&str>) -> Result<Self, SceneError> {
        let invalid = |id: &str, message: String| SceneError::Invalid {
            line: raw.and_then(|r| line_of(r, id)),
            message,
        };
        if file.schema_version != SCENE_SCHEMA_VERSION {
            return Err(SceneError::Invalid {
                line: raw.and_then(|r| line_of_key(r, "schema_version")),
                message: format!("unsupported schema_version {}", file.schema_version),
            });
        }

        let mut seen = BTreeSet::new();
        let mut rooms = BTreeMap::new();
        for (i, r) in file.rooms.iter().enumerate() {
            if !seen.insert(r.id.clone()) {
                return Err(invalid(&r.id, format!("duplicate id {}", r.id)));
            }
            rooms.insert(r.id.clone(), i);
        }
        let mut furniture = BTreeMap::new();
        for (i, f) in file.furniture.iter().enumerate() {
            if !seen.insert(f.id.clone()) {
                return Err(invalid(&f.id, format!("duplicate id {}", f.id)));
            }
            if !rooms.contains_key(&f.room_id) {
                return Err(invalid(&f.id, format!("furniture {} references unknown room {}", f.id, f.room_id)));
            }
            furniture.insert(f.id.clone(), i);
        }
        let mut objects = BTreeMap::new();
        for (i, o) in file.objects.iter().enumerate() {
            if !seen.insert(o.id.clone()) {
                return Err(invalid(&o.id, format!("duplicate id {}", o.id)));
            }
            let anchor = &o.placement.anchor;
            match o.placement.relation {
                Relation::OnFloor => {
                    if !rooms.contains_key(anchor) {
                        return Err(invalid(&o.id, format!("object {} on floor of unknown room {anchor}", o.id)));
                    }
                }
                Relation::OnTop | Relation::Inside => {
                    let Some(&fi) = furniture.get(anchor) else {
                        return Err(invalid(&o.id, format!("object {} placed on unknown furniture {anchor}", o.id)));
                    };
                    let f = &file.furniture[fi];
                    if o.placement.relation == Relation::Inside && !f.articulable {
                        return Err(invalid(&o.id, format!("object {} inside non-articulable {anchor}", o.id)));
                    }
                    if o.placement.relation == Relation::OnTop && !f.surface {
                        return Err(invalid(&o.id, format!("object {} on top of non-surface {anchor}", o.id)));
                    }
                }
                Relation::Held => {
                    return Err(invalid(&o.id, format!("object {} cannot start held", o.id)));
                }
            }
            objects.insert(o.id.clone(), i);
        }

        let mut neighbours: BTreeMap<String, BTreeSet<String>> =
            rooms.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for [a, b] in &file.adjacency {
            for id in [a, b] {
                if !rooms.contains_key(id) {
                    return Err(invalid(id, format!("adjacency references unknown room {id}")));
                }
            }
            if a == b {
                return Err(invalid(a, format!("room {a} adjacent to itself")));
            }
            neighbours.get_mut(a).expect("checked").insert(b.clone());
            neighbours.get_mut(b).expect("checked").insert(a.clone());
        }
        if !rooms.contains_key(&file.agent_start) {
            return Err(SceneError::Invalid {
                line: raw.and_then(|r| line_of_key(r, "agent_start")),
                message: format!("agent_start {} is not a room", file.agent_start),
            });
        }

        Ok(Self { file, rooms, furniture, objects, neighbours })
    }

    pub fn file(&self) -> &SceneFile {
        &self.file
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scene serializes")
    }

    pub fn id(&self) -> &str {
        &self.file.scene_id
    }

    pub fn agent_start(&self) -> &str {
        &self.file.agent_start
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Room> {
        self.rooms.values().map(|&i| &self.file.rooms[i])
    }

    pub fn furniture_iter(&self) -> impl Iterator<Item = &Furniture> {
        self.furniture.values().map(|&i| &self.file.furniture[i])
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.values().map(|&i| &self.file.objects[i])
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.get(id).map(|&i| &self.file.rooms[i])
    }

    pub fn furniture(&self, id: &str) -> Option<&Furniture> {
        self.furniture.get(id).map(|&i| &self.file.furniture[i])
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.get(id).map(|&i| &self.file.objects[i])
    }

    pub fn entity(&self, id: &str) -> Option<EntityRef<'_>> {
        self.room(id)
            .map(EntityRef::Room)
            .or_else(|| self.furniture(id).map(EntityRef::Furniture))
            .or_else(|| self.object(id).map(EntityRef::Object))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entity(id).is_some()
    }

    /// Objects sharing `category`, sorted by id.
    pub fn objects_of_category<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectSpec> {
        self.objects().filter(move |o| o.category == category)
    }

    pub fn neighbours(&self, room: &str) -> impl Iterator<Item = &str> {
        self.neighbours.get(room).into_iter().flatten().map(String::as_str)
    }

    /// Shortest room path from `from` to `to` inclusive. Breadth-first,
    /// neighbours visited in id order, so the path is deterministic.
    pub fn room_path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        if !self.rooms.contains_key(from) || !self.rooms.contains_key(to) {
            return None;
        }
        let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut visited = BTreeSet::from([from]);
        while let Some(cur) = queue.pop_front() {
            if cur == to {
                let mut path = vec![to.to_string()];
                let mut at = to;
                while let Some(&p) = prev.get(at) {
                    path.push(p.to_string());
                    at = p;
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbours(cur) {
                if visited.insert(n) {
                    prev.insert(n, cur);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    pub fn hops(&self, from: &str, to: &str) -> Option<usize> {
        self.room_path(from, to).map(|p| p.len() - 1)
    }

    /// Position of a room or furniture anchor.
    pub fn anchor_position(&self, id: &str) -> Option<Position> {
        self.furniture(id)
            .map(|f| f.position)
            .or_else(|| self.room(id).map(|r| r.position))
    }
}

fn line_of(raw: &str, id: &str) -> Option<usize> {
    let needle = format!("\"{id}\"");
    raw.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn line_of_key(raw: &str, key: &str) -> Option<usize> {
    line_of(raw, key)
}
