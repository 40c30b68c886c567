//! Regenerates the bundled corpus under `data/corpus`.
//!
//! ```text
//! cargo run -p hearth-core --example build_corpus [-- <out dir>]
//! ```

use std::path::PathBuf;

use hearth_core::dataset::{bundled_corpus_dir, compose_joint, Corpus, Episode, KnowledgeType, Stage, Subtype};
use hearth_core::evaluator::{Constraint, GoalSpec, Proposition};
use hearth_core::world::{Furniture, InitialPlacement, ObjectSpec, Relation, Room, Scene, SceneFile};

const ON: Relation = Relation::OnTop;
const IN: Relation = Relation::Inside;
const FLOOR: Relation = Relation::OnFloor;

/// (caption, relation, anchor)
type Spot = (&'static str, Relation, &'static str);

struct Pair {
    category: &'static str,
    target: Spot,
    distractor: Spot,
}

enum Shape {
    On(&'static str),
    In(&'static str),
    /// Every object onto one receptacle.
    Group(&'static str),
    /// First object to the first receptacle, then second to the second.
    Routine(&'static str, &'static str),
}

struct Ep {
    subtype: Subtype,
    kind: KnowledgeType,
    pairs: Vec<Pair>,
    shape: Shape,
    acquisition: &'static str,
    utilization: &'static str,
}

/// (id, category, room, articulable, surface, offset from room)
type FurnitureDef = (&'static str, &'static str, &'static str, bool, bool, [f64; 2]);

struct SceneDef {
    id: &'static str,
    start: &'static str,
    rooms: Vec<(&'static str, &'static str, [f64; 2])>,
    adjacency: Vec<(&'static str, &'static str)>,
    furniture: Vec<FurnitureDef>,
    episodes: Vec<Ep>,
    /// 1-based episode numbers composed into joint tasks.
    joints: Vec<Vec<usize>>,
}

fn pair(category: &'static str, target: Spot, distractor: Spot) -> Pair {
    Pair {
        category,
        target,
        distractor,
    }
}

use KnowledgeType::{ObjectSemantics as OS, UserPattern as UP};

fn apartment() -> SceneDef {
    SceneDef {
        id: "apartment_a",
        start: "living_room_1",
        rooms: vec![
            ("living_room_1", "living room", [0.0, 0.0]),
            ("kitchen_1", "kitchen", [6.0, 0.0]),
            ("bedroom_1", "bedroom", [0.0, 6.0]),
            ("bathroom_1", "bathroom", [6.0, 6.0]),
        ],
        adjacency: vec![
            ("living_room_1", "kitchen_1"),
            ("living_room_1", "bedroom_1"),
            ("bedroom_1", "bathroom_1"),
        ],
        furniture: vec![
            ("sofa_1", "sofa", "living_room_1", false, true, [0.0, 1.0]),
            ("coffee_table_2", "coffee_table", "living_room_1", false, true, [1.0, 1.0]),
            ("shelves_3", "shelves", "living_room_1", false, true, [-1.0, 0.0]),
            ("tv_stand_4", "tv_stand", "living_room_1", false, true, [2.0, -1.0]),
            ("counter_5", "counter", "kitchen_1", false, true, [0.0, -1.0]),
            ("kitchen_table_6", "table", "kitchen_1", false, true, [1.0, 1.0]),
            ("cabinet_7", "cabinet", "kitchen_1", true, false, [-1.0, -1.0]),
            ("fridge_8", "fridge", "kitchen_1", true, false, [2.0, 0.0]),
            ("bed_9", "bed", "bedroom_1", false, true, [0.0, 1.0]),
            ("nightstand_10", "nightstand", "bedroom_1", false, true, [1.0, 1.0]),
            ("chest_of_drawers_11", "chest_of_drawers", "bedroom_1", true, true, [-1.0, 0.0]),
            ("desk_12", "desk", "bedroom_1", false, true, [2.0, -1.0]),
            ("sink_counter_13", "counter", "bathroom_1", false, true, [0.0, 1.0]),
            ("bathroom_cabinet_14", "cabinet", "bathroom_1", true, false, [1.0, 0.0]),
        ],
        episodes: vec![
            Ep {
                subtype: Subtype::Ownership,
                kind: OS,
                pairs: vec![pair(
                    "wallet",
                    ("a black leather wallet with a silver zipper", ON, "sofa_1"),
                    ("a brown canvas wallet with a velcro strap", ON, "coffee_table_2"),
                )],
                shape: Shape::On("nightstand_10"),
                acquisition: "Move the black leather wallet with the silver zipper from the sofa to the nightstand. That wallet is mine.",
                utilization: "Put my wallet on the nightstand.",
            },
            Ep {
                subtype: Subtype::Ownership,
                kind: OS,
                pairs: vec![pair(
                    "headphones",
                    ("a pair of white over-ear headphones", ON, "desk_12"),
                    ("a pair of red in-ear headphones", ON, "tv_stand_4"),
                )],
                shape: Shape::On("coffee_table_2"),
                acquisition: "Bring the white over-ear headphones to the coffee table; they belong to me.",
                utilization: "Bring my headphones to the coffee table.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: OS,
                pairs: vec![pair(
                    "mug",
                    ("a green ceramic mug with a bamboo handle", IN, "cabinet_7"),
                    ("a plain grey mug", ON, "counter_5"),
                )],
                shape: Shape::On("kitchen_table_6"),
                acquisition: "Take the green ceramic mug with the bamboo handle out of the cabinet and put it on the kitchen table. It is my favorite mug for tea.",
                utilization: "Put my favorite tea mug on the kitchen table.",
            },
            Ep {
                subtype: Subtype::History,
                kind: OS,
                pairs: vec![pair(
                    "vase",
                    ("a tall blue glass vase", ON, "shelves_3"),
                    ("a short yellow clay vase", ON, "kitchen_table_6"),
                )],
                shape: Shape::On("tv_stand_4"),
                acquisition: "Place the tall blue glass vase, the one my sister gave me last spring, on the tv stand.",
                utilization: "Place the vase my sister gave me on the tv stand.",
            },
            Ep {
                subtype: Subtype::Groups,
                kind: OS,
                pairs: vec![
                    pair(
                        "yoga_mat",
                        ("a rolled purple yoga mat", FLOOR, "bedroom_1"),
                        ("a rolled black yoga mat", FLOOR, "living_room_1"),
                    ),
                    pair(
                        "water_bottle",
                        ("a steel water bottle covered in stickers", ON, "counter_5"),
                        ("a clear plastic water bottle", ON, "desk_12"),
                    ),
                ],
                shape: Shape::Group("sofa_1"),
                acquisition: "Put the purple yoga mat and the steel water bottle with stickers on the sofa; together they make up my gym kit.",
                utilization: "Put my gym kit on the sofa.",
            },
            Ep {
                subtype: Subtype::Routine,
                kind: UP,
                pairs: vec![
                    pair(
                        "plant_pot",
                        ("a small cactus in a terracotta pot", ON, "shelves_3"),
                        ("a small fern in a white pot", ON, "kitchen_table_6"),
                    ),
                    pair(
                        "clock",
                        ("a round silver alarm clock", ON, "tv_stand_4"),
                        ("a square wooden clock", ON, "shelves_3"),
                    ),
                ],
                shape: Shape::Routine("desk_12", "nightstand_10"),
                acquisition: "Every morning I first move the small cactus pot to the desk and then put the round silver alarm clock on the nightstand.",
                utilization: "Do my usual morning routine with the plant and the clock.",
            },
            Ep {
                subtype: Subtype::Routine,
                kind: UP,
                pairs: vec![
                    pair(
                        "book",
                        ("a hardcover novel with a red cover", ON, "coffee_table_2"),
                        ("a paperback cookbook", ON, "counter_5"),
                    ),
                    pair(
                        "glasses",
                        ("a pair of tortoiseshell reading glasses", ON, "sofa_1"),
                        ("a pair of black sunglasses", ON, "shelves_3"),
                    ),
                ],
                shape: Shape::Routine("bed_9", "nightstand_10"),
                acquisition: "In the evening I put the red hardcover novel on the bed first, and after that the tortoiseshell reading glasses go on the nightstand.",
                utilization: "Get things ready for my evening reading like I usually do.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: UP,
                pairs: vec![pair(
                    "teapot",
                    ("a white porcelain teapot", ON, "counter_5"),
                    ("a black cast iron teapot", ON, "kitchen_table_6"),
                )],
                shape: Shape::In("cabinet_7"),
                acquisition: "Put the white porcelain teapot inside the kitchen cabinet; I always keep it there after use.",
                utilization: "Put my teapot away where I always keep it.",
            },
        ],
        joints: vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![1, 3, 8]],
    }
}

fn house() -> SceneDef {
    SceneDef {
        id: "house_b",
        start: "hallway_1",
        rooms: vec![
            ("hallway_1", "hallway", [0.0, 0.0]),
            ("office_1", "office", [5.0, 0.0]),
            ("kitchen_1", "kitchen", [0.0, 5.0]),
            ("dining_room_1", "dining room", [5.0, 5.0]),
            ("garage_1", "garage", [-5.0, 0.0]),
        ],
        adjacency: vec![
            ("hallway_1", "office_1"),
            ("hallway_1", "kitchen_1"),
            ("kitchen_1", "dining_room_1"),
            ("hallway_1", "garage_1"),
        ],
        furniture: vec![
            ("coat_rack_1", "coat_rack", "hallway_1", false, true, [0.0, 1.0]),
            ("bench_2", "bench", "hallway_1", false, true, [1.0, 0.0]),
            ("shoe_cabinet_3", "cabinet", "hallway_1", true, true, [-1.0, 0.0]),
            ("desk_4", "desk", "office_1", false, true, [0.0, 1.0]),
            ("bookshelf_5", "bookshelf", "office_1", false, true, [1.0, 0.0]),
            ("filing_cabinet_6", "filing_cabinet", "office_1", true, true, [-1.0, 1.0]),
            ("counter_7", "counter", "kitchen_1", false, true, [0.0, 1.0]),
            ("fridge_8", "fridge", "kitchen_1", true, false, [1.0, 1.0]),
            ("dining_table_9", "table", "dining_room_1", false, true, [0.0, 0.0]),
            ("sideboard_10", "sideboard", "dining_room_1", true, true, [1.0, 1.0]),
            ("workbench_11", "workbench", "garage_1", false, true, [0.0, 1.0]),
            ("tool_cabinet_12", "cabinet", "garage_1", true, false, [1.0, 1.0]),
        ],
        episodes: vec![
            Ep {
                subtype: Subtype::Ownership,
                kind: OS,
                pairs: vec![pair(
                    "keys",
                    ("a ring of brass keys with a leather tag", ON, "desk_4"),
                    ("a ring of steel keys with a plastic fob", ON, "counter_7"),
                )],
                shape: Shape::On("bench_2"),
                acquisition: "Put the brass keys with the leather tag on the hallway bench; those keys are mine.",
                utilization: "Put my keys on the hallway bench.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: OS,
                pairs: vec![pair(
                    "pen",
                    ("a fountain pen with a gold nib", ON, "dining_table_9"),
                    ("a blue ballpoint pen", ON, "bookshelf_5"),
                )],
                shape: Shape::In("filing_cabinet_6"),
                acquisition: "Put the fountain pen with the gold nib inside the filing cabinet; it is the pen I prefer for signing letters.",
                utilization: "Put the pen I prefer for signing letters inside the filing cabinet.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: OS,
                pairs: vec![pair(
                    "snack_box",
                    ("a box of oat granola bars", ON, "counter_7"),
                    ("a box of chocolate cookies", ON, "sideboard_10"),
                )],
                shape: Shape::On("desk_4"),
                acquisition: "Put the box of oat granola bars on the desk; that is my preferred snack while working.",
                utilization: "Put my preferred work snack on the desk.",
            },
            Ep {
                subtype: Subtype::History,
                kind: OS,
                pairs: vec![pair(
                    "hammer",
                    ("a hammer with a worn wooden handle", ON, "workbench_11"),
                    ("a hammer with a rubber grip", IN, "tool_cabinet_12"),
                )],
                shape: Shape::On("bench_2"),
                acquisition: "Put the hammer with the worn wooden handle, which I inherited from my grandfather, on the bench in the hallway.",
                utilization: "Put the hammer I inherited from my grandfather on the hallway bench.",
            },
            Ep {
                subtype: Subtype::Groups,
                kind: OS,
                pairs: vec![
                    pair(
                        "basket",
                        ("a wicker picnic basket with a lid", ON, "sideboard_10"),
                        ("a plastic laundry basket", FLOOR, "garage_1"),
                    ),
                    pair(
                        "blanket",
                        ("a red checkered blanket", IN, "sideboard_10"),
                        ("a grey fleece blanket", ON, "bench_2"),
                    ),
                ],
                shape: Shape::Group("dining_table_9"),
                acquisition: "Put the wicker picnic basket and the red checkered blanket on the dining table; they form my picnic set.",
                utilization: "Set my picnic set out on the dining table.",
            },
            Ep {
                subtype: Subtype::Groups,
                kind: OS,
                pairs: vec![
                    pair(
                        "stapler",
                        ("a heavy black metal stapler", ON, "bookshelf_5"),
                        ("a small pink plastic stapler", ON, "counter_7"),
                    ),
                    pair(
                        "notebook",
                        ("a spiral notebook with a green cover", ON, "dining_table_9"),
                        ("a leather bound journal", ON, "desk_4"),
                    ),
                ],
                shape: Shape::Group("desk_4"),
                acquisition: "Put the black metal stapler and the green spiral notebook on the desk; they belong to my office set.",
                utilization: "Put my office set on the desk.",
            },
            Ep {
                subtype: Subtype::Routine,
                kind: UP,
                pairs: vec![
                    pair(
                        "umbrella",
                        ("a long black umbrella with a wooden hook", ON, "workbench_11"),
                        ("a folding floral umbrella", ON, "coat_rack_1"),
                    ),
                    pair(
                        "bag",
                        ("a brown leather messenger bag", ON, "desk_4"),
                        ("a blue nylon backpack", ON, "bookshelf_5"),
                    ),
                ],
                shape: Shape::Routine("bench_2", "bench_2"),
                acquisition: "Before I leave for work, I first put the long black umbrella on the hallway bench and then put the brown leather messenger bag on the bench too.",
                utilization: "Get my things ready for leaving for work like usual.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: UP,
                pairs: vec![pair(
                    "milk_carton",
                    ("a carton of oat milk", ON, "dining_table_9"),
                    ("a carton of whole milk", ON, "counter_7"),
                )],
                shape: Shape::In("fridge_8"),
                acquisition: "Put the carton of oat milk inside the fridge; I like it kept cold right after breakfast.",
                utilization: "Put my milk away the way I like after breakfast.",
            },
        ],
        joints: vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![2, 4, 7]],
    }
}

fn cottage() -> SceneDef {
    SceneDef {
        id: "cottage_c",
        start: "living_room_1",
        rooms: vec![
            ("living_room_1", "living room", [0.0, 0.0]),
            ("kitchen_1", "kitchen", [5.0, 0.0]),
            ("bedroom_1", "bedroom", [0.0, 5.0]),
            ("bathroom_1", "bathroom", [5.0, 5.0]),
            ("laundry_room_1", "laundry room", [10.0, 0.0]),
        ],
        adjacency: vec![
            ("living_room_1", "kitchen_1"),
            ("living_room_1", "bedroom_1"),
            ("bedroom_1", "bathroom_1"),
            ("kitchen_1", "laundry_room_1"),
        ],
        furniture: vec![
            ("armchair_1", "armchair", "living_room_1", false, true, [0.0, 1.0]),
            ("side_table_2", "side_table", "living_room_1", false, true, [1.0, 1.0]),
            ("bookcase_3", "bookcase", "living_room_1", false, true, [-1.0, 0.0]),
            ("counter_4", "counter", "kitchen_1", false, true, [0.0, 1.0]),
            ("kitchen_table_5", "table", "kitchen_1", false, true, [1.0, 0.0]),
            ("pantry_6", "pantry", "kitchen_1", true, false, [-1.0, 1.0]),
            ("dresser_7", "dresser", "bedroom_1", true, true, [0.0, 1.0]),
            ("bed_8", "bed", "bedroom_1", false, true, [1.0, 0.0]),
            ("vanity_9", "vanity", "bathroom_1", false, true, [0.0, 1.0]),
            ("medicine_cabinet_10", "cabinet", "bathroom_1", true, false, [1.0, 1.0]),
            ("washing_machine_11", "washing_machine", "laundry_room_1", true, true, [0.0, 1.0]),
            ("laundry_shelf_12", "shelf", "laundry_room_1", false, true, [1.0, 0.0]),
        ],
        episodes: vec![
            Ep {
                subtype: Subtype::Ownership,
                kind: OS,
                pairs: vec![pair(
                    "scarf",
                    ("a knitted mustard yellow scarf", ON, "armchair_1"),
                    ("a blue silk scarf", ON, "bed_8"),
                )],
                shape: Shape::In("dresser_7"),
                acquisition: "Put the knitted mustard yellow scarf in the dresser; the scarf is mine.",
                utilization: "Put my scarf in the dresser.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: OS,
                pairs: vec![pair(
                    "towel",
                    ("a fluffy white bath towel", ON, "laundry_shelf_12"),
                    ("a thin striped beach towel", ON, "bed_8"),
                )],
                shape: Shape::On("vanity_9"),
                acquisition: "Put the fluffy white bath towel on the vanity; it is the towel I prefer after a shower.",
                utilization: "Put the towel I prefer after a shower on the vanity.",
            },
            Ep {
                subtype: Subtype::History,
                kind: OS,
                pairs: vec![pair(
                    "photo_frame",
                    ("a silver photo frame holding a wedding picture", ON, "bookcase_3"),
                    ("a wooden photo frame with a beach photo", ON, "side_table_2"),
                )],
                shape: Shape::On("dresser_7"),
                acquisition: "Put the silver photo frame, which I got as a wedding gift, on top of the dresser.",
                utilization: "Put the frame I got as a wedding gift on the dresser.",
            },
            Ep {
                subtype: Subtype::History,
                kind: OS,
                pairs: vec![pair(
                    "candle",
                    ("a lavender scented candle in a jar", ON, "kitchen_table_5"),
                    ("a plain white pillar candle", ON, "vanity_9"),
                )],
                shape: Shape::On("side_table_2"),
                acquisition: "Put the lavender scented candle I bought at the market last weekend on the side table.",
                utilization: "Put the candle I bought at the market last weekend on the side table.",
            },
            Ep {
                subtype: Subtype::Groups,
                kind: OS,
                pairs: vec![
                    pair(
                        "rolling_pin",
                        ("a marble rolling pin", IN, "pantry_6"),
                        ("a wooden rolling pin", ON, "counter_4"),
                    ),
                    pair(
                        "mixing_bowl",
                        ("a large glass mixing bowl", ON, "laundry_shelf_12"),
                        ("a small metal mixing bowl", ON, "counter_4"),
                    ),
                ],
                shape: Shape::Group("kitchen_table_5"),
                acquisition: "Put the marble rolling pin and the large glass mixing bowl on the kitchen table; they are my baking set.",
                utilization: "Put my baking set on the kitchen table.",
            },
            Ep {
                subtype: Subtype::Routine,
                kind: UP,
                pairs: vec![
                    pair(
                        "detergent",
                        ("a bottle of unscented detergent", IN, "pantry_6"),
                        ("a bottle of citrus detergent", ON, "laundry_shelf_12"),
                    ),
                    pair(
                        "hamper",
                        ("a woven laundry hamper", FLOOR, "bedroom_1"),
                        ("a plastic laundry hamper", FLOOR, "bathroom_1"),
                    ),
                ],
                shape: Shape::Routine("washing_machine_11", "laundry_shelf_12"),
                acquisition: "On laundry day I first put the unscented detergent on the washing machine, then bring the woven laundry hamper to the laundry shelf.",
                utilization: "Set things up for laundry day the way I usually do.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: UP,
                pairs: vec![pair(
                    "remote",
                    ("a slim black tv remote", ON, "bed_8"),
                    ("a chunky grey tv remote", ON, "kitchen_table_5"),
                )],
                shape: Shape::On("armchair_1"),
                acquisition: "Put the slim black remote on the armchair; I like having it right there when I sit down.",
                utilization: "Put my remote where I like having it when I sit down.",
            },
            Ep {
                subtype: Subtype::Preference,
                kind: UP,
                pairs: vec![pair(
                    "toothbrush",
                    ("a bamboo toothbrush", ON, "vanity_9"),
                    ("an electric toothbrush", ON, "vanity_9"),
                )],
                shape: Shape::In("medicine_cabinet_10"),
                acquisition: "Put the bamboo toothbrush inside the medicine cabinet; I prefer it stored away after brushing.",
                utilization: "Put my toothbrush where I prefer it stored after brushing.",
            },
        ],
        joints: vec![vec![1, 2], vec![3, 4]],
    }
}

fn build(def: &SceneDef) -> (Scene, Vec<Episode>) {
    let room_pos = |id: &str| def.rooms.iter().find(|r| r.0 == id).expect("room exists").2;
    let mut objects = Vec::new();
    let mut episodes = Vec::new();
    let tag = &def.id[def.id.len() - 1..];
    for (n, ep) in def.episodes.iter().enumerate() {
        let mut targets = Vec::new();
        for p in &ep.pairs {
            // Alternate which handle index is the target.
            let t = n % 2;
            let mut spots = [(p.target, true), (p.distractor, false)];
            if t == 1 {
                spots.swap(0, 1);
            }
            for (i, ((caption, relation, anchor), is_target)) in spots.into_iter().enumerate() {
                let id = format!("{}_{}", p.category, i);
                objects.push(ObjectSpec {
                    id: id.clone(),
                    category: p.category.into(),
                    caption: caption.into(),
                    placement: InitialPlacement {
                        relation,
                        anchor: anchor.into(),
                        position: None,
                    },
                });
                if is_target {
                    targets.push(id);
                }
            }
        }
        let goal = match ep.shape {
            Shape::On(r) => GoalSpec::new(vec![Proposition::on_top(&[&targets[0]], &[r])]),
            Shape::In(r) => GoalSpec::new(vec![Proposition::inside(&[&targets[0]], &[r])]),
            Shape::Group(r) => GoalSpec::new(targets.iter().map(|t| Proposition::on_top(&[t], &[r])).collect()),
            Shape::Routine(a, b) => {
                let mut g = GoalSpec::new(vec![
                    Proposition::on_top(&[&targets[0]], &[a]),
                    Proposition::on_top(&[&targets[1]], &[b]),
                ]);
                g.constraints.push(Constraint::TemporalOrder { order: vec![0, 1] });
                g
            }
        };
        let acq_id = format!("acq_{tag}{:02}", n + 1);
        episodes.push(Episode {
            episode_id: acq_id.clone(),
            scene_id: def.id.into(),
            stage: Stage::Acquisition,
            knowledge_type: ep.kind,
            subtype: ep.subtype,
            instruction: ep.acquisition.into(),
            goal: goal.clone(),
            references: vec![],
        });
        episodes.push(Episode {
            episode_id: format!("util_{tag}{:02}", n + 1),
            scene_id: def.id.into(),
            stage: Stage::Utilization,
            knowledge_type: ep.kind,
            subtype: ep.subtype,
            instruction: ep.utilization.into(),
            goal,
            references: vec![acq_id],
        });
    }
    let singles: Vec<Episode> = episodes.iter().filter(|e| e.stage == Stage::Utilization).cloned().collect();
    for j in &def.joints {
        let parts: Vec<&Episode> = j.iter().map(|&i| &singles[i - 1]).collect();
        episodes.push(compose_joint(&parts).expect("joint parts are disjoint"));
    }
    let file = SceneFile {
        schema_version: 1,
        scene_id: def.id.into(),
        agent_start: def.start.into(),
        rooms: def
            .rooms
            .iter()
            .map(|(id, name, pos)| Room {
                id: (*id).into(),
                name: (*name).into(),
                position: *pos,
            })
            .collect(),
        furniture: def
            .furniture
            .iter()
            .map(|(id, cat, room, art, surf, off)| {
                let base = room_pos(room);
                Furniture {
                    id: (*id).into(),
                    category: (*cat).into(),
                    room_id: (*room).into(),
                    articulable: *art,
                    surface: *surf,
                    position: [base[0] + off[0], base[1] + off[1]],
                    description: None,
                }
            })
            .collect(),
        objects,
        adjacency: def.adjacency.iter().map(|(a, b)| [(*a).into(), (*b).into()]).collect(),
    };
    (Scene::from_file(file).expect("scene is valid"), episodes)
}

fn main() {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(bundled_corpus_dir);
    let mut scenes = Vec::new();
    let mut acquisition = Vec::new();
    let mut single = Vec::new();
    let mut joint = Vec::new();
    for def in [apartment(), house(), cottage()] {
        let (scene, eps) = build(&def);
        scenes.push(scene);
        for e in eps {
            match (e.stage, e.references.len()) {
                (Stage::Acquisition, _) => acquisition.push(e),
                (_, 1) => single.push(e),
                _ => joint.push(e),
            }
        }
    }
    // Acquisition first, then single, then joint: the run order.
    let episodes: Vec<Episode> = acquisition.into_iter().chain(single).chain(joint).collect();
    let corpus = Corpus::new(scenes, episodes).expect("corpus validates");
    corpus.write(&out).expect("corpus written");
    println!("wrote {} episodes to {}", corpus.episodes().len(), out.display());
}
