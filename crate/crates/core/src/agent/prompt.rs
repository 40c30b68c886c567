use crate::providers::ChatMessage;
use crate::world::{Relation, Scene, WorldState};

const SYSTEM: &str = include_str!("../../prompts/agent_system.txt");
const EXEMPLAR: &str = include_str!("../../prompts/agent_exemplar.txt");

/// Everything the agent is told before its first turn.
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub instruction: String,
    /// Rendered episodic memories.
    pub memories: Vec<String>,
    /// Profile-memory descriptions.
    pub profile: Vec<String>,
}

/// Indented house outline: rooms, their furniture, objects on each, and
/// the agent. Only explored rooms appear unless `oracle_scope` is set.
pub fn semantic_memory(state: &WorldState, scene: &Scene, oracle_scope: bool) -> String {
    let mut out = String::from("house\n");
    for room in scene.rooms() {
        if !oracle_scope && !state.explored_rooms.contains(&room.id) {
            continue;
        }
        out.push_str(&format!("  {}\n", room.id));
        for f in scene.furniture_iter().filter(|f| f.room_id == room.id) {
            let mut tag = f.category.clone();
            if f.articulable {
                tag.push_str(if state.is_open(&f.id) { ", open" } else { ", closed" });
            }
            out.push_str(&format!("    {} [{tag}]\n", f.id));
            for p in state.objects_at(&f.id) {
                let cat = scene.object(&p.object_id).map(|o| o.category.as_str()).unwrap_or("");
                out.push_str(&format!("      {} [{cat}] {}\n", p.object_id, p.relation.as_str()));
            }
        }
        for p in state.objects_at(&room.id).filter(|p| p.relation == Relation::OnFloor) {
            let cat = scene.object(&p.object_id).map(|o| o.category.as_str()).unwrap_or("");
            out.push_str(&format!("    {} [{cat}] on_floor\n", p.object_id));
        }
    }
    out.push_str(&format!(
        "agent: in {}, near {}, holding {}",
        state.agent_room,
        state.agent_near.as_deref().unwrap_or("nothing"),
        state.held.as_deref().unwrap_or("nothing")
    ));
    out
}

fn context_block(ctx: &PromptContext) -> String {
    let mut out = String::new();
    if !ctx.memories.is_empty() {
        out.push_str("Memories of earlier tasks:\n");
        for (i, m) in ctx.memories.iter().enumerate() {
            out.push_str(&format!("[Memory {}]\n{}\n", i + 1, m.trim_end()));
        }
        out.push('\n');
    }
    if !ctx.profile.is_empty() {
        out.push_str("What you know about the user:\n");
        for p in &ctx.profile {
            out.push_str(&format!("- {}\n", p.trim()));
        }
        out.push('\n');
    }
    out
}

/// Chat history for the next turn: system prompt, the task, then one
/// assistant/user pair per earlier turn. The house outline is attached to
/// the newest user message only.
pub fn build_messages(ctx: &PromptContext, history: &[(String, String)], outline: &str) -> Vec<ChatMessage> {
    let mut msgs = vec![ChatMessage::system(format!("{SYSTEM}{EXEMPLAR}"))];
    let task = format!("{}Instruction: {}", context_block(ctx), ctx.instruction);
    if history.is_empty() {
        msgs.push(ChatMessage::user(format!("{task}\n\nHouse:\n{outline}")));
        return msgs;
    }
    msgs.push(ChatMessage::user(task));
    for (i, (reply, observation)) in history.iter().enumerate() {
        msgs.push(ChatMessage::assistant(reply.clone()));
        if i + 1 == history.len() {
            msgs.push(ChatMessage::user(format!("Observation: {observation}\n\nHouse:\n{outline}")));
        } else {
            msgs.push(ChatMessage::user(format!("Observation: {observation}")));
        }
    }
    msgs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::Role;
    use crate::world::test_scenes::TINY;

    #[test]
    fn outline_respects_scope() {
        let scene = Scene::from_json(TINY).unwrap();
        let s = WorldState::initial(&scene);
        let narrow = semantic_memory(&s, &scene, false);
        assert!(narrow.contains("hall_1") && !narrow.contains("kitchen_1"));
        let wide = semantic_memory(&s, &scene, true);
        assert!(wide.contains("      cup_0 [cup] on_top"));
        assert!(wide.contains("cabinet_3 [cabinet, closed]"));
    }

    #[test]
    fn memories_precede_instruction() {
        let ctx = PromptContext {
            instruction: "tidy up".into(),
            memories: vec!["Instruction: earlier".into()],
            profile: vec![],
        };
        let m = build_messages(&ctx, &[("Thought: a\nAction: Wait[]".into(), "Waited.".into())], "house");
        assert_eq!(m.len(), 4);
        assert_eq!(m[0].role, Role::System);
        assert!(m[1].content.find("[Memory 1]").unwrap() < m[1].content.find("Instruction: tidy up").unwrap());
        assert!(m[3].content.contains("House:"));
    }
}
