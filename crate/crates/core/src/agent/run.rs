use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_action, parse_reply};
use super::prompt::{build_messages, semantic_memory, PromptContext};
use super::{AgentAction, AgentConfig, AgentError, Turn};
use crate::episodic::{EpisodeRecord, OutcomeSummary, Step};
use crate::providers::{ChatProvider, ChatRequest};
use crate::world::{apply_skill, perceive, Scene, SkillCall, WorldState};

const DONE_OBSERVATION: &str = "Episode finished.";

pub struct EpisodeInput<'a> {
    pub episode_id: &'a str,
    pub scene: &'a Scene,
    pub context: PromptContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub episode_id: String,
    pub turns: Vec<Turn>,
    /// Initial state followed by the state after every motor skill.
    #[serde(skip)]
    pub trace: Vec<WorldState>,
    /// Chat calls made.
    pub planning_cycles: u32,
    pub sim_steps: u64,
    pub cycle_limit_hit: bool,
    pub done: bool,
}

impl EpisodeRun {
    pub fn final_state(&self) -> &WorldState {
        self.trace.last().expect("trace starts with the initial state")
    }

    /// Turns that carried an action, i.e. everything except the closing
    /// Done turn.
    pub fn action_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.action != Some(AgentAction::Done)).count()
    }

    pub fn to_record(&self, scene_id: &str, instruction: &str, outcome: OutcomeSummary) -> EpisodeRecord {
        let mut r = EpisodeRecord::new(&self.episode_id, scene_id, instruction);
        r.steps = self
            .turns
            .iter()
            .filter(|t| t.action != Some(AgentAction::Done))
            .map(|t| Step {
                thought: t.thought.clone(),
                action: t.raw_action.clone(),
                observation: t.observation.clone(),
            })
            .collect();
        r.outcome = outcome;
        r
    }
}

fn says_complete(thought: &str) -> bool {
    let t = thought.to_lowercase();
    ["task is complete", "task is done", "task has been completed", "completed the task", "task is finished"]
        .iter()
        .any(|p| t.contains(p))
}

/// `Wait` paired with a completion statement ends the episode like `Done`.
fn normalize(parsed: Result<AgentAction, super::ParseFailure>, thought: &str) -> Result<AgentAction, super::ParseFailure> {
    match parsed {
        Ok(AgentAction::Skill(SkillCall::Wait)) if says_complete(thought) => Ok(AgentAction::Done),
        other => other,
    }
}

fn corrective(e: &super::ParseFailure) -> String {
    format!("Invalid action: {e}. Reply with 'Thought: ...' and 'Action: Name[args]' using one of the listed skills.")
}

/// Executes one parsed action, returning the observation text.
fn dispatch(
    action: &Result<AgentAction, super::ParseFailure>,
    state: &mut WorldState,
    scene: &Scene,
    oracle_scope: bool,
) -> (String, bool, bool) {
    // (observation, world stepped, finished)
    match action {
        Ok(AgentAction::Done) => (DONE_OBSERVATION.into(), false, true),
        Ok(AgentAction::Skill(call)) => {
            let t = apply_skill(state, scene, call);
            let text = t.text();
            *state = t.state;
            (text, true, false)
        }
        Ok(AgentAction::Perceive(q)) => {
            let text = perceive(state, scene, q, oracle_scope).unwrap_or_else(|e| e.to_string());
            (text, false, false)
        }
        Err(e) => (corrective(e), false, false),
    }
}

pub fn run_episode(
    input: EpisodeInput<'_>,
    config: &AgentConfig,
    chat: &dyn ChatProvider,
) -> Result<EpisodeRun, AgentError> {
    if config.max_planning_cycles == 0 {
        return Err(AgentError::InvalidConfig);
    }
    let scene = input.scene;
    let mut state = WorldState::initial(scene);
    let mut run = EpisodeRun {
        episode_id: input.episode_id.to_string(),
        turns: Vec::new(),
        trace: vec![state.clone()],
        planning_cycles: 0,
        sim_steps: 0,
        cycle_limit_hit: false,
        done: false,
    };
    let mut history: Vec<(String, String)> = Vec::new();
    loop {
        if run.planning_cycles >= config.max_planning_cycles {
            run.cycle_limit_hit = true;
            break;
        }
        let outline = semantic_memory(&state, scene, config.oracle_perception_scope);
        let request = ChatRequest::new(build_messages(&input.context, &history, &outline));
        let reply = chat.chat(&request)?;
        run.planning_cycles += 1;
        let (thought, action_text) = parse_reply(&reply.content);
        let parsed = normalize(parse_action(&action_text), &thought);
        let (observation, stepped, finished) =
            dispatch(&parsed, &mut state, scene, config.oracle_perception_scope);
        if stepped {
            run.trace.push(state.clone());
        }
        run.turns.push(Turn {
            thought,
            action: parsed.ok(),
            raw_action: action_text,
            observation: observation.clone(),
            sim_steps: state.step_count,
        });
        history.push((reply.content, observation));
        if finished {
            run.done = true;
            break;
        }
    }
    run.sim_steps = state.step_count;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("turn {turn}: expected {expected:?}, replay produced {actual:?}")]
pub struct ReplayMismatch {
    pub turn: usize,
    pub expected: String,
    pub actual: String,
}

/// Re-executes recorded turns from the initial state and checks every
/// observation and step count. Returns the final state.
pub fn replay(scene: &Scene, turns: &[Turn], oracle_scope: bool) -> Result<WorldState, ReplayMismatch> {
    let mut state = WorldState::initial(scene);
    for (i, t) in turns.iter().enumerate() {
        let parsed = normalize(parse_action(&t.raw_action), &t.thought);
        if parsed.as_ref().ok() != t.action.as_ref() {
            return Err(ReplayMismatch {
                turn: i,
                expected: format!("{:?}", t.action),
                actual: format!("{:?}", parsed.ok()),
            });
        }
        let (observation, _, _) = dispatch(&parsed, &mut state, scene, oracle_scope);
        if observation != t.observation {
            return Err(ReplayMismatch {
                turn: i,
                expected: t.observation.clone(),
                actual: observation,
            });
        }
        if state.step_count != t.sim_steps {
            return Err(ReplayMismatch {
                turn: i,
                expected: t.sim_steps.to_string(),
                actual: state.step_count.to_string(),
            });
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ScriptedChat, Transcript};
    use crate::world::test_scenes::TINY;

    fn input(scene: &Scene) -> EpisodeInput<'_> {
        EpisodeInput {
            episode_id: "e1",
            scene,
            context: PromptContext {
                instruction: "put the blue cup on the table".into(),
                ..PromptContext::default()
            },
        }
    }

    #[test]
    fn scripted_episode_and_replay() {
        let scene = Scene::from_json(TINY).unwrap();
        let chat = ScriptedChat::new(
            "t",
            Transcript::cursor([
                "Thought: find it\nAction: Navigate[counter_22]",
                "Thought: grab\nAction: Pick[cup_0]",
                "Thought: oops\nAction: Fly[away]",
                "Thought: look\nAction: FindReceptacleTool[a table]",
                "Thought: go\nAction: Navigate[table_7]",
                "Thought: drop\nAction: Place[cup_0, on, table_7, None, None]",
                "Thought: The task is complete.\nAction: Wait[]",
            ]),
        );
        let run = run_episode(input(&scene), &AgentConfig::default(), &chat).unwrap();
        assert!(run.done);
        assert_eq!(run.planning_cycles as usize, chat.calls());
        assert_eq!(run.planning_cycles, 7);
        assert_eq!(run.sim_steps, run.final_state().step_count);
        assert!(run.turns[2].observation.starts_with("Invalid action"));
        assert_eq!(run.turns[3].observation, "table_7");
        assert_eq!(run.trace.len(), 5);
        let end = replay(&scene, &run.turns, false).unwrap();
        assert_eq!(&end, run.final_state());
        assert_eq!(run.to_record("tiny", "x", OutcomeSummary::default()).steps.len(), 6);
    }

    #[test]
    fn cycle_limit_stops_loop() {
        let scene = Scene::from_json(TINY).unwrap();
        let replies: Vec<String> = (0..10).map(|_| "Thought: hmm\nAction: Wait[]".to_string()).collect();
        let chat = ScriptedChat::new("t", Transcript::cursor(replies));
        let cfg = AgentConfig {
            max_planning_cycles: 4,
            ..AgentConfig::default()
        };
        let run = run_episode(input(&scene), &cfg, &chat).unwrap();
        assert!(run.cycle_limit_hit && !run.done);
        assert_eq!(run.planning_cycles, 4);
        assert_eq!(run.sim_steps, 40);
    }

    #[test]
    fn transcript_miss_is_an_error() {
        let scene = Scene::from_json(TINY).unwrap();
        let chat = ScriptedChat::new("t", Transcript::cursor(["Thought: a\nAction: Wait[]"]));
        assert!(matches!(
            run_episode(input(&scene), &AgentConfig::default(), &chat),
            Err(AgentError::Provider(_))
        ));
    }
}
