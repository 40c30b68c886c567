use std::path::{Path, PathBuf};

use hearth_core::agent::{replay, run_episode, AgentConfig, EpisodeInput, PromptContext};
use hearth_core::dataset::Episode;
use hearth_core::evaluator::evaluate_trace;
use hearth_core::providers::{ScriptedChat, Transcript};
use hearth_core::world::Scene;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/worked").join(name)
}

fn play(name: &str) -> (hearth_core::agent::EpisodeRun, hearth_core::TaskResult, Scene) {
    let dir = fixture(name);
    let scene = Scene::load(&dir.join("scene.json")).unwrap();
    let episode: Episode = serde_json::from_str(&std::fs::read_to_string(dir.join("episode.json")).unwrap()).unwrap();
    episode.validate(&scene).unwrap();
    let chat = ScriptedChat::new(name, Transcript::load(&dir.join("transcript.json")).unwrap());
    let input = EpisodeInput {
        episode_id: &episode.episode_id,
        scene: &scene,
        context: PromptContext {
            instruction: episode.instruction.clone(),
            ..PromptContext::default()
        },
    };
    let run = run_episode(input, &AgentConfig::default(), &chat).unwrap();
    assert_eq!(run.planning_cycles as usize, chat.calls());
    let result = evaluate_trace(&episode.goal, &run.trace, &scene).unwrap();
    (run, result, scene)
}

#[test]
fn decorate_trajectory_succeeds() {
    let (run, result, scene) = play("decorate");
    assert!(run.done);
    assert_eq!(run.action_turns(), 13);
    assert!(run.turns.iter().all(|t| !t.observation.starts_with("Unexpected failure")));
    assert_eq!(result.percent_complete, 1.0);
    assert!(result.success);
    replay(&scene, &run.turns, false).unwrap();
}

#[test]
fn candle_trajectory_fails_temporal_constraint() {
    let (run, result, scene) = play("candle");
    assert!(run.done);
    assert_eq!(run.final_state().placement("candle_0").unwrap().anchor.as_deref(), Some("table_14"));
    assert_eq!(result.percent_complete, 0.0);
    assert!(!result.success);
    replay(&scene, &run.turns, false).unwrap();
}
