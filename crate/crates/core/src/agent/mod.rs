//! ReAct planning loop around the text world.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episodic::MemoryFormat;
use crate::providers::ProviderError;
use crate::world::{PerceptionQuery, SkillCall};

mod parse;
mod planner;
mod prompt;
mod run;

pub use parse::{parse_action, parse_reply, ParseFailure};
pub use planner::{oracle_actions, oracle_planner, random_choice_planner, to_transcript, PlanError, PlannedStep};
pub use prompt::{build_messages, semantic_memory, PromptContext};
pub use run::{replay, run_episode, EpisodeInput, EpisodeRun, ReplayMismatch};

pub const DEFAULT_MAX_PLANNING_CYCLES: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_planning_cycles: u32,
    pub memory_format: MemoryFormat,
    pub k: usize,
    pub gold_guarantee: bool,
    pub use_profile_memory: bool,
    pub oracle_perception_scope: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_planning_cycles: DEFAULT_MAX_PLANNING_CYCLES,
            memory_format: MemoryFormat::Full,
            k: 5,
            gold_guarantee: true,
            use_profile_memory: false,
            oracle_perception_scope: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("max_planning_cycles must be at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One parsed model action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "call", rename_all = "snake_case")]
pub enum AgentAction {
    Skill(SkillCall),
    Perceive(PerceptionQuery),
    Done,
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Skill(c) => write!(f, "{c}"),
            Self::Perceive(q) => {
                let arg = match q {
                    PerceptionQuery::FindObjectTool(a)
                    | PerceptionQuery::FindReceptacleTool(a)
                    | PerceptionQuery::FindRoomTool(a)
                    | PerceptionQuery::DescribeObjectTool(a) => a,
                };
                write!(f, "{}[{arg}]", q.name())
            }
            Self::Done => write!(f, "Done[]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub thought: String,
    /// `None` when the reply could not be parsed.
    pub action: Option<AgentAction>,
    /// Action text as the model wrote it.
    pub raw_action: String,
    pub observation: String,
    /// World step count after this turn.
    pub sim_steps: u64,
}
