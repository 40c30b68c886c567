//! Core engine for measuring how household rearrangement agents use memory.
//!
//! The crate is organised bottom-up:
//!
//! * [`world`]: deterministic text-world simulator (scenes, skills, perception).
//! * [`evaluator`]: proposition/dependency/constraint goal checking over state traces.
//! * [`providers`]: chat and embedding backends (hash embedder, scripted transcripts, HTTP).
//! * [`episodic`]: episodic memory store with scene-scoped top-k retrieval.
//! * [`profile`]: hierarchical user-profile knowledge graph.
//! * [`agent`]: ReAct planning loop, action parser and ground-truth planners.
//! * [`dataset`]: episode schema, corpus loading and joint-episode composition.
//! * [`harness`]: two-stage acquisition/utilization runner and reporting.

pub mod agent;
pub mod dataset;
pub mod episodic;
pub mod evaluator;
pub mod harness;
pub mod profile;
pub mod providers;
pub mod text;
pub mod world;

pub use agent::{AgentConfig, EpisodeRun, Turn};
pub use dataset::{Corpus, Episode, KnowledgeType, Stage};
pub use episodic::{EpisodeRecord, EpisodicStore, MemoryFormat, MemoryQuery};
pub use evaluator::{GoalSpec, Proposition, TaskResult};
pub use harness::{RunConfig, RunReport};
pub use profile::ProfileGraph;
pub use providers::{ChatProvider, ChatRequest, ChatResponse, Embedder, HashEmbedder};
pub use world::{Observation, Scene, SkillCall, WorldState};
