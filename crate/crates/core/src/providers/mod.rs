//! Language-model and embedding backends.
//!
//! Everything that talks to a model goes through [`ChatProvider`] or
//! [`Embedder`], so the whole harness can run against deterministic
//! stand-ins ([`HashEmbedder`], [`ScriptedChat`]) or real HTTP endpoints
//! ([`HttpChat`], [`HttpEmbedder`]).

mod chat;
mod config;
mod embed;
mod http;
mod ratelimit;
mod scripted;

pub use chat::{ChatMessage, ChatProvider, ChatRequest, ChatResponse, Role, Sampling, TokenUsage};
pub use config::EndpointConfig;
pub use embed::{cosine, Embedder, Embedding, HashEmbedder, HASH_EMBED_DIM};
pub use http::{HttpChat, HttpEmbedder};
pub use ratelimit::TokenBucket;
pub use scripted::{request_fingerprint, ScriptedChat, Transcript};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no scripted response for request fingerprint {fingerprint} (cursor {cursor})")]
    TranscriptMiss { fingerprint: String, cursor: usize },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("config error: {0}")]
    Config(String),
}
