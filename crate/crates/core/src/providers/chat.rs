use serde::{Deserialize, Serialize};

use super::ProviderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Sampling controls. Defaults are greedy decoding: temperature 0, top_p 1, top_k 50.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { temperature: 0.0, top_p: 1.0, top_k: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, sampling: Sampling::default() }
    }

    /// Messages must be nonempty and a system message, if any, comes first.
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("empty message list".into()));
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return Err(ProviderError::InvalidRequest(
                "system message is only allowed in first position".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub usage: TokenUsage,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self { content: content.into(), usage: TokenUsage::default() }
    }
}

pub trait ChatProvider: Send + Sync {
    /// Stable identity (backend + model) stamped into caches.
    fn identity(&self) -> String;

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).chat(request)
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for &T {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).chat(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_empty_and_late_system() {
        assert!(ChatRequest::new(vec![]).validate().is_err());
        let late = ChatRequest::new(vec![ChatMessage::user("hi"), ChatMessage::system("x")]);
        assert!(late.validate().is_err());
        let ok = ChatRequest::new(vec![ChatMessage::system("s"), ChatMessage::user("u")]);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn sampling_defaults_are_greedy() {
        let s = Sampling::default();
        assert_eq!((s.temperature, s.top_p, s.top_k), (0.0, 1.0, 50));
    }
}
