use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, ChatRequest, ChatResponse, ProviderError};

/// Role-tagged content hash of a request. Sampling controls are not part of
/// the fingerprint.
pub fn request_fingerprint(request: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    for m in &request.messages {
        hasher.update(m.role.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(m.content.as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}

/// A recorded set of model responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Transcript {
    /// Responses served in order, one per call.
    Cursor { responses: Vec<String> },
    /// Responses keyed by [`request_fingerprint`].
    Fingerprint { responses: BTreeMap<String, String> },
}

impl Transcript {
    pub fn cursor<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Transcript::Cursor { responses: responses.into_iter().map(Into::into).collect() }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))
    }
}

/// Deterministic chat double that replays a [`Transcript`]. Requests the
/// transcript does not cover fail with [`ProviderError::TranscriptMiss`].
#[derive(Debug)]
pub struct ScriptedChat {
    name: String,
    transcript: Transcript,
    cursor: AtomicUsize,
    calls: AtomicUsize,
}

impl ScriptedChat {
    pub fn new(name: impl Into<String>, transcript: Transcript) -> Self {
        Self {
            name: name.into(),
            transcript,
            cursor: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn cursor<I, S>(name: impl Into<String>, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(name, Transcript::cursor(responses))
    }

    /// Number of `chat` calls served so far, including misses.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for ScriptedChat {
    fn identity(&self) -> String {
        format!("scripted:{}", self.name)
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.transcript {
            Transcript::Cursor { responses } => {
                let at = self.cursor.fetch_add(1, Ordering::SeqCst);
                responses.get(at).map(ChatResponse::text).ok_or_else(|| {
                    ProviderError::TranscriptMiss {
                        fingerprint: request_fingerprint(request),
                        cursor: at,
                    }
                })
            }
            Transcript::Fingerprint { responses } => {
                let fp = request_fingerprint(request);
                match responses.get(&fp) {
                    Some(text) => Ok(ChatResponse::text(text)),
                    None => Err(ProviderError::TranscriptMiss {
                        fingerprint: fp,
                        cursor: self.calls.load(Ordering::SeqCst) - 1,
                    }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ChatMessage;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new(vec![ChatMessage::system("sys"), ChatMessage::user(text)])
    }

    #[test]
    fn cursor_serves_in_order_then_misses() {
        let chat = ScriptedChat::cursor("t", ["one", "two"]);
        assert_eq!(chat.chat(&req("a")).unwrap().content, "one");
        assert_eq!(chat.chat(&req("b")).unwrap().content, "two");
        match chat.chat(&req("c")) {
            Err(ProviderError::TranscriptMiss { cursor, fingerprint }) => {
                assert_eq!(cursor, 2);
                assert_eq!(fingerprint, request_fingerprint(&req("c")));
            }
            other => panic!("expected miss, got {other:?}"),
        }
        assert_eq!(chat.calls(), 3);
    }

    #[test]
    fn fingerprint_lookup() {
        let mut map = BTreeMap::new();
        map.insert(request_fingerprint(&req("hello")), "mapped".to_string());
        let chat = ScriptedChat::new("fp", Transcript::Fingerprint { responses: map });
        assert_eq!(chat.chat(&req("hello")).unwrap().content, "mapped");
        assert_eq!(chat.chat(&req("hello")).unwrap().content, "mapped");
        assert!(matches!(chat.chat(&req("other")), Err(ProviderError::TranscriptMiss { .. })));
    }

    #[test]
    fn fingerprint_is_role_sensitive() {
        let a = ChatRequest::new(vec![ChatMessage::user("x")]);
        let b = ChatRequest::new(vec![ChatMessage::assistant("x")]);
        assert_ne!(request_fingerprint(&a), request_fingerprint(&b));
    }

    #[test]
    fn transcript_json_shape() {
        let t: Transcript =
            serde_json::from_str(r#"{"mode":"cursor","responses":["a","b"]}"#).unwrap();
        assert_eq!(t, Transcript::cursor(["a", "b"]));
    }
}
