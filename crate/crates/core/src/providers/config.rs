use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProviderError;

/// Endpoint description for a chat-completions compatible service.
///
/// Loaded from TOML (`.toml`) or JSON (anything else). The credential itself
/// never lives in the file; `credential_env` names the environment variable
/// that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub embedding_model: Option<String>,
    pub credential_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
    /// Forward `top_k` in the request body. Off by default because not every
    /// compatible server accepts it.
    #[serde(default)]
    pub send_top_k: bool,
    #[serde(default)]
    pub rate_limit: Option<RateLimitConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimitConfig {
    pub capacity: u32,
    pub per_second: f64,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

impl EndpointConfig {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&raw).map_err(|e| ProviderError::Config(e.to_string()))?
        } else {
            serde_json::from_str(&raw).map_err(|e| ProviderError::Config(e.to_string()))?
        };
        Ok(parsed)
    }

    pub fn endpoint(&self, suffix: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), suffix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("p.toml");
        std::fs::write(
            &t,
            "base_url = \"http://localhost:8000/v1/\"\nmodel = \"m\"\ncredential_env = \"KEY\"\n",
        )
        .unwrap();
        let j = dir.path().join("p.json");
        std::fs::write(
            &j,
            r#"{"base_url":"http://localhost:8000/v1/","model":"m","credential_env":"KEY"}"#,
        )
        .unwrap();
        let a = EndpointConfig::load(&t).unwrap();
        let b = EndpointConfig::load(&j).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_retries, 3);
        assert_eq!(a.endpoint("chat/completions"), "http://localhost:8000/v1/chat/completions");
    }
}
