use std::fmt;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;
use tracing::{debug, warn};

use super::{
    ChatProvider, ChatRequest, ChatResponse, Embedder, Embedding, EndpointConfig, ProviderError,
    TokenBucket, TokenUsage,
};

const MAX_BACKOFF: Duration = Duration::from_secs(30);

/// Shared transport: credential, client, retry policy.
struct Transport {
    config: EndpointConfig,
    api_key: String,
    client: Client,
    bucket: Option<TokenBucket>,
}

impl fmt::Debug for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transport")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

enum Attempt {
    Done(serde_json::Value),
    Retry(ProviderError),
}

impl Transport {
    fn new(config: EndpointConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.credential_env).map_err(|_| {
            ProviderError::Auth(format!(
                "credential variable {} is not set",
                config.credential_env
            ))
        })?;
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let bucket = config.rate_limit.map(|r| TokenBucket::new(r.capacity, r.per_second));
        Ok(Self { config, api_key, client, bucket })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.config.initial_backoff_ms.saturating_mul(1u64 << attempt.min(16));
        Duration::from_millis(ms).min(MAX_BACKOFF)
    }

    fn post(&self, suffix: &str, body: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let url = self.config.endpoint(suffix);
        let max = self.config.max_retries;
        let mut last = ProviderError::Transport("no attempt made".into());
        for attempt in 0..=max {
            if attempt > 0 {
                let wait = self.backoff(attempt - 1);
                debug!(attempt, ?wait, "retrying request");
                std::thread::sleep(wait);
            }
            if let Some(bucket) = &self.bucket {
                bucket.acquire();
            }
            match self.attempt(&url, body, attempt + 1)? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Retry(e) => {
                    warn!(attempt, error = %e, "transient provider failure");
                    last = e;
                }
            }
        }
        Err(last)
    }

    fn attempt(&self, url: &str, body: &serde_json::Value, attempts: u32) -> Result<Attempt, ProviderError> {
        let sent = self.client.post(url).bearer_auth(&self.api_key).json(body).send();
        let resp = match sent {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Ok(Attempt::Retry(ProviderError::Timeout { attempts })),
            Err(e) => return Ok(Attempt::Retry(ProviderError::Transport(e.to_string()))),
        };
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth(format!("endpoint returned {status}")));
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Ok(Attempt::Retry(ProviderError::RateLimited { attempts }));
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Ok(Attempt::Retry(ProviderError::Timeout { attempts })),
            Err(e) => return Ok(Attempt::Retry(ProviderError::Transport(e.to_string()))),
        };
        if status.is_server_error() {
            return Ok(Attempt::Retry(ProviderError::Status { status: status.as_u16(), body: text }));
        }
        if !status.is_success() {
            return Err(ProviderError::Status { status: status.as_u16(), body: text });
        }
        serde_json::from_str(&text)
            .map(Attempt::Done)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Chat-completions client with retry and exponential backoff.
#[derive(Debug)]
pub struct HttpChat {
    transport: Transport,
}

impl HttpChat {
    /// Fails with [`ProviderError::Auth`] when the credential variable is unset.
    pub fn new(config: EndpointConfig) -> Result<Self, ProviderError> {
        Ok(Self { transport: Transport::new(config)? })
    }
}

impl ChatProvider for HttpChat {
    fn identity(&self) -> String {
        format!("http:{}:{}", self.transport.config.base_url, self.transport.config.model)
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let cfg = &self.transport.config;
        let mut body = json!({
            "model": cfg.model,
            "messages": request.messages,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
        });
        if cfg.send_top_k {
            body["top_k"] = json!(request.sampling.top_k);
        }
        let value = self.transport.post("chat/completions", &body)?;
        let parsed: CompletionBody = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::MalformedResponse("no message content".into()))?;
        let usage = parsed
            .usage
            .map(|u| TokenUsage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
            .unwrap_or_default();
        Ok(ChatResponse { content, usage })
    }
}

#[derive(Deserialize)]
struct EmbeddingsBody {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

/// Embeddings client. The dimension is fixed by configuration and every
/// returned vector is checked against it.
#[derive(Debug)]
pub struct HttpEmbedder {
    transport: Transport,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(config: EndpointConfig, dimension: usize) -> Result<Self, ProviderError> {
        if config.embedding_model.is_none() {
            return Err(ProviderError::Config("embedding_model is not configured".into()));
        }
        Ok(Self { transport: Transport::new(config)?, dimension })
    }
}

impl Embedder for HttpEmbedder {
    fn identity(&self) -> String {
        format!(
            "http:{}:{}:dim={}",
            self.transport.config.base_url,
            self.transport.config.embedding_model.as_deref().unwrap_or_default(),
            self.dimension
        )
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, ProviderError> {
        let body = json!({
            "model": self.transport.config.embedding_model,
            "input": texts,
        });
        let value = self.transport.post("embeddings", &body)?;
        let mut parsed: EmbeddingsBody = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(ProviderError::MalformedResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed.data.sort_by_key(|d| d.index.unwrap_or(usize::MAX));
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dimension {
                    Err(ProviderError::DimensionMismatch {
                        expected: self.dimension,
                        actual: d.embedding.len(),
                    })
                } else {
                    Ok(Embedding(d.embedding))
                }
            })
            .collect()
    }
}
