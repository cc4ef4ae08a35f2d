//! Chat-completion transport: the backend trait, an HTTP implementation of
//! the common `/chat/completions` wire format, retry policy and a token
//! bucket rate limiter.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{RelevanceError, Result};

/// Environment variable holding the endpoint secret unless configured otherwise.
pub const DEFAULT_API_KEY_ENV: &str = "PROMPTBOW_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx responses.
    Transient(String),
    Permanent(String),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Transient(m) => write!(f, "transient: {m}"),
            BackendError::Permanent(m) => write!(f, "permanent: {m}"),
        }
    }
}

/// A single-turn completion service.
pub trait CompletionBackend: Send + Sync {
    /// Identifier stamped into annotation records and cache keys.
    fn model_id(&self) -> &str;

    fn complete(&self, prompt: &str) -> std::result::Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable that holds the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Total attempts per item, including the first.
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    /// Requests in flight at once.
    pub concurrency: usize,
    pub requests_per_second: Option<f64>,
    pub burst: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            max_attempts: 5,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
            concurrency: 4,
            requests_per_second: Some(5.0),
            burst: 5,
        }
    }
}

impl ClientConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts.max(1),
            base: Duration::from_millis(self.backoff_base_ms),
            max: Duration::from_millis(self.backoff_max_ms),
        }
    }

    pub fn rate_limiter(&self) -> Option<TokenBucket> {
        self.requests_per_second.map(|r| TokenBucket::new(self.burst.max(1), r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub max: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        ClientConfig::default().retry_policy()
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from `base` and capped at `max`.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.max)
    }

    /// Calls `f` until it succeeds, fails permanently, or runs out of attempts.
    /// Returns the final result with the number of attempts made.
    pub fn run<T>(
        &self,
        mut f: impl FnMut() -> std::result::Result<T, BackendError>,
    ) -> (std::result::Result<T, BackendError>, u32) {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match f() {
                Err(BackendError::Transient(_)) if attempt < self.max_attempts => {
                    thread::sleep(self.delay(attempt));
                }
                other => return (other, attempt),
            }
        }
    }
}

/// Token bucket shared by concurrent workers.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: u32, per_second: f64) -> Self {
        assert!(per_second > 0.0, "rate must be positive");
        let capacity = f64::from(capacity.max(1));
        TokenBucket { capacity, per_second, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.per_second;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.per_second)
            };
            thread::sleep(wait);
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    n: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

/// Blocking client for an OpenAI-compatible `/chat/completions` endpoint.
/// Requests use temperature 0 and a single completion.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: String,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_config(config: &ClientConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env).map_err(|_| {
            RelevanceError::Config(format!(
                "missing API credential: set the {} environment variable",
                config.api_key_env
            ))
        })?;
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: &ClientConfig, api_key: String) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| RelevanceError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> std::result::Result<String, BackendError> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: 0.0,
            n: 1,
        };
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Permanent(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| BackendError::Permanent(format!("bad body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| BackendError::Permanent("response has no message content".into()))
    }
}
