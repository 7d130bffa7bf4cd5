//! Pluggable completion backends: an OpenAI-compatible HTTP chat client and
//! a deterministic replay store for tests and offline reruns. Nothing outside
//! this module talks to the network.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub api_version: String,
    pub temperature: f64,
    /// Completions requested per prompt.
    pub n: u32,
    pub max_tokens: Option<u32>,
    pub request_timeout_secs: u64,
    /// Name of the environment variable holding the API key; the key itself
    /// never lives in config files.
    pub api_key_env: String,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://localhost:8080/v1/chat/completions".to_string(),
            model: "gpt-4".to_string(),
            api_version: "2023-08-01-preview".to_string(),
            temperature: 1.0,
            n: 1,
            max_tokens: None,
            request_timeout_secs: 120,
            api_key_env: "VECPIPE_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CompletionSet {
    pub prompt_hash: String,
    pub completions: Vec<String>,
    pub backend: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("rate limited by the backend")]
    RateLimited,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("replay store unwritable: {0}")]
    StoreUnwritable(String),
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str, cfg: &LlmConfig) -> Result<CompletionSet, LlmError>;
    fn id(&self) -> &str;
}

pub fn prompt_hash(prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// First fenced code block if the completion carries one, else the whole
/// message. The fence language tag is discarded.
pub fn extract_code_block(completion: &str) -> String {
    let Some(open) = completion.find("```") else {
        return completion.to_string();
    };
    let after_fence = &completion[open + 3..];
    let body_start = match after_fence.find('\n') {
        Some(nl) => nl + 1,
        None => return completion.to_string(),
    };
    let body = &after_fence[body_start..];
    match body.find("```") {
        Some(close) => body[..close].to_string(),
        None => body.to_string(),
    }
}

// --- HTTP backend ---

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize, Default)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Chat-completion client with capped exponential backoff on transient
/// failures and a shared minimum spacing between requests so concurrent FSM
/// instances don't burst.
pub struct HttpBackend {
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
    min_interval: Duration,
}

impl HttpBackend {
    pub fn new() -> Self {
        HttpBackend {
            agent: ureq::Agent::new_with_defaults(),
            last_request: Mutex::new(None),
            min_interval: Duration::from_millis(100),
        }
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(at) = *last {
            let since = at.elapsed();
            if since < self.min_interval {
                std::thread::sleep(self.min_interval - since);
            }
        }
        *last = Some(Instant::now());
    }

    /// Completions per HTTP request; larger n is split into batches.
    const BATCH: u32 = 10;

    fn request_once(
        &self,
        prompt: &str,
        cfg: &LlmConfig,
        n: u32,
    ) -> Result<(Vec<String>, Usage), LlmError> {
        self.throttle();
        let mut body = serde_json::json!({
            "model": cfg.model,
            "messages": [ChatMessage { role: "user", content: prompt }],
            "temperature": cfg.temperature,
            "n": n,
        });
        if let Some(max) = cfg.max_tokens {
            body["max_tokens"] = serde_json::Value::from(max);
        }
        let url = if cfg.api_version.is_empty() {
            cfg.endpoint.clone()
        } else if cfg.endpoint.contains('?') {
            format!("{}&api-version={}", cfg.endpoint, cfg.api_version)
        } else {
            format!("{}?api-version={}", cfg.endpoint, cfg.api_version)
        };
        let mut req = self
            .agent
            .post(&url)
            .config()
            .timeout_global(Some(Duration::from_secs(cfg.request_timeout_secs)))
            .build()
            .header("content-type", "application/json");
        if let Ok(key) = std::env::var(&cfg.api_key_env) {
            req = req
                .header("authorization", &format!("Bearer {key}"))
                .header("api-key", &key);
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(429)) => return Err(LlmError::RateLimited),
            Err(e) => return Err(LlmError::BackendUnavailable(e.to_string())),
        };
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        if parsed.choices.is_empty() {
            return Err(LlmError::MalformedResponse("no choices".to_string()));
        }
        let usage = parsed.usage.unwrap_or_default();
        let completions = parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect();
        Ok((
            completions,
            Usage {
                prompt_tokens: usage.prompt_tokens,
                completion_tokens: usage.completion_tokens,
            },
        ))
    }

    fn request_with_retry(
        &self,
        prompt: &str,
        cfg: &LlmConfig,
        n: u32,
    ) -> Result<(Vec<String>, Usage), LlmError> {
        let mut delay = Duration::from_millis(500);
        let mut last_err = None;
        for _ in 0..3 {
            match self.request_once(prompt, cfg, n) {
                Ok(out) => return Ok(out),
                Err(e @ (LlmError::RateLimited | LlmError::BackendUnavailable(_))) => {
                    last_err = Some(e);
                    std::thread::sleep(delay);
                    delay = (delay * 2).min(Duration::from_secs(8));
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or(LlmError::RateLimited))
    }
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str, cfg: &LlmConfig) -> Result<CompletionSet, LlmError> {
        let mut completions = Vec::with_capacity(cfg.n as usize);
        let mut usage = Usage::default();
        let mut remaining = cfg.n.max(1);
        while remaining > 0 {
            let n = remaining.min(Self::BATCH);
            let (mut batch, u) = self.request_with_retry(prompt, cfg, n)?;
            usage.prompt_tokens += u.prompt_tokens;
            usage.completion_tokens += u.completion_tokens;
            completions.append(&mut batch);
            remaining = remaining.saturating_sub(n);
        }
        completions.truncate(cfg.n as usize);
        if completions.len() < cfg.n as usize {
            return Err(LlmError::MalformedResponse(format!(
                "requested {} completions, got {}",
                cfg.n,
                completions.len()
            )));
        }
        Ok(CompletionSet {
            prompt_hash: prompt_hash(prompt),
            completions,
            backend: self.id().to_string(),
            usage: Some(usage),
        })
    }

    fn id(&self) -> &str {
        "http"
    }
}

// --- replay backend ---

#[derive(Serialize, Deserialize)]
struct Recording {
    prompt_hash: String,
    prompt: String,
    completions: Vec<String>,
}

/// Directory of JSON recordings keyed by prompt hash. `complete` returns the
/// recording byte-exact; a missing recording is `BackendUnavailable`.
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayBackend { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Store completions for a prompt; a repeated recording overwrites and
    /// logs the replacement.
    pub fn record(&self, prompt: &str, completions: &[String]) -> Result<(), LlmError> {
        let hash = prompt_hash(prompt);
        let path = self.dir.join(format!("{hash}.json"));
        if path.exists() {
            eprintln!("replay store: overwriting recording {hash}");
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| LlmError::StoreUnwritable(e.to_string()))?;
        let rec = Recording {
            prompt_hash: hash,
            prompt: prompt.to_string(),
            completions: completions.to_vec(),
        };
        let text = serde_json::to_string_pretty(&rec)
            .map_err(|e| LlmError::StoreUnwritable(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| LlmError::StoreUnwritable(e.to_string()))
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, prompt: &str, _cfg: &LlmConfig) -> Result<CompletionSet, LlmError> {
        let hash = prompt_hash(prompt);
        let path = self.dir.join(format!("{hash}.json"));
        let text = std::fs::read_to_string(&path).map_err(|_| {
            LlmError::BackendUnavailable(format!(
                "no recording for prompt hash {hash} in {}",
                self.dir.display()
            ))
        })?;
        let rec: Recording =
            serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        if rec.completions.is_empty() {
            return Err(LlmError::MalformedResponse(
                "recording holds no completions".to_string(),
            ));
        }
        Ok(CompletionSet {
            prompt_hash: hash,
            completions: rec.completions,
            backend: self.id().to_string(),
            usage: None,
        })
    }

    fn id(&self) -> &str {
        "replay"
    }
}
