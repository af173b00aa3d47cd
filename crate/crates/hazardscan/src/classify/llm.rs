//! Remote chat-completion backend.
//!
//! Wire format: POST `{"model", "temperature", "messages": [{"role":
//! "user", "content"}]}` with a bearer token from the environment. The
//! classification flow is two calls: the variant prompt, then the
//! simplification prompt whose response is parsed deterministically.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    parse_labels, BackendConfig, ClassificationOutcome, ClassifyError, Exchange, API_KEY_ENV,
};
use crate::graph::extract_relation_strings;
use crate::prompt::{build_parse_prompt, build_prompt, PromptVariant};
use crate::scenario::Episode;

/// Blocking sleep, injectable so retry timing is testable.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

/// Sleeps on the current thread.
pub struct RealSleeper;

impl Sleeper for RealSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Base delay of the exponential backoff schedule (doubles per retry).
const BACKOFF_BASE: Duration = Duration::from_secs(1);

/// Sliding-window requests-per-minute limiter.
pub struct RateLimiter {
    per_minute: u32,
    window: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        RateLimiter {
            per_minute,
            window: Mutex::new(VecDeque::new()),
        }
    }

    /// Registers a request at `now`, returning how long the caller must
    /// wait first to stay under the limit.
    pub fn acquire_at(&self, now: Instant) -> Duration {
        let mut window = self.window.lock().expect("rate limiter poisoned");
        while let Some(front) = window.front() {
            if now.duration_since(*front) >= Duration::from_secs(60) {
                window.pop_front();
            } else {
                break;
            }
        }
        let wait = if window.len() >= self.per_minute as usize {
            let oldest = *window.front().expect("window non-empty");
            Duration::from_secs(60).saturating_sub(now.duration_since(oldest))
        } else {
            Duration::ZERO
        };
        window.push_back(now + wait);
        wait
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
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Chat-completion client with retry, backoff, and optional rate
/// limiting. Safe to share across worker threads.
pub struct LlmBackend {
    cfg: BackendConfig,
    http: reqwest::blocking::Client,
    api_key: String,
    sleeper: Box<dyn Sleeper>,
    limiter: Option<RateLimiter>,
}

impl LlmBackend {
    /// Builds a client reading the credential from [`API_KEY_ENV`].
    pub fn from_env(cfg: BackendConfig) -> Result<Self, ClassifyError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| ClassifyError::MissingCredential(API_KEY_ENV))?;
        Self::with_sleeper(cfg, api_key, Box::new(RealSleeper))
    }

    /// Builds a client with an explicit credential and sleeper.
    pub fn with_sleeper(
        cfg: BackendConfig,
        api_key: String,
        sleeper: Box<dyn Sleeper>,
    ) -> Result<Self, ClassifyError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ClassifyError::Transport(e.to_string()))?;
        let limiter = cfg.requests_per_minute.map(RateLimiter::new);
        Ok(LlmBackend {
            cfg,
            http,
            api_key,
            sleeper,
            limiter,
        })
    }

    /// Runs the two-stage flow for one episode: classification prompt,
    /// simplification prompt, deterministic label parsing.
    pub fn classify_episode(
        &self,
        episode: &Episode,
        variant: PromptVariant,
    ) -> Result<ClassificationOutcome, ClassifyError> {
        let relations = extract_relation_strings(&episode.scene)?;
        let stage_one = build_prompt(variant, &episode.scene)?;
        let raw = self.complete_with_model(&stage_one.text, &self.cfg.model_name)?;
        let stage_two = build_parse_prompt(&raw, &relations);
        let parse_model = self
            .cfg
            .parse_model_name
            .as_deref()
            .unwrap_or(&self.cfg.model_name);
        let simplified = self.complete_with_model(&stage_two.text, parse_model)?;
        let mut outcome = parse_labels(&simplified, &relations);
        outcome.raw_exchange = vec![
            Exchange {
                stage: "classify".to_string(),
                request: stage_one.text,
                response: raw,
            },
            Exchange {
                stage: "parse".to_string(),
                request: stage_two.text,
                response: simplified,
            },
        ];
        Ok(outcome)
    }

    /// Sends one prompt as a single user message and returns the
    /// assistant text. Retries on 429 and 5xx with exponential backoff
    /// (1 s base, factor 2), up to `max_retries` retries.
    pub fn complete(&self, prompt: &str) -> Result<String, ClassifyError> {
        self.complete_with_model(prompt, &self.cfg.model_name)
    }

    fn complete_with_model(&self, prompt: &str, model: &str) -> Result<String, ClassifyError> {
        let body = ChatRequest {
            model,
            temperature: self.cfg.temperature,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        let mut attempt = 0u32;
        loop {
            if let Some(limiter) = &self.limiter {
                let wait = limiter.acquire_at(Instant::now());
                if !wait.is_zero() {
                    self.sleeper.sleep(wait);
                }
            }
            let result = self
                .http
                .post(&self.cfg.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let response = match result {
                Ok(response) => response,
                Err(e) if e.is_timeout() => {
                    return Err(ClassifyError::Timeout {
                        seconds: self.cfg.timeout_secs,
                    })
                }
                Err(e) => return Err(ClassifyError::Transport(e.to_string())),
            };
            let status = response.status();
            if status.is_success() {
                let parsed: ChatResponse = response
                    .json()
                    .map_err(|e| ClassifyError::MalformedResponse(e.to_string()))?;
                return parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| {
                        ClassifyError::MalformedResponse("response has no choices".to_string())
                    });
            }
            let code = status.as_u16();
            if code == 401 || code == 403 {
                return Err(ClassifyError::CredentialRejected { status: code });
            }
            let retryable = code == 429 || status.is_server_error();
            if !retryable || attempt >= self.cfg.max_retries {
                let message = response.text().unwrap_or_default();
                return Err(ClassifyError::Backend {
                    status: code,
                    message: if attempt > 0 {
                        format!("{message} (after {attempt} retries)")
                    } else {
                        message
                    },
                });
            }
            self.sleeper.sleep(BACKOFF_BASE * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}

/// Sends one prompt through a backend. Thin wrapper over
/// [`LlmBackend::complete`] for callers holding a config-level handle.
pub fn remote_complete(backend: &LlmBackend, prompt: &str) -> Result<String, ClassifyError> {
    backend.complete(prompt)
}
