//! Rating: prompt assembly, pluggable 0-10 backends, response parsing, and
//! threshold classification.

pub mod backend;
mod cache;
mod prompt;

pub use backend::{BackendError, LocalRuleRater, RatingBackend, RemoteChatBackend, RemoteConfig};
pub use cache::{prompt_hash, PromptCache};
pub use prompt::{build_prompt, Prompt, PROMPT_HEADER};

use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use crate::disasm::BlockId;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("unparsable response after {attempts} attempts: {last:?}")]
    UnparsableResponse { attempts: u32, last: String },
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

/// Thresholds and client behavior for the rating stage.
#[derive(Debug, Clone)]
pub struct RatingConfig {
    /// Ratings at or above this are positive.
    pub threshold: u8,
    pub max_retries: u32,
    pub request_timeout: Duration,
    pub max_in_flight: usize,
    /// Base delay for exponential backoff between retries.
    pub retry_backoff: Duration,
}

impl Default for RatingConfig {
    fn default() -> Self {
        RatingConfig {
            threshold: 7,
            max_retries: 3,
            request_timeout: Duration::from_secs(60),
            max_in_flight: 4,
            retry_backoff: Duration::from_secs(1),
        }
    }
}

/// One block's rating outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRecord {
    pub block_id: BlockId,
    pub rating: u8,
    pub positive: bool,
    pub backend_id: String,
    pub raw_response: String,
}

/// Extract an integer rating 0-10: a lone integer wins; otherwise the first
/// in-range integer token.
pub fn parse_rating(text: &str) -> Option<u8> {
    let trimmed = text.trim();
    if let Ok(v) = trimmed.parse::<i64>() {
        return (0..=10).contains(&v).then_some(v as u8);
    }
    for token in trimmed.split_whitespace() {
        // strip surrounding punctuation; reject interior non-digits ("0-10")
        let cleaned = token.trim_matches(|c: char| !c.is_ascii_digit());
        if cleaned.is_empty() || !cleaned.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        if let Ok(v) = cleaned.parse::<i64>() {
            if (0..=10).contains(&v) {
                return Some(v as u8);
            }
        }
    }
    None
}

/// Threshold rule: positive iff `rating >= threshold`.
pub fn classify(rating: u8, config: &RatingConfig) -> bool {
    rating >= config.threshold
}

/// Drives a backend with retries, caching, and bounded concurrency.
pub struct RatingEngine<'a> {
    backend: &'a dyn RatingBackend,
    config: RatingConfig,
    cache: Option<Mutex<PromptCache>>,
}

impl<'a> RatingEngine<'a> {
    pub fn new(backend: &'a dyn RatingBackend, config: RatingConfig) -> Self {
        RatingEngine {
            backend,
            config,
            cache: None,
        }
    }

    pub fn with_cache(mut self, cache: PromptCache) -> Self {
        self.cache = Some(Mutex::new(cache));
        self
    }

    /// Rate one prompt: cache lookup, then backend with retry on transport
    /// failure or unparsable response.
    pub fn rate(&self, prompt: &Prompt) -> Result<RatingRecord, RatingError> {
        let backend_id = self.backend.id();

        if let Some(cache) = &self.cache {
            let guard = cache.lock().expect("cache lock");
            if let Some(raw) = guard.get(&prompt.rendered, &backend_id) {
                if let Some(rating) = parse_rating(raw) {
                    return Ok(self.record(prompt, rating, backend_id, raw.to_string()));
                }
            }
        }

        let mut last_error = String::new();
        let mut attempts = 0;
        while attempts < self.config.max_retries.max(1) {
            attempts += 1;
            match self.backend.complete(&prompt.rendered) {
                Ok(raw) => match parse_rating(&raw) {
                    Some(rating) => {
                        if let Some(cache) = &self.cache {
                            cache
                                .lock()
                                .expect("cache lock")
                                .put(&prompt.rendered, &backend_id, &raw)?;
                        }
                        return Ok(self.record(prompt, rating, backend_id, raw));
                    }
                    None => {
                        last_error = raw;
                        if attempts < self.config.max_retries.max(1) {
                            self.backoff(attempts);
                            continue;
                        }
                        return Err(RatingError::UnparsableResponse {
                            attempts,
                            last: last_error,
                        });
                    }
                },
                Err(e) => {
                    last_error = e.to_string();
                    if attempts < self.config.max_retries.max(1) {
                        self.backoff(attempts);
                    }
                }
            }
        }
        Err(RatingError::BackendUnavailable {
            attempts,
            last: last_error,
        })
    }

    /// Rate many prompts with up to `max_in_flight` worker threads. Results
    /// come back in input order regardless of completion order.
    pub fn rate_all(&self, prompts: &[Prompt]) -> Result<Vec<RatingRecord>, RatingError> {
        let workers = self.config.max_in_flight.max(1).min(prompts.len().max(1));
        if workers <= 1 || prompts.len() <= 1 {
            return prompts.iter().map(|p| self.rate(p)).collect();
        }

        let queue = Mutex::new(prompts.iter().enumerate());
        let (tx, rx) = mpsc::channel::<(usize, Result<RatingRecord, RatingError>)>();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let queue = &queue;
                scope.spawn(move || loop {
                    let next = queue.lock().expect("queue lock").next();
                    let Some((index, prompt)) = next else { break };
                    let result = self.rate(prompt);
                    if tx.send((index, result)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);

        let mut slots: Vec<Option<Result<RatingRecord, RatingError>>> =
            (0..prompts.len()).map(|_| None).collect();
        for (index, result) in rx {
            slots[index] = Some(result);
        }
        slots
            .into_iter()
            .map(|slot| slot.expect("worker produced every slot"))
            .collect()
    }

    fn record(
        &self,
        prompt: &Prompt,
        rating: u8,
        backend_id: String,
        raw_response: String,
    ) -> RatingRecord {
        RatingRecord {
            block_id: prompt.block_id,
            rating,
            positive: classify(rating, &self.config),
            backend_id,
            raw_response,
        }
    }

    fn backoff(&self, attempt: u32) {
        let delay = self.config.retry_backoff * 2u32.saturating_pow(attempt - 1);
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}
