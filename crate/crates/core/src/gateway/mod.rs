//! Sampling n responses per prompt through a chat-completions endpoint,
//! with a content-addressed response cache.
//!
//! Cache layout: one JSON file per response at
//! `<root>/<hh>/<hex>.json`, where `hex` is the SHA-256 of the stable
//! serialization of a [`CacheKey`] and `hh` its first two characters.
//! Entries are written once and never replaced.
//!
//! Each response index is fetched with its own request (`n = 1`). When a
//! seed is configured the request for index `i` carries `seed + i`, so
//! seeded runs still draw distinct samples.

mod cache;
mod http;
mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::prompt::RenderedPrompt;

pub use cache::{CacheKey, CachedResponse, ResponseCache};
pub use http::{HttpTransport, DEFAULT_API_KEY_ENV};
pub use mock::MockBackend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each further failure.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub max_parallel: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-3.5-turbo-0125".into(),
            temperature: 1.0,
            n: 15,
            seed: None,
            max_parallel: 4,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

impl QueryConfig {
    pub fn check(&self) -> Result<(), GatewayError> {
        if self.n == 0 {
            return Err(GatewayError::Config("n must be at least 1".into()));
        }
        if self.max_parallel == 0 {
            return Err(GatewayError::Config("max_parallel must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::Config(format!("bad temperature {}", self.temperature)));
        }
        Ok(())
    }
}

/// One single-response request.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub endpoint_url: &'a str,
    pub model_id: &'a str,
    pub prompt: &'a str,
    pub prompt_hash: &'a str,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub response_index: usize,
    pub timeout: Duration,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl TransportError {
    /// Rate limiting, server errors and network failures are retried.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network(_) => true,
            TransportError::Protocol(_) => false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError>;
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid query config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(#[from] cache::CacheError),
    #[error("responses {missing:?} could not be fetched; last error: {last_error}")]
    PartialFailure { missing: Vec<usize>, last_error: TransportError },
}

/// Counting semaphore bounding in-flight fetches across all callers.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock");
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    cache: ResponseCache,
    permits: Permits,
    max_parallel: usize,
}

impl Gateway {
    /// `max_parallel` bounds concurrent fetches for this gateway as a whole.
    pub fn new(transport: Arc<dyn Transport>, cache: ResponseCache, max_parallel: usize) -> Gateway {
        let max_parallel = max_parallel.max(1);
        Gateway {
            transport,
            cache,
            permits: Permits {
                free: Mutex::new(max_parallel),
                cv: Condvar::new(),
            },
            max_parallel,
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn key(&self, prompt: &RenderedPrompt, cfg: &QueryConfig, index: usize) -> CacheKey {
        CacheKey {
            model_id: cfg.model_id.clone(),
            prompt_hash: prompt.prompt_hash.clone(),
            temperature: cfg.temperature,
            seed: cfg.seed,
            response_index: index,
        }
    }

    fn fetch(&self, prompt: &RenderedPrompt, cfg: &QueryConfig, index: usize) -> Result<String, TransportError> {
        let request = CompletionRequest {
            endpoint_url: &cfg.endpoint_url,
            model_id: &cfg.model_id,
            prompt: &prompt.text,
            prompt_hash: &prompt.prompt_hash,
            temperature: cfg.temperature,
            seed: cfg.seed.map(|s| s.wrapping_add(index as u64)),
            response_index: index,
            timeout: cfg.timeout,
        };
        let mut delay = cfg.retry.backoff;
        let mut attempt = 1;
        loop {
            let result = {
                let _permit = self.permits.acquire();
                self.transport.complete(&request)
            };
            match result {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < cfg.retry.max_attempts => {
                    log::warn!("response {index} attempt {attempt} failed: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Exactly `cfg.n` responses, ordered by response index. Cached
    /// responses are reused; misses are fetched, persisted, then returned.
    pub fn sample(&self, prompt: &RenderedPrompt, cfg: &QueryConfig) -> Result<Vec<String>, GatewayError> {
        cfg.check()?;
        let mut slots: Vec<Option<String>> = Vec::with_capacity(cfg.n);
        for i in 0..cfg.n {
            slots.push(self.cache.get(&self.key(prompt, cfg, i))?.map(|c| c.text));
        }
        let missing: Vec<usize> = (0..cfg.n).filter(|i| slots[*i].is_none()).collect();
        if !missing.is_empty() {
            let queue = Mutex::new(missing.clone().into_iter());
            let results: Mutex<Vec<(usize, Result<String, TransportError>)>> = Mutex::new(Vec::new());
            let workers = missing.len().min(self.max_parallel).min(cfg.max_parallel);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let next = queue.lock().expect("queue lock").next();
                        let Some(i) = next else { break };
                        let r = self.fetch(prompt, cfg, i);
                        results.lock().expect("results lock").push((i, r));
                    });
                }
            });
            let mut failed = Vec::new();
            let mut last_error = None;
            let mut results = results.into_inner().expect("results lock");
            results.sort_by_key(|(i, _)| *i);
            for (i, r) in results {
                match r {
                    Ok(text) => {
                        self.cache.put(&self.key(prompt, cfg, i), &text)?;
                        slots[i] = Some(text);
                    }
                    Err(e) => {
                        failed.push(i);
                        last_error = Some(e);
                    }
                }
            }
            if let Some(last_error) = last_error {
                return Err(GatewayError::PartialFailure {
                    missing: failed,
                    last_error,
                });
            }
        }
        Ok(slots.into_iter().map(|s| s.expect("all filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt::from_text(text.to_string())
    }

    fn cfg(n: usize) -> QueryConfig {
        QueryConfig {
            n,
            retry: RetryPolicy {
                max_attempts: 3,
                backoff: Duration::from_millis(1),
            },
            ..QueryConfig::default()
        }
    }

    fn gateway(mock: Arc<MockBackend>, dir: &std::path::Path, parallel: usize) -> Gateway {
        Gateway::new(mock, ResponseCache::new(dir), parallel)
    }

    #[test]
    fn cached_responses_are_not_refetched() {
        let tmp = tempfile::tempdir().unwrap();
        let p = prompt("fix me");
        let mock = Arc::new(MockBackend::new(
            HashMap::from([(p.prompt_hash.clone(), vec!["r{index}".to_string()])]),
            "NOFIX",
        ));
        let gw = gateway(mock.clone(), tmp.path(), 4);
        let first = gw.sample(&p, &cfg(3)).unwrap();
        assert_eq!(first, vec!["r0", "r1", "r2"]);
        assert_eq!(mock.calls(), 3);
        let second = gw.sample(&p, &cfg(3)).unwrap();
        assert_eq!(second, first);
        assert_eq!(mock.calls(), 3);
    }

    #[test]
    fn only_missing_indices_are_fetched() {
        let tmp = tempfile::tempdir().unwrap();
        let p = prompt("fix me");
        let mock = Arc::new(MockBackend::new(HashMap::new(), "NOFIX"));
        let gw = gateway(mock.clone(), tmp.path(), 4);
        let c = cfg(15);
        for i in 0..10 {
            gw.cache().put(&gw.key(&p, &c, i), &format!("cached {i}")).unwrap();
        }
        let out = gw.sample(&p, &c).unwrap();
        assert_eq!(mock.calls(), 5);
        assert_eq!(out[3], "cached 3");
        assert_eq!(out[12], "NOFIX");
    }

    #[test]
    fn parallelism_is_bounded() {
        let tmp = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockBackend::new(HashMap::new(), "NOFIX").with_delay(Duration::from_millis(20)));
        let gw = gateway(mock.clone(), tmp.path(), 2);
        std::thread::scope(|s| {
            for t in 0..3 {
                let gw = &gw;
                s.spawn(move || gw.sample(&prompt(&format!("p{t}")), &cfg(6)).unwrap());
            }
        });
        assert_eq!(mock.calls(), 18);
        assert!(mock.max_in_flight() <= 2, "{}", mock.max_in_flight());
        assert!(mock.max_in_flight() >= 1);
    }

    #[test]
    fn transient_failures_are_retried() {
        let tmp = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockBackend::new(HashMap::new(), "ok").with_transient_failures(2));
        let gw = gateway(mock.clone(), tmp.path(), 1);
        assert_eq!(gw.sample(&prompt("x"), &cfg(2)).unwrap(), vec!["ok", "ok"]);
        assert_eq!(mock.calls(), 4);
    }

    #[test]
    fn exhausted_retries_report_missing_indices() {
        let tmp = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockBackend::new(HashMap::new(), "ok").with_transient_failures(100));
        let gw = gateway(mock.clone(), tmp.path(), 1);
        match gw.sample(&prompt("x"), &cfg(2)) {
            Err(GatewayError::PartialFailure { missing, .. }) => assert_eq!(missing, vec![0, 1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_checked() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = gateway(Arc::new(MockBackend::new(HashMap::new(), "x")), tmp.path(), 1);
        assert!(matches!(gw.sample(&prompt("x"), &cfg(0)), Err(GatewayError::Config(_))));
    }
}
