use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use super::{CompletionRequest, Transport, TransportError};

/// Scripted backend. Responses for a prompt hash cycle through its
/// templates by response index; `{index}` in a template is replaced by the
/// index. Unknown hashes get the default response.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: HashMap<String, Vec<String>>,
    default: String,
    delay: Duration,
    transient_failures: AtomicUsize,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: HashMap<String, Vec<String>>, default: impl Into<String>) -> MockBackend {
        MockBackend {
            script,
            default: default.into(),
            ..MockBackend::default()
        }
    }

    /// Sleep this long inside every call.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// Fail the next `count` calls with a retryable error.
    pub fn with_transient_failures(self, count: usize) -> Self {
        self.transient_failures.store(count, Ordering::SeqCst);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn response_for(&self, prompt_hash: &str, index: usize) -> String {
        match self.script.get(prompt_hash).filter(|t| !t.is_empty()) {
            Some(templates) => templates[index % templates.len()].replace("{index}", &index.to_string()),
            None => self.default.clone(),
        }
    }
}

impl Transport for MockBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let fail = self
            .transient_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        if fail {
            return Err(TransportError::Status {
                status: 503,
                body: "scripted failure".into(),
            });
        }
        Ok(self.response_for(request.prompt_hash, request.response_index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_templates() {
        let m = MockBackend::new(
            HashMap::from([("h".to_string(), vec!["a{index}".to_string(), "b".to_string()])]),
            "NOFIX",
        );
        let got: Vec<String> = (0..3).map(|i| m.response_for("h", i)).collect();
        assert_eq!(got, vec!["a0", "b", "a2"]);
        assert_eq!(m.response_for("other", 1), "NOFIX");
    }

    #[test]
    fn independent_scripts() {
        let m = MockBackend::new(
            HashMap::from([
                ("h1".to_string(), vec!["one".to_string()]),
                ("h2".to_string(), vec!["two".to_string()]),
            ]),
            "NOFIX",
        );
        assert_eq!(m.response_for("h1", 0), "one");
        assert_eq!(m.response_for("h2", 0), "two");
    }
}
