use serde_json::{json, Value};

use super::{CompletionRequest, Transport, TransportError};

pub const DEFAULT_API_KEY_ENV: &str = "FACTSEL_API_KEY";

/// Chat-completions client. The bearer token is read from an environment
/// variable on every request and never stored in configuration.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    api_key_env: String,
}

impl HttpTransport {
    pub fn new(api_key_env: impl Into<String>) -> Result<HttpTransport, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpTransport {
            client,
            api_key_env: api_key_env.into(),
        })
    }
}

pub(crate) fn request_body(req: &CompletionRequest<'_>) -> Value {
    let mut body = json!({
        "model": req.model_id,
        "messages": [{"role": "user", "content": req.prompt}],
        "n": 1,
        "temperature": req.temperature,
    });
    if let Some(seed) = req.seed {
        body["seed"] = json!(seed);
    }
    body
}

pub(crate) fn response_text(body: &Value) -> Result<String, TransportError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Protocol("response lacks choices[0].message.content".into()))
}

impl Transport for HttpTransport {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, TransportError> {
        let mut builder = self
            .client
            .post(req.endpoint_url)
            .timeout(req.timeout)
            .json(&request_body(req));
        if let Ok(key) = std::env::var(&self.api_key_env) {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            let body: String = text.chars().take(500).collect();
            return Err(TransportError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| TransportError::Protocol(e.to_string()))?;
        response_text(&value)
    }
}
