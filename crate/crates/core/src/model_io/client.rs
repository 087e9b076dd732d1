//! Blocking OpenAI-compatible HTTP client with retry and backoff.

use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::endpoint::ModelEndpoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Scale each delay by a uniform factor in `[0.5, 1)`.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32 << (retry.saturating_sub(1)).min(20));
        let capped = exp.min(self.max_delay);
        if self.jitter {
            capped.mul_f64(rand::rng().random_range(0.5..1.0))
        } else {
            capped
        }
    }
}

fn retriable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl Default for HttpClient {
    fn default() -> Self {
        Self::new(RetryPolicy::default(), Duration::from_secs(600))
    }
}

impl HttpClient {
    pub fn new(retry: RetryPolicy, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent, retry }
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    /// POSTs a JSON body and decodes a JSON reply, retrying on transport
    /// errors, 429 and 5xx.
    pub fn post_json(&self, url: &str, api_key: Option<&str>, body: &Value) -> Result<Value> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            if attempt > 1 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let mut req = self.agent.post(url);
            if let Some(key) = api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = match req.send_json(body) {
                Ok(resp) => resp,
                Err(e) => {
                    log::debug!("attempt {attempt} to {url} failed: {e}");
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            if (200..300).contains(&status) {
                return resp.body_mut().read_json::<Value>().map_err(|e| Error::Protocol {
                    url: url.to_string(),
                    message: format!("invalid JSON body: {e}"),
                });
            }
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if retriable_status(status) {
                log::debug!("attempt {attempt} to {url} got HTTP {status}");
                last = format!("HTTP {status}: {text}");
                continue;
            }
            return Err(Error::Http {
                status,
                url: url.to_string(),
                body: text,
            });
        }
        Err(Error::Transport {
            url: url.to_string(),
            attempts: self.retry.max_attempts.max(1),
            message: last,
        })
    }

    /// One generation call; chat endpoints get a single user turn, others a raw prompt.
    pub fn generate(&self, endpoint: &ModelEndpoint, prompt: &str) -> Result<String> {
        let key = endpoint.api_key()?;
        let g = &endpoint.gen_config;
        let (url, body) = if endpoint.uses_chat_template {
            (
                endpoint.url("chat/completions"),
                json!({
                    "model": endpoint.model_id,
                    "messages": [{"role": "user", "content": prompt}],
                    "max_tokens": g.max_length,
                    "temperature": g.temperature,
                    "top_p": g.top_p,
                }),
            )
        } else {
            (
                endpoint.url("completions"),
                json!({
                    "model": endpoint.model_id,
                    "prompt": prompt,
                    "max_tokens": g.max_length,
                    "temperature": g.temperature,
                    "top_p": g.top_p,
                }),
            )
        };
        let reply = self.post_json(&url, key.as_deref(), &body)?;
        parse_generation(&reply, endpoint.uses_chat_template).map_err(|message| Error::Protocol {
            url,
            message,
        })
    }

    pub fn embed(&self, embedder: &ModelEndpoint, text: &str) -> Result<Vec<f64>> {
        let key = embedder.api_key()?;
        let url = embedder.url("embeddings");
        let body = json!({"model": embedder.model_id, "input": text});
        let reply = self.post_json(&url, key.as_deref(), &body)?;
        parse_embedding(&reply).map_err(|message| Error::Protocol { url, message })
    }
}

/// Extracts the response text. Separate reasoning fields are kept and
/// prepended: reasoning traces count as part of the response.
pub fn parse_generation(reply: &Value, chat: bool) -> std::result::Result<String, String> {
    let choice = reply
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or("missing choices[0]")?;
    if !chat {
        return Ok(choice.get("text").and_then(Value::as_str).unwrap_or_default().to_string());
    }
    let message = choice.get("message").ok_or("missing choices[0].message")?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or_default();
    let reasoning = ["reasoning_content", "reasoning"]
        .iter()
        .find_map(|k| message.get(*k).and_then(Value::as_str))
        .filter(|s| !s.is_empty());
    Ok(match reasoning {
        Some(r) => format!("{r}\n\n{content}"),
        None => content.to_string(),
    })
}

pub fn parse_embedding(reply: &Value) -> std::result::Result<Vec<f64>, String> {
    let values = reply
        .get("data")
        .and_then(|d| d.get(0))
        .and_then(|d| d.get("embedding"))
        .and_then(Value::as_array)
        .ok_or("missing data[0].embedding")?;
    let out = values
        .iter()
        .map(|v| v.as_f64().filter(|x| x.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or("embedding contains a non-numeric or non-finite entry")?;
    if out.is_empty() {
        return Err("embedding is empty".into());
    }
    Ok(out)
}
