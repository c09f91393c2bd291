use std::time::Duration;

use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{Mode, RequestParams, SamplerConfig};
use crate::error::Error;

/// Why one attempt failed.
#[derive(Debug)]
pub(crate) enum Failure {
    /// Worth retrying (rate limit, server error, timeout, connection error).
    Transient { message: String, retry_after: Option<Duration> },
    /// Retrying will not help (malformed response, client error).
    Permanent(String),
    /// Stops the whole collection.
    Fatal(Error),
}

pub(crate) struct Client {
    http: reqwest::Client,
    url: String,
    endpoint: String,
    api_key: Option<String>,
    params: RequestParams,
}

impl Client {
    pub(crate) fn new(cfg: &SamplerConfig) -> Result<Self, Error> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| Error::Http {
                endpoint: cfg.endpoint.clone(),
                message: e.to_string(),
            })?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Client {
            http,
            url: cfg.url(),
            endpoint: cfg.endpoint.clone(),
            api_key,
            params: cfg.request_params(),
        })
    }

    /// Request body: the recorded sampling parameters plus the prompt.
    pub(crate) fn body(&self, system: Option<&str>, user: &str) -> Value {
        let mut body = serde_json::to_value(&self.params).expect("params serialize");
        let obj = body.as_object_mut().expect("params are an object");
        obj.remove("mode");
        match self.params.mode {
            Mode::Completion => {
                obj.insert("prompt".into(), json!(user));
            }
            Mode::Chat => {
                let mut messages = Vec::new();
                if let Some(s) = system {
                    messages.push(json!({"role": "system", "content": s}));
                }
                messages.push(json!({"role": "user", "content": user}));
                obj.insert("messages".into(), Value::Array(messages));
            }
        }
        body
    }

    pub(crate) async fn generate(&self, system: Option<&str>, user: &str) -> Result<String, Failure> {
        let mut req = self.http.post(&self.url).json(&self.body(system, user));
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().await.map_err(|e| Failure::Transient {
            message: if e.is_timeout() {
                format!("request to {} timed out", self.endpoint)
            } else if e.is_connect() {
                format!("cannot connect to {}: {e}", self.endpoint)
            } else {
                format!("request to {} failed: {e}", self.endpoint)
            },
            retry_after: None,
        })?;

        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Failure::Fatal(Error::Auth {
                endpoint: self.endpoint.clone(),
                status: status.as_u16(),
            }));
        }
        if status == StatusCode::TOO_MANY_REQUESTS
            || status == StatusCode::REQUEST_TIMEOUT
            || status.is_server_error()
        {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(Failure::Transient {
                message: format!("{} returned HTTP {status}", self.endpoint),
                retry_after,
            });
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            let excerpt: String = text.chars().take(200).collect();
            return Err(Failure::Permanent(format!(
                "{} returned HTTP {status}: {excerpt}",
                self.endpoint
            )));
        }

        let v: Value = resp.json().await.map_err(|e| Failure::Transient {
            message: format!("unreadable response from {}: {e}", self.endpoint),
            retry_after: None,
        })?;
        let choice = &v["choices"][0];
        let text = match self.params.mode {
            Mode::Completion => choice["text"].as_str(),
            Mode::Chat => choice["message"]["content"].as_str(),
        };
        match text {
            Some(t) if !t.trim().is_empty() => Ok(t.trim().to_owned()),
            Some(_) => Err(Failure::Permanent(format!("{} returned an empty generation", self.endpoint))),
            None => Err(Failure::Permanent(format!(
                "{} returned a response without generated text",
                self.endpoint
            ))),
        }
    }
}
