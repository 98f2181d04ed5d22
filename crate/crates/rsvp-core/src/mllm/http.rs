//! Vision chat-completions backend over HTTP.
//!
//! Speaks the de-facto wire protocol of hosted multimodal models: a JSON
//! `messages` array where user content is a list of `text` and `image_url`
//! parts, images inlined as base64 PNG data URIs. The API key is read from
//! an environment variable at request time and never stored.

use async_trait::async_trait;
use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

use super::{MllmBackend, RequestContext};

#[derive(Debug, Clone)]
pub struct HttpChatBackend {
    endpoint: String,
    model: String,
    api_key_env: Option<String>,
    max_parallelism: usize,
    max_tokens: u32,
    client: reqwest::Client,
}

impl HttpChatBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpChatBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            max_parallelism: 4,
            max_tokens: 2048,
            client: reqwest::Client::builder()
                .timeout(std::time::Duration::from_secs(120))
                .build()
                .expect("reqwest client"),
        }
    }

    /// Name of the environment variable holding the bearer token.
    pub fn with_api_key_env(mut self, var: impl Into<String>) -> Self {
        self.api_key_env = Some(var.into());
        self
    }

    pub fn with_max_parallelism(mut self, n: usize) -> Self {
        self.max_parallelism = n.max(1);
        self
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn with_timeout(mut self, timeout: std::time::Duration) -> Self {
        self.client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client");
        self
    }

    fn bearer(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(key) if !key.is_empty() => Ok(Some(key)),
                _ => Err(Error::Config(format!(
                    "api key environment variable {var} is unset or empty"
                ))),
            },
        }
    }

    fn request_body(&self, bundle: &PromptBundle, temperature: f64) -> serde_json::Value {
        let mut content = vec![json!({"type": "text", "text": bundle.user_text})];
        for img in &bundle.images {
            let b64 = base64::engine::general_purpose::STANDARD.encode(&img.png);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{b64}")}
            }));
        }
        json!({
            "model": self.model,
            "temperature": temperature,
            "max_tokens": self.max_tokens,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": content},
            ],
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[async_trait]
impl MllmBackend for HttpChatBackend {
    fn id(&self) -> String {
        format!("http:{}#{}", self.endpoint, self.model)
    }

    fn max_parallelism(&self) -> usize {
        self.max_parallelism
    }

    async fn complete(&self, bundle: &PromptBundle, ctx: &RequestContext) -> Result<String> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&self.request_body(bundle, ctx.temperature));
        if let Some(key) = self.bearer()? {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.endpoint)))?;

        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(Error::Auth(format!("{} returned {status}", self.endpoint)));
        }
        if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(Error::BackendUnavailable(format!(
                "{} returned {status}",
                self.endpoint
            )));
        }
        if !status.is_success() {
            return Err(Error::Config(format!(
                "{} rejected request: {status}",
                self.endpoint
            )));
        }
        let parsed: ChatResponse = resp
            .json()
            .await
            .map_err(|e| Error::Protocol(format!("malformed chat response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Protocol("chat response with no choices".into()))
    }
}
