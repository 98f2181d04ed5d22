//! Stage-one backends: send a prompt bundle to a multimodal LLM, retry
//! transient transport failures, and keep a byte-exact transcript of what
//! came back.

mod http;
mod parse;
mod scripted;

pub use http::HttpChatBackend;
pub use parse::{parse_proposal, serialize_proposal, ParsedProposal};
pub use scripted::ScriptedBackend;

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

/// Parsed stage-one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProposal {
    pub object_name: String,
    pub attributes: Vec<String>,
    pub rationale: String,
    /// Row strip IDs (1-based, top to bottom).
    pub ids_v: Vec<i64>,
    /// Column strip IDs (1-based, left to right).
    pub ids_h: Vec<i64>,
    /// True iff both ID lists are empty: the model judged the object absent.
    pub absent: bool,
}

impl RegionProposal {
    /// The text handed to the segmentation stage: object name plus attributes.
    pub fn target_text(&self) -> String {
        if self.attributes.is_empty() {
            self.object_name.clone()
        } else {
            format!("{} ({})", self.object_name, self.attributes.join(", "))
        }
    }
}

/// Outcome of parsing one raw response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseOutcome {
    Proposal { proposal: RegionProposal },
    Failure { error: String },
}

/// Full record of one backend exchange, kept for replay and debugging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MllmTranscript {
    pub request_digest: String,
    pub raw_response: String,
    pub parsed: ParseOutcome,
    pub warnings: Vec<String>,
    pub latency_seconds: f64,
    pub backend_id: String,
    pub temperature: f64,
}

/// Per-request context a backend may consult.
#[derive(Debug, Clone, Default)]
pub struct RequestContext {
    pub temperature: f64,
    /// Sample ID, used by the scripted backend to key canned responses.
    pub sample_tag: Option<String>,
}

/// A stage-one completion backend.
#[async_trait]
pub trait MllmBackend: Send + Sync {
    fn id(&self) -> String;

    /// How many in-flight requests the backend tolerates. The orchestrator
    /// enforces this with a semaphore.
    fn max_parallelism(&self) -> usize {
        1
    }

    async fn complete(&self, bundle: &PromptBundle, ctx: &RequestContext) -> Result<String>;
}

/// Retry schedule for transient backend failures: `max_retries` extra
/// attempts with exponentially doubling delay starting at `base_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // 3 retries, 1s/2s/4s backoff.
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 1000,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_attempt(&self, retry_index: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << retry_index.min(20)))
    }
}

/// Run a fallible async operation under a retry policy. Only transient
/// errors are retried; auth and configuration failures surface immediately.
pub async fn with_retry<T, F, Fut>(policy: &RetryPolicy, mut op: F) -> Result<T>
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = Result<T>>,
{
    let mut attempt = 0u32;
    loop {
        match op().await {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && attempt < policy.max_retries => {
                tokio::time::sleep(policy.delay_before_attempt(attempt)).await;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Raw completion text plus how long the (final) attempt took.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub raw_response: String,
    pub latency: Duration,
    pub attempts: u32,
}

/// Send a bundle to a backend with retries and latency accounting.
///
/// Temperature must lie in [0, 2].
pub async fn query_backend(
    backend: &dyn MllmBackend,
    bundle: &PromptBundle,
    ctx: &RequestContext,
    policy: &RetryPolicy,
) -> Result<QueryOutcome> {
    if !(0.0..=2.0).contains(&ctx.temperature) {
        return Err(Error::InvalidInput(format!(
            "temperature {} outside [0, 2]",
            ctx.temperature
        )));
    }
    let started = std::time::Instant::now();
    let mut attempts = 0u32;
    let raw = with_retry(policy, || {
        attempts += 1;
        backend.complete(bundle, ctx)
    })
    .await?;
    Ok(QueryOutcome {
        raw_response: raw,
        latency: started.elapsed(),
        attempts,
    })
}

/// Stable digest of a prompt bundle (text plus image bytes).
pub fn bundle_digest(bundle: &PromptBundle) -> String {
    let mut hasher = Sha256::new();
    hasher.update((bundle.system_text.len() as u64).to_le_bytes());
    hasher.update(bundle.system_text.as_bytes());
    hasher.update((bundle.user_text.len() as u64).to_le_bytes());
    hasher.update(bundle.user_text.as_bytes());
    for img in &bundle.images {
        hasher.update((img.name.len() as u64).to_le_bytes());
        hasher.update(img.name.as_bytes());
        hasher.update((img.png.len() as u64).to_le_bytes());
        hasher.update(&img.png);
    }
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
