//! Canned-response backend: replays `{sample_id}.txt` files from a directory.
//!
//! This makes the whole stage-one path bit-deterministic, which the
//! end-to-end oracle runs and the determinism acceptance checks rely on.
//! Requests without a sample tag (or without a matching file) fall back to
//! `default.txt` when present.

use std::path::PathBuf;

use async_trait::async_trait;

use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

use super::{MllmBackend, RequestContext};

pub struct ScriptedBackend {
    dir: PathBuf,
    max_parallelism: usize,
}

impl ScriptedBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ScriptedBackend {
            dir: dir.into(),
            max_parallelism: 64,
        }
    }

    pub fn with_max_parallelism(mut self, n: usize) -> Self {
        self.max_parallelism = n.max(1);
        self
    }

    fn response_path(&self, ctx: &RequestContext) -> Result<PathBuf> {
        if let Some(tag) = &ctx.sample_tag {
            let p = self.dir.join(format!("{tag}.txt"));
            if p.is_file() {
                return Ok(p);
            }
        }
        let fallback = self.dir.join("default.txt");
        if fallback.is_file() {
            return Ok(fallback);
        }
        Err(Error::Config(format!(
            "no scripted response for sample {:?} under {}",
            ctx.sample_tag,
            self.dir.display()
        )))
    }
}

#[async_trait]
impl MllmBackend for ScriptedBackend {
    fn id(&self) -> String {
        format!("scripted:{}", self.dir.display())
    }

    fn max_parallelism(&self) -> usize {
        self.max_parallelism
    }

    async fn complete(&self, _bundle: &PromptBundle, ctx: &RequestContext) -> Result<String> {
        let path = self.response_path(ctx)?;
        Ok(std::fs::read_to_string(path)?)
    }
}
