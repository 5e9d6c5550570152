//! Content-addressed on-disk cache in front of any [`LanguageModel`].
//!
//! Keys are sha256 over (backend name, operation, request payload). Each
//! value lives in its own file, written to a temporary name and renamed into
//! place, so concurrent writers of the same key never expose a torn file.
//! Errors are never cached.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toxprompt_core::backend::{BackendError, LanguageModel, TokenScore};

#[derive(Debug)]
pub struct CachedBackend<M> {
    inner: M,
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl<M: LanguageModel> CachedBackend<M> {
    pub fn new(inner: M, dir: impl Into<PathBuf>) -> Self {
        CachedBackend {
            inner,
            dir: dir.into(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// (hits, misses) since construction.
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    fn key(&self, op: &str, parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for part in std::iter::once(self.inner.name()).chain(std::iter::once(op)).chain(parts.iter().copied()) {
            // length-prefix each part so boundaries are unambiguous
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn lookup<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        // an unreadable entry is treated as a miss and overwritten
        serde_json::from_slice(&bytes).ok()
    }

    fn store<T: Serialize>(&self, key: &str, value: &T) {
        let path = self.path_for(key);
        let Some(parent) = path.parent() else { return };
        if fs::create_dir_all(parent).is_err() {
            return;
        }
        let tmp = parent.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let written = fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(&serde_json::to_vec(value).expect("cache value serializes"))?;
            f.sync_all()
        });
        if written.is_err() || fs::rename(&tmp, &path).is_err() {
            let _ = fs::remove_file(&tmp);
        }
    }

    fn cached<T: Serialize + DeserializeOwned>(
        &self,
        op: &str,
        parts: &[&str],
        compute: impl FnOnce() -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let key = self.key(op, parts);
        if let Some(value) = self.lookup(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(value);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = compute()?;
        self.store(&key, &value);
        Ok(value)
    }
}

impl<M: LanguageModel> LanguageModel for CachedBackend<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        self.cached("score", &[context, continuation], || self.inner.score_tokens(context, continuation))
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.cached("embed", &[text], || self.inner.embed_raw(text))
    }

    fn next_token_prob(&self, context: &str, candidate: &str) -> Result<f64, BackendError> {
        self.cached("next", &[context, candidate], || self.inner.next_token_prob(context, candidate))
    }
}
