//! On-disk memo of per-(quantity, video variant, rate point) results.
//!
//! Each entry is a small file named by the SHA-256 of its key, holding the
//! value's IEEE-754 bits in hex so that cached values are bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::StabilityError;

const KEY_VERSION: &str = "uapg-cache/1";

/// Identifies one cached quantity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    /// What is measured, e.g. `target:builtin:mean`, `bitrate`.
    pub quantity: String,
    /// Content hash of the (possibly attacked) source video.
    pub variant: String,
    /// Codec rate-point label.
    pub rate: String,
}

impl CacheKey {
    pub fn new(quantity: impl Into<String>, variant: impl Into<String>, rate: impl Into<String>) -> Self {
        Self { quantity: quantity.into(), variant: variant.into(), rate: rate.into() }
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [KEY_VERSION, &self.quantity, &self.variant, &self.rate] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub writes: u64,
}

#[derive(Debug)]
pub struct ScoreCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
    writes: AtomicU64,
}

impl ScoreCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StabilityError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| StabilityError::Cache(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, hits: AtomicU64::new(0), misses: AtomicU64::new(0), writes: AtomicU64::new(0) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(&digest[2..])
    }

    /// Unreadable or malformed entries count as misses.
    pub fn get(&self, key: &CacheKey) -> Option<f64> {
        let value = fs::read_to_string(self.path(&key.digest()))
            .ok()
            .and_then(|s| u64::from_str_radix(s.trim(), 16).ok())
            .map(f64::from_bits);
        match value {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        value
    }

    /// Written through a temporary file and renamed, so concurrent readers
    /// never see a partial entry.
    pub fn put(&self, key: &CacheKey, value: f64) -> Result<(), StabilityError> {
        let path = self.path(&key.digest());
        let parent = path.parent().expect("cache entries live in a subdirectory");
        let fail = |e: std::io::Error| StabilityError::Cache(format!("cannot write {}: {e}", path.display()));
        fs::create_dir_all(parent).map_err(fail)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(fail)?;
        write!(tmp, "{:016x}", value.to_bits()).map_err(fail)?;
        tmp.persist(&path).map_err(|e| fail(e.error))?;
        self.writes.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            writes: self.writes.load(Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_bits_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::open(dir.path()).unwrap();
        let key = CacheKey::new("target:x", "abc", "mock:q=0.5");
        assert_eq!(cache.get(&key), None);
        let value = 0.1 + 0.2;
        cache.put(&key, value).unwrap();
        assert_eq!(cache.get(&key).unwrap().to_bits(), value.to_bits());
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1, writes: 1 });

        let reopened = ScoreCache::open(dir.path()).unwrap();
        assert_eq!(reopened.get(&key), Some(value));
    }

    #[test]
    fn key_fields_do_not_alias() {
        let a = CacheKey::new("ab", "c", "d").digest();
        let b = CacheKey::new("a", "bc", "d").digest();
        assert_ne!(a, b);
    }
}
