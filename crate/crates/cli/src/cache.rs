//! Content-addressed artifact cache.
//!
//! Each entry is `<key>.bin` next to `<key>.sha256`, the hex digest of the
//! payload. A mismatched or unreadable entry is evicted and recomputed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Builds a cache key from a kind tag and the inputs that determine the artifact.
pub fn key(kind: &str, parts: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    format!("{kind}-{}", hex::encode(h.finalize()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub computes: usize,
    pub evictions: usize,
}

#[derive(Debug)]
pub struct Cache {
    dir: Option<PathBuf>,
    pub stats: CacheStats,
    log: Vec<String>,
}

impl Cache {
    /// A cache rooted at `dir`; `None` disables storage and always computes.
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating cache dir {}", d.display()))?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), stats: CacheStats::default(), log: Vec::new() })
    }

    fn paths(&self, key: &str) -> Option<(PathBuf, PathBuf)> {
        self.dir
            .as_ref()
            .map(|d| (d.join(format!("{key}.bin")), d.join(format!("{key}.sha256"))))
    }

    /// Messages describing hits, stores and evictions, in order.
    pub fn log(&self) -> &[String] {
        &self.log
    }

    fn lookup(&mut self, key: &str) -> Option<Vec<u8>> {
        let (bin, sum) = self.paths(key)?;
        if !bin.exists() && !sum.exists() {
            return None;
        }
        let ok = match (fs::read(&bin), fs::read_to_string(&sum)) {
            (Ok(bytes), Ok(digest)) if hex::encode(Sha256::digest(&bytes)) == digest.trim() => Some(bytes),
            _ => None,
        };
        if ok.is_none() {
            let _ = fs::remove_file(&bin);
            let _ = fs::remove_file(&sum);
            self.stats.evictions += 1;
            self.log.push(format!("cache: evicted corrupt entry {key}"));
        }
        ok
    }

    fn store(&mut self, key: &str, bytes: &[u8]) -> Result<()> {
        if let Some((bin, sum)) = self.paths(key) {
            let tmp = bin.with_extension("tmp");
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &bin)?;
            fs::write(&sum, hex::encode(Sha256::digest(bytes)))?;
            self.log.push(format!("cache: stored {key}"));
        }
        Ok(())
    }

    /// Returns the decoded cached artifact or runs `produce` and stores its encoding.
    pub fn get_or_compute<T>(
        &mut self,
        key: &str,
        decode: impl Fn(&[u8]) -> Result<T>,
        encode: impl Fn(&T) -> Vec<u8>,
        produce: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        if let Some(bytes) = self.lookup(key) {
            match decode(&bytes) {
                Ok(v) => {
                    self.stats.hits += 1;
                    self.log.push(format!("cache: hit {key}"));
                    return Ok(v);
                }
                Err(e) => {
                    if let Some((bin, sum)) = self.paths(key) {
                        let _ = fs::remove_file(bin);
                        let _ = fs::remove_file(sum);
                    }
                    self.stats.evictions += 1;
                    self.log.push(format!("cache: evicted undecodable entry {key}: {e:#}"));
                }
            }
        }
        let value = produce()?;
        self.stats.computes += 1;
        self.store(key, &encode(&value))?;
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(cache: &mut Cache, key: &str, value: u8) -> Vec<u8> {
        cache
            .get_or_compute(key, |b| Ok(b.to_vec()), |v: &Vec<u8>| v.clone(), || Ok(vec![value; 4]))
            .unwrap()
    }

    #[test]
    fn hit_miss_and_eviction() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = Cache::new(Some(dir.path())).unwrap();
        let k = key("path", &["a"]);
        assert_eq!(run(&mut cache, &k, 1), vec![1; 4]);
        assert_eq!(run(&mut cache, &k, 2), vec![1; 4]);
        assert_eq!(cache.stats, CacheStats { hits: 1, computes: 1, evictions: 0 });

        fs::write(dir.path().join(format!("{k}.bin")), [9u8; 4]).unwrap();
        assert_eq!(run(&mut cache, &k, 3), vec![3; 4]);
        assert_eq!(cache.stats.evictions, 1);
        assert_eq!(run(&mut cache, &k, 4), vec![3; 4]);
    }

    #[test]
    fn keys_depend_on_every_part() {
        assert_ne!(key("path", &["a", "b"]), key("path", &["ab"]));
        assert_ne!(key("path", &["a"]), key("kernel", &["a"]));
        assert_eq!(key("path", &["a"]), key("path", &["a"]));
    }

    #[test]
    fn disabled_cache_always_computes() {
        let mut cache = Cache::new(None).unwrap();
        run(&mut cache, "k", 1);
        run(&mut cache, "k", 1);
        assert_eq!(cache.stats.computes, 2);
    }
}
