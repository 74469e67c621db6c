//! Content-addressed result cache. An entry is a directory named by the
//! SHA-256 of the canonical job, holding the job's output files.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Tag mixed into every key so results from another build are not reused.
pub const CODE_VERSION: &str = concat!("fluxtorque-", env!("CARGO_PKG_VERSION"));

pub const CACHE_ENV: &str = "FLUXTORQUE_CACHE_DIR";

/// Output file: name relative to the output directory, and contents.
pub type OutputFile = (String, Vec<u8>);

/// Hex SHA-256 over the canonical job text and the code version.
pub fn cache_key(canonical: &str, version: &str) -> String {
    let mut h = Sha256::new();
    h.update(version.as_bytes());
    h.update([0u8]);
    h.update(canonical.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    /// `$FLUXTORQUE_CACHE_DIR`, else `$XDG_CACHE_HOME/fluxtorque`, else
    /// `~/.cache/fluxtorque`, else `.fluxtorque-cache`.
    pub fn from_env() -> Self {
        if let Some(d) = std::env::var_os(CACHE_ENV) {
            return Cache::new(d);
        }
        if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
            return Cache::new(Path::new(&d).join("fluxtorque"));
        }
        if let Some(h) = std::env::var_os("HOME") {
            return Cache::new(Path::new(&h).join(".cache").join("fluxtorque"));
        }
        Cache::new(".fluxtorque-cache")
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, key: &str) -> Result<Option<Vec<OutputFile>>, CliError> {
        let dir = self.root.join(key);
        if !dir.is_dir() {
            return Ok(None);
        }
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                let name = entry.file_name().to_string_lossy().into_owned();
                files.push((name, std::fs::read(entry.path())?));
            }
        }
        files.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Some(files))
    }

    /// Write the entry to a private temporary directory, then rename it
    /// into place. A concurrent writer of the same key wins harmlessly.
    pub fn put(&self, key: &str, files: &[OutputFile]) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.root)?;
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let tmp = self.root.join(format!(".tmp-{key}-{}-{nanos}", std::process::id()));
        std::fs::create_dir_all(&tmp)?;
        for (name, bytes) in files {
            std::fs::write(tmp.join(name), bytes)?;
        }
        let dest = self.root.join(key);
        match std::fs::rename(&tmp, &dest) {
            Ok(()) => Ok(()),
            Err(_) if dest.is_dir() => {
                std::fs::remove_dir_all(&tmp)?;
                Ok(())
            }
            Err(e) => {
                let _ = std::fs::remove_dir_all(&tmp);
                Err(e.into())
            }
        }
    }
}

/// Write files into `dir` atomically, one by one.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, dir.join(name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_sha256_hex() {
        let k = cache_key("{}", "v");
        assert_eq!(k.len(), 64);
        assert_ne!(k, cache_key("{}", "w"));
        assert_ne!(k, cache_key("{ }", "v"));
    }

    #[test]
    fn put_then_get_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        assert!(c.get("abc").unwrap().is_none());
        let files = vec![("b.csv".to_string(), b"x,y\n".to_vec()), ("a.json".to_string(), b"{}".to_vec())];
        c.put("abc", &files).unwrap();
        c.put("abc", &files).unwrap();
        let got = c.get("abc").unwrap().unwrap();
        assert_eq!(got[0], files[1]);
        assert_eq!(got[1], files[0]);
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
