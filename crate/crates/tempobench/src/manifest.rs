//! Run manifest: records the seed, input digests, dataset statistics, and
//! a checksum for every produced file. Contains no timestamps so repeated
//! runs with the same seed produce byte-identical output trees.

use std::path::Path;

use serde::Serialize;

use crate::dataset::DatasetStats;
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_digest: String,
    pub catalog_digest: String,
    pub stats: DatasetStats,
    pub files: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(
        seed: u64,
        config_digest: String,
        catalog_digest: String,
        stats: DatasetStats,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_digest,
            catalog_digest,
            stats,
            files: Vec::new(),
        }
    }

    /// Hashes an already-written file and records it under `rel_path`.
    pub fn record_file(&mut self, root: &Path, rel_path: &str) -> Result<()> {
        let full = root.join(rel_path);
        let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
        self.files.push(ManifestEntry {
            path: rel_path.to_string(),
            bytes: bytes.len() as u64,
            sha256: seeding::sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, root: &Path) -> Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let path = root.join("manifest.json");
        let mut json = serde_json::to_string_pretty(self).expect("manifest is serializable");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> DatasetStats {
        DatasetStats {
            num_videos: 1,
            num_annotations: 2,
            num_actions: 2,
            avg_video_duration: 10.0,
            avg_moment_duration: 3.0,
        }
    }

    #[test]
    fn records_and_sorts_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "bb").unwrap();
        std::fs::write(dir.path().join("a.txt"), "a").unwrap();
        let mut m = RunManifest::new(1, "c".into(), "k".into(), stats());
        m.record_file(dir.path(), "b.txt").unwrap();
        m.record_file(dir.path(), "a.txt").unwrap();
        m.write(dir.path()).unwrap();
        assert_eq!(m.files[0].path, "a.txt");
        assert_eq!(m.files[0].bytes, 1);
        assert_eq!(m.files[0].sha256, seeding::sha256_hex(b"a"));
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(1, "c".into(), "k".into(), stats());
        assert!(m.record_file(dir.path(), "nope.txt").is_err());
    }
}
