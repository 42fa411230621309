//! Annotation records, the dataset container, and bit-exact JSONL I/O.
//!
//! One record per line, keys in a fixed order, floats printed with six
//! decimal places. Identical datasets serialize to identical bytes, which is
//! what the run manifest hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};

/// Split assignment of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    TestHigh,
    TestLow,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::TestHigh => "test_high",
            Split::TestLow => "test_low",
            Split::Unassigned => "unassigned",
        }
    }
}

/// Whether the query text came straight from a template or a rewriter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Template,
    Rewritten,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Template => "template",
            Provenance::Rewritten => "rewritten",
        }
    }
}

/// One (video, sentence, moment) alignment sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub video_duration: f64,
    pub query: String,
    pub t_s: f64,
    pub t_e: f64,
    pub action_id: String,
    pub verb: String,
    pub object: String,
    pub scene: String,
    pub agent: String,
    pub split: Split,
    pub provenance: Provenance,
}

impl AnnotationRecord {
    /// Checks the per-record invariants; `line` is used for error reporting.
    // negated comparisons are deliberate: they also reject NaN timestamps
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self, line: usize) -> Result<()> {
        if !(self.t_s >= 0.0) {
            return Err(Error::InvalidRecord {
                line,
                field: "t_s".into(),
                message: format!("t_s must be >= 0, got {}", self.t_s),
            });
        }
        if !(self.t_s < self.t_e) {
            return Err(Error::InvalidRecord {
                line,
                field: "t_s/t_e".into(),
                message: format!(
                    "record {}: need t_s < t_e, got [{}, {}]",
                    self.video_id, self.t_s, self.t_e
                ),
            });
        }
        if !(self.t_e <= self.video_duration) {
            return Err(Error::InvalidRecord {
                line,
                field: "t_e".into(),
                message: format!(
                    "record {}: t_e {} exceeds video_duration {}",
                    self.video_id, self.t_e, self.video_duration
                ),
            });
        }
        if self.query.is_empty() {
            return Err(Error::InvalidRecord {
                line,
                field: "query".into(),
                message: format!("record {}: empty query", self.video_id),
            });
        }
        Ok(())
    }

    /// Checks the verb/object decomposition against the catalog entry.
    pub fn validate_against_catalog(&self, catalog: &Catalog, line: usize) -> Result<()> {
        let spec = catalog.require(&self.action_id)?;
        if spec.verb != self.verb || spec.object != self.object {
            return Err(Error::InvalidRecord {
                line,
                field: "verb/object".into(),
                message: format!(
                    "record {}: ({}, {}) does not match catalog decomposition ({}, {}) of {}",
                    self.video_id, self.verb, self.object, spec.verb, spec.object, self.action_id
                ),
            });
        }
        Ok(())
    }
}

/// Reproducibility metadata carried in the run manifest (not in the JSONL).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub config_digest: String,
    pub catalog_digest: String,
}

/// Ordered collection of annotation records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<AnnotationRecord>,
    pub meta: DatasetMeta,
}

/// Statistics mirroring the usual benchmark summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub num_videos: usize,
    pub num_annotations: usize,
    pub num_actions: usize,
    pub avg_video_duration: f64,
    pub avg_moment_duration: f64,
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

impl Dataset {
    pub fn new(records: Vec<AnnotationRecord>) -> Self {
        Self {
            records,
            meta: DatasetMeta::default(),
        }
    }

    /// Validates every record plus the joint-uniqueness invariant.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, rec) in self.records.iter().enumerate() {
            rec.validate(i + 1)?;
            let key = format!("{}|{:.6}|{:.6}|{}", rec.video_id, rec.t_s, rec.t_e, rec.query);
            if !seen.insert(key) {
                return Err(Error::InvalidRecord {
                    line: i + 1,
                    field: "video_id/t_s/t_e/query".into(),
                    message: format!("duplicate record for video {}", rec.video_id),
                });
            }
        }
        Ok(())
    }

    /// One record as a JSONL line with the documented key order.
    pub fn record_line(rec: &AnnotationRecord) -> String {
        format!(
            "{{\"video_id\":{},\"video_duration\":{:.6},\"query\":{},\"t_s\":{:.6},\"t_e\":{:.6},\"action_id\":{},\"verb\":{},\"object\":{},\"scene\":{},\"agent\":{},\"split\":\"{}\",\"provenance\":\"{}\"}}",
            json_string(&rec.video_id),
            rec.video_duration,
            json_string(&rec.query),
            rec.t_s,
            rec.t_e,
            json_string(&rec.action_id),
            json_string(&rec.verb),
            json_string(&rec.object),
            json_string(&rec.scene),
            json_string(&rec.agent),
            rec.split.as_str(),
            rec.provenance.as_str(),
        )
    }

    /// Serializes to JSONL bytes (used both by `write_jsonl` and by hashing).
    pub fn to_jsonl_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for rec in &self.records {
            out.extend_from_slice(Self::record_line(rec).as_bytes());
            out.push(b'\n');
        }
        out
    }

    /// Writes the dataset to `path`; returns the number of bytes written.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<u64> {
        let path = path.as_ref();
        let bytes = self.to_jsonl_bytes();
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(&bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(bytes.len() as u64)
    }

    /// Loads and validates a dataset written by [`Dataset::write_jsonl`].
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord =
                serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            rec.validate(i + 1)?;
            records.push(rec);
        }
        let ds = Dataset::new(records);
        ds.validate()?;
        Ok(ds)
    }

    /// Summary statistics; errors on an empty dataset.
    pub fn stats(&self) -> Result<DatasetStats> {
        if self.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut durations: BTreeMap<&str, f64> = BTreeMap::new();
        let mut actions = BTreeSet::new();
        let mut moment_total = 0.0;
        for rec in &self.records {
            durations.entry(&rec.video_id).or_insert(rec.video_duration);
            actions.insert(rec.action_id.as_str());
            moment_total += rec.t_e - rec.t_s;
        }
        let num_videos = durations.len();
        Ok(DatasetStats {
            num_videos,
            num_annotations: self.records.len(),
            num_actions: actions.len(),
            avg_video_duration: durations.values().sum::<f64>() / num_videos as f64,
            avg_moment_duration: moment_total / self.records.len() as f64,
        })
    }
}
