//! Temporal binning, Jensen–Shannon divergence, the TJSD bias metric at all
//! grouping levels, and heatmap export.
//!
//! A video is divided into `n` equal moments; a moment annotation `[t_s, t_e]`
//! falls into one of the `n(n+1)/2` (start-moment, end-moment) bins. TJSD is
//! the base-2 JSD between the binned count distribution and the uniform
//! distribution over bins, so it always lies in `[0, 1]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The `(start-moment, end-moment)` bin space for `n` moments per video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TemporalBinGrid {
    pub n: usize,
}

impl TemporalBinGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("bin grid needs n >= 1".into()));
        }
        Ok(Self { n })
    }

    /// Number of bins: n(n+1)/2.
    pub fn bin_count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Row-major index of the pair `(i, j)` with `i <= j`.
    pub fn bin_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.n);
        i * (2 * self.n - i + 1) / 2 + (j - i)
    }

    /// The `(i, j)` pair for a flat bin index.
    pub fn bin_pair(&self, mut index: usize) -> (usize, usize) {
        for i in 0..self.n {
            let row = self.n - i;
            if index < row {
                return (i, i + index);
            }
            index -= row;
        }
        panic!("bin index out of range");
    }

    /// Maps a moment `[t_s, t_e]` within a video of length `duration` to its
    /// bin pair. An end time exactly on a moment boundary maps to the moment
    /// it closes, so a full-span moment lands in `(0, n-1)`.
    pub fn bin_of(&self, t_s: f64, t_e: f64, duration: f64) -> Result<(usize, usize)> {
        if duration <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "duration must be > 0, got {duration}"
            )));
        }
        if !(0.0 <= t_s && t_s < t_e && t_e <= duration) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= t_s < t_e <= duration, got [{t_s}, {t_e}] in {duration}"
            )));
        }
        let n = self.n as f64;
        let i = ((n * t_s / duration).floor() as i64).clamp(0, self.n as i64 - 1) as usize;
        let j = ((n * t_e / duration).ceil() as i64 - 1).clamp(0, self.n as i64 - 1) as usize;
        Ok((i, j.max(i)))
    }
}

/// Counts over the bin grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemporalHistogram {
    pub grid: TemporalBinGrid,
    pub counts: Vec<u64>,
}

impl TemporalHistogram {
    pub fn new(grid: TemporalBinGrid) -> Self {
        let counts = vec![0; grid.bin_count()];
        Self { grid, counts }
    }

    pub fn from_counts(grid: TemporalBinGrid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.bin_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} counts, got {}",
                grid.bin_count(),
                counts.len()
            )));
        }
        Ok(Self { grid, counts })
    }

    pub fn add(&mut self, t_s: f64, t_e: f64, duration: f64) -> Result<()> {
        let (i, j) = self.grid.bin_of(t_s, t_e, duration)?;
        let idx = self.grid.bin_index(i, j);
        self.counts[idx] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Histogram merge; shards accumulated concurrently sum associatively.
    pub fn merge(&mut self, other: &TemporalHistogram) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("grid mismatch in merge".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(self
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect())
    }
}

/// Base-2 Jensen–Shannon divergence between two normalized distributions.
///
/// Returns a value in `[0, 1]`; `0 * log(0/x)` is treated as zero.
pub fn jsd<F: Real>(p: &[F], q: &[F]) -> Result<F> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "jsd length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let tol = F::from_f64(1e-9);
    for (name, dist) in [("P", p), ("Q", q)] {
        let sum = dist.iter().fold(F::zero(), |a, &x| a + x);
        if (sum - F::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "{name} is not normalized (sum = {sum})"
            )));
        }
        if dist.iter().any(|&x| x < F::zero()) {
            return Err(Error::InvalidArgument(format!("{name} has negative mass")));
        }
    }
    let half = F::from_f64(0.5);
    let mut acc = F::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        let m = half * (pi + qi);
        if pi > F::zero() {
            acc = acc + half * pi * (pi / m).log2_();
        }
        if qi > F::zero() {
            acc = acc + half * qi * (qi / m).log2_();
        }
    }
    // clamp away negative rounding noise
    Ok(acc.max(F::zero()).min(F::one()))
}

/// TJSD: JSD between the histogram's distribution and the uniform one.
pub fn tjsd(hist: &TemporalHistogram) -> Result<f64> {
    let p = hist.normalized()?;
    let b = p.len();
    let uniform = vec![1.0 / b as f64; b];
    jsd(&p, &uniform)
}

/// Grouping level for the bias audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BiasLevel {
    Process,
    Verb,
    Object,
    Composition,
}

impl BiasLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasLevel::Process => "process",
            BiasLevel::Verb => "verb",
            BiasLevel::Object => "object",
            BiasLevel::Composition => "composition",
        }
    }
}

/// How per-group TJSD values are combined into the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Count-weighted mean (default).
    Weighted,
    /// Plain mean over included groups.
    Unweighted,
}

/// Per-group TJSD entry of an [`AuditReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAudit {
    pub count: usize,
    pub tjsd: f64,
}

/// Multi-level bias audit of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub level: BiasLevel,
    pub n: usize,
    pub aggregation: Aggregation,
    pub per_group: BTreeMap<String, GroupAudit>,
    pub aggregate: f64,
    pub excluded_groups: Vec<(String, String)>,
}

fn group_key(level: BiasLevel, rec: &crate::dataset::AnnotationRecord) -> String {
    match level {
        BiasLevel::Process => "all".to_string(),
        BiasLevel::Verb => rec.verb.clone(),
        BiasLevel::Object => rec.object.clone(),
        BiasLevel::Composition => format!("{}|{}", rec.verb, rec.object),
    }
}

/// Computes the TJSD audit for one grouping level.
pub fn multilevel_tjsd(
    dataset: &Dataset,
    level: BiasLevel,
    n: usize,
    min_group_size: usize,
    aggregation: Aggregation,
) -> Result<AuditReport> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let grid = TemporalBinGrid::new(n)?;
    let mut groups: BTreeMap<String, TemporalHistogram> = BTreeMap::new();
    for rec in &dataset.records {
        let key = group_key(level, rec);
        groups
            .entry(key)
            .or_insert_with(|| TemporalHistogram::new(grid))
            .add(rec.t_s, rec.t_e, rec.video_duration)?;
    }

    let mut per_group = BTreeMap::new();
    let mut excluded = Vec::new();
    for (key, hist) in groups {
        let count = hist.total() as usize;
        if count < min_group_size {
            excluded.push((key, format!("group size {count} < {min_group_size}")));
            continue;
        }
        per_group.insert(
            key,
            GroupAudit {
                count,
                tjsd: tjsd(&hist)?,
            },
        );
    }
    if per_group.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "all {} groups excluded by min_group_size {min_group_size}",
            excluded.len()
        )));
    }

    let aggregate = match aggregation {
        Aggregation::Weighted => {
            let total: usize = per_group.values().map(|g| g.count).sum();
            per_group
                .values()
                .map(|g| g.count as f64 * g.tjsd)
                .sum::<f64>()
                / total as f64
        }
        Aggregation::Unweighted => {
            per_group.values().map(|g| g.tjsd).sum::<f64>() / per_group.len() as f64
        }
    };

    Ok(AuditReport {
        level,
        n,
        aggregation,
        per_group,
        aggregate,
        excluded_groups: excluded,
    })
}

/// Density matrix over (normalized start, normalized end) for heatmap plots.
///
/// Sums to 1; only upper-triangle cells (start row <= end column) can be
/// nonzero. A record spanning the full video lands at `(0, resolution - 1)`.
pub fn heatmap_matrix(dataset: &Dataset, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "heatmap resolution must be >= 2, got {resolution}"
        )));
    }
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut matrix = vec![vec![0.0; resolution]; resolution];
    let res = resolution as f64;
    for rec in &dataset.records {
        let d = rec.video_duration;
        let row = ((res * rec.t_s / d).floor() as i64).clamp(0, resolution as i64 - 1) as usize;
        let col = ((res * rec.t_e / d).ceil() as i64 - 1).clamp(0, resolution as i64 - 1) as usize;
        matrix[row][col.max(row)] += 1.0;
    }
    let total = dataset.records.len() as f64;
    for row in &mut matrix {
        for cell in row {
            *cell /= total;
        }
    }
    Ok(matrix)
}

/// Writes a heatmap matrix as CSV.
pub fn write_heatmap_csv(matrix: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes a heatmap matrix as a grayscale PNG (dark = dense).
pub fn write_heatmap_png(matrix: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let size = matrix.len() as u32;
    let max = matrix
        .iter()
        .flatten()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let img = image::GrayImage::from_fn(size, size, |x, y| {
        let v = matrix[y as usize][x as usize] / max;
        image::Luma([255 - (v * 255.0).round() as u8])
    });
    img.save(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot write image {}: {e}", path.display())))
}
