//! Budgeted sample removal for temporal balancing.
//!
//! ICGF minimizes the L1 distance between the kept bin counts and their own
//! uniform level, subject to a removal budget. Because only removals are
//! allowed, the optimum is a water-filled profile: repeatedly take one
//! sample from the currently largest bin, and stop at whichever point along
//! that trajectory scores best. The trajectory is scanned globally, so a
//! budget that would overshoot is simply not spent.
//!
//! The adversarial-filtering baseline walks the same trajectory but
//! measures deviation against the pre-filtering uniform level and always
//! spends its budget until no bin exceeds that fixed target, which leaves
//! the dispersion below the target untouched.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::TemporalBinGrid;
use crate::seeding;

/// Maximum removable fraction of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterBudget {
    pub rho: f64,
}

impl FilterBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!(
                "filtering rate must be in [0, 1), got {rho}"
            )));
        }
        Ok(Self { rho })
    }

    pub fn removals_for(&self, group_size: usize) -> u64 {
        (self.rho * group_size as f64).floor() as u64
    }
}

/// Which records share one filtering problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    PerAction,
    Global,
}

/// Before/after view of one filtered group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFilter {
    pub before: Vec<u64>,
    pub after: Vec<u64>,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Outcome of a filtering pass; indices refer to the input dataset order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterResult {
    pub method: &'static str,
    pub n: usize,
    pub rho: f64,
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub per_group: BTreeMap<String, GroupFilter>,
}

impl FilterResult {
    /// The kept subset as a new dataset (original order preserved).
    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        let mut ds = Dataset::new(
            self.kept
                .iter()
                .map(|&i| dataset.records[i].clone())
                .collect(),
        );
        ds.meta = dataset.meta.clone();
        ds
    }

    pub fn total_objective_after(&self) -> f64 {
        self.per_group.values().map(|g| g.objective_after).sum()
    }
}

/// L1 distance from the histogram to its own uniform level.
pub fn l1_objective(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mean = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - mean).abs()).sum()
}

/// Greedy water-filling trajectory: at each step remove one sample from the
/// largest bin (ties to the lowest index). Returns the removal sequence and
/// the objective after each prefix.
fn waterfill_trajectory(counts: &[u64], budget: u64) -> (Vec<usize>, Vec<f64>) {
    let mut work: Vec<u64> = counts.to_vec();
    let mut sequence = Vec::new();
    let mut objectives = vec![l1_objective(&work)];
    for _ in 0..budget {
        let (bin, &max) = work
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if max == 0 {
            break;
        }
        work[bin] -= 1;
        sequence.push(bin);
        objectives.push(l1_objective(&work));
    }
    (sequence, objectives)
}

/// Kept-count profile minimizing the L1 objective within the budget.
/// Returns (removals per bin, objective before, objective after).
pub(crate) fn optimal_cap_profile(counts: &[u64], budget: u64) -> (Vec<u64>, f64, f64) {
    let (sequence, objectives) = waterfill_trajectory(counts, budget);
    let mut best_m = 0;
    for (m, &obj) in objectives.iter().enumerate() {
        if obj < objectives[best_m] - 1e-12 {
            best_m = m;
        }
    }
    let mut removals = vec![0u64; counts.len()];
    for &bin in &sequence[..best_m] {
        removals[bin] += 1;
    }
    (removals, objectives[0], objectives[best_m])
}

struct GroupProblem {
    /// record indices per bin
    bins: Vec<Vec<usize>>,
    counts: Vec<u64>,
}

fn group_records(
    dataset: &Dataset,
    grid: TemporalBinGrid,
    grouping: Grouping,
) -> Result<BTreeMap<String, GroupProblem>> {
    let mut groups: BTreeMap<String, GroupProblem> = BTreeMap::new();
    let b = grid.bin_count();
    for (idx, rec) in dataset.records.iter().enumerate() {
        let key = match grouping {
            Grouping::PerAction => rec.action_id.clone(),
            Grouping::Global => "all".to_string(),
        };
        let (i, j) = grid.bin_of(rec.t_s, rec.t_e, rec.video_duration)?;
        let bin = grid.bin_index(i, j);
        let group = groups.entry(key).or_insert_with(|| GroupProblem {
            bins: vec![Vec::new(); b],
            counts: vec![0; b],
        });
        group.bins[bin].push(idx);
        group.counts[bin] += 1;
    }
    Ok(groups)
}

fn collect_result(
    dataset: &Dataset,
    method: &'static str,
    n: usize,
    rho: f64,
    seed: u64,
    groups: BTreeMap<String, (GroupProblem, Vec<u64>, f64, f64)>,
) -> FilterResult {
    let mut removed = Vec::new();
    let mut per_group = BTreeMap::new();
    for (key, (problem, removals, obj_before, obj_after)) in groups {
        let mut rng = seeding::stage_rng(seed, &format!("{method}:{key}"), 0);
        let mut after = problem.counts.clone();
        for (bin, &r) in removals.iter().enumerate() {
            after[bin] -= r;
            if r > 0 {
                // uniform seeded choice among the bin's records
                let mut members = problem.bins[bin].clone();
                members.shuffle(&mut rng);
                removed.extend(members.into_iter().take(r as usize));
            }
        }
        per_group.insert(
            key,
            GroupFilter {
                before: problem.counts,
                after,
                objective_before: obj_before,
                objective_after: obj_after,
            },
        );
    }
    removed.sort_unstable();
    let removed_set: std::collections::BTreeSet<usize> = removed.iter().copied().collect();
    let kept: Vec<usize> = (0..dataset.records.len())
        .filter(|i| !removed_set.contains(i))
        .collect();
    FilterResult {
        method,
        n,
        rho,
        kept,
        removed,
        per_group,
    }
}

/// Inequality-constrained global filtering: per group, the L1-optimal
/// removal profile within the group's share of the budget.
pub fn icgf(
    dataset: &Dataset,
    n: usize,
    rho: f64,
    grouping: Grouping,
    seed: u64,
) -> Result<FilterResult> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let budget = FilterBudget::new(rho)?;
    let grid = TemporalBinGrid::new(n)?;
    let groups = group_records(dataset, grid, grouping)?;
    let solved = groups
        .into_iter()
        .map(|(key, problem)| {
            let group_size: u64 = problem.counts.iter().sum();
            let group_budget = budget.removals_for(group_size as usize);
            let (removals, before, after) = optimal_cap_profile(&problem.counts, group_budget);
            (key, (problem, removals, before, after))
        })
        .collect();
    Ok(collect_result(dataset, "icgf", n, rho, seed, solved))
}

/// Adversarial-filtering baseline: removes one sample at a time from the
/// bin with the maximum positive deviation from the pre-filtering uniform
/// level, until the budget is exhausted or no bin deviates.
pub fn adversarial_filter(dataset: &Dataset, n: usize, rho: f64, seed: u64) -> Result<FilterResult> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let budget = FilterBudget::new(rho)?;
    let grid = TemporalBinGrid::new(n)?;
    let groups = group_records(dataset, grid, Grouping::Global)?;
    let solved = groups
        .into_iter()
        .map(|(key, problem)| {
            let total: u64 = problem.counts.iter().sum();
            let target = total as f64 / problem.counts.len() as f64;
            let mut work = problem.counts.clone();
            let mut removals = vec![0u64; work.len()];
            let mut left = budget.removals_for(total as usize);
            loop {
                if left == 0 {
                    break;
                }
                let (bin, &max) = work
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .unwrap();
                if max as f64 - target <= 0.0 {
                    break;
                }
                work[bin] -= 1;
                removals[bin] += 1;
                left -= 1;
            }
            let before = l1_objective(&problem.counts);
            let after = l1_objective(&work);
            (key, (problem, removals, before, after))
        })
        .collect();
    Ok(collect_result(dataset, "af", n, rho, seed, solved))
}

/// Target fractions of the accepted (high-bias) pool per split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test_high: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test_high: 0.2,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test_high];
        if parts.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidArgument("split ratios must be >= 0".into()));
        }
        let sum: f64 = parts.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios sum to {sum} > 1"
            )));
        }
        Ok(())
    }
}

/// Builds the distribution-shift splits: train/val/test_high are sampled
/// with per-bin acceptance probability rank^(-skew) over a seeded random
/// bin permutation (a long-tailed bin distribution); test_low is carved
/// from the rejected remainder by global ICGF at `rho`.
pub fn longtail_split(
    dataset: &Dataset,
    skew: f64,
    ratios: SplitRatios,
    rho: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if skew < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "skew must be >= 0, got {skew}"
        )));
    }
    ratios.validate()?;
    let grid = TemporalBinGrid::new(n)?;
    let b = grid.bin_count();

    // seeded random permutation of bins -> 1-based ranks
    let mut rng = seeding::stage_rng(seed, "longtail:ranks", 0);
    let mut order: Vec<usize> = (0..b).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; b];
    for (r, &bin) in order.iter().enumerate() {
        rank[bin] = r + 1;
    }

    let mut accept_rng = seeding::stage_rng(seed, "longtail:accept", 0);
    let mut accepted = Vec::new();
    for (idx, rec) in dataset.records.iter().enumerate() {
        let (i, j) = grid.bin_of(rec.t_s, rec.t_e, rec.video_duration)?;
        let bin = grid.bin_index(i, j);
        let p = (rank[bin] as f64).powf(-skew);
        if accept_rng.gen::<f64>() < p {
            accepted.push(idx);
        }
    }

    let mut out = dataset.clone();
    for rec in &mut out.records {
        rec.split = Split::Unassigned;
    }

    let mut assign_rng = seeding::stage_rng(seed, "longtail:assign", 0);
    accepted.shuffle(&mut assign_rng);
    let n_train = (ratios.train * accepted.len() as f64).floor() as usize;
    let n_val = (ratios.val * accepted.len() as f64).floor() as usize;
    let n_high = (ratios.test_high * accepted.len() as f64).floor() as usize;
    let mut cursor = accepted.into_iter();
    for &(split, count) in &[
        (Split::Train, n_train),
        (Split::Val, n_val),
        (Split::TestHigh, n_high),
    ] {
        for idx in cursor.by_ref().take(count) {
            out.records[idx].split = split;
        }
    }

    // everything not assigned above (rejected plus rounding leftovers)
    // feeds the balanced low-bias test set
    let remainder: Vec<usize> = out
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Unassigned)
        .map(|(i, _)| i)
        .collect();
    if remainder.is_empty() {
        return Err(Error::InvalidArgument(
            "no remaining records to build the low-bias test set".into(),
        ));
    }
    let pool = Dataset::new(remainder.iter().map(|&i| dataset.records[i].clone()).collect());
    let filtered = icgf(&pool, n, rho, Grouping::Global, seed)?;
    for &kept_local in &filtered.kept {
        out.records[remainder[kept_local]].split = Split::TestLow;
    }

    Ok(out)
}
