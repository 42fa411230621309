//! End-to-end stages behind the CLI subcommands: generate a benchmark,
//! audit its temporal bias, debias it, build distribution-shift splits,
//! and evaluate grounding predictions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::catalog::Catalog;
use crate::config::{PipelineConfig, SplitConfig};
use crate::dataset::{Dataset, DatasetMeta, DatasetStats, Provenance, Split};
use crate::debias::{self, FilterResult, Grouping};
use crate::error::{Error, Result};
use crate::eval::{self, MetricReport, PredictionLine, PredictionSet, RC_DEFAULT_KEYS};
use crate::graph::{self, CommonsenseRuleSet, SamplerState};
use crate::language::{self, IdentityRewriter, Rewriter, TemplateSet};
use crate::manifest::RunManifest;
use crate::manuscript::{self, PositionLedger};
use crate::metrics::{self, Aggregation, AuditReport, BiasLevel};
use crate::seeding;
use crate::trace::{self, GapConfig};

fn in_stage<T>(stage: &'static str, seed: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage, seed))
}

/// Runs the full synthesis pipeline and writes `dataset.jsonl`, one
/// simulator script per video under `scripts/`, and `manifest.json`.
pub fn generate(config: &PipelineConfig, out_dir: &Path) -> Result<DatasetStats> {
    generate_with_rewriter(config, out_dir, &IdentityRewriter)
}

/// [`generate`] with a custom sentence rewriter.
pub fn generate_with_rewriter(
    config: &PipelineConfig,
    out_dir: &Path,
    rewriter: &dyn Rewriter,
) -> Result<DatasetStats> {
    config.validate()?;
    let seed = config.seed;
    let catalog = in_stage("catalog", seed, Catalog::load(&config.catalog))?;
    let rules = in_stage(
        "rules",
        seed,
        CommonsenseRuleSet::load(catalog.clone(), &config.rules),
    )?;
    let graph = in_stage("graph", seed, graph::build_graph(&rules))?;
    if config.chain_length_max > graph.node_count() {
        return Err(Error::InvalidArgument(format!(
            "chain_length_max {} exceeds the {} catalog actions",
            config.chain_length_max,
            graph.node_count()
        )));
    }
    let templates = match &config.templates {
        Some(path) => in_stage("templates", seed, TemplateSet::load(path))?,
        None => TemplateSet::default(),
    };

    let mut scenes: Vec<String> = catalog
        .actions()
        .iter()
        .flat_map(|a| a.valid_scenes.iter().cloned())
        .collect();
    scenes.sort();
    scenes.dedup();

    let provenance = if rewriter.is_identity() {
        Provenance::Template
    } else {
        Provenance::Rewritten
    };

    let mut sampler = SamplerState::new(seeding::derive_seed(seed, "chains", 0));
    let mut length_rng = seeding::stage_rng(seed, "length", 0);
    let mut permute_rng = seeding::stage_rng(seed, "permute", 0);
    let mut casting_rng = seeding::stage_rng(seed, "casting", 0);
    let mut duration_rng = seeding::stage_rng(seed, "durations", 0);
    let mut ledger = PositionLedger::new();
    let gaps = GapConfig {
        gap_min: config.gap_min,
        gap_max: config.gap_max,
    };

    std::fs::create_dir_all(out_dir.join("scripts"))
        .map_err(|e| Error::io(out_dir.join("scripts"), e))?;

    let mut records = Vec::new();
    let mut script_paths = Vec::new();
    let mut video = 0usize;
    while video < config.num_videos {
        let length = length_rng.gen_range(config.chain_length_min..=config.chain_length_max);
        let chain = in_stage(
            "chain",
            seed,
            graph::sample_chain(&graph, length, &mut sampler, config.strategy),
        )?;
        let orderings = in_stage(
            "permute",
            seed,
            manuscript::permute_chain(
                &chain,
                &graph,
                config.permutations_per_chain,
                &mut ledger,
                &mut permute_rng,
            ),
        )?;
        for ordering in orderings {
            if video >= config.num_videos {
                break;
            }
            let video_id = format!("v{video:05}");
            let scene = &scenes[casting_rng.gen_range(0..scenes.len())];
            let agent = &config.agents[casting_rng.gen_range(0..config.agents.len())];
            let manuscript = in_stage(
                "durations",
                seed,
                manuscript::assign_durations(
                    &ordering,
                    &catalog,
                    &config.multipliers,
                    scene,
                    agent,
                    &mut duration_rng,
                ),
            )?;
            let mut trace_rng = seeding::stage_rng(seed, "trace", video as u64);
            let trace = in_stage(
                "trace",
                seed,
                trace::execute(&manuscript, &video_id, gaps, &mut trace_rng),
            )?;
            let sentences = in_stage(
                "language",
                seed,
                language::realize_trace(&templates, &trace, &catalog, rewriter),
            )?;
            records.extend(in_stage(
                "align",
                seed,
                language::align(&trace, &sentences, &catalog, provenance),
            )?);

            let script = in_stage("script", seed, trace::export_program(&manuscript, &catalog))?;
            let rel = format!("scripts/{video_id}.txt");
            std::fs::write(out_dir.join(&rel), script)
                .map_err(|e| Error::io(out_dir.join(&rel), e))?;
            script_paths.push(rel);
            video += 1;
        }
    }

    let mut dataset = Dataset::new(records);
    dataset.meta = DatasetMeta {
        seed,
        config_digest: config.digest(),
        catalog_digest: catalog.digest(),
    };
    dataset.validate()?;
    dataset.write_jsonl(out_dir.join("dataset.jsonl"))?;
    let stats = dataset.stats()?;

    let mut manifest = RunManifest::new(
        seed,
        dataset.meta.config_digest.clone(),
        dataset.meta.catalog_digest.clone(),
        stats.clone(),
    );
    manifest.record_file(out_dir, "dataset.jsonl")?;
    for rel in &script_paths {
        manifest.record_file(out_dir, rel)?;
    }
    manifest.write(out_dir)?;
    Ok(stats)
}

/// Bias audit across all grouping levels, plus start/end heatmaps.
#[derive(Debug, Clone, Serialize)]
pub struct AuditSummary {
    pub levels: Vec<AuditReport>,
}

pub fn audit(
    dataset_path: &Path,
    out_dir: &Path,
    n: usize,
    min_group_size: usize,
    aggregation: Aggregation,
) -> Result<AuditSummary> {
    let dataset = Dataset::load_jsonl(dataset_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut levels = Vec::new();
    for level in [
        BiasLevel::Process,
        BiasLevel::Verb,
        BiasLevel::Object,
        BiasLevel::Composition,
    ] {
        levels.push(metrics::multilevel_tjsd(
            &dataset,
            level,
            n,
            min_group_size,
            aggregation,
        )?);
    }
    let summary = AuditSummary { levels };
    write_json_report(&summary, &out_dir.join("audit.json"))?;
    let matrix = metrics::heatmap_matrix(&dataset, n.max(2))?;
    metrics::write_heatmap_csv(&matrix, out_dir.join("heatmap.csv"))?;
    metrics::write_heatmap_png(&matrix, out_dir.join("heatmap.png"))?;
    Ok(summary)
}

/// Removal method for the `debias` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DebiasMethod {
    Icgf,
    AdversarialFilter,
}

/// Filters the dataset and writes `filtered.jsonl` plus `debias_report.json`.
pub fn debias(
    dataset_path: &Path,
    out_dir: &Path,
    method: DebiasMethod,
    n: usize,
    rho: f64,
    grouping: Grouping,
    seed: u64,
) -> Result<FilterResult> {
    let dataset = Dataset::load_jsonl(dataset_path)?;
    let result = match method {
        DebiasMethod::Icgf => debias::icgf(&dataset, n, rho, grouping, seed)?,
        DebiasMethod::AdversarialFilter => debias::adversarial_filter(&dataset, n, rho, seed)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    result.apply(&dataset).write_jsonl(out_dir.join("filtered.jsonl"))?;
    write_json_report(&result, &out_dir.join("debias_report.json"))?;
    Ok(result)
}

/// Per-split record counts after a split run.
#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub counts: BTreeMap<String, usize>,
}

/// Assigns distribution-shift splits and writes `splits.jsonl`.
pub fn split(
    dataset_path: &Path,
    out_dir: &Path,
    config: &SplitConfig,
    n: usize,
    seed: u64,
) -> Result<SplitSummary> {
    let dataset = Dataset::load_jsonl(dataset_path)?;
    let out = debias::longtail_split(
        &dataset,
        config.skew,
        config.ratios(),
        config.rho,
        n,
        seed,
    )?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    out.write_jsonl(out_dir.join("splits.jsonl"))?;
    let mut counts = BTreeMap::new();
    for rec in &out.records {
        *counts.entry(rec.split.as_str().to_string()).or_insert(0) += 1;
    }
    let summary = SplitSummary { counts };
    write_json_report(&summary, &out_dir.join("split_report.json"))?;
    Ok(summary)
}

/// Evaluation results, overall and per split, with the robustness gap when
/// both test splits are covered.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub overall: MetricReport,
    pub per_split: BTreeMap<String, MetricReport>,
    /// test_high minus test_low, averaged over R@1 thresholds and mIoU.
    pub rc: Option<f64>,
}

/// Scores a prediction file against a dataset. Sample ids are the zero-based
/// record index in the dataset file, as a decimal string.
pub fn evaluate_file(
    dataset_path: &Path,
    predictions_path: &Path,
    thresholds: &[f64],
) -> Result<EvalSummary> {
    let dataset = Dataset::load_jsonl(dataset_path)?;
    let text = std::fs::read_to_string(predictions_path)
        .map_err(|e| Error::io(predictions_path, e))?;

    let mut overall = PredictionSet::default();
    let mut by_split: BTreeMap<Split, PredictionSet> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pred: PredictionLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: predictions_path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(pred.sample_id.clone()) {
            return Err(Error::Parse {
                path: predictions_path.display().to_string(),
                line: i + 1,
                message: format!("duplicate sample_id {:?}", pred.sample_id),
            });
        }
        let index: usize = pred.sample_id.parse().map_err(|_| Error::Parse {
            path: predictions_path.display().to_string(),
            line: i + 1,
            message: format!("sample_id {:?} is not a record index", pred.sample_id),
        })?;
        let rec = dataset.records.get(index).ok_or_else(|| Error::Parse {
            path: predictions_path.display().to_string(),
            line: i + 1,
            message: format!(
                "sample_id {index} out of range for {} records",
                dataset.records.len()
            ),
        })?;
        let p = (pred.pred_start, pred.pred_end);
        let r = (rec.t_s, rec.t_e);
        overall.insert(pred.sample_id.clone(), p, r)?;
        by_split
            .entry(rec.split)
            .or_default()
            .insert(pred.sample_id, p, r)?;
    }

    let overall_report = eval::evaluate(&overall, thresholds)?;
    let mut per_split = BTreeMap::new();
    for (s, set) in &by_split {
        per_split.insert(s.as_str().to_string(), eval::evaluate(set, thresholds)?);
    }
    let rc = match (per_split.get("test_high"), per_split.get("test_low")) {
        (Some(high), Some(low)) => eval::rc(high, low, &RC_DEFAULT_KEYS).ok(),
        _ => None,
    };
    Ok(EvalSummary {
        overall: overall_report,
        per_split,
        rc,
    })
}

/// Writes any serializable report as pretty-printed JSON.
pub fn write_json_report<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}
