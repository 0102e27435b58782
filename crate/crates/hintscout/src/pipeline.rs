//! The `similarity` and `select` workflows, from manifest to output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hintscout_core::cluster::{kmeans, ClusterConfig, DEFAULT_MAX_ITERATIONS};
use hintscout_core::hints::{select_positions, PositionRule};
use hintscout_core::repr::{pad_channels, represent, DEFAULT_SAMPLE_BUDGET};
use hintscout_core::similarity::similarity_matrix;
use hintscout_core::{ClusterAssignment, HintConfig, LayerRepresentation, MetricSpec, SimilarityMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::{
    assignment_json, hint_config_json, similarity_json, to_json, write_text, MetricJson, TOOL_VERSION,
};
use crate::manifest::{load_dump, Dump};

pub const SIMILARITY_FILE: &str = "similarity.json";
pub const HINT_CONFIG_FILE: &str = "hint_config.json";
pub const ASSIGNMENT_FILE: &str = "assignment.json";
pub const RUN_RECORD_FILE: &str = "run_record.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprOptions {
    pub normalize: bool,
    pub max_samples: usize,
}

impl Default for ReprOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            max_samples: DEFAULT_SAMPLE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    pub metric: MetricSpec,
    pub k: usize,
    pub rule: PositionRule,
    pub max_iterations: usize,
    pub cost_guard: bool,
    pub repr: ReprOptions,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            metric: MetricSpec::cka_linear(),
            k: 3,
            rule: PositionRule::Center,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            cost_guard: true,
            repr: ReprOptions::default(),
        }
    }
}

/// Spatial mean, sample budget, optional z-scoring, then zero-padding.
pub fn representations(dump: &Dump, opts: &ReprOptions) -> Result<Vec<LayerRepresentation>> {
    let reps = dump
        .layers
        .par_iter()
        .map(|layer| {
            let label = format!("layer {} ({})", layer.entry.index, layer.entry.name);
            let build = || {
                let rep = LayerRepresentation::new(layer.entry.index, represent(&layer.blob)?)?
                    .subsample(opts.max_samples)?;
                Ok::<_, hintscout_core::Error>(if opts.normalize { rep.normalized() } else { rep })
            };
            build().map_err(|e| Error::Core(e.context(&label)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pad_channels(reps)?)
}

/// Wall-clock milliseconds per stage. Kept out of the run record so that
/// reruns stay byte-identical.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub load_ms: f64,
    pub represent_ms: f64,
    pub similarity_ms: f64,
    pub cluster_ms: f64,
    pub select_ms: f64,
    pub total_ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub command: String,
    pub manifest: ManifestRef,
    pub config: ConfigEcho,
    pub result: Option<SelectResult>,
    /// Output file names inside the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRef {
    pub path: String,
    pub sha256: String,
    pub model_name: String,
    pub dataset_name: String,
    pub sample_count: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub metric: MetricJson,
    pub k: Option<usize>,
    pub rule: Option<String>,
    pub normalize: bool,
    pub max_samples: usize,
    pub max_iterations: Option<usize>,
    pub cost_guard: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectResult {
    pub positions: Vec<usize>,
    pub cost: f64,
    pub converged: bool,
    pub stop_reason: String,
    pub iterations: usize,
}

fn manifest_ref(path: &Path, dump: &Dump) -> ManifestRef {
    ManifestRef {
        path: path.display().to_string(),
        sha256: dump.manifest_sha256.clone(),
        model_name: dump.manifest.model_name.clone(),
        dataset_name: dump.manifest.dataset_name.clone(),
        sample_count: dump.manifest.sample_count,
        layers: dump.layers.len(),
    }
}

pub struct SimilarityOutcome {
    pub matrix: SimilarityMatrix,
    pub timings: Timings,
    pub files: Vec<PathBuf>,
}

pub struct SelectOutcome {
    pub hint: HintConfig,
    pub assignment: ClusterAssignment,
    pub record: RunRecord,
    pub timings: Timings,
    pub files: Vec<PathBuf>,
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Pairwise similarity of every layer in the dump.
pub fn cmd_similarity(
    manifest: &Path,
    metric: MetricSpec,
    repr: ReprOptions,
    out: &Path,
) -> Result<SimilarityOutcome> {
    metric.validate()?;
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let dump = load_dump(manifest)?;
    timings.load_ms = ms_since(t);

    let t = Instant::now();
    let reps = representations(&dump, &repr)?;
    timings.represent_ms = ms_since(t);

    let t = Instant::now();
    let matrix = similarity_matrix(&reps, &metric)?;
    timings.similarity_ms = ms_since(t);

    ensure_dir(out)?;
    let sim_path = out.join(SIMILARITY_FILE);
    write_text(&sim_path, &similarity_json(&matrix, &dump.names()))?;
    let record = RunRecord {
        tool_version: TOOL_VERSION.into(),
        command: "similarity".into(),
        manifest: manifest_ref(manifest, &dump),
        config: ConfigEcho {
            metric: (&metric).into(),
            k: None,
            rule: None,
            normalize: repr.normalize,
            max_samples: repr.max_samples,
            max_iterations: None,
            cost_guard: None,
        },
        result: None,
        outputs: vec![SIMILARITY_FILE.into(), TIMINGS_FILE.into()],
    };
    let record_path = out.join(RUN_RECORD_FILE);
    write_text(&record_path, &to_json(&record))?;
    timings.total_ms = ms_since(start);
    let timings_path = out.join(TIMINGS_FILE);
    write_text(&timings_path, &to_json(&timings))?;

    Ok(SimilarityOutcome {
        matrix,
        timings,
        files: vec![sim_path, record_path, timings_path],
    })
}

/// Cluster the dump's layers and write the hint config, assignment, run
/// record and timings into `out`.
pub fn cmd_select(manifest: &Path, opts: &SelectOptions, out: &Path) -> Result<SelectOutcome> {
    let config = ClusterConfig {
        max_iterations: opts.max_iterations,
        cost_guard: opts.cost_guard,
        ..ClusterConfig::new(opts.k, opts.metric)
    };
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let dump = load_dump(manifest)?;
    timings.load_ms = ms_since(t);
    config.validate(dump.layers.len())?;

    let t = Instant::now();
    let reps = representations(&dump, &opts.repr)?;
    timings.represent_ms = ms_since(t);

    let t = Instant::now();
    let assignment = kmeans(&reps, &config)?;
    timings.cluster_ms = ms_since(t);

    let t = Instant::now();
    let hint = select_positions(&assignment, opts.rule, &dump.manifest.model_name)?;
    timings.select_ms = ms_since(t);

    ensure_dir(out)?;
    let hint_text = hint_config_json(&hint)?;
    let record = RunRecord {
        tool_version: TOOL_VERSION.into(),
        command: "select".into(),
        manifest: manifest_ref(manifest, &dump),
        config: ConfigEcho {
            metric: (&opts.metric).into(),
            k: Some(opts.k),
            rule: Some(opts.rule.as_str().into()),
            normalize: opts.repr.normalize,
            max_samples: opts.repr.max_samples,
            max_iterations: Some(opts.max_iterations),
            cost_guard: Some(opts.cost_guard),
        },
        result: Some(SelectResult {
            positions: hint.hint_positions.clone(),
            cost: assignment.cost,
            converged: assignment.converged,
            stop_reason: assignment.stop_reason.as_str().into(),
            iterations: assignment.iterations_run,
        }),
        outputs: vec![
            HINT_CONFIG_FILE.into(),
            ASSIGNMENT_FILE.into(),
            TIMINGS_FILE.into(),
        ],
    };

    let files = vec![
        out.join(HINT_CONFIG_FILE),
        out.join(ASSIGNMENT_FILE),
        out.join(RUN_RECORD_FILE),
        out.join(TIMINGS_FILE),
    ];
    write_text(&files[0], &hint_text)?;
    write_text(&files[1], &assignment_json(&assignment))?;
    write_text(&files[2], &to_json(&record))?;
    timings.total_ms = ms_since(start);
    write_text(&files[3], &to_json(&timings))?;

    Ok(SelectOutcome {
        hint,
        assignment,
        record,
        timings,
        files,
    })
}
