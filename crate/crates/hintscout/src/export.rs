//! JSON documents written by the CLI. All output is pretty-printed with a
//! trailing newline and fixed key order, so equal inputs give equal bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use hintscout_core::hints::PositionRule;
use hintscout_core::similarity::MetricKind;
use hintscout_core::{ClusterAssignment, HintConfig, MetricSpec, SimilarityMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Meaning of every layer number in the emitted files.
pub const INDEXING: &str = "1-based over manifest layer order";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbf_fraction: Option<f64>,
}

impl From<&MetricSpec> for MetricJson {
    fn from(m: &MetricSpec) -> Self {
        Self {
            kind: m.kind.as_str().into(),
            rbf_fraction: (m.kind == MetricKind::CkaRbf).then_some(m.rbf_bandwidth_fraction),
        }
    }
}

impl MetricJson {
    pub fn to_spec(&self) -> Result<MetricSpec> {
        let kind = MetricKind::parse(&self.kind)
            .ok_or_else(|| Error::Manifest(format!("unknown metric kind {:?}", self.kind)))?;
        Ok(match kind {
            MetricKind::CkaLinear => MetricSpec::cka_linear(),
            MetricKind::R2Cca => MetricSpec::r2_cca(),
            MetricKind::CkaRbf => MetricSpec::cka_rbf(
                self.rbf_fraction
                    .unwrap_or(hintscout_core::similarity::DEFAULT_RBF_FRACTION),
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintConfigJson {
    pub teacher: String,
    pub metric: MetricJson,
    pub k: usize,
    pub rule: String,
    pub positions: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    pub tool_version: String,
    #[serde(default = "default_indexing")]
    pub indexing: String,
}

fn default_indexing() -> String {
    INDEXING.into()
}

impl From<&HintConfig> for HintConfigJson {
    fn from(h: &HintConfig) -> Self {
        Self {
            teacher: h.teacher_name.clone(),
            metric: (&h.metric).into(),
            k: h.k,
            rule: h.position_rule.as_str().into(),
            positions: h.hint_positions.clone(),
            clusters: h.cluster_members.clone(),
            tool_version: TOOL_VERSION.into(),
            indexing: INDEXING.into(),
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data always serializes");
    s.push('\n');
    s
}

pub fn hint_config_json(config: &HintConfig) -> Result<String> {
    config.validate()?;
    Ok(pretty(&HintConfigJson::from(config)))
}

/// Write the hint config; invalid configs are refused before any byte is
/// written.
pub fn emit_hint_config<W: Write>(config: &HintConfig, sink: &mut W) -> Result<()> {
    let text = hint_config_json(config)?;
    sink.write_all(text.as_bytes())
        .map_err(|e| Error::io("<hint config>", e))
}

pub fn parse_hint_config(text: &str) -> Result<HintConfig> {
    let doc: HintConfigJson = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<hint config>".into(),
        source,
    })?;
    if doc.indexing != INDEXING {
        return Err(Error::Manifest(format!(
            "unsupported indexing {:?}",
            doc.indexing
        )));
    }
    let position_rule = PositionRule::parse(&doc.rule)
        .ok_or_else(|| Error::Manifest(format!("unknown rule {:?}", doc.rule)))?;
    let config = HintConfig {
        teacher_name: doc.teacher,
        metric: doc.metric.to_spec()?,
        k: doc.k,
        position_rule,
        hint_positions: doc.positions,
        cluster_members: doc.clusters,
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Serialize)]
struct SimilarityJson<'a> {
    metric: MetricJson,
    layers: &'a [usize],
    names: &'a [String],
    values: Vec<&'a [f64]>,
    indexing: &'static str,
}

/// Row arrays plus metric metadata.
pub fn similarity_json(s: &SimilarityMatrix, names: &[String]) -> String {
    pretty(&SimilarityJson {
        metric: (&s.metric).into(),
        layers: &s.layer_indices,
        names,
        values: (0..s.len()).map(|i| s.values.row(i)).collect(),
        indexing: INDEXING,
    })
}

#[derive(Debug, Serialize)]
struct AssignmentJson<'a> {
    metric: MetricJson,
    k: usize,
    layers: &'a [usize],
    labels: &'a [usize],
    cost: f64,
    cost_history: &'a [f64],
    iterations: usize,
    converged: bool,
    stop_reason: &'static str,
    config: AssignmentConfigJson,
}

#[derive(Debug, Serialize)]
struct AssignmentConfigJson {
    max_iterations: usize,
    seed_rule: &'static str,
    cost_guard: bool,
}

pub fn assignment_json(a: &ClusterAssignment) -> String {
    pretty(&AssignmentJson {
        metric: (&a.config.metric).into(),
        k: a.k(),
        layers: &a.layer_indices,
        labels: &a.labels,
        cost: a.cost,
        cost_history: &a.cost_history,
        iterations: a.iterations_run,
        converged: a.converged,
        stop_reason: a.stop_reason.as_str(),
        config: AssignmentConfigJson {
            max_iterations: a.config.max_iterations,
            seed_rule: "evenly_spaced_by_index",
            cost_guard: a.config.cost_guard,
        },
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    pretty(value)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> HintConfig {
        HintConfig {
            teacher_name: "resnet110".into(),
            metric: MetricSpec::cka_rbf(0.5).unwrap(),
            k: 3,
            position_rule: PositionRule::Center,
            hint_positions: vec![7, 29, 49],
            cluster_members: vec![(1..=14).collect(), (15..=43).collect(), (44..=54).collect()],
        }
    }

    #[test]
    fn emit_then_parse() {
        let text = hint_config_json(&sample()).unwrap();
        assert_eq!(parse_hint_config(&text).unwrap(), sample());
        assert_eq!(hint_config_json(&sample()).unwrap(), text);
        assert!(text.contains("\"rbf_fraction\": 0.5"));
    }

    #[test]
    fn rbf_fraction_only_for_rbf() {
        let mut h = sample();
        h.metric = MetricSpec::cka_linear();
        assert!(!hint_config_json(&h).unwrap().contains("rbf_fraction"));
    }

    #[test]
    fn refuses_invalid_config() {
        let mut h = sample();
        h.hint_positions = vec![29, 7, 49];
        let mut out = Vec::new();
        let err = emit_hint_config(&h, &mut out).unwrap_err();
        assert!(matches!(err, Error::Core(hintscout_core::Error::Invariant(_))));
        assert!(out.is_empty());
    }
}
