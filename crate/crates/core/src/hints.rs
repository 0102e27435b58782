//! Turning clusters into hint positions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::similarity::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionRule {
    /// Lower median of the sorted member indices.
    Center,
    /// Largest member index.
    Last,
}

impl PositionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionRule::Center => "center",
            PositionRule::Last => "last",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "center" => Some(PositionRule::Center),
            "last" => Some(PositionRule::Last),
            _ => None,
        }
    }

    /// Pick from a sorted, non-empty member list.
    pub fn pick(self, sorted: &[usize]) -> usize {
        match self {
            PositionRule::Center => sorted[(sorted.len() - 1) / 2],
            PositionRule::Last => sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HintConfig {
    pub teacher_name: String,
    pub metric: MetricSpec,
    pub k: usize,
    pub position_rule: PositionRule,
    /// 1-based, strictly increasing.
    pub hint_positions: Vec<usize>,
    /// Sorted members of each cluster, in the order of `hint_positions`.
    pub cluster_members: Vec<Vec<usize>>,
}

impl HintConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hint_positions.len() != self.k || self.cluster_members.len() != self.k {
            return Err(Error::invariant(format!(
                "expected {} positions and clusters, got {} and {}",
                self.k,
                self.hint_positions.len(),
                self.cluster_members.len()
            )));
        }
        if self.hint_positions.first() == Some(&0) {
            return Err(Error::invariant("hint positions are 1-based"));
        }
        if self.hint_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invariant(format!(
                "hint positions {:?} are not strictly increasing",
                self.hint_positions
            )));
        }
        for (pos, members) in self.hint_positions.iter().zip(&self.cluster_members) {
            if members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invariant(format!("cluster {members:?} is not sorted")));
            }
            if !members.contains(pos) {
                return Err(Error::invariant(format!(
                    "position {pos} is not a member of its cluster {members:?}"
                )));
            }
        }
        Ok(())
    }
}

/// One hint per cluster. Clusters are reported in the order of their
/// selected positions, which for clusters that are contiguous in layer order
/// is the order of their first members.
pub fn select_positions(
    assignment: &ClusterAssignment,
    rule: PositionRule,
    teacher_name: &str,
) -> Result<HintConfig> {
    let k = assignment.k();
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::with_capacity(k);
    for id in 1..=k {
        let members = assignment.members(id);
        if members.is_empty() {
            return Err(Error::invalid(format!("cluster {id} is empty")));
        }
        clusters.push((rule.pick(&members), members));
    }
    clusters.sort_by_key(|(pos, _)| *pos);
    let (hint_positions, cluster_members) = clusters.into_iter().unzip();
    let config = HintConfig {
        teacher_name: teacher_name.into(),
        metric: assignment.config.metric,
        k,
        position_rule: rule,
        hint_positions,
        cluster_members,
    };
    config.validate()?;
    Ok(config)
}

/// Hint positions of the conventional grouping: the last layer of each
/// group of consecutive layers.
pub fn baseline_positions(group_sizes: &[usize]) -> Result<Vec<usize>> {
    if group_sizes.is_empty() {
        return Err(Error::invalid("no groups"));
    }
    if let Some(i) = group_sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("group {} has size 0", i + 1)));
    }
    Ok(group_sizes
        .iter()
        .scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        })
        .collect())
}
