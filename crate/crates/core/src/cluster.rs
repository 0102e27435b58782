//! k-means over layers with distance `D = 1 - similarity`.
//!
//! Seeds are layers spread evenly by position (first, center and last for
//! `k = 3`). Each iteration assigns every layer to its nearest centroid and
//! replaces each centroid by the entrywise mean of its members' padded
//! matrices. The loop stops once an assignment repeats.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::map_indexed;
use crate::repr::LayerRepresentation;
use crate::similarity::{MetricSpec, Prepared};

pub const DEFAULT_MAX_ITERATIONS: usize = 100;
/// Rise in cost that trips the guard; absorbs rounding in the means.
const COST_GUARD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRule {
    EvenlySpacedByIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    pub metric: MetricSpec,
    pub max_iterations: usize,
    pub seed_rule: SeedRule,
    /// Stop at the previous labelling when a step would raise the cost.
    /// The entrywise mean does not minimise `1 - similarity`, so plain
    /// alternation can climb.
    pub cost_guard: bool,
}

impl ClusterConfig {
    pub fn new(k: usize, metric: MetricSpec) -> Self {
        Self {
            k,
            metric,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed_rule: SeedRule::EvenlySpacedByIndex,
            cost_guard: true,
        }
    }

    pub fn validate(&self, layers: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if self.k > layers {
            return Err(Error::invalid(format!(
                "k = {} exceeds the number of layers ({layers})",
                self.k
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        self.metric.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// An assignment step reproduced the previous labels.
    Converged,
    /// The next labelling would have cost more; the previous one was kept.
    CostIncrease,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::CostIncrease => "cost_increase",
            StopReason::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// 1-based layer indices, in input order.
    pub layer_indices: Vec<usize>,
    /// Cluster id in `1..=k` for each entry of `layer_indices`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Matrix>,
    /// `Σ_i D(x_i, μ_label(i))` with centroids equal to the member means.
    pub cost: f64,
    /// Cost of each successive labelling against its own member means;
    /// the last entry is `cost`.
    pub cost_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub config: ClusterConfig,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Sorted member layer indices of cluster `id` (1-based).
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut m: Vec<usize> = self
            .labels
            .iter()
            .zip(&self.layer_indices)
            .filter(|(l, _)| **l == id)
            .map(|(_, idx)| *idx)
            .collect();
        m.sort_unstable();
        m
    }
}

/// 1-based seed positions `round(1 + (i - 1)(L - 1)/(k - 1))`, halves
/// rounded down.
pub fn seed_positions(layers: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > layers {
        return Err(Error::invalid(format!(
            "cannot pick {k} seeds from {layers} layers"
        )));
    }
    if k == 1 {
        return Ok(vec![1]);
    }
    let den = k - 1;
    Ok((0..k)
        .map(|i| {
            let num = i * (layers - 1);
            let (q, r) = (num / den, num % den);
            1 + if 2 * r > den { q + 1 } else { q }
        })
        .collect())
}

/// Initial centroids: copies of the layers at the seed positions.
pub fn seed(reps: &[LayerRepresentation], k: usize) -> Result<Vec<Matrix>> {
    Ok(seed_positions(reps.len(), k)?
        .into_iter()
        .map(|p| reps[p - 1].matrix.clone())
        .collect())
}

fn prepare_layers(reps: &[LayerRepresentation], metric: &MetricSpec) -> Result<Vec<Prepared>> {
    map_indexed(reps.len(), |i| {
        metric
            .prepare(&reps[i].matrix, Some(reps[i].original_channels))
            .map_err(|e| e.context(&format!("layer {}", reps[i].layer_index)))
    })
    .into_iter()
    .collect()
}

fn prepare_centroids(centroids: &[Matrix], metric: &MetricSpec) -> Result<Vec<Prepared>> {
    map_indexed(centroids.len(), |j| {
        metric
            .prepare(&centroids[j], None)
            .map_err(|e| e.context(&format!("cluster {}", j + 1)))
    })
    .into_iter()
    .collect()
}

/// `L x k` grid of distances, row-major by layer.
fn distance_grid(layers: &[Prepared], centroids: &[Prepared], metric: &MetricSpec) -> Result<Vec<f64>> {
    let k = centroids.len();
    map_indexed(layers.len() * k, |p| {
        let (i, j) = (p / k, p % k);
        metric
            .compare(&layers[i], &centroids[j])
            .map(|s| 1.0 - s)
            .map_err(|e| e.context(&format!("cluster {}", j + 1)))
    })
    .into_iter()
    .collect()
}

fn nearest(row: &[f64]) -> usize {
    // strict `<` keeps the lowest id on ties
    let mut best = 0;
    for (j, &d) in row.iter().enumerate().skip(1) {
        if d < row[best] {
            best = j;
        }
    }
    best + 1
}

/// Label each layer with its nearest centroid (ties go to the lower id).
pub fn assign(reps: &[LayerRepresentation], centroids: &[Matrix], metric: &MetricSpec) -> Result<Vec<usize>> {
    let layers = prepare_layers(reps, metric)?;
    let cents = prepare_centroids(centroids, metric)?;
    let grid = distance_grid(&layers, &cents, metric)?;
    Ok(grid.chunks(centroids.len()).map(nearest).collect())
}

/// Entrywise mean of each cluster's member matrices.
pub fn update(reps: &[LayerRepresentation], labels: &[usize], k: usize) -> Result<Vec<Matrix>> {
    if labels.len() != reps.len() {
        return Err(Error::shape("one label per layer required"));
    }
    let (rows, cols) = match reps.first() {
        Some(r) => (r.matrix.rows(), r.matrix.cols()),
        None => return Err(Error::invalid("no layers")),
    };
    let mut sums = vec![Matrix::zeros(rows, cols); k];
    let mut counts = vec![0usize; k];
    for (rep, &label) in reps.iter().zip(labels) {
        if !(1..=k).contains(&label) {
            return Err(Error::invalid(format!("label {label} outside 1..={k}")));
        }
        if rep.matrix.rows() != rows || rep.matrix.cols() != cols {
            return Err(Error::shape(format!(
                "layer {} is {}x{}, expected padded {rows}x{cols}",
                rep.layer_index,
                rep.matrix.rows(),
                rep.matrix.cols()
            )));
        }
        sums[label - 1].add_assign(&rep.matrix);
        counts[label - 1] += 1;
    }
    for (j, (m, &c)) in sums.iter_mut().zip(&counts).enumerate() {
        if c == 0 {
            return Err(Error::invalid(format!("cluster {} is empty", j + 1)));
        }
        let inv = 1.0 / c as f64;
        m.data_mut().iter_mut().for_each(|v| *v *= inv);
    }
    Ok(sums)
}

/// Move the worst-fitting layer of a multi-member cluster into each empty
/// cluster, lowest empty id first.
fn repair_empty(labels: &mut [usize], grid: &[f64], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l - 1] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut worst: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l - 1] < 2 {
                continue;
            }
            let d = grid[i * k + l - 1];
            if worst.is_none_or(|(_, w)| d > w) {
                worst = Some((i, d));
            }
        }
        match worst {
            Some((i, _)) => labels[i] = empty + 1,
            // k <= L guarantees some cluster has two members
            None => return,
        }
    }
}

fn assignment_cost(labels: &[usize], grid: &[f64], k: usize) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| grid[i * k + l - 1]).sum()
}

/// Run k-means from the evenly spaced seeds.
pub fn kmeans(reps: &[LayerRepresentation], config: &ClusterConfig) -> Result<ClusterAssignment> {
    config.validate(reps.len())?;
    let metric = &config.metric;
    let k = config.k;
    let layers = prepare_layers(reps, metric)?;

    let mut centroids = seed(reps, k)?;
    let mut labels: Vec<usize> = Vec::new();
    let mut previous: Option<(Vec<usize>, Vec<Matrix>)> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let stop_reason = loop {
        let cents = prepare_centroids(&centroids, metric)?;
        let grid = distance_grid(&layers, &cents, metric)?;
        if !labels.is_empty() {
            // centroids are the means of `labels` here
            let cost = assignment_cost(&labels, &grid, k);
            if let (true, Some(&last)) = (config.cost_guard, history.last()) {
                if cost > last + COST_GUARD_SLACK {
                    if let Some((l, c)) = previous.take() {
                        labels = l;
                        centroids = c;
                    }
                    break StopReason::CostIncrease;
                }
            }
            history.push(cost);
        }
        let mut next: Vec<usize> = grid.chunks(k).map(nearest).collect();
        repair_empty(&mut next, &grid, k);
        if next == labels {
            break StopReason::Converged;
        }
        if iterations == config.max_iterations {
            break StopReason::MaxIterations;
        }
        let means = update(reps, &next, k)?;
        previous = Some((
            core::mem::replace(&mut labels, next),
            core::mem::replace(&mut centroids, means),
        ));
        iterations += 1;
    };

    let cost = *history.last().unwrap_or(&0.0);
    Ok(ClusterAssignment {
        layer_indices: reps.iter().map(|r| r.layer_index).collect(),
        labels,
        centroids,
        cost,
        cost_history: history,
        iterations_run: iterations,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        config: *config,
    })
}
