//! Cluster-based minority oversampling.
//!
//! The training series are clustered with k-means on fixed-length,
//! min-max-normalized features. Each cluster's majority:minority ratio
//! decides how much minority mass it receives: clusters where the classes
//! mix (small ratio) sit near the decision boundary and get proportionally
//! more replicas. Replicas are exact copies drawn with replacement from the
//! cluster's own minority members.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::{resample_length, Label, LabeledDataset, Sample};
use crate::error::{GtdaError, Result};
use crate::rng::{self, Stream};
use crate::s2i::minmax_normalize;

/// Result of k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index for each feature row.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lower index.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centroids(features: &[Vec<f64>], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = features.iter().map(|x| sq_dist(x, &features[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a centroid
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(next);
        for (i, x) in features.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &features[next]));
        }
    }
    chosen.into_iter().map(|i| features[i].clone()).collect()
}

/// Lloyd's algorithm with k-means++ seeding, Euclidean distance.
///
/// Stops when the relative inertia improvement drops below `tol`, when the
/// assignment stops changing, or after `max_iter` update steps. A cluster
/// that empties is reseeded at the point farthest from its own centroid.
pub fn kmeans(features: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<ClusterModel> {
    let n = features.len();
    if k == 0 || n < k {
        return Err(GtdaError::InvalidInput(format!("k-means needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let dim = features[0].len();
    for (i, row) in features.iter().enumerate() {
        if row.len() != dim {
            return Err(GtdaError::InvalidInput(format!("feature row {i} has dimension {} != {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GtdaError::InvalidInput(format!("feature row {i} has a non-finite value")));
        }
    }

    let mut rng = rng::stream(seed, Stream::Clustering);
    let mut centroids = seed_centroids(features, k, &mut rng);
    let mut assignment = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let assign = |centroids: &[Vec<f64>], assignment: &mut [usize], dists: &mut [f64]| -> bool {
        let mut changed = false;
        for (i, x) in features.iter().enumerate() {
            let (j, d) = nearest(x, centroids);
            changed |= assignment[i] != j;
            assignment[i] = j;
            dists[i] = d;
        }
        changed
    };
    assign(&centroids, &mut assignment, &mut dists);
    let mut inertia: f64 = dists.iter().sum();
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iter && inertia > 0.0 {
        iterations += 1;
        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (x, &j) in features.iter().zip(&assignment) {
            sizes[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            }
        }
        for j in 0..k {
            if sizes[j] == 0 {
                let far = (0..n)
                    .filter(|&i| sizes[assignment[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    sizes[assignment[i]] -= 1;
                    sizes[j] = 1;
                    centroids[j] = features[i].clone();
                    assignment[i] = j;
                    dists[i] = 0.0;
                }
            }
        }
        let changed = assign(&centroids, &mut assignment, &mut dists);
        let next: f64 = dists.iter().sum();
        history.push(next);
        let improvement = if inertia > 0.0 { (inertia - next) / inertia } else { 0.0 };
        inertia = next;
        if !changed || improvement < tol {
            break;
        }
    }

    Ok(ClusterModel {
        k,
        centroids,
        assignment,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Clustering features: each series interpolated to `dim` points, then
/// min-max normalized.
pub fn clustering_features(ds: &LabeledDataset, dim: usize) -> Result<Vec<Vec<f64>>> {
    ds.samples()
        .iter()
        .map(|s| Ok(minmax_normalize(&resample_length(&s.series, dim)?).values().to_vec()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClusterCount {
    pub n_majority: usize,
    pub n_minority: usize,
}

/// Per-cluster class tallies.
pub fn cluster_counts(model: &ClusterModel, labels: &[Label]) -> Result<Vec<ClusterCount>> {
    if labels.len() != model.assignment.len() {
        return Err(GtdaError::InvalidInput(format!(
            "{} labels for {} clustered samples",
            labels.len(),
            model.assignment.len()
        )));
    }
    let mut counts = vec![ClusterCount::default(); model.k];
    for (&c, &label) in model.assignment.iter().zip(labels) {
        match label {
            Label::Negative => counts[c].n_majority += 1,
            Label::Positive => counts[c].n_minority += 1,
        }
    }
    Ok(counts)
}

/// How per-cluster targets are derived from the cluster ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrdMode {
    /// The formula as printed: its weight sum collapses to 1, so each
    /// cluster's target is `round(N_MA / m)`.
    Literal,
    /// Per-cluster weight `k/(k−1) · (1 − r_i / Σ r_j)`, mean 1 over clusters.
    Weighted,
}

impl CrdMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CrdMode::Literal => "literal",
            CrdMode::Weighted => "weighted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "literal" => Some(CrdMode::Literal),
            "weighted" => Some(CrdMode::Weighted),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub n_majority: usize,
    pub n_minority: usize,
    /// `N_MA / N_MI`; `None` when the cluster has no minority samples.
    pub ratio: Option<f64>,
    /// Minority count after oversampling.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrdPlan {
    pub clusters: Vec<ClusterPlan>,
    pub mode: CrdMode,
    pub m: f64,
    pub k: usize,
    pub warnings: Vec<String>,
}

impl CrdPlan {
    pub fn total_target(&self) -> usize {
        self.clusters.iter().map(|c| c.target).sum()
    }

    pub fn total_majority(&self) -> usize {
        self.clusters.iter().map(|c| c.n_majority).sum()
    }

    pub fn total_minority(&self) -> usize {
        self.clusters.iter().map(|c| c.n_minority).sum()
    }

    /// Audit report, one cluster per line.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# mode={} m={} k={}", self.mode.as_str(), self.m, self.k);
        let _ = writeln!(out, "# cluster n_majority n_minority ratio target");
        for (i, c) in self.clusters.iter().enumerate() {
            let ratio = c.ratio.map_or_else(|| "undefined".to_string(), |r| format!("{r:.6}"));
            let _ = writeln!(out, "{i} {} {} {ratio} {}", c.n_majority, c.n_minority, c.target);
        }
        out
    }
}

impl fmt::Display for CrdPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_report())
    }
}

/// Per-cluster weights `(1/(k−1)) · (1 − r_i / Σ_j r_j)`. They sum to 1.
pub fn boundary_weights(ratios: &[f64]) -> Vec<f64> {
    let k = ratios.len() as f64;
    let total: f64 = ratios.iter().sum();
    ratios.iter().map(|r| (1.0 - r / total) / (k - 1.0)).collect()
}

/// Target minority count per cluster. Targets never fall below the
/// cluster's current minority count.
pub fn crd_targets(counts: &[ClusterCount], m: f64, mode: CrdMode) -> Result<CrdPlan> {
    let k = counts.len();
    if !(m.is_finite() && m > 0.0) {
        return Err(GtdaError::InvalidInput(format!("CRD ratio m={m} must be positive")));
    }
    if k == 0 {
        return Err(GtdaError::InvalidInput("CRD needs at least one cluster".into()));
    }
    if mode == CrdMode::Weighted && k < 2 {
        return Err(GtdaError::InvalidInput("weighted CRD needs k >= 2".into()));
    }
    let mut warnings = Vec::new();
    let ratios: Vec<Option<f64>> = counts
        .iter()
        .map(|c| (c.n_minority > 0).then(|| c.n_majority as f64 / c.n_minority as f64))
        .collect();
    for (i, r) in ratios.iter().enumerate() {
        if r.is_none() {
            let msg = format!("cluster {i} has no minority samples; its ratio is undefined");
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    // clusters without minority samples drop out of the ratio sum
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let coefficient: Vec<f64> = match mode {
        CrdMode::Literal => vec![1.0; k],
        CrdMode::Weighted if defined.len() < 2 => {
            let msg = "fewer than two clusters hold minority samples; weighted CRD falls back to unit weights".to_string();
            warn!("{msg}");
            warnings.push(msg);
            ratios.iter().map(|r| if r.is_some() { 1.0 } else { 0.0 }).collect()
        }
        CrdMode::Weighted => {
            let kk = defined.len() as f64;
            let mut weights = boundary_weights(&defined).into_iter();
            ratios
                .iter()
                .map(|r| match r {
                    Some(_) => kk * weights.next().expect("one weight per defined ratio"),
                    None => 0.0,
                })
                .collect()
        }
    };

    let clusters = counts
        .iter()
        .zip(&ratios)
        .zip(&coefficient)
        .map(|((c, &ratio), &coef)| {
            let raw = (c.n_majority as f64 / m) * coef;
            let target = (raw.round() as usize).max(c.n_minority);
            ClusterPlan {
                n_majority: c.n_majority,
                n_minority: c.n_minority,
                ratio,
                target,
            }
        })
        .collect();
    Ok(CrdPlan {
        clusters,
        mode,
        m,
        k,
        warnings,
    })
}

/// Random oversampling inside each cluster. Originals come first in input
/// order, then replicas named `<origin>#r<n>`, then the whole set is shuffled.
pub fn ros_oversample(ds: &LabeledDataset, model: &ClusterModel, plan: &CrdPlan, seed: u64) -> Result<LabeledDataset> {
    if model.assignment.len() != ds.len() || plan.clusters.len() != model.k {
        return Err(GtdaError::InvalidInput(
            "CRD plan, cluster model and dataset disagree in size".into(),
        ));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.k];
    for (i, s) in ds.samples().iter().enumerate() {
        if s.label == Label::Positive {
            members[model.assignment[i]].push(i);
        }
    }
    let mut rng = rng::stream(seed, Stream::Oversample);
    let mut out: Vec<Sample> = ds.samples().to_vec();
    let mut replica_no: HashMap<usize, usize> = HashMap::new();
    for (ci, (cluster, pool)) in plan.clusters.iter().zip(&members).enumerate() {
        if pool.len() != cluster.n_minority {
            return Err(GtdaError::InvalidInput(format!(
                "cluster {ci}: plan has {} minority samples, model assigns {}",
                cluster.n_minority,
                pool.len()
            )));
        }
        let need = cluster.target.saturating_sub(pool.len());
        if need > 0 && pool.is_empty() {
            return Err(GtdaError::Data(format!(
                "cluster {ci} needs {need} minority replicas but holds no minority samples"
            )));
        }
        for _ in 0..need {
            let origin = pool[rng.random_range(0..pool.len())];
            let n = replica_no.entry(origin).or_insert(0);
            *n += 1;
            let src = &ds.samples()[origin];
            out.push(Sample {
                series: src.series.with_id(replica_id(src.id(), *n)),
                label: src.label,
            });
        }
    }
    out.shuffle(&mut rng);
    LabeledDataset::new(ds.split(), out)
}

pub fn replica_id(origin: &str, n: usize) -> String {
    format!("{origin}#r{n}")
}

/// Origin id of a replica id, or the id itself for originals.
pub fn origin_id(id: &str) -> &str {
    id.rsplit_once("#r").map_or(id, |(origin, _)| origin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrdConfig {
    pub k: usize,
    pub m: f64,
    pub mode: CrdMode,
    /// Length the series are interpolated to before clustering.
    pub feature_len: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CrdConfig {
    fn default() -> Self {
        CrdConfig {
            k: 6,
            m: 1.0,
            mode: CrdMode::Weighted,
            feature_len: 128,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrdOutcome {
    pub dataset: LabeledDataset,
    pub model: ClusterModel,
    pub plan: CrdPlan,
}

/// Clusters the training split, plans targets and oversamples.
pub fn crd_resample(ds: &LabeledDataset, config: &CrdConfig, seed: u64) -> Result<CrdOutcome> {
    ds.require_both_classes()?;
    let features = clustering_features(ds, config.feature_len)?;
    let model = kmeans(&features, config.k, seed, config.max_iter, config.tol)?;
    let counts = cluster_counts(&model, &ds.labels())?;
    let plan = crd_targets(&counts, config.m, config.mode)?;
    let dataset = ros_oversample(ds, &model, &plan, seed)?;
    Ok(CrdOutcome { dataset, model, plan })
}
