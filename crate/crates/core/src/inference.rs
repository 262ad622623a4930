//! Early-training group inference: per-class clustering of model outputs.
//!
//! Training examples of each class are clustered on the model's outputs
//! (or hidden features); the number of clusters and the later sampling
//! power λ come from silhouette analysis.

use crate::datagen::{ClassId, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{LayerTag, TwoLayerNet};
use crate::parallel;
use crate::rng::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[derive(Clone, Debug)]
pub struct KmeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Within-cluster sum of squares measured after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl KmeansResult {
    /// Within-cluster sum of squares.
    pub fn inertia(&self, points: &[Vec<f64>]) -> f64 {
        self.assignment
            .iter()
            .zip(points)
            .map(|(&c, p)| sq_dist(p, &self.centroids[c]))
            .sum()
    }
}

/// Lloyd iteration with greedy k-means++ seeding and multiple restarts
/// (lowest within-cluster sum of squares wins). Deterministic for a fixed
/// seed; an empty cluster steals the point farthest from its current
/// centroid.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KmeansResult> {
    if points.is_empty() {
        return Err(Error::EmptyInput("kmeans points"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidParameter(format!(
            "kmeans needs 1 <= k <= {} points, got k={k}",
            points.len()
        )));
    }
    const RESTARTS: u64 = 8;
    let mut best: Option<(f64, KmeansResult)> = None;
    for restart in 0..RESTARTS {
        let mut rng = stream(seed, "kmeans-restart", restart);
        let result = kmeans_once(points, k, &mut rng, max_iter, tol);
        let wss = result.inertia(points);
        if best.as_ref().is_none_or(|(b, _)| wss < *b) {
            best = Some((wss, result));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn kmeans_once(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    max_iter: usize,
    tol: f64,
) -> KmeansResult {
    // greedy k-means++: try several candidates per centroid, keep the one
    // that shrinks the total squared distance the most
    let candidates = (2 + (k as f64).log2().ceil() as usize).max(4);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best_candidate = None;
        for _ in 0..candidates {
            let next = if total <= 0.0 {
                rng.random_range(0..points.len())
            } else {
                let mut target = rng.random::<f64>() * total;
                let mut chosen = points.len() - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        chosen = i;
                        break;
                    }
                    target -= w;
                }
                chosen
            };
            let cand = &points[next];
            let new_total: f64 =
                d2.iter().zip(points).map(|(&cur, p)| cur.min(sq_dist(p, cand))).sum();
            if best_candidate
                .as_ref()
                .is_none_or(|&(best_total, _): &(f64, usize)| new_total < best_total)
            {
                best_candidate = Some((new_total, next));
            }
        }
        let (_, next) = best_candidate.expect("candidate sampled");
        centroids.push(points[next].clone());
        let c = centroids.last().unwrap();
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(sq_dist(p, c));
        }
    }

    let mut assignment = vec![0usize; points.len()];
    let mut iterations = 0;
    let mut inertia_history = Vec::new();
    for iter in 0..max_iter {
        iterations = iter + 1;
        // assign
        assignment = parallel::map_slice(points, |p| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, cent) in centroids.iter().enumerate() {
                let d = sq_dist(p, cent);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        });
        inertia_history.push(
            assignment.iter().zip(points).map(|(&c, p)| sq_dist(p, &centroids[c])).sum(),
        );
        // update
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        // repair empty clusters: steal the point farthest from its centroid
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut worst = 0usize;
            let mut worst_d = -1.0;
            for (i, p) in points.iter().enumerate() {
                if counts[assignment[i]] <= 1 {
                    continue;
                }
                let d = sq_dist(p, &centroids[assignment[i]]);
                if d > worst_d {
                    worst_d = d;
                    worst = i;
                }
            }
            let old = assignment[worst];
            counts[old] -= 1;
            for (s, v) in sums[old].iter_mut().zip(&points[worst]) {
                *s -= v;
            }
            assignment[worst] = c;
            counts[c] = 1;
            sums[c] = points[worst].clone();
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let mut new_c = sums[c].clone();
            for v in new_c.iter_mut() {
                *v /= counts[c] as f64;
            }
            shift = shift.max(sq_dist(&new_c, &centroids[c]).sqrt());
            centroids[c] = new_c;
        }
        if shift < tol {
            break;
        }
    }
    // final assignment against the converged centroids
    assignment = parallel::map_slice(points, |p| {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, cent) in centroids.iter().enumerate() {
            let d = sq_dist(p, cent);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    });
    KmeansResult { assignment, centroids, iterations, inertia_history }
}

#[derive(Clone, Debug)]
pub struct SilhouetteResult {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Set when every point sits in one cluster, where the score is 0 by
    /// convention.
    pub single_cluster: bool,
}

/// Rousseeuw silhouettes with Euclidean distance; singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], assignment: &[usize]) -> Result<SilhouetteResult> {
    if points.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            context: "silhouette assignment",
            expected: points.len(),
            got: assignment.len(),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("silhouette points"));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let counts = {
        let mut c = vec![0usize; k];
        for &a in assignment {
            c[a] += 1;
        }
        c
    };
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if occupied <= 1 {
        return Ok(SilhouetteResult {
            scores: vec![0.0; points.len()],
            mean: 0.0,
            single_cluster: true,
        });
    }

    let scores = parallel::map_range(points.len(), |i| {
        let own = assignment[i];
        if counts[own] <= 1 {
            return 0.0;
        }
        let mut sums = vec![0.0f64; k];
        for (j, p) in points.iter().enumerate() {
            if j != i {
                sums[assignment[j]] += sq_dist(&points[i], p).sqrt();
            }
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for (c, &count) in counts.iter().enumerate() {
            if c != own && count > 0 {
                b = b.min(sums[c] / count as f64);
            }
        }
        let denom = a.max(b);
        if denom == 0.0 {
            0.0
        } else {
            (b - a) / denom
        }
    });
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(SilhouetteResult { scores, mean, single_cluster: false })
}

/// Pick k from `k_range` by maximum mean silhouette; ties go to the
/// smallest k. Fewer points than the smallest k gives k = 1.
pub fn choose_k(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<usize> {
    choose_k_detailed(points, k_range, seed).map(|(k, _, _)| k)
}

type ChosenClustering = (usize, Option<KmeansResult>, Option<SilhouetteResult>);

fn choose_k_detailed(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ChosenClustering> {
    if k_range.is_empty() {
        return Err(Error::InvalidParameter("empty k range".into()));
    }
    if points.len() < *k_range.start() {
        return Ok((1, None, None));
    }
    let mut best: Option<(f64, usize, KmeansResult, SilhouetteResult)> = None;
    for k in k_range {
        if k > points.len() {
            break;
        }
        let clustering = kmeans(points, k, stream(seed, "choose-k", k as u64).random(), 100, 1e-9)?;
        let sil = silhouette(points, &clustering.assignment)?;
        if best.as_ref().is_none_or(|(score, ..)| sil.mean > *score) {
            best = Some((sil.mean, k, clustering, sil));
        }
    }
    let (_, k, clustering, sil) = best.expect("k range evaluated at least once");
    Ok((k, Some(clustering), Some(sil)))
}

/// Sampling power from the class's mean silhouette: tight clusters (≥ 0.9)
/// need no extra sharpening, mid scores get 2, low scores get 3.
pub fn choose_lambda(mean_silhouette: f64) -> u32 {
    if mean_silhouette >= 0.9 {
        1
    } else if mean_silhouette >= 0.7 {
        2
    } else {
        3
    }
}

/// Clusters of one class's training examples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassClusters {
    pub k: usize,
    /// Positions into `dataset.examples` (train split, this class).
    pub example_indices: Vec<usize>,
    /// Cluster id per entry of `example_indices`.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub silhouette: Vec<f64>,
    pub mean_silhouette: f64,
    pub lambda: u32,
    pub cluster_sizes: Vec<usize>,
}

impl ClassClusters {
    /// Clusters other than the largest, i.e. the inferred minority.
    pub fn minority_indices(&self) -> Vec<usize> {
        let largest = self
            .cluster_sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap_or(0);
        self.example_indices
            .iter()
            .zip(&self.assignment)
            .filter(|(_, &c)| c != largest)
            .map(|(&i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterResult {
    pub per_class: BTreeMap<ClassId, ClassClusters>,
    pub t_init_epochs: usize,
    pub layer: String,
}

impl ClusterResult {
    /// Every clustered example exactly once.
    pub fn covered_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> =
            self.per_class.values().flat_map(|c| c.example_indices.iter().copied()).collect();
        all.sort_unstable();
        all
    }

    pub fn minority_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> =
            self.per_class.values().flat_map(|c| c.minority_indices()).collect();
        all.sort_unstable();
        all
    }
}

/// Cluster each class's training examples on the model outputs recorded at
/// `t_init_epochs` of plain training.
pub fn infer_groups(
    net: &TwoLayerNet,
    ds: &Dataset,
    t_init_epochs: usize,
    layer: LayerTag,
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ClusterResult> {
    infer_groups_scaled(net, ds, 1.0, t_init_epochs, layer, k_range, seed)
}

/// [`infer_groups`] on inputs multiplied by `input_scale` (must match the
/// scale the network was trained with).
pub fn infer_groups_scaled(
    net: &TwoLayerNet,
    ds: &Dataset,
    input_scale: f64,
    t_init_epochs: usize,
    layer: LayerTag,
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ClusterResult> {
    let train_idx = ds.split_indices(Split::Train);
    let mut x = ds.features_matrix(&train_idx);
    if input_scale != 1.0 {
        for v in x.data.iter_mut() {
            *v *= input_scale;
        }
    }
    let outputs = net.collect_outputs(&x, layer)?;

    let mut classes: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (pos, &i) in train_idx.iter().enumerate() {
        classes.entry(ds.examples[i].label).or_default().push(pos);
    }

    let jobs: Vec<(ClassId, Vec<usize>)> = classes.into_iter().collect();
    let clustered: Vec<Result<(ClassId, ClassClusters)>> = parallel::map_slice(&jobs, |(class, positions)| {
        let example_indices: Vec<usize> = positions.iter().map(|&p| train_idx[p]).collect();
        let points: Vec<Vec<f64>> = positions.iter().map(|&p| outputs[p].clone()).collect();
        let class_seed = stream(seed, "infer-class", *class as u64).random();
        if points.len() < 2 {
            let n = points.len();
            return Ok((*class, ClassClusters {
                k: 1,
                example_indices,
                assignment: vec![0; n],
                centroids: points,
                silhouette: vec![0.0; n],
                mean_silhouette: 0.0,
                lambda: choose_lambda(0.0),
                cluster_sizes: vec![n],
            }));
        }
        let (k, clustering, sil) = choose_k_detailed(&points, k_range.clone(), class_seed)?;
        let clustering = match clustering {
            Some(c) => c,
            None => KmeansResult {
                assignment: vec![0; points.len()],
                centroids: vec![mean_point(&points)],
                iterations: 0,
                inertia_history: Vec::new(),
            },
        };
        let sil = match sil {
            Some(s) => s,
            None => silhouette(&points, &clustering.assignment)?,
        };
        let mut cluster_sizes = vec![0usize; k];
        for &a in &clustering.assignment {
            cluster_sizes[a] += 1;
        }
        Ok((*class, ClassClusters {
            k,
            example_indices,
            assignment: clustering.assignment,
            centroids: clustering.centroids,
            silhouette: sil.scores,
            mean_silhouette: sil.mean,
            lambda: choose_lambda(sil.mean),
            cluster_sizes,
        }))
    });

    let mut per_class = BTreeMap::new();
    for item in clustered {
        let (class, clusters) = item?;
        per_class.insert(class, clusters);
    }
    Ok(ClusterResult { per_class, t_init_epochs, layer: layer.name().to_string() })
}

fn mean_point(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let mut m = vec![0.0; dim];
    for p in points {
        for (a, b) in m.iter_mut().zip(p) {
            *a += b;
        }
    }
    for a in m.iter_mut() {
        *a /= points.len() as f64;
    }
    m
}

/// groups.json payload: one record per clustered training example plus the
/// per-class clustering summary.
#[derive(Serialize, Deserialize)]
pub struct GroupsFile {
    pub examples: BTreeMap<usize, GroupRecord>,
    pub per_class: BTreeMap<ClassId, ClassSummary>,
    pub t_init_epochs: usize,
    pub layer: String,
}

#[derive(Serialize, Deserialize)]
pub struct GroupRecord {
    pub class: ClassId,
    pub cluster: usize,
}

#[derive(Serialize, Deserialize)]
pub struct ClassSummary {
    pub k: usize,
    pub mean_silhouette: f64,
    pub lambda: u32,
    pub cluster_sizes: Vec<usize>,
}

impl ClusterResult {
    pub fn to_groups_file(&self, ds: &Dataset) -> GroupsFile {
        let mut examples = BTreeMap::new();
        let mut per_class = BTreeMap::new();
        for (&class, cc) in &self.per_class {
            for (&idx, &cluster) in cc.example_indices.iter().zip(&cc.assignment) {
                examples.insert(ds.examples[idx].id, GroupRecord { class, cluster });
            }
            per_class.insert(class, ClassSummary {
                k: cc.k,
                mean_silhouette: cc.mean_silhouette,
                lambda: cc.lambda,
                cluster_sizes: cc.cluster_sizes.clone(),
            });
        }
        GroupsFile {
            examples,
            per_class,
            t_init_epochs: self.t_init_epochs,
            layer: self.layer.clone(),
        }
    }
}

#[cfg(test)]
mod tests;
