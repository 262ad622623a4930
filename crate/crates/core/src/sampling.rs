//! Importance-sampling plans and baseline robust-training strategies.
//!
//! The cluster-based plan weights every example by the inverse size of its
//! cluster, sharpened per class by the power λ; mini-batches are drawn with
//! replacement from the resulting categorical distribution, so the dataset
//! itself never grows.

use crate::datagen::{ClassId, Dataset, Split, SpuriousId};
use crate::error::{Error, Result};
use crate::inference::ClusterResult;
use crate::linalg::Mat;
use crate::model::{gather_rows, Targets, TrainTrace, TwoLayerNet};
use crate::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Erm,
    Cb,
    Gb,
    Spare,
    Jtt,
    Gdro,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "erm" => Strategy::Erm,
            "cb" => Strategy::Cb,
            "gb" => Strategy::Gb,
            "spare" => Strategy::Spare,
            "jtt" => Strategy::Jtt,
            "gdro" => Strategy::Gdro,
            other => return Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Erm => "erm",
            Strategy::Cb => "cb",
            Strategy::Gb => "gb",
            Strategy::Spare => "spare",
            Strategy::Jtt => "jtt",
            Strategy::Gdro => "gdro",
        }
    }
}

/// Whether the per-class sums in the sampling rule run over the class or
/// the whole dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NormScope {
    #[default]
    PerClass,
    Global,
}

/// Draw distribution over train examples; indices are positions into
/// `dataset.examples`, `p` sums to one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub strategy: String,
    /// Positions into `dataset.examples`, in dataset order.
    pub indices: Vec<usize>,
    /// Raw weights (1/cluster size for the cluster-based plan).
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub lambda_per_class: BTreeMap<ClassId, u32>,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("plan probabilities sum to {total}")));
        }
        if self.probabilities.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidParameter("negative sampling probability".into()));
        }
        Ok(())
    }
}

/// Cluster-balancing plan: w_i = 1/|cluster(i)|, p_i ∝ w_i^λ within each
/// class, classes mixed by their original frequencies.
pub fn spare_weights(
    clusters: &ClusterResult,
    lambda_override: Option<u32>,
    scope: NormScope,
) -> Result<SamplingPlan> {
    let mut entries: Vec<(usize, ClassId, f64, u32)> = Vec::new();
    let mut lambda_per_class = BTreeMap::new();
    for (&class, cc) in &clusters.per_class {
        let lambda = lambda_override.unwrap_or(cc.lambda);
        lambda_per_class.insert(class, lambda);
        for (&idx, &cluster) in cc.example_indices.iter().zip(&cc.assignment) {
            let size = cc.cluster_sizes[cluster];
            if size == 0 {
                return Err(Error::InvalidParameter("empty cluster in plan".into()));
            }
            entries.push((idx, class, 1.0 / size as f64, lambda));
        }
    }
    entries.sort_by_key(|e| e.0);
    let n = entries.len();
    if n == 0 {
        return Err(Error::EmptyInput("cluster result"));
    }

    let mut probabilities = vec![0.0; n];
    match scope {
        NormScope::PerClass => {
            let mut class_mass: BTreeMap<ClassId, f64> = BTreeMap::new();
            let mut class_count: BTreeMap<ClassId, usize> = BTreeMap::new();
            for (_, class, w, lambda) in &entries {
                *class_mass.entry(*class).or_insert(0.0) += w.powi(*lambda as i32);
                *class_count.entry(*class).or_insert(0) += 1;
            }
            for (slot, (_, class, w, lambda)) in probabilities.iter_mut().zip(&entries) {
                let class_frequency = class_count[class] as f64 / n as f64;
                *slot = class_frequency * w.powi(*lambda as i32) / class_mass[class];
            }
        }
        NormScope::Global => {
            let total: f64 = entries.iter().map(|(_, _, w, l)| w.powi(*l as i32)).sum();
            for (slot, (_, _, w, lambda)) in probabilities.iter_mut().zip(&entries) {
                *slot = w.powi(*lambda as i32) / total;
            }
        }
    }

    Ok(SamplingPlan {
        strategy: Strategy::Spare.name().to_string(),
        indices: entries.iter().map(|e| e.0).collect(),
        weights: entries.iter().map(|e| e.2).collect(),
        probabilities,
        lambda_per_class,
    })
}

/// p_i ∝ 1/n_class(i).
pub fn class_balance_plan(ds: &Dataset) -> Result<SamplingPlan> {
    let indices = ds.split_indices(Split::Train);
    if indices.is_empty() {
        return Err(Error::EmptyInput("train split"));
    }
    let counts = ds.class_counts(Split::Train);
    let weights: Vec<f64> =
        indices.iter().map(|&i| 1.0 / counts[&ds.examples[i].label] as f64).collect();
    normalized_plan(Strategy::Cb, indices, weights)
}

/// p_i ∝ 1/|group(i)| using the true group labels.
pub fn group_balance_plan(ds: &Dataset) -> Result<SamplingPlan> {
    let indices = ds.split_indices(Split::Train);
    if indices.is_empty() {
        return Err(Error::EmptyInput("train split"));
    }
    let counts = ds.group_counts(Split::Train);
    let weights: Vec<f64> =
        indices.iter().map(|&i| 1.0 / counts[&ds.examples[i].group] as f64).collect();
    normalized_plan(Strategy::Gb, indices, weights)
}

/// Uniform plan over the train split (sampling-based ERM).
pub fn uniform_plan(ds: &Dataset) -> Result<SamplingPlan> {
    let indices = ds.split_indices(Split::Train);
    if indices.is_empty() {
        return Err(Error::EmptyInput("train split"));
    }
    let weights = vec![1.0; indices.len()];
    normalized_plan(Strategy::Erm, indices, weights)
}

fn normalized_plan(strategy: Strategy, indices: Vec<usize>, weights: Vec<f64>) -> Result<SamplingPlan> {
    let total: f64 = weights.iter().sum();
    let probabilities = weights.iter().map(|w| w / total).collect();
    let plan = SamplingPlan {
        strategy: strategy.name().to_string(),
        indices,
        weights,
        probabilities,
        lambda_per_class: BTreeMap::new(),
    };
    plan.validate()?;
    Ok(plan)
}

/// Sampler with O(log n) categorical draws (with replacement).
pub struct MinibatchSampler {
    cumulative: Vec<f64>,
}

impl MinibatchSampler {
    pub fn new(plan: &SamplingPlan) -> Self {
        let mut cumulative = Vec::with_capacity(plan.probabilities.len());
        let mut acc = 0.0;
        for p in &plan.probabilities {
            acc += p;
            cumulative.push(acc);
        }
        MinibatchSampler { cumulative }
    }

    /// Positions into the plan (not dataset indices).
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let last = *self.cumulative.last().unwrap_or(&1.0);
        (0..batch_size)
            .map(|_| {
                let u = rng.random::<f64>() * last;
                self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
            })
            .collect()
    }
}

/// Draw one mini-batch of plan positions.
pub fn sample_minibatch(plan: &SamplingPlan, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    MinibatchSampler::new(plan).sample(batch_size, rng)
}

#[derive(Clone, Debug)]
pub struct SamplerTrainOptions {
    pub eta: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    /// Invoked every `steps_per_epoch` steps with the epoch counter.
    pub steps_per_epoch: usize,
}

/// SGD over mini-batches drawn from the plan. The dataset itself is never
/// copied or grown; only the draw distribution differs from plain ERM.
pub fn train_with_sampler(
    net: &mut TwoLayerNet,
    x: &Mat,
    targets: &Targets,
    plan: &SamplingPlan,
    opts: &SamplerTrainOptions,
    mut on_epoch: impl FnMut(usize, &TwoLayerNet) -> Result<()>,
) -> Result<TrainTrace> {
    plan.validate()?;
    if x.rows != plan.len() {
        return Err(Error::DimensionMismatch {
            context: "sampler plan",
            expected: x.rows,
            got: plan.len(),
        });
    }
    let sampler = MinibatchSampler::new(plan);
    let mut rng = stream(opts.seed, "sampler", 0);
    let mut trace = TrainTrace::default();
    let mut epoch = 0usize;
    let mut epoch_loss = 0.0;
    let mut epoch_batches = 0usize;
    for step in 0..opts.steps {
        let batch = sampler.sample(opts.batch_size, &mut rng);
        let bx = gather_rows(x, &batch);
        let bt = targets.gather(&batch);
        let loss = net.grad_step(&bx, &bt, opts.eta, opts.weight_decay, None)?;
        epoch_loss += loss;
        epoch_batches += 1;
        if (step + 1) % opts.steps_per_epoch.max(1) == 0 {
            trace.losses.push((step + 1, epoch_loss / epoch_batches as f64));
            on_epoch(epoch, net)?;
            epoch += 1;
            epoch_loss = 0.0;
            epoch_batches = 0;
        }
    }
    if epoch_batches > 0 {
        trace.losses.push((opts.steps, epoch_loss / epoch_batches as f64));
    }
    Ok(trace)
}

/// Upsampled index list: every id once plus `factor − 1` extra copies of the
/// flagged ids; training shuffles uniformly over the list.
pub fn jtt_upsample(n: usize, flagged: &[usize], factor: usize) -> Result<Vec<usize>> {
    if factor < 1 {
        return Err(Error::InvalidParameter("upsampling factor must be >= 1".into()));
    }
    for &f in flagged {
        if f >= n {
            return Err(Error::InvalidParameter(format!("flagged id {f} out of range")));
        }
    }
    let mut out: Vec<usize> = (0..n).collect();
    for _ in 1..factor {
        out.extend_from_slice(flagged);
    }
    Ok(out)
}

/// Group weights on the simplex, updated by exponentiated gradient.
#[derive(Clone, Debug)]
pub struct GroupWeights {
    pub groups: Vec<(ClassId, SpuriousId)>,
    pub q: Vec<f64>,
}

impl GroupWeights {
    pub fn uniform(groups: Vec<(ClassId, SpuriousId)>) -> Self {
        let k = groups.len().max(1);
        let q = vec![1.0 / k as f64; groups.len()];
        GroupWeights { groups, q }
    }

    pub fn index_of(&self, g: (ClassId, SpuriousId)) -> Option<usize> {
        self.groups.iter().position(|&x| x == g)
    }
}

/// One group-robust step: exponentiated-gradient ascent on the group
/// weights (groups absent from the batch keep their weight), then a descent
/// step on the q-weighted batch loss.
pub fn gdro_step(
    net: &mut TwoLayerNet,
    x: &Mat,
    targets: &Targets,
    batch_groups: &[(ClassId, SpuriousId)],
    weights: &mut GroupWeights,
    eta_net: f64,
    eta_q: f64,
    weight_decay: f64,
) -> Result<()> {
    let b = x.rows;
    if batch_groups.len() != b {
        return Err(Error::DimensionMismatch {
            context: "gdro batch groups",
            expected: b,
            got: batch_groups.len(),
        });
    }
    let losses = per_example_losses(net, x, targets)?;

    // mean loss per group present in the batch
    let k = weights.groups.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut member = vec![usize::MAX; b];
    for (i, g) in batch_groups.iter().enumerate() {
        let gi = weights
            .index_of(*g)
            .ok_or(Error::UnknownId { kind: "group", id: format!("{g:?}") })?;
        member[i] = gi;
        sums[gi] += losses[i];
        counts[gi] += 1;
    }

    for gi in 0..k {
        let group_loss = if counts[gi] > 0 { sums[gi] / counts[gi] as f64 } else { 0.0 };
        weights.q[gi] *= (eta_q * group_loss).exp();
    }
    let total: f64 = weights.q.iter().sum();
    for q in weights.q.iter_mut() {
        *q /= total;
    }

    // per-example weights so the batch loss is Σ_g q_g · mean_g(loss)
    let example_weights: Vec<f64> = (0..b)
        .map(|i| {
            let gi = member[i];
            weights.q[gi] / counts[gi] as f64
        })
        .collect();
    net.grad_step(x, targets, eta_net, weight_decay, Some(&example_weights))?;
    Ok(())
}

/// Per-example losses (½(f−y)² or −log softmax[y]).
pub fn per_example_losses(net: &TwoLayerNet, x: &Mat, targets: &Targets) -> Result<Vec<f64>> {
    let out = net.forward_batch(x)?;
    match targets {
        Targets::Binary(y) => Ok((0..x.rows)
            .map(|i| {
                let r = out.get(i, 0) - y[i];
                0.5 * r * r
            })
            .collect()),
        Targets::Multiclass(y) => Ok((0..x.rows)
            .map(|i| {
                let row = out.row(i);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                denom.ln() + max - row[y[i]]
            })
            .collect()),
    }
}

/// plan.json payload in dataset order.
#[derive(Serialize, Deserialize)]
pub struct PlanFile {
    pub strategy: String,
    pub lambda_per_class: BTreeMap<ClassId, u32>,
    pub examples: Vec<PlanEntry>,
}

#[derive(Serialize, Deserialize)]
pub struct PlanEntry {
    pub id: usize,
    pub w: f64,
    pub p: f64,
}

impl SamplingPlan {
    pub fn to_plan_file(&self, ds: &Dataset) -> PlanFile {
        PlanFile {
            strategy: self.strategy.clone(),
            lambda_per_class: self.lambda_per_class.clone(),
            examples: self
                .indices
                .iter()
                .zip(self.weights.iter().zip(&self.probabilities))
                .map(|(&idx, (&w, &p))| PlanEntry { id: ds.examples[idx].id, w, p })
                .collect(),
        }
    }
}
