//! Dataset construction: the synthetic feature model, Colored-MNIST, and
//! group/noise bookkeeping.
//!
//! Synthetic examples follow `x = v_core + v_spurious + noise`, where the
//! bank vectors are pairwise orthogonal and the noise is Gaussian along each
//! feature direction (plus optional isotropic ambient noise on the
//! complement).

mod cmnist;
mod digits;
mod idx;
mod io;

pub use cmnist::{build_cmnist, parse_palette, CmnistOptions, MnistData, DEFAULT_PALETTE};
pub use digits::synthetic_mnist;
pub use idx::{load_idx_file, parse_idx, write_idx, IdxImages, IdxKind};
pub use io::{export_dataset, import_dataset};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::rng::stream;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type ClassId = i32;
pub type SpuriousId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// The orthogonal core/spurious feature vectors and their noise levels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureBank {
    pub dimension: usize,
    pub core: BTreeMap<ClassId, Vec<f64>>,
    pub spurious: BTreeMap<SpuriousId, Vec<f64>>,
    pub core_sigma: BTreeMap<ClassId, f64>,
    pub spurious_sigma: BTreeMap<SpuriousId, f64>,
}

impl FeatureBank {
    /// Empty bank for datasets (like CMNIST) whose features are not built
    /// from an explicit vector model.
    pub fn empty(dimension: usize) -> Self {
        FeatureBank {
            dimension,
            core: BTreeMap::new(),
            spurious: BTreeMap::new(),
            core_sigma: BTreeMap::new(),
            spurious_sigma: BTreeMap::new(),
        }
    }

    fn all_vectors(&self) -> Vec<&Vec<f64>> {
        self.core.values().chain(self.spurious.values()).collect()
    }

    /// Largest |cos| between distinct stored feature vectors.
    pub fn max_normalized_off_diagonal(&self) -> f64 {
        let vs = self.all_vectors();
        let mut worst = 0.0f64;
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let n1 = dot(vs[i], vs[i]).sqrt();
                let n2 = dot(vs[j], vs[j]).sqrt();
                worst = worst.max(dot(vs[i], vs[j]).abs() / (n1 * n2));
            }
        }
        worst
    }

    /// Gram matrix over (cores in class order, then spurious in id order).
    pub fn gram(&self) -> Mat {
        let vs = self.all_vectors();
        let mut g = Mat::zeros(vs.len(), vs.len());
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                g.set(i, j, dot(vs[i], vs[j]));
            }
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.all_vectors() {
            if v.len() != self.dimension {
                return Err(Error::DimensionMismatch {
                    context: "feature bank vector",
                    expected: self.dimension,
                    got: v.len(),
                });
            }
            if dot(v, v) <= 0.0 {
                return Err(Error::InvalidParameter("feature vector with zero norm".into()));
            }
        }
        if self.max_normalized_off_diagonal() > 1e-9 {
            return Err(Error::InvalidParameter(
                "feature bank vectors are not pairwise orthogonal".into(),
            ));
        }
        Ok(())
    }

    pub fn core_magnitude(&self, c: ClassId) -> Result<f64> {
        let v = self.core.get(&c).ok_or(Error::UnknownId { kind: "class", id: c.to_string() })?;
        Ok(dot(v, v).sqrt())
    }

    pub fn spurious_magnitude(&self, s: SpuriousId) -> Result<f64> {
        let v = self
            .spurious
            .get(&s)
            .ok_or(Error::UnknownId { kind: "spurious", id: s.to_string() })?;
        Ok(dot(v, v).sqrt())
    }
}

/// One (class, spurious) group and its declared size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub class_id: ClassId,
    pub spurious_id: SpuriousId,
    pub size: usize,
    pub is_majority: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Example {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: ClassId,
    pub group: (ClassId, SpuriousId),
    pub split: Split,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub bank: FeatureBank,
    pub groups: Vec<GroupSpec>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.bank.dimension
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_counts(&self, split: Split) -> BTreeMap<ClassId, usize> {
        let mut m = BTreeMap::new();
        for e in self.examples.iter().filter(|e| e.split == split) {
            *m.entry(e.label).or_insert(0) += 1;
        }
        m
    }

    pub fn group_counts(&self, split: Split) -> BTreeMap<(ClassId, SpuriousId), usize> {
        let mut m = BTreeMap::new();
        for e in self.examples.iter().filter(|e| e.split == split) {
            *m.entry(e.group).or_insert(0) += 1;
        }
        m
    }

    /// Check declared group sizes against the train split, and class totals.
    pub fn validate_counts(&self) -> Result<()> {
        let counts = self.group_counts(Split::Train);
        for g in &self.groups {
            let got = counts.get(&(g.class_id, g.spurious_id)).copied().unwrap_or(0);
            if got != g.size {
                return Err(Error::InvalidParameter(format!(
                    "group ({}, {}) declares {} train examples but has {}",
                    g.class_id, g.spurious_id, g.size, got
                )));
            }
        }
        let by_class: usize = self.class_counts(Split::Train).values().sum();
        if by_class != self.split_indices(Split::Train).len() {
            return Err(Error::InvalidParameter("class counts do not add up".into()));
        }
        Ok(())
    }

    /// Feature matrix for the given example indices (row per example).
    pub fn features_matrix(&self, indices: &[usize]) -> Mat {
        let d = self.dimension();
        let mut m = Mat::zeros(indices.len(), d);
        for (r, &i) in indices.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&self.examples[i].features);
        }
        m
    }

    pub fn labels(&self, indices: &[usize]) -> Vec<ClassId> {
        indices.iter().map(|&i| self.examples[i].label).collect()
    }

    /// Majority flag per example index, from the group table.
    pub fn majority_flags(&self, indices: &[usize]) -> Vec<bool> {
        let majority: std::collections::BTreeSet<(ClassId, SpuriousId)> = self
            .groups
            .iter()
            .filter(|g| g.is_majority)
            .map(|g| (g.class_id, g.spurious_id))
            .collect();
        indices.iter().map(|&i| majority.contains(&self.examples[i].group)).collect()
    }

    /// Distribution of ‖x‖²/d over the train split (the theory assumes ≈1;
    /// reported, never enforced).
    pub fn input_scale_report(&self) -> InputScaleReport {
        let d = self.dimension() as f64;
        let mut mean = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let idx = self.split_indices(Split::Train);
        for &i in &idx {
            let x = &self.examples[i].features;
            let s = dot(x, x) / d;
            mean += s;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if !idx.is_empty() {
            mean /= idx.len() as f64;
        }
        InputScaleReport { mean, min: lo, max: hi }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InputScaleReport {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Inputs to [`build_feature_bank`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BankSpec {
    pub dimension: usize,
    pub core_magnitudes: BTreeMap<ClassId, f64>,
    pub spurious_magnitudes: BTreeMap<SpuriousId, f64>,
    pub core_sigma: BTreeMap<ClassId, f64>,
    pub spurious_sigma: BTreeMap<SpuriousId, f64>,
    /// Apply a random orthonormal rotation to every vector (keeps the Gram
    /// matrix; the default block layout keeps orthogonality exact instead).
    pub rotate: bool,
    pub rotation_seed: u64,
}

/// Place each feature on its own coordinate block (scaled standard-basis
/// direction), optionally rotated by a random orthonormal map.
pub fn build_feature_bank(spec: &BankSpec) -> Result<FeatureBank> {
    let n_features = spec.core_magnitudes.len() + spec.spurious_magnitudes.len();
    if spec.dimension < n_features {
        return Err(Error::DimensionTooSmall { required: n_features, got: spec.dimension });
    }
    for (&c, &m) in &spec.core_magnitudes {
        if m <= 0.0 {
            return Err(Error::InvalidParameter(format!("core magnitude for class {c} must be > 0")));
        }
    }
    for (&s, &m) in &spec.spurious_magnitudes {
        if m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "spurious magnitude for feature {s} must be > 0"
            )));
        }
    }

    let d = spec.dimension;
    let mut axis = 0usize;
    let mut unit = |mag: f64| {
        let mut v = vec![0.0; d];
        v[axis] = mag;
        axis += 1;
        v
    };
    let core: BTreeMap<ClassId, Vec<f64>> =
        spec.core_magnitudes.iter().map(|(&c, &m)| (c, unit(m))).collect();
    let spurious: BTreeMap<SpuriousId, Vec<f64>> =
        spec.spurious_magnitudes.iter().map(|(&s, &m)| (s, unit(m))).collect();

    let mut bank = FeatureBank {
        dimension: d,
        core,
        spurious,
        core_sigma: spec.core_sigma.clone(),
        spurious_sigma: spec.spurious_sigma.clone(),
    };
    for (&c, _) in &bank.core {
        bank.core_sigma.entry(c).or_insert(0.0);
    }
    for (&s, _) in &bank.spurious {
        bank.spurious_sigma.entry(s).or_insert(0.0);
    }

    if spec.rotate {
        let q = random_rotation(d, spec.rotation_seed);
        for v in bank.core.values_mut().chain(bank.spurious.values_mut()) {
            *v = q.mul_vec(v);
        }
    }
    Ok(bank)
}

/// Random orthonormal matrix from QR (Gram–Schmidt) of a Gaussian matrix.
fn random_rotation(d: usize, seed: u64) -> Mat {
    let mut rng = stream(seed, "rotation", 0);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        // orthogonalize twice for stability
        for _ in 0..2 {
            let projections: Vec<f64> = cols.iter().map(|c| dot(c, &v)).collect();
            for (c, p) in cols.iter().zip(projections) {
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= p * ci;
                }
            }
        }
        let n = dot(&v, &v).sqrt();
        for vi in v.iter_mut() {
            *vi /= n;
        }
        cols.push(v);
    }
    // columns are orthonormal; store as rows of Q^T so mul_vec applies Q
    let mut q = Mat::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            q.set(i, j, c[i]);
        }
    }
    q
}

/// Noise-to-signal ratio σ/‖v‖.
pub fn nsr(magnitude: f64, sigma: f64) -> Result<f64> {
    if magnitude <= 0.0 {
        return Err(Error::InvalidParameter(format!("magnitude must be > 0, got {magnitude}")));
    }
    Ok(sigma / magnitude)
}

/// Generate examples for the given groups; deterministic per `(seed, id)`.
pub fn generate_examples(
    bank: &FeatureBank,
    groups: &[GroupSpec],
    ambient_sigma: f64,
    seed: u64,
    split: Split,
    id_offset: usize,
) -> Result<Vec<Example>> {
    let d = bank.dimension;
    let mut out = Vec::new();
    let mut id = id_offset;
    for g in groups {
        if g.size == 0 {
            return Err(Error::InvalidParameter("group with size 0".into()));
        }
        let vc = bank
            .core
            .get(&g.class_id)
            .ok_or(Error::UnknownId { kind: "class", id: g.class_id.to_string() })?;
        let vs = bank
            .spurious
            .get(&g.spurious_id)
            .ok_or(Error::UnknownId { kind: "spurious", id: g.spurious_id.to_string() })?;
        let sc = *bank.core_sigma.get(&g.class_id).unwrap_or(&0.0);
        let ss = *bank.spurious_sigma.get(&g.spurious_id).unwrap_or(&0.0);
        let nc = dot(vc, vc).sqrt();
        let ns = dot(vs, vs).sqrt();

        for _ in 0..g.size {
            let mut rng = stream(seed, "synthetic-example", id as u64);
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let mut x: Vec<f64> = (0..d).map(|j| vc[j] + vs[j]).collect();
            for j in 0..d {
                x[j] += sc * g1 * vc[j] / nc + ss * g2 * vs[j] / ns;
            }
            if ambient_sigma > 0.0 {
                let mut z: Vec<f64> = (0..d)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        ambient_sigma * v
                    })
                    .collect();
                // ambient noise lives on the complement of every feature
                // direction (the bank is orthogonal, so sequential
                // projection removal is exact)
                for f in bank.core.values().chain(bank.spurious.values()) {
                    let p = dot(&z, f) / dot(f, f);
                    for (zj, fj) in z.iter_mut().zip(f) {
                        *zj -= p * fj;
                    }
                }
                for j in 0..d {
                    x[j] += z[j];
                }
            }
            out.push(Example {
                id,
                features: x,
                label: g.class_id,
                group: (g.class_id, g.spurious_id),
                split,
            });
            id += 1;
        }
    }
    Ok(out)
}

/// Generate a full (train-split) synthetic dataset.
pub fn generate_synthetic(
    bank: &FeatureBank,
    groups: &[GroupSpec],
    ambient_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let examples = generate_examples(bank, groups, ambient_sigma, seed, Split::Train, 0)?;
    let ds = Dataset { examples, bank: bank.clone(), groups: groups.to_vec() };
    ds.validate_counts()?;
    Ok(ds)
}
