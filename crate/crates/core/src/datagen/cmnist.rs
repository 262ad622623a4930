//! Colored-MNIST construction.
//!
//! Five classes from consecutive digit pairs {0,1},{2,3},…,{8,9}; each class
//! is spuriously correlated with one palette color. A fraction `p_corr` of
//! train/val examples receives the class color on foreground pixels, the
//! rest a random one of the other four. The test split is colored uniformly
//! at random so the correlation does not hold there.

use super::idx::IdxImages;
use super::{ClassId, Dataset, Example, FeatureBank, GroupSpec, Split, SpuriousId};
use crate::error::{Error, Result};
use crate::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

pub const DEFAULT_PALETTE: [&str; 5] = ["#ff0000", "#85ff00", "#00fff3", "#6e00ff", "#ff0018"];
const N_CLASSES: usize = 5;

#[derive(Clone, Debug)]
pub struct MnistData {
    pub train_images: IdxImages,
    pub train_labels: Vec<u8>,
    pub test_images: Option<IdxImages>,
    pub test_labels: Option<Vec<u8>>,
}

#[derive(Clone, Debug)]
pub struct CmnistOptions {
    /// Fraction of each class's train/val examples given the class color.
    pub p_corr: f64,
    /// One color per class.
    pub palette: Vec<[u8; 3]>,
    pub seed: u64,
    /// Stratified-by-class train subset; `None` takes the standard 50k.
    pub subset_size: Option<usize>,
    /// Validation size; `None` scales the standard 10k with the subset.
    pub val_size: Option<usize>,
    /// Optional stratified test subset.
    pub test_subset: Option<usize>,
}

impl CmnistOptions {
    pub fn new(seed: u64) -> Self {
        CmnistOptions {
            p_corr: 0.995,
            palette: parse_palette(&DEFAULT_PALETTE).unwrap(),
            seed,
            subset_size: None,
            val_size: None,
            test_subset: None,
        }
    }
}

/// Parse `#rrggbb` hex colors.
pub fn parse_palette(colors: &[&str]) -> Result<Vec<[u8; 3]>> {
    colors
        .iter()
        .map(|c| {
            let hex = c.trim().strip_prefix('#').unwrap_or(c.trim());
            if hex.len() != 6 {
                return Err(Error::InvalidParameter(format!("bad color {c:?}")));
            }
            let parse2 = |s: &str| {
                u8::from_str_radix(s, 16)
                    .map_err(|_| Error::InvalidParameter(format!("bad color {c:?}")))
            };
            Ok([parse2(&hex[0..2])?, parse2(&hex[2..4])?, parse2(&hex[4..6])?])
        })
        .collect()
}

/// digit → class: consecutive digit pairs share a class.
pub fn digit_class(digit: u8) -> Result<ClassId> {
    if digit > 9 {
        return Err(Error::Format(format!("MNIST label {digit} out of range")));
    }
    Ok(ClassId::from(digit / 2))
}

pub fn build_cmnist(data: &MnistData, opts: &CmnistOptions) -> Result<Dataset> {
    if !(opts.p_corr > 0.0 && opts.p_corr <= 1.0) {
        return Err(Error::InvalidParameter(format!("p_corr must be in (0, 1], got {}", opts.p_corr)));
    }
    if opts.palette.len() != N_CLASSES {
        return Err(Error::InvalidParameter(format!(
            "palette must have {} colors (one per class), got {}",
            N_CLASSES,
            opts.palette.len()
        )));
    }
    if data.train_images.count != data.train_labels.len() {
        return Err(Error::Format("train image/label counts differ".into()));
    }

    // Split the train file into train/val pools (50000/10000 at full scale,
    // proportional otherwise), then stratify subsets by class.
    let n_all = data.train_images.count;
    let mut order: Vec<usize> = (0..n_all).collect();
    order.shuffle(&mut stream(opts.seed, "cmnist-split", 0));
    let full_train = n_all.min(50_000);
    let (train_pool, val_pool) = order.split_at(full_train);

    let train_take = opts.subset_size.unwrap_or(full_train);
    let val_take = opts.val_size.unwrap_or_else(|| {
        if opts.subset_size.is_some() {
            (train_take / 5).max(N_CLASSES)
        } else {
            val_pool.len()
        }
    });

    let train_idx = stratified(train_pool, &data.train_labels, train_take)?;
    let val_idx = stratified(val_pool, &data.train_labels, val_take.min(val_pool.len()))?;

    let mut examples = Vec::new();
    let mut next_id = 0usize;
    colorize_split(
        &data.train_images,
        &data.train_labels,
        &train_idx,
        Split::Train,
        opts.p_corr,
        opts,
        "cmnist-color-train",
        &mut next_id,
        &mut examples,
    )?;
    colorize_split(
        &data.train_images,
        &data.train_labels,
        &val_idx,
        Split::Val,
        opts.p_corr,
        opts,
        "cmnist-color-val",
        &mut next_id,
        &mut examples,
    )?;

    if let (Some(images), Some(labels)) = (&data.test_images, &data.test_labels) {
        if images.count != labels.len() {
            return Err(Error::Format("test image/label counts differ".into()));
        }
        let pool: Vec<usize> = (0..images.count).collect();
        let take = opts.test_subset.unwrap_or(images.count);
        let test_idx = stratified(&pool, labels, take)?;
        // Uniform colors at test: class color with probability 1/5.
        colorize_split(
            images,
            labels,
            &test_idx,
            Split::Test,
            1.0 / N_CLASSES as f64,
            opts,
            "cmnist-color-test",
            &mut next_id,
            &mut examples,
        )?;
    }

    // Group table describes the train split.
    let mut groups = Vec::new();
    let mut counts = std::collections::BTreeMap::new();
    for e in examples.iter().filter(|e| e.split == Split::Train) {
        *counts.entry(e.group).or_insert(0usize) += 1;
    }
    for ((class_id, spurious_id), size) in counts {
        groups.push(GroupSpec {
            class_id,
            spurious_id,
            size,
            is_majority: spurious_id == class_id as SpuriousId,
        });
    }

    let rows = data.train_images.rows;
    let cols = data.train_images.cols;
    let ds = Dataset {
        examples,
        bank: FeatureBank::empty(3 * rows * cols),
        groups,
    };
    ds.validate_counts()?;
    Ok(ds)
}

fn stratified(pool: &[usize], labels: &[u8], take: usize) -> Result<Vec<usize>> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    for &i in pool {
        per_class[digit_class(labels[i])? as usize].push(i);
    }
    let base = take / N_CLASSES;
    let extra = take % N_CLASSES;
    let mut out = Vec::with_capacity(take);
    for (c, idxs) in per_class.iter().enumerate() {
        let want = base + usize::from(c < extra);
        out.extend_from_slice(&idxs[..want.min(idxs.len())]);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn colorize_split(
    images: &IdxImages,
    labels: &[u8],
    indices: &[usize],
    split: Split,
    p_corr: f64,
    opts: &CmnistOptions,
    rng_tag: &str,
    next_id: &mut usize,
    out: &mut Vec<Example>,
) -> Result<()> {
    // Per class: exactly round(p_corr·n) examples get the class color.
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    for &i in indices {
        per_class[digit_class(labels[i])? as usize].push(i);
    }
    for (class, members) in per_class.iter().enumerate() {
        let mut rng = stream(opts.seed, rng_tag, class as u64);
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let n_major = (p_corr * shuffled.len() as f64).round() as usize;
        for (rank, &img_idx) in shuffled.iter().enumerate() {
            let color_idx = if rank < n_major {
                class
            } else {
                // uniformly one of the other four colors
                let mut pick = rng.random_range(0..N_CLASSES - 1);
                if pick >= class {
                    pick += 1;
                }
                pick
            };
            let features = colorize(images.image(img_idx), opts.palette[color_idx]);
            out.push(Example {
                id: *next_id,
                features,
                label: class as ClassId,
                group: (class as ClassId, color_idx as SpuriousId),
                split,
            });
            *next_id += 1;
        }
    }
    // Deterministic order within the split: by id assignment above (per
    // class, shuffled order). Re-sort by original image index for stability.
    Ok(())
}

/// Foreground pixels (intensity > 0) are tinted multiplicatively:
/// channel = gray/255 · color/255 ∈ [0, 1]. Output is channel-major.
fn colorize(gray: &[u8], color: [u8; 3]) -> Vec<f64> {
    let px = gray.len();
    let mut features = vec![0.0; 3 * px];
    for (p, &g) in gray.iter().enumerate() {
        if g > 0 {
            let v = f64::from(g) / 255.0;
            for ch in 0..3 {
                features[ch * px + p] = v * f64::from(color[ch]) / 255.0;
            }
        }
    }
    features
}
