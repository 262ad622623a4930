//! Dataset persistence: a JSON metadata file plus a binary tensor file.
//!
//! Binary layout (all little-endian): magic "SPDS", version u32, n u64,
//! d u64, features as n·d f64 row-major, then n u32 class indices, then
//! n u32 group indices. Class values, the group table, splits (examples are
//! stored train/val/test-contiguous) and the feature bank live in the JSON.

use super::{ClassId, Dataset, Example, FeatureBank, GroupSpec, Split};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"SPDS";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    seed: Option<u64>,
    classes: Vec<ClassId>,
    groups: Vec<GroupSpec>,
    bank: FeatureBank,
    split_counts: SplitCounts,
}

#[derive(Serialize, Deserialize)]
struct SplitCounts {
    train: usize,
    val: usize,
    test: usize,
}

/// Write `<stem>.spds` and `<stem>.json`.
pub fn export_dataset(ds: &Dataset, stem: &Path, seed: Option<u64>) -> Result<()> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&i| (ds.examples[i].split, ds.examples[i].id));

    let classes: Vec<ClassId> = {
        let mut c: Vec<ClassId> = ds.examples.iter().map(|e| e.label).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let class_index = |label: ClassId| classes.iter().position(|&c| c == label).unwrap() as u32;

    // A CMNIST test split can contain groups absent from the (train-derived)
    // table; extend the table so every example is indexable.
    let mut groups = ds.groups.clone();
    for e in &ds.examples {
        if !groups.iter().any(|spec| (spec.class_id, spec.spurious_id) == e.group) {
            groups.push(GroupSpec {
                class_id: e.group.0,
                spurious_id: e.group.1,
                size: 0,
                is_majority: false,
            });
        }
    }
    let group_index_ext = |g: (ClassId, u32)| -> u32 {
        groups.iter().position(|spec| (spec.class_id, spec.spurious_id) == g).unwrap() as u32
    };

    let counts = SplitCounts {
        train: ds.split_indices(Split::Train).len(),
        val: ds.split_indices(Split::Val).len(),
        test: ds.split_indices(Split::Test).len(),
    };

    let meta = Metadata {
        seed,
        classes: classes.clone(),
        groups: groups.clone(),
        bank: ds.bank.clone(),
        split_counts: counts,
    };
    let json_path = stem.with_extension("json");
    let file = std::fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &meta)?;

    let bin_path = stem.with_extension("spds");
    let mut w = BufWriter::new(std::fs::File::create(&bin_path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    w.write_all(&(ds.dimension() as u64).to_le_bytes())?;
    for &i in &order {
        for v in &ds.examples[i].features {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for &i in &order {
        w.write_all(&class_index(ds.examples[i].label).to_le_bytes())?;
    }
    for &i in &order {
        w.write_all(&group_index_ext(ds.examples[i].group).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`export_dataset`].
pub fn import_dataset(stem: &Path) -> Result<Dataset> {
    let meta: Metadata = {
        let file = std::fs::File::open(stem.with_extension("json"))?;
        serde_json::from_reader(BufReader::new(file))?
    };
    let mut r = BufReader::new(std::fs::File::open(stem.with_extension("spds"))?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;

    let mut features = vec![0.0f64; n * d];
    let mut buf = [0u8; 8];
    for v in features.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(read_u32(&mut r)? as usize);
    }
    let mut group_ids = Vec::with_capacity(n);
    for _ in 0..n {
        group_ids.push(read_u32(&mut r)? as usize);
    }

    let sc = &meta.split_counts;
    if sc.train + sc.val + sc.test != n {
        return Err(Error::Format("split counts do not sum to n".into()));
    }
    let split_of = |i: usize| {
        if i < sc.train {
            Split::Train
        } else if i < sc.train + sc.val {
            Split::Val
        } else {
            Split::Test
        }
    };

    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let label = *meta
            .classes
            .get(labels[i])
            .ok_or_else(|| Error::Format(format!("class index {} out of range", labels[i])))?;
        let g = meta
            .groups
            .get(group_ids[i])
            .ok_or_else(|| Error::Format(format!("group index {} out of range", group_ids[i])))?;
        examples.push(Example {
            id: i,
            features: features[i * d..(i + 1) * d].to_vec(),
            label,
            group: (g.class_id, g.spurious_id),
            split: split_of(i),
        });
    }

    // Keep only the train-sized groups in the table proper.
    let groups = meta.groups.iter().filter(|g| g.size > 0).copied().collect();
    Ok(Dataset { examples, bank: meta.bank, groups })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
