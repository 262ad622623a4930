//! Two-layer fully connected network, `f(x) = zᵀφ(Wx/√d)/√m`, trained with
//! plain (stochastic) gradient descent on ℓ2 or softmax cross-entropy loss.
//!
//! Hidden-layer activations are kept transposed (`m×batch`) so that each
//! kernel streams the big weight matrix once per batch and parallelizes
//! over hidden rows; all accumulation orders are fixed, so training is
//! bitwise deterministic for a given seed regardless of thread count.

use crate::activation::Activation;
use crate::datagen::{ClassId, Dataset, Split};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    L2,
    CrossEntropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerTag {
    LastLayerOutputs,
    PenultimateFeatures,
}

impl LayerTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "last_layer_outputs" => Ok(LayerTag::LastLayerOutputs),
            "penultimate_features" => Ok(LayerTag::PenultimateFeatures),
            other => Err(Error::InvalidParameter(format!("unknown layer tag {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerTag::LastLayerOutputs => "last_layer_outputs",
            LayerTag::PenultimateFeatures => "penultimate_features",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwoLayerNet {
    /// First layer, m×d.
    pub w: Mat,
    /// Second layer, m×o (o=1 for the binary head).
    pub z: Mat,
    pub activation: Activation,
}

impl TwoLayerNet {
    pub fn m(&self) -> usize {
        self.w.rows
    }

    pub fn d(&self) -> usize {
        self.w.cols
    }

    pub fn o(&self) -> usize {
        self.z.cols
    }
}

/// Symmetric initialization: the second half of the hidden units duplicates
/// the first half's input weights and negates its output weights, so the
/// freshly initialized network is identically zero.
pub fn init_symmetric(
    m: usize,
    d: usize,
    o: usize,
    activation: Activation,
    seed: u64,
) -> Result<TwoLayerNet> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "symmetric initialization requires even hidden width, got m={m}"
        )));
    }
    if d == 0 || o == 0 {
        return Err(Error::InvalidParameter("d and o must be positive".into()));
    }
    let half = m / 2;
    let mut w = Mat::zeros(m, d);
    let mut w_rng = stream(seed, "init-w", 0);
    for r in 0..half {
        for j in 0..d {
            let v: f64 = StandardNormal.sample(&mut w_rng);
            w.set(r, j, v);
        }
    }
    for r in 0..half {
        let (head, tail) = w.data.split_at_mut((half + r) * d);
        tail[..d].copy_from_slice(&head[r * d..r * d + d]);
    }

    let mut z = Mat::zeros(m, o);
    let mut z_rng = stream(seed, "init-z", 0);
    for r in 0..half {
        for q in 0..o {
            let v = if z_rng.random::<bool>() { 1.0 } else { -1.0 };
            z.set(r, q, v);
            z.set(half + r, q, -v);
        }
    }
    Ok(TwoLayerNet { w, z, activation })
}

impl TwoLayerNet {
    /// Hidden pre-activations for a batch, stored m×b.
    fn pre_t(&self, x: &Mat) -> Mat {
        let mut pre = self.w.mul_bt(x);
        let scale = 1.0 / (self.d() as f64).sqrt();
        for v in pre.data.iter_mut() {
            *v *= scale;
        }
        pre
    }

    fn apply_phi(&self, pre: &Mat) -> Mat {
        let mut h = pre.clone();
        for v in h.data.iter_mut() {
            *v = self.activation.phi(*v);
        }
        h
    }

    /// Network outputs for a batch of rows; result is b×o.
    pub fn forward_batch(&self, x: &Mat) -> Result<Mat> {
        if x.cols != self.d() {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.d(),
                got: x.cols,
            });
        }
        let h_t = self.apply_phi(&self.pre_t(x));
        let mut out = h_t.tr_mul(&self.z);
        let scale = 1.0 / (self.m() as f64).sqrt();
        for v in out.data.iter_mut() {
            *v *= scale;
        }
        Ok(out)
    }

    /// Output vector on a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut xm = Mat::zeros(1, x.len());
        xm.row_mut(0).copy_from_slice(x);
        Ok(self.forward_batch(&xm)?.row(0).to_vec())
    }

    /// Scalar output; requires the binary head.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.o() != 1 {
            return Err(Error::InvalidParameter("scalar output needs o=1".into()));
        }
        Ok(self.forward(x)?[0])
    }

    /// Predicted label: sign (ties to +1) for the binary head, argmax with
    /// lowest-index tie-break for the multiclass head.
    pub fn predict_label(&self, x: &[f64]) -> Result<ClassId> {
        let out = self.forward(x)?;
        Ok(decide(&out))
    }

    pub fn predict_batch(&self, x: &Mat) -> Result<Vec<ClassId>> {
        let out = self.forward_batch(x)?;
        Ok((0..out.rows).map(|i| decide(out.row(i))).collect())
    }

    /// Per-example vectors for clustering: the o-dim outputs or the m-dim
    /// scaled hidden features φ(Wx/√d)/√m.
    pub fn collect_outputs(&self, x: &Mat, tag: LayerTag) -> Result<Vec<Vec<f64>>> {
        match tag {
            LayerTag::LastLayerOutputs => {
                let out = self.forward_batch(x)?;
                Ok((0..out.rows).map(|i| out.row(i).to_vec()).collect())
            }
            LayerTag::PenultimateFeatures => {
                if x.cols != self.d() {
                    return Err(Error::DimensionMismatch {
                        context: "collect_outputs input",
                        expected: self.d(),
                        got: x.cols,
                    });
                }
                let h_t = self.apply_phi(&self.pre_t(x));
                let scale = 1.0 / (self.m() as f64).sqrt();
                Ok((0..x.rows)
                    .map(|i| (0..self.m()).map(|r| h_t.get(r, i) * scale).collect())
                    .collect())
            }
        }
    }
}

fn decide(out: &[f64]) -> ClassId {
    if out.len() == 1 {
        if out[0] >= 0.0 {
            1
        } else {
            -1
        }
    } else {
        let mut best = 0usize;
        for (q, &v) in out.iter().enumerate() {
            if v > out[best] {
                best = q;
            }
        }
        best as ClassId
    }
}

/// Training targets; the loss dictates the representation.
#[derive(Clone, Debug)]
pub enum Targets {
    /// ±1 labels for the ℓ2-trained binary head.
    Binary(Vec<f64>),
    /// Class indices in [0, o) for cross-entropy.
    Multiclass(Vec<usize>),
}

impl Targets {
    pub fn from_labels(labels: &[ClassId], loss: Loss, o: usize) -> Result<Targets> {
        match loss {
            Loss::L2 => {
                if o != 1 {
                    return Err(Error::InvalidParameter(
                        "l2 loss is defined for the binary head (o=1); use cross_entropy".into(),
                    ));
                }
                let y = labels
                    .iter()
                    .map(|&l| match l {
                        1 => Ok(1.0),
                        -1 => Ok(-1.0),
                        other => Err(Error::InvalidParameter(format!(
                            "l2 loss needs ±1 labels, got {other}"
                        ))),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Targets::Binary(y))
            }
            Loss::CrossEntropy => {
                if o < 2 {
                    return Err(Error::InvalidParameter("cross_entropy needs o >= 2".into()));
                }
                let y = labels
                    .iter()
                    .map(|&l| {
                        if l >= 0 && (l as usize) < o {
                            Ok(l as usize)
                        } else {
                            Err(Error::InvalidParameter(format!(
                                "label {l} out of range for {o} classes"
                            )))
                        }
                    })
                    .collect::<Result<Vec<usize>>>()?;
                Ok(Targets::Multiclass(y))
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Binary(y) => y.len(),
            Targets::Multiclass(y) => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Binary(y) => Targets::Binary(idx.iter().map(|&i| y[i]).collect()),
            Targets::Multiclass(y) => Targets::Multiclass(idx.iter().map(|&i| y[i]).collect()),
        }
    }

    pub fn loss(&self) -> Loss {
        match self {
            Targets::Binary(_) => Loss::L2,
            Targets::Multiclass(_) => Loss::CrossEntropy,
        }
    }
}

pub struct Gradients {
    pub dw: Mat,
    pub dz: Mat,
    pub loss: f64,
}

impl TwoLayerNet {
    /// Loss and exact gradients at the current weights.
    ///
    /// `weights` are per-example loss weights; `None` means uniform 1/b.
    pub fn gradients(
        &self,
        x: &Mat,
        targets: &Targets,
        weights: Option<&[f64]>,
    ) -> Result<Gradients> {
        let b = x.rows;
        if targets.len() != b {
            return Err(Error::DimensionMismatch {
                context: "gradient targets",
                expected: b,
                got: targets.len(),
            });
        }
        if let Some(w) = weights {
            if w.len() != b {
                return Err(Error::DimensionMismatch {
                    context: "gradient weights",
                    expected: b,
                    got: w.len(),
                });
            }
        }
        let m = self.m() as f64;
        let d = self.d() as f64;
        let o = self.o();

        let pre_t = self.pre_t(x);
        let h_t = self.apply_phi(&pre_t);
        let mut out = h_t.tr_mul(&self.z);
        let mscale = 1.0 / m.sqrt();
        for v in out.data.iter_mut() {
            *v *= mscale;
        }

        let weight_of = |i: usize| weights.map_or(1.0 / b as f64, |w| w[i]);
        let mut delta = Mat::zeros(b, o);
        let mut loss = 0.0;
        match targets {
            Targets::Binary(y) => {
                for i in 0..b {
                    let wi = weight_of(i);
                    let r = out.get(i, 0) - y[i];
                    loss += wi * 0.5 * r * r;
                    delta.set(i, 0, wi * r);
                }
            }
            Targets::Multiclass(y) => {
                for i in 0..b {
                    let wi = weight_of(i);
                    let row = out.row(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut denom = 0.0;
                    for &v in row {
                        denom += (v - max).exp();
                    }
                    loss += wi * (denom.ln() + max - row[y[i]]);
                    for q in 0..o {
                        let p = (row[q] - max).exp() / denom;
                        let ind = if q == y[i] { 1.0 } else { 0.0 };
                        delta.set(i, q, wi * (p - ind));
                    }
                }
            }
        }

        // dZ = Hᵀ Δ / √m  (H stored transposed: m×b)
        let mut dz = h_t.mul(&delta);
        for v in dz.data.iter_mut() {
            *v *= mscale;
        }
        // dH (m×b) = Z Δᵀ / √m, then through φ': dPre = dH ⊙ φ'(pre) / √d
        let mut dpre_t = self.z.mul_bt(&delta);
        let dscale = mscale / d.sqrt();
        for (v, p) in dpre_t.data.iter_mut().zip(&pre_t.data) {
            *v *= self.activation.dphi(*p) * dscale;
        }
        let dw = dpre_t.mul(x);
        Ok(Gradients { dw, dz, loss })
    }

    /// One simultaneous gradient step on both layers.
    pub fn grad_step(
        &mut self,
        x: &Mat,
        targets: &Targets,
        eta: f64,
        weight_decay: f64,
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        let g = self.gradients(x, targets, weights)?;
        apply_update(&mut self.w, &g.dw, eta, weight_decay);
        apply_update(&mut self.z, &g.dz, eta, weight_decay);
        Ok(g.loss)
    }

    pub fn l2_loss(&self, x: &Mat, targets: &Targets) -> Result<f64> {
        match targets {
            Targets::Binary(_) => Ok(self.gradients(x, targets, None)?.loss),
            _ => Err(Error::InvalidParameter("l2_loss needs binary targets".into())),
        }
    }

    pub fn cross_entropy_loss(&self, x: &Mat, targets: &Targets) -> Result<f64> {
        match targets {
            Targets::Multiclass(_) => Ok(self.gradients(x, targets, None)?.loss),
            _ => Err(Error::InvalidParameter("cross_entropy_loss needs class targets".into())),
        }
    }
}

fn apply_update(p: &mut Mat, g: &Mat, eta: f64, weight_decay: f64) {
    if weight_decay == 0.0 {
        for (w, gv) in p.data.iter_mut().zip(&g.data) {
            *w -= eta * gv;
        }
    } else {
        for (w, gv) in p.data.iter_mut().zip(&g.data) {
            *w -= eta * (gv + weight_decay * *w);
        }
    }
}

/// Loss per step plus optional per-example output snapshots.
#[derive(Clone, Debug, Default)]
pub struct TrainTrace {
    /// (step, loss at the parameters after `step` updates).
    pub losses: Vec<(usize, f64)>,
    /// Output snapshots at requested steps, b×o each.
    pub snapshots: Vec<(usize, Mat)>,
}

impl TrainTrace {
    pub fn snapshot_steps(&self) -> Vec<usize> {
        self.snapshots.iter().map(|(s, _)| *s).collect()
    }
}

#[derive(Clone, Debug)]
pub struct FullBatchOptions {
    pub eta: f64,
    pub steps: usize,
    pub weight_decay: f64,
    /// Steps at which to record per-example outputs (step t = after t updates).
    pub snapshot_steps: Vec<usize>,
}

/// Full-batch gradient descent; loss is recorded at every step.
pub fn train_full_batch(
    net: &mut TwoLayerNet,
    x: &Mat,
    targets: &Targets,
    opts: &FullBatchOptions,
) -> Result<TrainTrace> {
    let mut trace = TrainTrace::default();
    let snap: std::collections::BTreeSet<usize> = opts.snapshot_steps.iter().copied().collect();
    for t in 0..=opts.steps {
        if snap.contains(&t) {
            trace.snapshots.push((t, net.forward_batch(x)?));
        }
        let g = net.gradients(x, targets, None)?;
        trace.losses.push((t, g.loss));
        if t == opts.steps {
            break;
        }
        apply_update(&mut net.w, &g.dw, opts.eta, opts.weight_decay);
        apply_update(&mut net.z, &g.dz, opts.eta, opts.weight_decay);
    }
    Ok(trace)
}

#[derive(Clone, Debug)]
pub struct SgdOptions {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

/// Epoch-shuffled mini-batch SGD; calls `on_epoch(epoch, net)` after each
/// full pass. The shuffle stream is keyed by `(seed, epoch)`.
pub fn train_sgd(
    net: &mut TwoLayerNet,
    x: &Mat,
    targets: &Targets,
    opts: &SgdOptions,
    mut on_epoch: impl FnMut(usize, &TwoLayerNet) -> Result<()>,
) -> Result<TrainTrace> {
    let n = x.rows;
    if n == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    let bs = opts.batch_size.max(1).min(n);
    let mut trace = TrainTrace::default();
    let mut step = 0usize;
    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(opts.seed, "sgd-shuffle", epoch as u64));
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(bs) {
            let bx = gather_rows(x, chunk);
            let bt = targets.gather(chunk);
            let loss = net.grad_step(&bx, &bt, opts.eta, opts.weight_decay, None)?;
            epoch_loss += loss;
            batches += 1;
            step += 1;
        }
        trace.losses.push((step, epoch_loss / batches.max(1) as f64));
        on_epoch(epoch, net)?;
    }
    Ok(trace)
}

/// Global factor that brings the train split to the ‖x‖² ≈ d input scale
/// the network parameterization is calibrated for. Raw image features in
/// [0,1] are far below it, which freezes learning at ordinary step sizes.
pub fn unit_input_scale(ds: &Dataset) -> f64 {
    let report = ds.input_scale_report();
    if report.mean > 0.0 {
        (1.0 / report.mean).sqrt()
    } else {
        1.0
    }
}

pub fn gather_rows(x: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(idx.len(), x.cols);
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(i));
    }
    out
}

/// Feature matrix + labels for one split of a dataset.
#[derive(Clone, Debug)]
pub struct DataView {
    pub x: Mat,
    pub labels: Vec<ClassId>,
    /// Positions into `dataset.examples`.
    pub indices: Vec<usize>,
}

impl DataView {
    pub fn from_split(ds: &Dataset, split: Split) -> DataView {
        Self::from_split_scaled(ds, split, 1.0)
    }

    /// View with every feature multiplied by `scale` (see
    /// [`unit_input_scale`]).
    pub fn from_split_scaled(ds: &Dataset, split: Split, scale: f64) -> DataView {
        let indices = ds.split_indices(split);
        let mut x = ds.features_matrix(&indices);
        if scale != 1.0 {
            for v in x.data.iter_mut() {
                *v *= scale;
            }
        }
        DataView { x, labels: ds.labels(&indices), indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

// ---- checkpoint io ---------------------------------------------------------

const MAGIC: &[u8; 4] = b"SPNN";
const VERSION: u32 = 1;

/// Save as: magic "SPNN", version u32, activation tag u8 (leaky slope f64
/// follows the tag only for leaky), m/d/o u64, then W and Z row-major f64,
/// all little-endian.
pub fn save_checkpoint(net: &TwoLayerNet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[net.activation.tag()])?;
    if let Activation::Leaky(a) = net.activation {
        w.write_all(&a.to_le_bytes())?;
    }
    for dim in [net.m(), net.d(), net.o()] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for v in net.w.data.iter().chain(&net.z.data) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TwoLayerNet> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut v4 = [0u8; 4];
    r.read_exact(&mut v4)?;
    if u32::from_le_bytes(v4) != VERSION {
        return Err(Error::Format("unsupported checkpoint version".into()));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let mut slope = 0.0;
    if tag[0] == 1 {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        slope = f64::from_le_bytes(b);
    }
    let activation = Activation::from_tag(tag[0], slope)?;
    let mut b8 = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut b8)?;
        *d = u64::from_le_bytes(b8) as usize;
    }
    let (m, d, o) = (dims[0], dims[1], dims[2]);
    let mut w = Mat::zeros(m, d);
    let mut z = Mat::zeros(m, o);
    for v in w.data.iter_mut().chain(z.data.iter_mut()) {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(TwoLayerNet { w, z, activation })
}

#[cfg(test)]
mod tests;
