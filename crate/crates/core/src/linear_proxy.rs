//! The early-time linear model on ψ-transformed inputs.
//!
//! The transform stacks a scaled copy of the input, a constant bias feature,
//! and a norm feature:
//!
//! ```text
//! ψ(x) = [ √(2/d)·ζ·x ;  √(3/(2d))·ν ;  ϑ₀ + ϑ₁(‖x‖/√d − 1) + ϑ₂(‖x‖/√d − 1)² ]
//! ```
//!
//! with ζ = E[φ'(g)], ϑ₀ = E[φ(g)], ϑ₁ = E[gφ'(g)],
//! ϑ₂ = E[(½g³ − g)φ'(g)] over g ~ N(0,1), and ν = E[gφ'(g)]·√(Tr[Σ²]/d)
//! for the data covariance Σ. Trained with full-batch gradient descent on
//! the same ℓ2 loss as the network, this linear model tracks the network's
//! outputs early in training.

use crate::activation::Activation;
use crate::datagen::{Dataset, Split};
use crate::error::{Error, Result};
use crate::linalg::{dot, min_norm_least_squares, Mat};
use crate::model::{TrainTrace, TwoLayerNet};
use crate::quadrature::gaussian_expect;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const QUAD_NODES: usize = 128;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Activation-dependent constants of the ψ-transform.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PsiConstants {
    pub zeta: f64,
    pub nu: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Compute the constants for an activation; `cov_trace_term` is
/// √(Tr[Σ²]/d), which scales ν.
///
/// Piecewise-linear activations use exact half-Gaussian moments (Gauss–
/// Hermite cannot represent the kink to the 1e-10 tolerance the ReLU
/// constants are verified at); smooth activations use 128-node quadrature.
pub fn activation_constants(activation: Activation, cov_trace_term: f64) -> Result<PsiConstants> {
    let (zeta, theta0, theta1, theta2) = match activation.piecewise_linear_slope() {
        Some(a) => {
            let zeta = (1.0 + a) / 2.0;
            let theta0 = (1.0 - a) * FRAC_1_SQRT_2PI;
            let theta1 = theta0;
            (zeta, theta0, theta1, 0.0)
        }
        None => {
            let zeta = gaussian_expect(|g| activation.dphi(g), QUAD_NODES);
            let theta0 = gaussian_expect(|g| activation.phi(g), QUAD_NODES);
            let theta1 = gaussian_expect(|g| g * activation.dphi(g), QUAD_NODES);
            let theta2 =
                gaussian_expect(|g| (0.5 * g * g * g - g) * activation.dphi(g), QUAD_NODES);
            (zeta, theta0, theta1, theta2)
        }
    };
    Ok(PsiConstants { zeta, nu: theta1 * cov_trace_term, theta0, theta1, theta2 })
}

/// √(Tr[Σ²]/d) for the sample covariance of the rows of `x`.
pub fn cov_trace_term(x: &Mat) -> f64 {
    let (n, d) = (x.rows, x.cols);
    if n == 0 {
        return 0.0;
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    // Tr[Σ²] = ‖XcᵀXc/n‖_F² = ‖XcXcᵀ/n‖_F²; use the smaller Gram.
    let g = if n <= d { centered.mul_bt(&centered) } else { centered.tr_mul(&centered) };
    let fro2: f64 = g.data.iter().map(|v| v * v).sum::<f64>() / (n as f64 * n as f64);
    (fro2 / d as f64).sqrt()
}

/// The linear model split into its data, bias, and norm components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub beta_data: Vec<f64>,
    pub beta_bias: f64,
    pub beta_norm: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        LinearModel { beta_data: vec![0.0; d], beta_bias: 0.0, beta_norm: 0.0 }
    }

    pub fn dimension(&self) -> usize {
        self.beta_data.len()
    }

    fn from_stacked(beta: &[f64]) -> Self {
        let d = beta.len() - 2;
        LinearModel { beta_data: beta[..d].to_vec(), beta_bias: beta[d], beta_norm: beta[d + 1] }
    }
}

/// ψ(x) as a (d+2)-vector.
pub fn psi(x: &[f64], c: &PsiConstants) -> Vec<f64> {
    let d = x.len() as f64;
    let mut out = Vec::with_capacity(x.len() + 2);
    let data_scale = (2.0 / d).sqrt() * c.zeta;
    out.extend(x.iter().map(|v| data_scale * v));
    out.push((3.0 / (2.0 * d)).sqrt() * c.nu);
    let r = dot(x, x).sqrt() / d.sqrt() - 1.0;
    out.push(c.theta0 + c.theta1 * r + c.theta2 * r * r);
    out
}

/// f_lin(x; β) = ψ(x)ᵀβ.
pub fn linear_forward(model: &LinearModel, x: &[f64], c: &PsiConstants) -> f64 {
    let p = psi(x, c);
    let d = model.beta_data.len();
    dot(&p[..d], &model.beta_data) + p[d] * model.beta_bias + p[d + 1] * model.beta_norm
}

/// ψ rows for a whole dataset, cached for training.
#[derive(Clone, Debug)]
pub struct PsiMatrix {
    /// n×(d+2).
    pub mat: Mat,
    pub d: usize,
}

impl PsiMatrix {
    pub fn build(x: &Mat, c: &PsiConstants) -> PsiMatrix {
        let rows: Vec<Vec<f64>> = (0..x.rows).map(|i| psi(x.row(i), c)).collect();
        PsiMatrix { mat: Mat::from_rows(&rows), d: x.cols }
    }

    fn stack(&self, model: &LinearModel) -> Vec<f64> {
        let mut beta = model.beta_data.clone();
        beta.push(model.beta_bias);
        beta.push(model.beta_norm);
        beta
    }

    pub fn outputs(&self, model: &LinearModel) -> Vec<f64> {
        self.mat.mul_vec(&self.stack(model))
    }

    /// ℓ2 loss (1/2n)‖Ψβ − y‖².
    pub fn loss(&self, model: &LinearModel, y: &[f64]) -> f64 {
        let out = self.outputs(model);
        let n = out.len() as f64;
        out.iter().zip(y).map(|(f, t)| (f - t) * (f - t)).sum::<f64>() / (2.0 * n)
    }
}

/// One full-batch step: β(t+1) = β(t) − (η/n)·Ψᵀ(Ψβ(t) − y).
pub fn linear_gd_step(
    model: &LinearModel,
    psi_mat: &PsiMatrix,
    y: &[f64],
    eta: f64,
) -> LinearModel {
    let n = psi_mat.mat.rows;
    assert_eq!(y.len(), n, "label count");
    let mut residual = psi_mat.outputs(model);
    for (r, t) in residual.iter_mut().zip(y) {
        *r -= t;
    }
    let grad = psi_mat.mat.tr_mul_vec(&residual);
    let mut beta = psi_mat.stack(model);
    let scale = eta / n as f64;
    for (b, g) in beta.iter_mut().zip(&grad) {
        *b -= scale * g;
    }
    LinearModel::from_stacked(&beta)
}

/// Per-step loss and output snapshots of the linear recurrence; mirrors the
/// network trainer so the two traces can be compared step by step.
#[derive(Clone, Debug, Default)]
pub struct LinearTrace {
    pub losses: Vec<(usize, f64)>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

pub fn train_linear_full_batch(
    model: &mut LinearModel,
    psi_mat: &PsiMatrix,
    y: &[f64],
    eta: f64,
    steps: usize,
    snapshot_steps: &[usize],
) -> LinearTrace {
    let snap: std::collections::BTreeSet<usize> = snapshot_steps.iter().copied().collect();
    let mut trace = LinearTrace::default();
    for t in 0..=steps {
        if snap.contains(&t) {
            trace.snapshots.push((t, psi_mat.outputs(model)));
        }
        trace.losses.push((t, psi_mat.loss(model, y)));
        if t == steps {
            break;
        }
        *model = linear_gd_step(model, psi_mat, y, eta);
    }
    trace
}

#[derive(Clone, Copy, Debug)]
pub struct ClosedFormOptions {
    /// Solve on the data block only, zeroing the bias and norm components
    /// (the balanced-class simplification used for the late-time analysis).
    pub bias_removed: bool,
    /// Singular values below `cutoff_rel`·σ_max are treated as zero.
    pub cutoff_rel: f64,
}

impl Default for ClosedFormOptions {
    fn default() -> Self {
        ClosedFormOptions { bias_removed: false, cutoff_rel: 1e-10 }
    }
}

/// Minimum-norm least-squares optimum β* = (ΨᵀΨ)†Ψᵀy.
pub fn linear_closed_form(psi_mat: &PsiMatrix, y: &[f64], opts: ClosedFormOptions) -> LinearModel {
    let d = psi_mat.d;
    if opts.bias_removed {
        let n = psi_mat.mat.rows;
        let mut data = Mat::zeros(n, d);
        for i in 0..n {
            data.row_mut(i).copy_from_slice(&psi_mat.mat.row(i)[..d]);
        }
        let beta = min_norm_least_squares(&data, y, opts.cutoff_rel);
        LinearModel { beta_data: beta, beta_bias: 0.0, beta_norm: 0.0 }
    } else {
        let beta = min_norm_least_squares(&psi_mat.mat, y, opts.cutoff_rel);
        LinearModel::from_stacked(&beta)
    }
}

/// Mean squared output gap (1/n)Σ(f_lin − f_net)² at every common snapshot
/// step. Errors if the traces were not recorded at identical steps.
pub fn coupling_gap(net_trace: &TrainTrace, lin_trace: &LinearTrace) -> Result<Vec<(usize, f64)>> {
    if net_trace.snapshots.len() != lin_trace.snapshots.len() {
        return Err(Error::StepMismatch);
    }
    let mut out = Vec::with_capacity(net_trace.snapshots.len());
    for ((sn, net_out), (sl, lin_out)) in net_trace.snapshots.iter().zip(&lin_trace.snapshots) {
        if sn != sl {
            return Err(Error::StepMismatch);
        }
        if net_out.rows != lin_out.len() || net_out.cols != 1 {
            return Err(Error::DimensionMismatch {
                context: "coupling gap outputs",
                expected: lin_out.len(),
                got: net_out.rows,
            });
        }
        let n = lin_out.len() as f64;
        let gap = lin_out
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let diff = f - net_out.get(i, 0);
                diff * diff
            })
            .sum::<f64>()
            / n;
        out.push((*sn, gap));
    }
    Ok(out)
}

/// |f_lin(v) − f_net(v)| on every core feature and every majority-group
/// spurious feature. Keys are "core:<class>" and "spurious:<id>".
pub fn feature_gap(
    net: &TwoLayerNet,
    model: &LinearModel,
    c: &PsiConstants,
    ds: &Dataset,
) -> Result<std::collections::BTreeMap<String, f64>> {
    let mut gaps = std::collections::BTreeMap::new();
    for (class, v) in &ds.bank.core {
        let gap = (linear_forward(model, v, c) - net.forward_scalar(v)?).abs();
        gaps.insert(format!("core:{class}"), gap);
    }
    for g in ds.groups.iter().filter(|g| g.is_majority) {
        if let Some(v) = ds.bank.spurious.get(&g.spurious_id) {
            let gap = (linear_forward(model, v, c) - net.forward_scalar(v)?).abs();
            gaps.insert(format!("spurious:{}", g.spurious_id), gap);
        }
    }
    Ok(gaps)
}

/// Convenience: constants + ψ matrix + ±1 labels for a dataset split.
pub fn proxy_inputs(
    ds: &Dataset,
    split: Split,
    activation: Activation,
) -> Result<(PsiConstants, PsiMatrix, Vec<f64>)> {
    let idx = ds.split_indices(split);
    let x = ds.features_matrix(&idx);
    let consts = activation_constants(activation, cov_trace_term(&x))?;
    let psi_mat = PsiMatrix::build(&x, &consts);
    let y = ds
        .labels(&idx)
        .iter()
        .map(|&l| match l {
            1 => Ok(1.0),
            -1 => Ok(-1.0),
            other => Err(Error::InvalidParameter(format!(
                "linear proxy needs ±1 labels, got {other}"
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((consts, psi_mat, y))
}

// ---- persistence -----------------------------------------------------------

const MAGIC: &[u8; 4] = b"SPLM";
const VERSION: u32 = 1;

pub fn save_linear_model(model: &LinearModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(model.beta_data.len() as u64).to_le_bytes())?;
    for v in model.beta_data.iter().chain([&model.beta_bias, &model.beta_norm]) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_linear_model(path: &Path) -> Result<LinearModel> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad linear model magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Format("unsupported linear model version".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    let mut all = vec![0.0f64; d + 2];
    for v in all.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(LinearModel::from_stacked(&all))
}

#[cfg(test)]
mod tests;
