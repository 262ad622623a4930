use super::*;
use crate::activation::Activation;
use crate::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec};
use crate::model::init_symmetric;
use crate::rng::stream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

/// Monte-Carlo oracle for the Gaussian expectations behind the constants.
fn mc_constants(activation: Activation, samples: usize, seed: u64) -> (PsiConstants, f64) {
    let mut rng = stream(seed, "mc-constants", 0);
    let (mut zeta, mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0);
    let mut sq = [0.0f64; 4];
    for _ in 0..samples {
        let g: f64 = StandardNormal.sample(&mut rng);
        let vals = [
            activation.dphi(g),
            activation.phi(g),
            g * activation.dphi(g),
            (0.5 * g * g * g - g) * activation.dphi(g),
        ];
        zeta += vals[0];
        t0 += vals[1];
        t1 += vals[2];
        t2 += vals[3];
        for (s, v) in sq.iter_mut().zip(vals) {
            *s += v * v;
        }
    }
    let n = samples as f64;
    let means = [zeta / n, t0 / n, t1 / n, t2 / n];
    // largest standard error across the four estimates
    let mut max_se = 0.0f64;
    for (s, m) in sq.iter().zip(means) {
        let var = (s / n - m * m).max(0.0);
        max_se = max_se.max((var / n).sqrt());
    }
    (
        PsiConstants { zeta: means[0], nu: means[2], theta0: means[1], theta1: means[2], theta2: means[3] },
        max_se,
    )
}

#[test]
fn relu_constants_are_exact() {
    let c = activation_constants(Activation::Relu, 1.0).unwrap();
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((c.zeta - 0.5).abs() <= 1e-15);
    assert!((c.theta0 - inv_sqrt_2pi).abs() <= 1e-15);
    assert!((c.theta1 - inv_sqrt_2pi).abs() <= 1e-15);
    assert!(c.theta2.abs() <= 1e-10);
}

#[test]
fn relu_constants_match_monte_carlo() {
    let c = activation_constants(Activation::Relu, 1.0).unwrap();
    let (mc, se) = mc_constants(Activation::Relu, 10_000_000, 1);
    assert!((c.zeta - mc.zeta).abs() <= 3.0 * se, "zeta {} vs {}", c.zeta, mc.zeta);
    assert!((c.theta0 - mc.theta0).abs() <= 3.0 * se);
    assert!((c.theta1 - mc.theta1).abs() <= 3.0 * se);
    assert!((c.theta2 - mc.theta2).abs() <= 3.0 * se);
}

#[test]
fn smooth_constants_match_monte_carlo() {
    for (seed, act) in [Activation::Tanh, Activation::Softplus, Activation::Erf]
        .into_iter()
        .enumerate()
    {
        let c = activation_constants(act, 1.0).unwrap();
        let (mc, se) = mc_constants(act, 2_000_000, 10 + seed as u64);
        let tol = 4.0 * se;
        assert!((c.zeta - mc.zeta).abs() <= tol, "{act:?} zeta");
        assert!((c.theta0 - mc.theta0).abs() <= tol, "{act:?} theta0");
        assert!((c.theta1 - mc.theta1).abs() <= tol, "{act:?} theta1");
        assert!((c.theta2 - mc.theta2).abs() <= tol, "{act:?} theta2");
    }
}

#[test]
fn identity_constants_are_gaussian_moments() {
    let c = activation_constants(Activation::Identity, 1.0).unwrap();
    assert_eq!(c.zeta, 1.0);
    assert_eq!(c.theta0, 0.0);
    assert_eq!(c.theta1, 0.0);
    assert_eq!(c.theta2, 0.0);
}

#[test]
fn leaky_zeta_closed_form_and_quadrature_agree() {
    for a in [0.0, 0.1, 0.5] {
        let closed = activation_constants(Activation::Leaky(a), 1.0).unwrap();
        assert!((closed.zeta - (1.0 + a) / 2.0).abs() <= 1e-15);
        // symmetric nodes make the quadrature of the step derivative exact
        let quad = gaussian_expect(|g| Activation::Leaky(a).dphi(g), 128);
        assert!((quad - closed.zeta).abs() <= 1e-12);
    }
}

#[test]
fn nu_scales_with_trace_term() {
    let c1 = activation_constants(Activation::Relu, 1.0).unwrap();
    let c3 = activation_constants(Activation::Relu, 3.0).unwrap();
    assert!((c3.nu - 3.0 * c1.nu).abs() <= 1e-15);
    assert!((c1.nu - c1.theta1).abs() <= 1e-15);
}

fn test_constants() -> PsiConstants {
    activation_constants(Activation::Relu, 0.7).unwrap()
}

#[test]
fn psi_norm_entry_cases() {
    let c = test_constants();
    let d = 9usize;
    // ‖x‖ = √d ⇒ norm entry is exactly ϑ₀
    let mut x = vec![0.0; d];
    x[0] = (d as f64).sqrt();
    let p = psi(&x, &c);
    assert_eq!(p.len(), d + 2);
    assert!((p[d + 1] - c.theta0).abs() <= 1e-15);
    // x = 0 ⇒ data block 0, norm entry ϑ₀ − ϑ₁ + ϑ₂
    let p0 = psi(&vec![0.0; d], &c);
    assert!(p0[..d].iter().all(|v| *v == 0.0));
    assert!((p0[d + 1] - (c.theta0 - c.theta1 + c.theta2)).abs() <= 1e-15);
    // bias entry is constant in x
    assert_eq!(p[d], p0[d]);
    // data block is linear in x
    let p2 = psi(&x.iter().map(|v| 2.5 * v).collect::<Vec<_>>(), &c);
    for j in 0..d {
        assert!((p2[j] - 2.5 * p[j]).abs() <= 1e-12);
    }
}

#[test]
fn linear_forward_matches_reimplementation() {
    let c = test_constants();
    let mut rng = stream(3, "proxy-forward", 0);
    let d = 7;
    for _ in 0..20 {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let model = LinearModel {
            beta_data: (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
            beta_bias: rng.random::<f64>(),
            beta_norm: rng.random::<f64>(),
        };
        let got = linear_forward(&model, &x, &c);
        let p = psi(&x, &c);
        let mut want = 0.0;
        for j in 0..d {
            want += p[j] * model.beta_data[j];
        }
        want += p[d] * model.beta_bias + p[d + 1] * model.beta_norm;
        assert!((got - want).abs() <= 1e-12);
    }
    // zero model
    let zero = LinearModel::zeros(d);
    assert_eq!(linear_forward(&zero, &vec![1.0; d], &c), 0.0);
    // bias-only model is constant
    let bias_only = LinearModel { beta_data: vec![0.0; d], beta_bias: 2.0, beta_norm: 0.0 };
    let f1 = linear_forward(&bias_only, &vec![1.0; d], &c);
    let f2 = linear_forward(&bias_only, &vec![-3.0; d], &c);
    assert!((f1 - f2).abs() <= 1e-15);
}

fn small_dataset() -> (PsiMatrix, Vec<f64>) {
    let bank = build_feature_bank(&BankSpec {
        dimension: 10,
        core_magnitudes: BTreeMap::from([(1, 1.0), (-1, 1.0)]),
        spurious_magnitudes: BTreeMap::from([(0, 2.0), (1, 2.0)]),
        core_sigma: BTreeMap::from([(1, 0.1), (-1, 0.1)]),
        spurious_sigma: BTreeMap::from([(0, 0.1), (1, 0.1)]),
        rotate: false,
        rotation_seed: 0,
    })
    .unwrap();
    let groups = [
        GroupSpec { class_id: 1, spurious_id: 0, size: 30, is_majority: true },
        GroupSpec { class_id: 1, spurious_id: 1, size: 5, is_majority: false },
        GroupSpec { class_id: -1, spurious_id: 1, size: 30, is_majority: true },
        GroupSpec { class_id: -1, spurious_id: 0, size: 5, is_majority: false },
    ];
    let ds = generate_synthetic(&bank, &groups, 0.0, 5).unwrap();
    let (_, psi_mat, y) = proxy_inputs(&ds, crate::datagen::Split::Train, Activation::Relu).unwrap();
    (psi_mat, y)
}

#[test]
fn first_gd_step_is_psi_transpose_y() {
    let (psi_mat, y) = small_dataset();
    let n = psi_mat.mat.rows as f64;
    let eta = 0.3;
    let stepped = linear_gd_step(&LinearModel::zeros(psi_mat.d), &psi_mat, &y, eta);
    let want = psi_mat.mat.tr_mul_vec(&y);
    for (j, w) in want.iter().enumerate() {
        let got = if j < psi_mat.d {
            stepped.beta_data[j]
        } else if j == psi_mat.d {
            stepped.beta_bias
        } else {
            stepped.beta_norm
        };
        assert!((got - eta / n * w).abs() <= 1e-14);
    }
    // eta = 0 leaves the model unchanged
    let same = linear_gd_step(&stepped, &psi_mat, &y, 0.0);
    assert_eq!(same, stepped);
}

#[test]
fn early_iterates_stay_close_to_t_times_first_step() {
    let (psi_mat, y) = small_dataset();
    let eta = 1e-3;
    let t = 10usize;
    let mut model = LinearModel::zeros(psi_mat.d);
    for _ in 0..t {
        model = linear_gd_step(&model, &psi_mat, &y, eta);
    }
    let b = linear_gd_step(&LinearModel::zeros(psi_mat.d), &psi_mat, &y, eta);
    let stack = |m: &LinearModel| {
        let mut v = m.beta_data.clone();
        v.push(m.beta_bias);
        v.push(m.beta_norm);
        v
    };
    let (mt, mb) = (stack(&model), stack(&b));
    let mut dev2 = 0.0;
    let mut ref2 = 0.0;
    for (a, bb) in mt.iter().zip(&mb) {
        dev2 += (a - t as f64 * bb) * (a - t as f64 * bb);
        ref2 += (t as f64 * bb) * (t as f64 * bb);
    }
    let rel = (dev2 / ref2).sqrt();
    assert!(rel <= 0.01, "relative deviation {rel}");
}

#[test]
fn linear_training_loss_never_increases() {
    let (psi_mat, y) = small_dataset();
    let mut model = LinearModel::zeros(psi_mat.d);
    let trace = train_linear_full_batch(&mut model, &psi_mat, &y, 0.5, 200, &[]);
    for w in trace.losses.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12);
    }
}

#[test]
fn closed_form_on_orthonormal_rows_is_psi_transpose_y() {
    let d = 3;
    let mut mat = Mat::zeros(3, d + 2);
    mat.set(0, 0, 1.0);
    mat.set(1, 1, 1.0);
    mat.set(2, 2, 1.0);
    let psi_mat = PsiMatrix { mat, d };
    let y = vec![2.0, -1.0, 0.5];
    let beta = linear_closed_form(&psi_mat, &y, ClosedFormOptions::default());
    assert!((beta.beta_data[0] - 2.0).abs() <= 1e-12);
    assert!((beta.beta_data[1] + 1.0).abs() <= 1e-12);
    assert!((beta.beta_data[2] - 0.5).abs() <= 1e-12);
    assert!(beta.beta_bias.abs() <= 1e-12);
    assert!(beta.beta_norm.abs() <= 1e-12);
}

#[test]
fn closed_form_ignores_duplicated_examples() {
    let (psi_mat, y) = small_dataset();
    let base = linear_closed_form(&psi_mat, &y, ClosedFormOptions::default());
    // duplicate every row
    let n = psi_mat.mat.rows;
    let mut rows = Vec::with_capacity(2 * n);
    let mut y2 = Vec::with_capacity(2 * n);
    for i in 0..n {
        rows.push(psi_mat.mat.row(i).to_vec());
        rows.push(psi_mat.mat.row(i).to_vec());
        y2.push(y[i]);
        y2.push(y[i]);
    }
    let doubled = PsiMatrix { mat: Mat::from_rows(&rows), d: psi_mat.d };
    let dup = linear_closed_form(&doubled, &y2, ClosedFormOptions::default());
    for (a, b) in base.beta_data.iter().zip(&dup.beta_data) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
    assert!((base.beta_bias - dup.beta_bias).abs() <= 1e-10);
    assert!((base.beta_norm - dup.beta_norm).abs() <= 1e-10);
}

#[test]
fn closed_form_beats_random_models() {
    let (psi_mat, y) = small_dataset();
    let best = linear_closed_form(&psi_mat, &y, ClosedFormOptions::default());
    let best_loss = psi_mat.loss(&best, &y);
    let mut rng = stream(17, "proxy-random-beta", 0);
    for _ in 0..100 {
        let cand = LinearModel {
            beta_data: (0..psi_mat.d).map(|_| StandardNormal.sample(&mut rng)).collect(),
            beta_bias: StandardNormal.sample(&mut rng),
            beta_norm: StandardNormal.sample(&mut rng),
        };
        assert!(psi_mat.loss(&cand, &y) + 1e-12 >= best_loss);
    }
}

#[test]
fn bias_removed_solution_has_zero_bias_and_norm() {
    let (psi_mat, y) = small_dataset();
    let beta = linear_closed_form(&psi_mat, &y, ClosedFormOptions { bias_removed: true, cutoff_rel: 1e-10 });
    assert_eq!(beta.beta_bias, 0.0);
    assert_eq!(beta.beta_norm, 0.0);
    assert_eq!(beta.beta_data.len(), psi_mat.d);
}

#[test]
fn coupling_gap_zero_at_initialization() {
    let (psi_mat, y) = small_dataset();
    let bank = crate::datagen::FeatureBank::empty(psi_mat.d);
    let _ = bank;
    let mut net = init_symmetric(16, psi_mat.d, 1, Activation::Relu, 1).unwrap();
    // rebuild x from psi data block is lossy; use a fresh small x instead
    let mut x = Mat::zeros(psi_mat.mat.rows, psi_mat.d);
    for i in 0..x.rows {
        for j in 0..psi_mat.d {
            x.set(i, j, psi_mat.mat.get(i, j));
        }
    }
    let targets = crate::model::Targets::Binary(y.clone());
    let net_trace = crate::model::train_full_batch(
        &mut net,
        &x,
        &targets,
        &crate::model::FullBatchOptions {
            eta: 0.1,
            steps: 3,
            weight_decay: 0.0,
            snapshot_steps: vec![0, 2, 3],
        },
    )
    .unwrap();
    let consts = test_constants();
    let psi_x = PsiMatrix::build(&x, &consts);
    let mut lin = LinearModel::zeros(psi_mat.d);
    let lin_trace = train_linear_full_batch(&mut lin, &psi_x, &y, 0.1, 3, &[0, 2, 3]);
    let gaps = coupling_gap(&net_trace, &lin_trace).unwrap();
    assert_eq!(gaps[0].0, 0);
    // both models are zero at step 0 up to paired-term cancellation
    assert!(gaps[0].1 <= 1e-30, "step-0 gap {}", gaps[0].1);
    for (_, g) in &gaps {
        assert!(*g >= 0.0);
    }

    // mismatched steps error
    let mut lin2 = LinearModel::zeros(psi_mat.d);
    let bad = train_linear_full_batch(&mut lin2, &psi_x, &y, 0.1, 3, &[0, 1, 3]);
    assert!(matches!(coupling_gap(&net_trace, &bad), Err(crate::Error::StepMismatch)));
}

#[test]
fn feature_gap_zero_at_initialization() {
    let bank = build_feature_bank(&BankSpec {
        dimension: 8,
        core_magnitudes: BTreeMap::from([(1, 1.0), (-1, 1.0)]),
        spurious_magnitudes: BTreeMap::from([(0, 2.0), (1, 2.0)]),
        core_sigma: BTreeMap::new(),
        spurious_sigma: BTreeMap::new(),
        rotate: false,
        rotation_seed: 0,
    })
    .unwrap();
    let groups = [
        GroupSpec { class_id: 1, spurious_id: 0, size: 4, is_majority: true },
        GroupSpec { class_id: -1, spurious_id: 1, size: 4, is_majority: true },
    ];
    let ds = generate_synthetic(&bank, &groups, 0.0, 2).unwrap();
    let net = init_symmetric(8, 8, 1, Activation::Relu, 3).unwrap();
    let model = LinearModel::zeros(8);
    let consts = test_constants();
    let gaps = feature_gap(&net, &model, &consts, &ds).unwrap();
    assert_eq!(gaps.len(), 4); // two cores + two majority spurious
    for (_, g) in gaps {
        assert_eq!(g, 0.0);
    }
}

#[test]
fn linear_model_round_trips_through_disk() {
    let dir = std::env::temp_dir().join(format!("splm-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = LinearModel { beta_data: vec![0.25, -1.5, 3.0], beta_bias: 0.125, beta_norm: -2.0 };
    let path = dir.join("model.splm");
    save_linear_model(&model, &path).unwrap();
    let back = load_linear_model(&path).unwrap();
    assert_eq!(back, model);
    std::fs::remove_dir_all(&dir).ok();
}
