use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec, Split};
use spurlab_core::linear_proxy::{self, LinearModel};
use spurlab_core::theory::{self, NetConfig, TheoryConfig};
use std::collections::BTreeMap;

fn main() {
    let d = 100usize;
    let b = build_feature_bank(&BankSpec {
        dimension: d,
        core_magnitudes: BTreeMap::from([(1, 1.0), (-1, 1.0)]),
        spurious_magnitudes: BTreeMap::from([(0, 2.0), (1, 2.0)]),
        core_sigma: BTreeMap::from([(1, 0.5), (-1, 0.5)]),
        spurious_sigma: BTreeMap::from([(0, 0.04), (1, 0.04)]),
        rotate: false,
        rotation_seed: 0,
    })
    .unwrap();
    let groups = vec![
        GroupSpec { class_id: 1, spurious_id: 0, size: 990, is_majority: true },
        GroupSpec { class_id: 1, spurious_id: 1, size: 10, is_majority: false },
        GroupSpec { class_id: -1, spurious_id: 1, size: 990, is_majority: true },
        GroupSpec { class_id: -1, spurious_id: 0, size: 10, is_majority: false },
    ];
    let ds = generate_synthetic(&b, &groups, 0.97, 0).unwrap();
    let eta = 1.0;
    let act = Activation::Leaky(0.9);
    let t1 = (d as f64 * (d as f64).ln() / eta).round() as usize; // 461

    let (consts, psi, y) = linear_proxy::proxy_inputs(&ds, Split::Train, act).unwrap();
    let mut model = LinearModel::zeros(d);
    let vc = ds.bank.core.get(&1).unwrap().clone();
    let vs = ds.bank.spurious.get(&0).unwrap().clone();
    for t in 0..=(6 * t1) {
        if t % t1 == 0 && t > 0 {
            let fc = linear_proxy::linear_forward(&model, &vc, &consts).abs();
            let fs = linear_proxy::linear_forward(&model, &vs, &consts).abs();
            println!("linear c2={}: f_core {fc:.4} ratio {:.2}", t / t1, fs / fc);
        }
        model = linear_proxy::linear_gd_step(&model, &psi, &y, eta);
    }

    // net at c2 = 2 and 3
    for c2 in [2.0f64, 3.0] {
        let report = theory::phase2_domination(
            &ds,
            &NetConfig { m: 1000, activation: act, seed: 0 },
            eta,
            &TheoryConfig { c2, ..Default::default() },
        )
        .unwrap();
        println!(
            "net c2={c2}: T={} min-ratio {:.2} worst|f_core| {:.4}",
            report.t_steps, report.min_ratio(), report.max_core_probe()
        );
    }
}
