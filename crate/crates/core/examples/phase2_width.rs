use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec, Split};
use spurlab_core::linear_proxy::{self, LinearModel};
use spurlab_core::theory::{self, NetConfig, TheoryConfig};
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let d = 50usize;
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
    let ds = generate_synthetic(&b, &groups, 0.95, 0).unwrap();
    let eta = 0.5;

    // infinite-width reference: the ψ-linear recurrence itself
    let (consts, psi, y) = linear_proxy::proxy_inputs(&ds, Split::Train, Activation::Relu).unwrap();
    let mut model = LinearModel::zeros(d);
    let vc = ds.bank.core.get(&1).unwrap().clone();
    let vs = ds.bank.spurious.get(&0).unwrap().clone();
    for t in 0..=1600usize {
        if [98usize, 196, 391, 587, 782, 1173, 1600].contains(&t) {
            let fc = linear_proxy::linear_forward(&model, &vc, &consts);
            let fs = linear_proxy::linear_forward(&model, &vs, &consts);
            println!("linear t={t:5}: f_core {fc:+.4} f_spur {fs:+.4} ratio {:.2}", fs.abs() / fc.abs());
        }
        model = linear_proxy::linear_gd_step(&model, &psi, &y, eta);
    }

    for m in [2000usize, 4000] {
        let t0 = Instant::now();
        let report = theory::phase2_domination(
            &ds,
            &NetConfig { m, activation: Activation::Relu, seed: 0 },
            eta,
            &TheoryConfig::default(),
        )
        .unwrap();
        let s = &report.per_class[&1];
        println!(
            "net m={m:5} T={}: f_core {:+.4} f_spur {:+.4} ratio {:.2} (min {:.2}) [{:?}]",
            report.t_steps, s.f_core, s.f_spurious, s.ratio, report.min_ratio(), t0.elapsed()
        );
    }
}
