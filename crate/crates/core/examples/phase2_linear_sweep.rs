use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec, Split};
use spurlab_core::linear_proxy::{self, LinearModel};
use std::collections::BTreeMap;

fn main() {
    for (d, amb, act, eta) in [
        (50usize, 0.95, Activation::Leaky(0.9), 1.0),
        (80, 0.97, Activation::Leaky(0.9), 1.0),
        (80, 0.97, Activation::Leaky(0.8), 1.0),
        (100, 0.97, Activation::Leaky(0.9), 1.0),
        (100, 0.97, Activation::Leaky(0.8), 1.0),
        (120, 0.98, Activation::Leaky(0.8), 1.0),
        (100, 0.97, Activation::Leaky(0.7), 1.0),
    ] {
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
        let ds = generate_synthetic(&b, &groups, amb, 0).unwrap();
        let t_steps = (d as f64 * (d as f64).ln() / eta).round() as usize;
        let (consts, psi, y) = linear_proxy::proxy_inputs(&ds, Split::Train, act).unwrap();
        let mut model = LinearModel::zeros(d);
        for _ in 0..t_steps {
            model = linear_proxy::linear_gd_step(&model, &psi, &y, eta);
        }
        let vc = ds.bank.core.get(&1).unwrap();
        let vs = ds.bank.spurious.get(&0).unwrap();
        let fc = linear_proxy::linear_forward(&model, vc, &consts);
        let fs = linear_proxy::linear_forward(&model, vs, &consts);
        println!(
            "d={d:3} {} eta={eta}: T={t_steps:4}  lin f_core {fc:+.4} f_spur {fs:+.4} ratio {:.2}",
            act.name(),
            fs.abs() / fc.abs()
        );
    }
}
