use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec};
use spurlab_core::theory::{self, NetConfig, TheoryConfig};
use std::collections::BTreeMap;
use std::time::Instant;

fn bank(d: usize) -> BankSpec {
    BankSpec {
        dimension: d,
        core_magnitudes: BTreeMap::from([(1, 1.0), (-1, 1.0)]),
        spurious_magnitudes: BTreeMap::from([(0, 2.0), (1, 2.0)]),
        core_sigma: BTreeMap::from([(1, 0.5), (-1, 0.5)]),
        spurious_sigma: BTreeMap::from([(0, 0.04), (1, 0.04)]),
        rotate: false,
        rotation_seed: 0,
    }
}

fn main() {
    let variants: Vec<(&str, usize, f64, f64, Activation)> = vec![
        ("relu d50 amb.95", 50, 0.95, 0.5, Activation::Relu),
        ("leaky.25 d50", 50, 0.95, 0.5, Activation::Leaky(0.25)),
        ("leaky.5 d50", 50, 0.95, 0.5, Activation::Leaky(0.5)),
        ("erf d50", 50, 0.95, 0.5, Activation::Erf),
        ("tanh d50", 50, 0.95, 0.5, Activation::Tanh),
        ("relu d100 amb.97", 100, 0.97, 0.5, Activation::Relu),
    ];
    for (name, d, amb, eta, act) in variants {
        let t0 = Instant::now();
        let b = build_feature_bank(&bank(d)).unwrap();
        let groups = vec![
            GroupSpec { class_id: 1, spurious_id: 0, size: 990, is_majority: true },
            GroupSpec { class_id: 1, spurious_id: 1, size: 10, is_majority: false },
            GroupSpec { class_id: -1, spurious_id: 1, size: 990, is_majority: true },
            GroupSpec { class_id: -1, spurious_id: 0, size: 10, is_majority: false },
        ];
        let ds = generate_synthetic(&b, &groups, amb, 0).unwrap();
        let report = theory::phase2_domination(
            &ds,
            &NetConfig { m: 1000, activation: act, seed: 0 },
            eta,
            &TheoryConfig::default(),
        )
        .unwrap();
        let s = &report.per_class[&1];
        println!(
            "{name:18} T={:4}  f_core {:+.4} f_spur {:+.4} ratio {:5.2} (min {:5.2})  bound+slack {:.4}  cf-ratio {:6.2}  [{:?}]",
            report.t_steps, s.f_core, s.f_spurious, s.ratio, report.min_ratio(),
            s.bound + 0.1, report.min_closed_form_ratio(), t0.elapsed()
        );
    }
}
