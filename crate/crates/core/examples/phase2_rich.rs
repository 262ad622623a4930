use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec};
use spurlab_core::theory::{self, NetConfig, TheoryConfig};
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(50);
    let amb: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.95);
    let eta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let m: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(512);
    let act = match args.get(5).map(String::as_str).unwrap_or("relu") {
        "relu" => Activation::Relu,
        "leaky9" => Activation::Leaky(0.9),
        "leaky5" => Activation::Leaky(0.5),
        other => panic!("{other}"),
    };
    let seeds: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(1);

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
    for seed in 0..seeds {
        let ds = generate_synthetic(&b, &groups, amb, seed).unwrap();
        let t0 = Instant::now();
        let report = theory::phase2_domination(
            &ds,
            &NetConfig { m, activation: act, seed },
            eta,
            &TheoryConfig { c2: 3.0, ..Default::default() },
        )
        .unwrap();
        let worst_core = report.max_core_probe();
        println!(
            "d={d} m={m} eta={eta} {} seed {seed}: T={} min-ratio {:.2} worst|f_core| {:.4} cf {:.2} [{:?}]",
            act.name(), report.t_steps, report.min_ratio(), worst_core,
            report.min_closed_form_ratio(), t0.elapsed()
        );
    }
}
