use spurlab_core::theory::{self, configs, TheoryConfig};

fn main() {
    let cfg = configs::reference();
    let ds = cfg.dataset(0).unwrap();
    let tc = TheoryConfig {
        probe_steps: Some(vec![1, 2, 3, 4, 5, 6, 8, 11, 16, 22]),
        ..Default::default()
    };
    let report = theory::phase1_check(&ds, &cfg.net_config(0), cfg.eta, &tc).unwrap();
    for p in &report.probes {
        println!("{}: predicted slope {:+.4e}", p.feature, p.predicted_slope);
        for (t, v) in p.steps.iter().zip(&p.values) {
            println!("   t={t:3}  value {:+.5e}   value/t {:+.5e}", v, v / *t as f64);
        }
    }
}
