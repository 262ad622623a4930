use spurlab_core::theory::{self, configs, TheoryConfig};
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();

    if which == "phase1" || which.is_empty() {
        let t0 = Instant::now();
        let cfg = configs::reference();
        for seed in 0..3u64 {
            let ds = cfg.dataset(seed).unwrap();
            let report = theory::phase1_check(&ds, &cfg.net_config(seed), cfg.eta, &TheoryConfig::default()).unwrap();
            println!("phase1 seed {seed}: core max rel err {:?}, spurious {:?}", 
                report.max_relative_error("core"), report.max_relative_error("spurious"));
            for p in &report.probes {
                println!("   {}: fitted {:+.4e} predicted {:+.4e} rel {:?}", p.feature, p.fitted_slope, p.predicted_slope, p.relative_error);
            }
            if let Some(sep) = report.separability_at(50) {
                println!("   separability@50: {:?}", sep);
            }
            println!("   kappa {:.4}, warnings {:?}", report.kappa, report.warnings);
        }
        println!("phase1 elapsed {:?}", t0.elapsed());
    }

    if which == "control" || which.is_empty() {
        let t0 = Instant::now();
        let cfg = configs::balanced_control();
        let ds = cfg.dataset(0).unwrap();
        let report = theory::phase1_check(&ds, &cfg.net_config(0), cfg.eta, &TheoryConfig::default()).unwrap();
        if let Some(sep) = report.separability_at(50) {
            println!("control separability@50: {:?}", sep);
        }
        println!("control elapsed {:?}", t0.elapsed());
    }

    if which == "phase2" || which.is_empty() {
        let t0 = Instant::now();
        let cfg = configs::domination();
        let ds = cfg.dataset(0).unwrap();
        let report = theory::phase2_domination(&ds, &cfg.net_config(0), cfg.eta, &TheoryConfig::default()).unwrap();
        println!("phase2 T={} stats:", report.t_steps);
        for (class, s) in &report.per_class {
            println!("  class {class}: f_core {:+.4}, f_spur {:+.4}, ratio {:.2}, bound {:.4}, closed-form ratio {:.2}", s.f_core, s.f_spurious, s.ratio, s.bound, s.closed_form_ratio);
        }
        println!("  warnings {:?}", report.warnings);
        println!("phase2 elapsed {:?}", t0.elapsed());
    }

    if which == "assumption" || which.is_empty() {
        let t0 = Instant::now();
        let cfg = configs::reference();
        let ds = cfg.dataset(0).unwrap();
        let steps: Vec<usize> = vec![0, 1, 2, 5, 10, 20, 35, 50, 70, 100];
        let report = theory::assumption_check(&ds, &cfg.net_config(0), cfg.eta, &steps).unwrap();
        for (i, &t) in report.steps.iter().enumerate() {
            println!("assumption t={t}: train {:.3e} core {:.3e} spurious {:.3e}", report.train_gap[i], report.core_gap[i], report.spurious_gap[i]);
        }
        println!("max gap t<=100: {:.3e}", report.max_gap_up_to(100));
        println!("assumption elapsed {:?}", t0.elapsed());
    }
}
