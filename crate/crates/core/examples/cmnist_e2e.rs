use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_cmnist, synthetic_mnist, CmnistOptions, Split};
use spurlab_core::metrics::{minority_recall, EvalReport};
use spurlab_core::model::{
    init_symmetric, train_sgd, DataView, LayerTag, Loss, SgdOptions, Targets, TwoLayerNet,
};
use spurlab_core::sampling::{spare_weights, train_with_sampler, NormScope, SamplerTrainOptions};
use std::time::Instant;

fn evaluate(net: &TwoLayerNet, ds: &spurlab_core::datagen::Dataset, split: Split, scale: f64) -> EvalReport {
    let view = DataView::from_split_scaled(ds, split, scale);
    let preds = net.predict_batch(&view.x).unwrap();
    let groups: Vec<(i32, u32)> = view.indices.iter().map(|&i| ds.examples[i].group).collect();
    let sizes = ds.group_counts(Split::Train);
    EvalReport::build("test", &preds, &view.labels, &groups, Some(&sizes)).unwrap()
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let total = Instant::now();
    let data = synthetic_mnist(13_000, 2_000, seed);
    let mut opts = CmnistOptions::new(seed);
    opts.subset_size = Some(10_000);
    opts.test_subset = Some(2_000);
    let ds = build_cmnist(&data, &opts).unwrap();
    println!("dataset built: {} examples [{:?}]", ds.len(), total.elapsed());
    let boost: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let scale = boost * spurlab_core::model::unit_input_scale(&ds);
    println!("input scale factor {scale:.3}");
    let train = DataView::from_split_scaled(&ds, Split::Train, scale);
    let targets = Targets::from_labels(&train.labels, Loss::CrossEntropy, 5).unwrap();
    let d = ds.dimension();

    // ERM: m=512, lr 1e-3, wd 1e-3, batch 32, 20 epochs
    let t0 = Instant::now();
    let mut erm = init_symmetric(512, d, 5, Activation::Relu, seed).unwrap();
    let sgd = SgdOptions { eta: 1e-3, epochs: 20, batch_size: 32, weight_decay: 1e-3, seed };
    train_sgd(&mut erm, &train.x, &targets, &sgd, |e, net| {
        if e % 5 == 4 {
            let r = evaluate(net, &ds, Split::Test, scale);
            println!("  erm epoch {e}: avg {:.3} worst-group {:.3}", r.average_accuracy, r.worst_group_accuracy);
        }
        Ok(())
    })
    .unwrap();
    let erm_report = evaluate(&erm, &ds, Split::Test, scale);
    println!(
        "ERM: avg {:.3} worst-group {:.3} [{:?}]",
        erm_report.average_accuracy, erm_report.worst_group_accuracy, t0.elapsed()
    );

    // SPARE stage 1: 2 ERM epochs, cluster last-layer outputs
    let t0 = Instant::now();
    let mut stage1 = init_symmetric(512, d, 5, Activation::Relu, seed + 1000).unwrap();
    let sgd1 = SgdOptions { eta: 1e-3, epochs: 2, batch_size: 32, weight_decay: 1e-3, seed: seed + 1000 };
    train_sgd(&mut stage1, &train.x, &targets, &sgd1, |_, _| Ok(())).unwrap();
    let clusters = spurlab_core::inference::infer_groups_scaled(
        &stage1, &ds, scale, 2, LayerTag::LastLayerOutputs, 3..=6, seed,
    )
    .unwrap();
    for (class, cc) in &clusters.per_class {
        println!(
            "  class {class}: k={} sizes {:?} sil {:.3} lambda {}",
            cc.k, cc.cluster_sizes, cc.mean_silhouette, cc.lambda
        );
    }
    // stage-1 minority recall
    let true_minority: Vec<usize> = ds
        .split_indices(Split::Train)
        .into_iter()
        .filter(|&i| {
            let e = &ds.examples[i];
            e.group.1 != e.label as u32
        })
        .collect();
    let recall = minority_recall(&clusters.minority_indices(), &true_minority).unwrap();
    println!("stage1 minority recall {recall:.3} [{:?}]", t0.elapsed());

    // SPARE stage 2: fresh net, importance sampling
    let t0 = Instant::now();
    let plan = spare_weights(&clusters, None, NormScope::PerClass).unwrap();
    let continue_mode = std::env::args().nth(3).map(|v| v == "continue").unwrap_or(false);
    let mut spare = if continue_mode {
        stage1.clone()
    } else {
        init_symmetric(512, d, 5, Activation::Relu, seed + 2000).unwrap()
    };
    let steps_per_epoch = train.len().div_ceil(32);
    train_with_sampler(
        &mut spare,
        &train.x,
        &targets,
        &plan,
        &SamplerTrainOptions {
            eta: 1e-3,
            steps: 20 * steps_per_epoch,
            batch_size: 32,
            weight_decay: 1e-3,
            seed: seed + 2000,
            steps_per_epoch,
        },
        |e, net| {
            if e % 5 == 4 {
                let r = evaluate(net, &ds, Split::Test, scale);
                println!("  spare epoch {e}: avg {:.3} worst-group {:.3}", r.average_accuracy, r.worst_group_accuracy);
            }
            Ok(())
        },
    )
    .unwrap();
    let spare_report = evaluate(&spare, &ds, Split::Test, scale);
    println!(
        "SPARE: avg {:.3} worst-group {:.3} [{:?}]",
        spare_report.average_accuracy, spare_report.worst_group_accuracy, t0.elapsed()
    );
    for (g, acc) in &spare_report.per_group_accuracy {
        println!("   {g}: {acc:.3}");
    }
    println!("total {:?}", total.elapsed());
}
