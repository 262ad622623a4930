use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_cmnist, synthetic_mnist, CmnistOptions, Split};
use spurlab_core::inference::infer_groups_scaled;
use spurlab_core::metrics::minority_recall;
use spurlab_core::model::{init_symmetric, train_sgd, DataView, LayerTag, Loss, SgdOptions, Targets};

fn main() {
    for seed in 0..3u64 {
        let data = synthetic_mnist(13_000, 0, seed);
        let mut opts = CmnistOptions::new(seed);
        opts.subset_size = Some(10_000);
        let ds = build_cmnist(&data, &opts).unwrap();
        let unit = spurlab_core::model::unit_input_scale(&ds);
        let true_minority: Vec<usize> = ds
            .split_indices(Split::Train)
            .into_iter()
            .filter(|&i| {
                let e = &ds.examples[i];
                e.group.1 != e.label as u32
            })
            .collect();
        for boost in [4.0f64] {
            let scale = boost * unit;
            let train = DataView::from_split_scaled(&ds, Split::Train, scale);
            let targets = Targets::from_labels(&train.labels, Loss::CrossEntropy, 5).unwrap();
            let mut net = init_symmetric(512, ds.dimension(), 5, Activation::Relu, seed + 1000).unwrap();
            let sgd = SgdOptions { eta: 1e-3, epochs: 2, batch_size: 32, weight_decay: 1e-3, seed: seed + 1000 };
            train_sgd(&mut net, &train.x, &targets, &sgd, |_, _| Ok(())).unwrap();
            for k_range in [2..=5usize, 3..=6, 4..=6] {
                let layer = LayerTag::LastLayerOutputs;
                let clusters =
                    infer_groups_scaled(&net, &ds, scale, 2, layer, k_range.clone(), seed).unwrap();
                let recall = minority_recall(&clusters.minority_indices(), &true_minority).unwrap();
                let ks: Vec<usize> = clusters.per_class.values().map(|c| c.k).collect();
                let lambdas: Vec<u32> = clusters.per_class.values().map(|c| c.lambda).collect();
                let sils: Vec<f64> = clusters
                    .per_class
                    .values()
                    .map(|c| (c.mean_silhouette * 100.0).round() / 100.0)
                    .collect();
                println!(
                    "seed {seed} boost {boost} k{:?}: recall {recall:.2} k {ks:?} lambda {lambdas:?} sil {sils:?}",
                    k_range
                );
            }
        }
    }
}
