use spurlab_core::activation::Activation;
use spurlab_core::datagen::{build_cmnist, synthetic_mnist, CmnistOptions, Split};
use spurlab_core::model::{init_symmetric, train_sgd, DataView, LayerTag, Loss, SgdOptions, Targets};

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let data = synthetic_mnist(13_000, 0, seed);
    let mut opts = CmnistOptions::new(seed);
    opts.subset_size = Some(10_000);
    let ds = build_cmnist(&data, &opts).unwrap();
    let scale = 4.0 * spurlab_core::model::unit_input_scale(&ds);
    let train = DataView::from_split_scaled(&ds, Split::Train, scale);
    let targets = Targets::from_labels(&train.labels, Loss::CrossEntropy, 5).unwrap();
    let mut net = init_symmetric(512, ds.dimension(), 5, Activation::Relu, seed + 1000).unwrap();
    let sgd = SgdOptions { eta: 1e-3, epochs: 2, batch_size: 32, weight_decay: 1e-3, seed: seed + 1000 };
    train_sgd(&mut net, &train.x, &targets, &sgd, |_, _| Ok(())).unwrap();
    let outs = net.collect_outputs(&train.x, LayerTag::LastLayerOutputs).unwrap();

    // class 0 diagnosis
    for class in 0..5i32 {
    println!("== class {class}");
    let members: Vec<usize> = (0..train.len()).filter(|&p| train.labels[p] == class).collect();
    // per color: mean logit vector
    for color in 0..5u32 {
        let rows: Vec<&Vec<f64>> = members
            .iter()
            .filter(|&&p| ds.examples[train.indices[p]].group.1 == color)
            .map(|&p| &outs[p])
            .collect();
        if rows.is_empty() { continue; }
        let n = rows.len();
        let mut mean = vec![0.0; 5];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) { *m += v; }
        }
        for m in mean.iter_mut() { *m /= n as f64; }
        println!("color {color} (n={n:4}): mean logits {:?}", mean.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        if n < 50 {
            for r in &rows {
                println!("      indiv: {:?}", r.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
            }
        }
    }
    // majority blob spread: per-logit std
    let maj: Vec<&Vec<f64>> = members
        .iter()
        .filter(|&&p| ds.examples[train.indices[p]].group.1 == class as u32)
        .map(|&p| &outs[p])
        .collect();
    let n = maj.len() as f64;
    let mut mean = vec![0.0; 5];
    for r in &maj { for (m, v) in mean.iter_mut().zip(r.iter()) { *m += v; } }
    for m in mean.iter_mut() { *m /= n; }
    let mut var = vec![0.0; 5];
    for r in &maj {
        for q in 0..5 { var[q] += (r[q] - mean[q]).powi(2); }
    }
    for v in var.iter_mut() { *v /= n; }
    println!("majority per-logit std: {:?}", var.iter().map(|v| ((v.sqrt()) * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    }
}
