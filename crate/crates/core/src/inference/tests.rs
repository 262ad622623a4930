use super::*;
use crate::rng::stream;
use rand_distr::{Distribution, StandardNormal};

fn blob(center: &[f64], n: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, "blob", 0);
    (0..n)
        .map(|_| {
            center
                .iter()
                .map(|c| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    c + spread * g
                })
                .collect()
        })
        .collect()
}

#[test]
fn kmeans_single_cluster_is_the_mean() {
    let points = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]];
    let r = kmeans(&points, 1, 0, 50, 1e-12).unwrap();
    assert!(r.assignment.iter().all(|&a| a == 0));
    assert!((r.centroids[0][0] - 3.0).abs() <= 1e-12);
    assert!((r.centroids[0][1] - 2.0).abs() <= 1e-12);
}

#[test]
fn kmeans_separates_far_blobs_exactly() {
    let mut points = blob(&[10.0, 10.0], 25, 0.5, 1);
    points.extend(blob(&[-10.0, -10.0], 25, 0.5, 2));
    let r = kmeans(&points, 2, 7, 100, 1e-9).unwrap();
    let first = r.assignment[0];
    assert!(r.assignment[..25].iter().all(|&a| a == first));
    assert!(r.assignment[25..].iter().all(|&a| a == 1 - first));
}

#[test]
fn kmeans_objective_is_non_increasing() {
    for seed in 0..50u64 {
        let mut rng = stream(seed, "kmeans-rand", 0);
        let n = 30 + (seed as usize % 20);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let r = kmeans(&points, 4, seed, 100, 0.0).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia rose {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn kmeans_is_deterministic_and_validates_k() {
    let points = blob(&[0.0, 0.0], 40, 1.0, 3);
    let a = kmeans(&points, 3, 11, 100, 1e-9).unwrap();
    let b = kmeans(&points, 3, 11, 100, 1e-9).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert!(kmeans(&points, 41, 0, 10, 1e-9).is_err());
    assert!(kmeans(&points, 0, 0, 10, 1e-9).is_err());
    assert!(kmeans(&[], 1, 0, 10, 1e-9).is_err());
}

#[test]
fn silhouette_singletons_score_zero() {
    let points = vec![vec![0.0], vec![5.0]];
    let s = silhouette(&points, &[0, 1]).unwrap();
    assert_eq!(s.scores, vec![0.0, 0.0]);
    assert_eq!(s.mean, 0.0);
    assert!(!s.single_cluster);
}

#[test]
fn silhouette_perfect_clusters_score_one() {
    let points = vec![vec![0.0], vec![0.0], vec![10.0], vec![10.0]];
    let s = silhouette(&points, &[0, 0, 1, 1]).unwrap();
    for v in &s.scores {
        assert!((v - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn silhouette_single_cluster_warns() {
    let points = vec![vec![0.0], vec![1.0], vec![2.0]];
    let s = silhouette(&points, &[0, 0, 0]).unwrap();
    assert!(s.single_cluster);
    assert_eq!(s.mean, 0.0);
}

/// Brute-force silhouettes: double loop straight from the definition.
fn silhouette_brute(points: &[Vec<f64>], assignment: &[usize]) -> Vec<f64> {
    let k = assignment.iter().max().unwrap() + 1;
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    (0..points.len())
        .map(|i| {
            let own = assignment[i];
            let own_others: Vec<usize> =
                (0..points.len()).filter(|&j| j != i && assignment[j] == own).collect();
            if own_others.is_empty() {
                return 0.0;
            }
            let a: f64 = own_others.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>()
                / own_others.len() as f64;
            let mut b = f64::INFINITY;
            for c in 0..k {
                if c == own {
                    continue;
                }
                let members: Vec<usize> = (0..points.len()).filter(|&j| assignment[j] == c).collect();
                if members.is_empty() {
                    continue;
                }
                let mean = members.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>()
                    / members.len() as f64;
                b = b.min(mean);
            }
            (b - a) / a.max(b)
        })
        .collect()
}

#[test]
fn silhouette_matches_brute_force() {
    for seed in 0..50u64 {
        let mut rng = stream(seed, "sil-rand", 0);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let assignment: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let fast = silhouette(&points, &assignment).unwrap();
        let brute = silhouette_brute(&points, &assignment);
        for (f, b) in fast.scores.iter().zip(&brute) {
            assert!((f - b).abs() <= 1e-12, "{f} vs {b}");
        }
    }
}

#[test]
fn silhouette_mean_in_range_and_monotone_in_separation() {
    let build = |gap: f64| {
        let mut pts = blob(&[0.0, 0.0], 20, 1.0, 5);
        pts.extend(blob(&[gap, 0.0], 20, 1.0, 6));
        let assignment: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        silhouette(&pts, &assignment).unwrap().mean
    };
    let near = build(6.0);
    let far = build(60.0);
    assert!((-1.0..=1.0).contains(&near));
    assert!((-1.0..=1.0).contains(&far));
    assert!(far >= near);
}

#[test]
fn choose_k_finds_clean_blob_counts() {
    let mut two = blob(&[0.0, 0.0], 30, 0.3, 1);
    two.extend(blob(&[20.0, 0.0], 30, 0.3, 2));
    assert_eq!(choose_k(&two, 2..=5, 3).unwrap(), 2);

    let mut three = blob(&[0.0, 0.0], 20, 0.3, 3);
    three.extend(blob(&[20.0, 0.0], 20, 0.3, 4));
    three.extend(blob(&[0.0, 20.0], 20, 0.3, 5));
    assert_eq!(choose_k(&three, 2..=5, 4).unwrap(), 3);
}

#[test]
fn choose_k_tie_breaks_to_smallest() {
    // identical points: every k scores 0, the flat profile keeps k = 2
    let points = vec![vec![1.0, 1.0]; 12];
    assert_eq!(choose_k(&points, 2..=5, 9).unwrap(), 2);
}

#[test]
fn choose_k_degenerates_to_one_cluster() {
    let points = vec![vec![0.0], vec![1.0]];
    assert_eq!(choose_k(&points, 3..=5, 0).unwrap(), 1);
}

#[test]
fn lambda_rule_thresholds() {
    assert_eq!(choose_lambda(0.95), 1);
    assert_eq!(choose_lambda(0.9), 1);
    assert_eq!(choose_lambda(0.85), 2);
    assert_eq!(choose_lambda(0.7), 2);
    assert_eq!(choose_lambda(0.5), 3);
    assert_eq!(choose_lambda(-0.2), 3);
}

mod group_inference {
    use super::*;
    use crate::activation::Activation;
    use crate::datagen::{build_feature_bank, generate_synthetic, BankSpec, GroupSpec, Split};
    use crate::model::{init_symmetric, train_full_batch, DataView, FullBatchOptions, LayerTag, Targets};
    use std::collections::BTreeMap;

    fn small_reference() -> crate::datagen::Dataset {
        let bank = build_feature_bank(&BankSpec {
            dimension: 40,
            core_magnitudes: BTreeMap::from([(1, 1.0), (-1, 1.0)]),
            spurious_magnitudes: BTreeMap::from([(0, 2.0), (1, 2.0)]),
            core_sigma: BTreeMap::from([(1, 0.1), (-1, 0.1)]),
            spurious_sigma: BTreeMap::from([(0, 0.1), (1, 0.1)]),
            rotate: false,
            rotation_seed: 0,
        })
        .unwrap();
        let groups = [
            GroupSpec { class_id: 1, spurious_id: 0, size: 190, is_majority: true },
            GroupSpec { class_id: 1, spurious_id: 1, size: 10, is_majority: false },
            GroupSpec { class_id: -1, spurious_id: 1, size: 190, is_majority: true },
            GroupSpec { class_id: -1, spurious_id: 0, size: 10, is_majority: false },
        ];
        generate_synthetic(&bank, &groups, 0.0, 13).unwrap()
    }

    #[test]
    fn covers_every_training_example_once() {
        let ds = small_reference();
        let view = DataView::from_split(&ds, Split::Train);
        let mut net = init_symmetric(200, 40, 1, Activation::Relu, 5).unwrap();
        let targets = Targets::from_labels(&view.labels, crate::model::Loss::L2, 1).unwrap();
        train_full_batch(
            &mut net,
            &view.x,
            &targets,
            &FullBatchOptions { eta: 0.05, steps: 25, weight_decay: 0.0, snapshot_steps: vec![] },
        )
        .unwrap();
        let result =
            infer_groups(&net, &ds, 0, LayerTag::LastLayerOutputs, 2..=5, 42).unwrap();
        assert_eq!(result.covered_indices(), ds.split_indices(Split::Train));

        // early-output clustering recovers the planted minority well
        let minority = result.minority_indices();
        let true_minority: Vec<usize> = ds
            .split_indices(Split::Train)
            .into_iter()
            .filter(|&i| {
                let e = &ds.examples[i];
                ds.groups
                    .iter()
                    .any(|g| !g.is_majority && (g.class_id, g.spurious_id) == e.group)
            })
            .collect();
        let hit = true_minority.iter().filter(|i| minority.binary_search(i).is_ok()).count();
        let recall = hit as f64 / true_minority.len() as f64;
        assert!(recall >= 0.95, "minority recall {recall}");
    }

    #[test]
    fn tiny_class_gets_single_trivial_cluster() {
        let mut ds = small_reference();
        // keep one example of class -1
        let keep: Vec<usize> = {
            let mut seen_neg = 0;
            ds.examples
                .iter()
                .enumerate()
                .filter(|(_, e)| {
                    if e.label == -1 {
                        seen_neg += 1;
                        seen_neg <= 1
                    } else {
                        true
                    }
                })
                .map(|(i, _)| i)
                .collect()
        };
        ds.examples = keep.into_iter().map(|i| ds.examples[i].clone()).collect();
        ds.groups.clear();
        let net = init_symmetric(8, 40, 1, Activation::Relu, 1).unwrap();
        let result = infer_groups(&net, &ds, 2, LayerTag::LastLayerOutputs, 2..=5, 0).unwrap();
        let neg = &result.per_class[&-1];
        assert_eq!(neg.k, 1);
        assert_eq!(neg.cluster_sizes, vec![1]);
    }

    #[test]
    fn groups_file_is_complete() {
        let ds = small_reference();
        let net = init_symmetric(8, 40, 1, Activation::Relu, 2).unwrap();
        let result = infer_groups(&net, &ds, 2, LayerTag::LastLayerOutputs, 2..=3, 1).unwrap();
        let file = result.to_groups_file(&ds);
        assert_eq!(file.examples.len(), ds.split_indices(Split::Train).len());
        assert_eq!(file.per_class.len(), 2);
        assert_eq!(file.t_init_epochs, 2);
    }
}
