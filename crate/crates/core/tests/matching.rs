use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crossreg::bench::inlier_ratio;
use crossreg::geom::{Point3, PointCloud, RigidTransform};
use crossreg::matching::dense::sparse_to_dense_second_order;
use crossreg::matching::sparse::second_order_matrix;
use crossreg::matching::{
    binary_score, consistency_matrices, dense_loose_generate, one_to_many_generate,
    prior_guided_group_select, second_order, second_order_filter, spectral_key_selection,
    trims_distance, Correspondence, CorrespondenceSet, Stage,
};
use crossreg::pose::{hypothesis_select, weighted_svd};
use crossreg::FeatureMatrix;

fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureMatrix::from_vec(n, d, data).unwrap().normalized()
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, half: f64) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                )
            })
            .collect(),
    )
    .unwrap()
}

fn motion() -> RigidTransform {
    RigidTransform::from_axis_angle(
        Vector3::new(1.0, 2.0, -0.5),
        0.8,
        Vector3::new(0.4, -2.0, 1.0),
    )
}

#[test]
fn one_to_many_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (fa, fb) = (
            random_features(&mut rng, 5, 8),
            random_features(&mut rng, 7, 8),
        );
        let (pa, pb) = (
            random_cloud(&mut rng, 5, 1.0),
            random_cloud(&mut rng, 7, 1.0),
        );
        let k = 3;
        let g = one_to_many_generate(&fa, &fb, &pa, &pb, k).unwrap();
        assert_eq!(g.len(), 5 * k);
        let dense = dense_loose_generate(&fa, &fb, &pa, &pb, k).unwrap();
        assert_eq!(
            dense.items().iter().map(|c| c.key()).collect::<Vec<_>>(),
            g.items().iter().map(|c| c.key()).collect::<Vec<_>>()
        );
        for i in 0..5 {
            let mut sims: Vec<(usize, f64)> = (0..7)
                .map(|j| (j, fa.row(i).iter().zip(fb.row(j)).map(|(x, y)| x * y).sum()))
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let got: Vec<usize> = g.items()[i * k..(i + 1) * k]
                .iter()
                .map(|c| c.dst_index)
                .collect();
            let want: Vec<usize> = sims[..k].iter().map(|s| s.0).collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn identical_features_match_themselves_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = random_features(&mut rng, 30, 16);
    let p = random_cloud(&mut rng, 30, 1.0);
    let g = one_to_many_generate(&f, &f, &p, &p, 3).unwrap();
    for i in 0..30 {
        assert_eq!(g.items()[3 * i].dst_index, i);
    }
    assert!(one_to_many_generate(&f, &f, &p, &p, 31).is_err());
}

#[test]
fn spectral_saturation_returns_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_cloud(&mut rng, 12, 1.0);
    let t = motion();
    let items = p
        .iter()
        .enumerate()
        .map(|(i, x)| Correspondence::new(i, i, *x, t.apply(x), 1.0))
        .collect();
    let g = CorrespondenceSet::new(items, Stage::Loose).unwrap();
    let sel = spectral_key_selection(&g, 0.1, 12, 1e-6, 200).unwrap();
    assert_eq!(sel.keys.len(), 12);
    assert!(!sel.saturated);
    let sel = spectral_key_selection(&g, 0.1, 50, 1e-6, 200).unwrap();
    assert_eq!(sel.keys.len(), 12);
    assert!(sel.saturated);
}

/// With binary weights the second-order score counts the keys consistent
/// with both the key row and the candidate column.
#[test]
fn binary_second_order_counts_joint_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = motion();
    let make = |rng: &mut ChaCha8Rng, n: usize| {
        let items = (0..n)
            .map(|i| {
                let p = Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let mut q = t.apply(&p);
                if rng.random_bool(0.4) {
                    q.x += rng.random_range(-0.5..0.5);
                }
                Correspondence::new(i, i, p, q, 1.0)
            })
            .collect();
        CorrespondenceSet::new(items, Stage::Loose).unwrap()
    };
    let sigma = 0.1;
    let keys = make(&mut rng, 15);
    let all = make(&mut rng, 20);
    let consistent =
        |a: &Correspondence, b: &Correspondence| binary_score(trims_distance(a, b), sigma) == 1.0;
    let (sk, _) = consistency_matrices(&keys, &keys, sigma).unwrap();
    let (cross, _) = consistency_matrices(&keys, &all, sigma).unwrap();
    let counts = second_order(&sk, &sk, &cross).unwrap();
    let mut positive = 0;
    for (i, ki) in keys.iter().enumerate() {
        for (j, gj) in all.iter().enumerate() {
            let both = keys
                .iter()
                .filter(|kl| consistent(ki, kl) && consistent(kl, gj))
                .count();
            let expect = if consistent(ki, gj) { both as f64 } else { 0.0 };
            assert_eq!(counts.get(i, j), expect);
            positive += (expect > 0.0) as usize;
        }
    }
    assert!(positive > 0);
    // the sparse and sparse-to-dense stages share one definition
    assert_eq!(
        sparse_to_dense_second_order(&keys, &all, sigma).unwrap(),
        second_order_matrix(&keys, &all, sigma).unwrap()
    );
}

fn gt_pairs(src: &PointCloud, t: &RigidTransform, offset: usize) -> Vec<Correspondence> {
    src.iter()
        .enumerate()
        .map(|(i, p)| Correspondence::new(i + offset, i + offset, *p, t.apply(p), 1.0))
        .collect()
}

#[test]
fn groups_exclude_perturbed_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = motion();
    let priors = CorrespondenceSet::new(
        gt_pairs(&random_cloud(&mut rng, 6, 0.05), &t, 0),
        Stage::Refined,
    )
    .unwrap();
    let far: Vec<Point3> = (0..40)
        .map(|_| {
            let d = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            Point3::from(d.normalize() * rng.random_range(1.0..2.0))
        })
        .collect();
    let inliers = gt_pairs(&PointCloud::new(far).unwrap(), &t, 0);
    let mut items = inliers.clone();
    for (k, c) in inliers.iter().enumerate() {
        // pushed 0.5 m radially away from the prior cluster
        let mut o = *c;
        o.src_index = 1000 + k;
        o.dst_point = t.apply(&(c.src_point + c.src_point.coords.normalize() * 0.5));
        items.push(o);
    }
    let dense = CorrespondenceSet::new(items, Stage::DenseLoose).unwrap();
    let groups = prior_guided_group_select(&priors, &dense, 0.1, 250).unwrap();
    assert_eq!(groups.len(), priors.len());
    for g in &groups.groups {
        assert!(g.weights.iter().all(|&w| w > 0.0));
        assert_eq!(g.members.len(), 40);
        assert!(g.members.iter().all(|c| c.residual(&t) < 1e-9));
    }
    assert_eq!(inlier_ratio(groups.union().items(), &t), 1.0);
}

/// Groups seeded by mostly correct priors hold a far larger share of inliers
/// than the dense pool they are drawn from, and in groups of correct priors
/// nearly all weight sits on inliers.
#[test]
fn groups_concentrate_dense_inliers() {
    let t = motion();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let src = random_cloud(&mut rng, 200, 2.0);
        let junk = random_cloud(&mut rng, 200, 2.0);
        let dense_items: Vec<Correspondence> = src
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let q = if i % 5 == 0 {
                    t.apply(p)
                } else {
                    t.apply(&junk[i])
                };
                Correspondence::new(i, i, *p, q, 1.0)
            })
            .collect();
        let dense = CorrespondenceSet::new(dense_items.clone(), Stage::DenseLoose).unwrap();
        let prior_items: Vec<Correspondence> = (0..12)
            .map(|k| dense_items[if k < 8 { 5 * k } else { 5 * k + 1 }])
            .collect();
        let priors = CorrespondenceSet::new(prior_items, Stage::Refined).unwrap();
        let prior_ir = inlier_ratio(priors.items(), &t);
        assert!(prior_ir >= 0.5);
        let groups = prior_guided_group_select(&priors, &dense, 0.1, 250).unwrap();
        let dense_ir = inlier_ratio(dense.items(), &t);
        let union_ir = inlier_ratio(groups.union().items(), &t);
        assert!(
            union_ir >= 1.5 * dense_ir,
            "seed {seed}: {dense_ir} -> {union_ir}"
        );
        for g in groups
            .groups
            .iter()
            .filter(|g| priors.items()[g.prior].residual(&t) < 0.1)
        {
            let total: f64 = g.weights.iter().sum();
            let good: f64 = g
                .members
                .iter()
                .zip(&g.weights)
                .filter(|(c, _)| c.residual(&t) < 0.1)
                .map(|(_, w)| w)
                .sum();
            assert!(
                good >= 0.9 * total,
                "seed {seed}: inlier weight share {}",
                good / total
            );
        }
    }
}

#[test]
fn dense_inliers_far_from_every_prior_are_reached() {
    let t = motion();
    let near = PointCloud::from_xyz(&[
        [0.0, 0.0, 0.0],
        [0.05, 0.0, 0.0],
        [0.0, 0.05, 0.0],
        [0.0, 0.0, 0.05],
    ])
    .unwrap();
    let priors = CorrespondenceSet::new(gt_pairs(&near, &t, 0), Stage::Refined).unwrap();
    let far = PointCloud::from_xyz(&[[5.0, 0.0, 0.0], [0.0, -4.0, 3.0]]).unwrap();
    let dense = CorrespondenceSet::new(gt_pairs(&far, &t, 0), Stage::DenseLoose).unwrap();
    let groups = prior_guided_group_select(&priors, &dense, 0.1, 250).unwrap();
    assert_eq!(groups.len(), 4);
    assert!(groups.groups.iter().all(|g| g.members.len() == 2));
}

#[test]
fn hypothesis_counts_follow_candidates_under_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let src = random_cloud(&mut rng, 60, 2.0);
    let t = motion();
    let dst = crossreg::geom::apply_transform(&t, &src);
    let shift = |d: f64| {
        RigidTransform::new(*t.rotation(), t.translation() + Vector3::new(d, 0.0, 0.0)).unwrap()
    };
    // a 0.05 shift would tie with the true pose and win on the lower index
    let cands = vec![shift(1.0), shift(0.15), t, shift(0.3)];
    let (best, counts) = hypothesis_select(&cands, &src, &dst, 0.1).unwrap();
    assert_eq!(best, 2);
    let order = [3, 0, 2, 1];
    let permuted: Vec<RigidTransform> = order.iter().map(|&i| cands[i]).collect();
    let (best_p, counts_p) = hypothesis_select(&permuted, &src, &dst, 0.1).unwrap();
    for (k, &i) in order.iter().enumerate() {
        assert_eq!(counts_p[k], counts[i]);
    }
    assert_eq!(order[best_p], 2);
}

#[test]
fn strict_selection_lifts_inlier_ratio_on_constructed_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = motion();
    let src = random_cloud(&mut rng, 300, 2.0);
    let dst_noise = random_cloud(&mut rng, 300, 2.0);
    // 30 true pairs among 300 with random partners
    let items: Vec<Correspondence> = src
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let q = if i % 10 == 0 {
                t.apply(p)
            } else {
                t.apply(&dst_noise[i])
            };
            Correspondence::new(i, i, *p, q, 1.0)
        })
        .collect();
    let loose = CorrespondenceSet::new(items, Stage::Loose).unwrap();
    let sel = spectral_key_selection(&loose, 0.1, 30, 1e-6, 200).unwrap();
    let refined = second_order_filter(&sel.keys, &loose, 0.1, 2).unwrap();
    let before = inlier_ratio(loose.items(), &t);
    let after = inlier_ratio(refined.items(), &t);
    assert!(after >= 3.0 * before, "{before} -> {after}");
}

fn rigid_strategy() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0f64..3.1,
        prop::array::uniform3(-10.0f64..10.0),
    )
        .prop_filter_map("non-zero axis", |(a, angle, t)| {
            let axis = Vector3::from(a);
            (axis.norm() > 1e-3)
                .then(|| RigidTransform::from_axis_angle(axis, angle, Vector3::from(t)))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_output_is_a_rotation(
        pts in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 3..30),
        noise in prop::collection::vec(prop::array::uniform3(-0.5f64..0.5), 30),
        scale in 0.01f64..100.0,
    ) {
        let corrs: Vec<Correspondence> = pts
            .iter()
            .zip(&noise)
            .enumerate()
            .map(|(i, (p, n))| Correspondence::new(i, i, Point3::from(*p), Point3::from(*p) + Vector3::from(*n), 1.0))
            .collect();
        let w: Vec<f64> = (0..corrs.len()).map(|i| 1.0 + i as f64).collect();
        if let Ok(t) = weighted_svd(&corrs, &w) {
            let r = t.rotation();
            prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            let scaled: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let t2 = weighted_svd(&corrs, &scaled).unwrap();
            prop_assert!((t2.rotation() - r).norm() < 1e-12 * 1e2);
            prop_assert!((t2.translation() - t.translation()).norm() < 1e-10);
        }
    }

    #[test]
    fn true_pairs_are_trims_consistent(t in rigid_strategy(), p in prop::array::uniform3(-3.0f64..3.0), q in prop::array::uniform3(-3.0f64..3.0)) {
        let (p, q) = (Point3::from(p), Point3::from(q));
        let a = Correspondence::new(0, 0, p, t.apply(&p), 1.0);
        let b = Correspondence::new(1, 1, q, t.apply(&q), 1.0);
        prop_assert!(trims_distance(&a, &b) < 1e-9);
    }
}
