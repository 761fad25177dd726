use gelid_core::clustering::{
    context_matrix, dbscan, dbscan_core_points, group_by_context, mean_shift, mean_shift_modes, mean_shift_step,
    optics, optics_ordering, ClusterAlgorithm, ClusterAssignment, ContextItem, DistanceMatrix,
};
use gelid_core::evalstats::{mojo_fm, Partition};
use gelid_core::synthetic::planted_contexts;
use proptest::prelude::*;

fn truth_partition(items: &[ContextItem], truth: &[usize]) -> Partition {
    Partition::from_labels(items.iter().zip(truth).map(|(i, &t)| (i.segment_id.clone(), t))).unwrap()
}

fn same_clustering(a: &ClusterAssignment, b: &ClusterAssignment) {
    let (pa, pb) = (a.to_partition().unwrap(), b.to_partition().unwrap());
    assert_eq!(mojo_fm(&pa, &pb).unwrap(), 100.0);
    assert_eq!(mojo_fm(&pb, &pa).unwrap(), 100.0);
    assert_eq!(a.noise, b.noise);
}

/// Fisher-Yates driven by proptest-chosen swap indices.
fn permutation(n: usize, swaps: &[usize]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, swaps[i % swaps.len()] % (i + 1));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn context_matrix_is_a_dissimilarity(seed in 0u64..1000, scenes in 1usize..4, per in 1usize..6) {
        let (items, _) = planted_contexts(scenes, per, 0.2, seed).unwrap();
        let d = context_matrix(&items).unwrap();
        d.validate().unwrap();
        for i in 0..d.len() {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..d.len() {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                prop_assert!((0.0..=1.0).contains(&d.get(i, j)));
            }
        }
    }

    #[test]
    fn dbscan_ignores_input_order(
        seed in 0u64..1000,
        swaps in prop::collection::vec(0usize..1000, 1..20),
        eps in 0.05f64..0.9,
        min_pts in 1usize..5,
    ) {
        let (items, _) = planted_contexts(3, 5, 0.2, seed).unwrap();
        let d = context_matrix(&items).unwrap();
        let shuffled = d.permuted(&permutation(d.len(), &swaps)).unwrap();
        let a = dbscan(&d, eps, min_pts).unwrap();
        let b = dbscan(&shuffled, eps, min_pts).unwrap();
        same_clustering(&a, &b);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn optics_cut_matches_dbscan_on_core_points(
        seed in 0u64..1000,
        eps in 0.05f64..0.9,
        min_pts in 1usize..5,
    ) {
        let (items, _) = planted_contexts(3, 5, 0.2, seed).unwrap();
        let d = context_matrix(&items).unwrap();
        let core = dbscan_core_points(&d, eps, min_pts);
        let ordering = optics_ordering(&d, min_pts, 1.0);
        for (i, &c) in core.iter().enumerate() {
            prop_assert_eq!(c, ordering.core_distance[i].is_some_and(|cd| cd <= eps));
        }
        let a = dbscan(&d, eps, min_pts).unwrap();
        let b = optics(&d, min_pts, 1.0, eps).unwrap();
        prop_assert_eq!(&a.noise, &b.noise);
        // core points share a cluster in one result iff they do in the other
        let core_ids: Vec<&String> = d.ids().iter().zip(&core).filter(|(_, &c)| c).map(|(id, _)| id).collect();
        for x in &core_ids {
            for y in &core_ids {
                prop_assert_eq!(
                    a.cluster_of(x) == a.cluster_of(y),
                    b.cluster_of(x) == b.cluster_of(y),
                );
            }
        }
    }

    #[test]
    fn mean_shift_modes_are_fixed_points(seed in 0u64..1000, bandwidth in 0.2f64..0.8) {
        let (items, _) = planted_contexts(3, 4, 0.2, seed).unwrap();
        let points: Vec<Vec<f64>> = items.iter().map(ContextItem::embedding).collect();
        for m in mean_shift_modes(&points, bandwidth, 1e-12, 500) {
            let next = mean_shift_step(&points, &m, bandwidth).unwrap();
            let shift: f64 = next.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(shift < 1e-9, "shift {shift}");
        }
    }
}

#[test]
fn planted_scenes_are_recovered_by_every_algorithm() {
    for seed in 0..5 {
        let (items, truth) = planted_contexts(3, 20, 0.2, seed).unwrap();
        let expected = truth_partition(&items, &truth);
        for name in ["dbscan", "optics", "mean_shift"] {
            let got = group_by_context(&items, &ClusterAlgorithm::default_for(name).unwrap()).unwrap();
            assert_eq!(got.n_items(), items.len());
            let score = mojo_fm(&got.to_partition().unwrap(), &expected).unwrap();
            assert!(score >= 90.0, "{name} seed {seed}: {score}");
        }
    }
}

#[test]
fn mean_shift_assigns_every_point_and_merges_close_modes() {
    let ids: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
    let points = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0], vec![5.1], vec![9.0]];
    let out = mean_shift(&ids, &points, 1.0, 1e-9, 100).unwrap();
    assert!(out.noise.is_empty());
    let members: Vec<Vec<String>> = out.clusters.iter().map(|c| c.member_segment_ids.clone()).collect();
    assert_eq!(members, vec![vec!["p0", "p1", "p2"], vec!["p3", "p4"], vec!["p5"]]);
    assert_eq!(out.clusters[0].medoid, "p1");
}

#[test]
fn noise_points_become_singletons() {
    let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let d = DistanceMatrix::new(ids, vec![0.0, 0.1, 0.9, 0.1, 0.0, 0.9, 0.9, 0.9, 0.0]).unwrap();
    let out = dbscan(&d, 0.2, 2).unwrap();
    assert_eq!(out.noise, vec!["c"]);
    assert_eq!(out.to_partition().unwrap().n_groups(), 2);
}
