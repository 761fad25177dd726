use gelid_core::evalstats::oracle::{mann_whitney_p_by_enumeration, max_mno_by_enumeration, mno_by_search};
use gelid_core::evalstats::{
    benjamini_hochberg, cliffs_delta, max_mno, mann_whitney_u, mno, mojo_fm, oracle_mno, Partition, PValueMethod,
};
use proptest::prelude::*;

fn labels(max_objects: usize, max_groups: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1..=max_objects).prop_flat_map(move |n| {
        (prop::collection::vec(0..max_groups, n), prop::collection::vec(0..max_groups, n))
    })
}

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((1u8..=5).prop_map(f64::from), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matching_mno_equals_enumeration((a, b) in labels(8, 5)) {
        let (pa, pb) = (Partition::from_index_labels(&a), Partition::from_index_labels(&b));
        let fast = mno(&pa, &pb).unwrap();
        prop_assert_eq!(fast, oracle_mno(&pa, &pb).unwrap().unwrap());
        prop_assert_eq!(max_mno(&pb).unwrap(), max_mno_by_enumeration(&pb));
    }

    #[test]
    fn mojo_fm_is_bounded_and_reflexive((a, b) in labels(12, 6)) {
        let (pa, pb) = (Partition::from_index_labels(&a), Partition::from_index_labels(&b));
        prop_assert_eq!(mno(&pa, &pa).unwrap(), 0);
        if let Ok(fm) = mojo_fm(&pa, &pb) {
            prop_assert!((0.0..=100.0).contains(&fm));
        }
        if max_mno(&pa).unwrap() > 0 {
            prop_assert_eq!(mojo_fm(&pa, &pa).unwrap(), 100.0);
        }
    }

    #[test]
    fn benjamini_hochberg_is_monotone_and_dominant(p in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let adj = benjamini_hochberg(&p).unwrap();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
        for w in order.windows(2) {
            prop_assert!(adj[w[0]] <= adj[w[1]]);
        }
        for (q, raw) in adj.iter().zip(&p) {
            prop_assert!(q >= raw && *q <= 1.0);
        }
    }

    #[test]
    fn mann_whitney_exact_matches_enumeration(x in sample(7), y in sample(7)) {
        let mw = mann_whitney_u(&x, &y).unwrap();
        prop_assert_eq!(mw.method, PValueMethod::Exact);
        let oracle = mann_whitney_p_by_enumeration(&x, &y);
        prop_assert!((mw.p_two_sided - oracle).abs() < 1e-12, "{} vs {}", mw.p_two_sided, oracle);
        let pairs = x.iter().flat_map(|a| y.iter().map(move |b| if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 }));
        prop_assert_eq!(mw.u, pairs.sum::<f64>());
    }

    #[test]
    fn cliffs_delta_is_antisymmetric(x in sample(15), y in sample(15)) {
        let d = cliffs_delta(&x, &y).unwrap().delta;
        prop_assert!((d + cliffs_delta(&y, &x).unwrap().delta).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn matching_mno_equals_move_join_search((a, b) in labels(6, 4)) {
        let (pa, pb) = (Partition::from_index_labels(&a), Partition::from_index_labels(&b));
        prop_assert_eq!(mno(&pa, &pb).unwrap(), mno_by_search(&pa, &pb).unwrap());
    }
}
