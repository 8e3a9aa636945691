mod common;

use batchlens::calibration::{dbscan_1d, estimate_pivot, estimate_pivot_with, DbscanParams, Label};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn as_options(labels: &[Label]) -> Vec<Option<usize>> {
    labels.iter().map(|l| l.cluster()).collect()
}

#[test]
fn dbscan_matches_interval_merge_on_random_fixtures() {
    let mut r = rng(30);
    for case in 0..500 {
        let values = clustered_values(&mut r);
        let eps = r.random_range(0.005..0.12);
        let min_pts = r.random_range(1..7);
        let labels = dbscan_1d(&values, eps, min_pts).unwrap();
        let expected = dbscan_oracle(&values, eps, min_pts);
        assert_eq!(as_options(&labels), expected, "case {case}: eps {eps} min_pts {min_pts} {values:?}");

        let pivot = estimate_pivot_with(&values, DbscanParams { eps, min_pts }).unwrap().pivot;
        assert_eq!(pivot, pivot_oracle(&values, &expected), "case {case}");
    }
}

#[test]
fn bimodal_fixture_pivot_is_cluster_minimum_not_mean() {
    let values = [0.10, 0.11, 0.12, 0.90];
    let result = estimate_pivot_with(&values, DbscanParams { eps: 0.05, min_pts: 2 }).unwrap();
    assert_eq!(result.pivot, 0.10);
    let mean = values.iter().sum::<f64>() / 4.0;
    assert_ne!(result.pivot, mean);
    assert_eq!(result.labels[3], Label::Noise);
}

#[test]
fn all_noise_falls_back_to_median() {
    let values = [0.0, 0.25, 0.5, 0.75];
    let result = estimate_pivot_with(&values, DbscanParams { eps: 0.05, min_pts: 2 }).unwrap();
    assert_eq!(result.largest_cluster, None);
    assert_eq!(result.pivot, 0.375);
}

#[test]
fn equal_sized_clusters_prefer_the_lower_one() {
    let values = [0.8, 0.81, 0.82, 0.2, 0.21, 0.22];
    let result = estimate_pivot_with(&values, DbscanParams { eps: 0.05, min_pts: 2 }).unwrap();
    assert_eq!(result.pivot, 0.2);
}

#[test]
fn default_parameters_follow_population_size() {
    assert_eq!(DbscanParams::default_for(10).min_pts, 3);
    assert_eq!(DbscanParams::default_for(1000).min_pts, 10);
    assert_eq!(DbscanParams::default_for(1001).min_pts, 11);
    assert_eq!(DbscanParams::default_for(5).eps, 0.05);
    let values: Vec<f64> = (0..100).map(|i| i as f64 / 1000.0).collect();
    assert_eq!(estimate_pivot(&values).unwrap().pivot, 0.0);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(dbscan_1d(&[], 0.05, 2).is_err());
    assert!(dbscan_1d(&[0.1, f64::NAN], 0.05, 2).is_err());
    assert!(dbscan_1d(&[0.1], 0.0, 2).is_err());
    assert!(dbscan_1d(&[0.1], 0.05, 0).is_err());
}

proptest! {
    #[test]
    fn pivot_is_permutation_invariant_and_a_member(
        values in prop::collection::vec(0.0f64..1.0, 1..120),
        seed in any::<u64>(),
    ) {
        let a = estimate_pivot(&values).unwrap();
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rng(seed));
        let b = estimate_pivot(&shuffled).unwrap();
        prop_assert_eq!(a.pivot, b.pivot);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.pivot >= lo && a.pivot <= hi);
        if a.largest_cluster.is_some() {
            prop_assert!(values.contains(&a.pivot));
        }
    }

    #[test]
    fn labels_follow_input_order(values in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let labels = dbscan_1d(&values, 0.05, 3).unwrap();
        prop_assert_eq!(as_options(&labels), dbscan_oracle(&values, 0.05, 3));
    }
}
