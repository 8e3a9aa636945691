//! Pivot estimation by one-dimensional density clustering.
//!
//! The pivot is the minimum complexity inside the largest DBSCAN cluster. It
//! is generally not the mean of the distribution.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 0.05;

/// Cluster membership of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(id) => Some(id),
            Label::Noise => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    /// `eps = 0.05`, `min_pts = max(3, ceil(0.01 * n))`.
    pub fn default_for(n: usize) -> Self {
        DbscanParams {
            eps: DEFAULT_EPS,
            min_pts: default_min_pts(n),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid("eps", "must be positive"));
        }
        if self.min_pts == 0 {
            return Err(Error::invalid("min_pts", "must be at least 1"));
        }
        Ok(())
    }
}

/// DBSCAN settings where `min_pts` may be left to the population-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub eps: f64,
    pub min_pts: Option<usize>,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            eps: DEFAULT_EPS,
            min_pts: None,
        }
    }
}

impl CalibrationParams {
    pub fn resolve(&self, n: usize) -> DbscanParams {
        DbscanParams {
            eps: self.eps,
            min_pts: self.min_pts.unwrap_or_else(|| default_min_pts(n)),
        }
    }
}

pub fn default_min_pts(n: usize) -> usize {
    3.max((0.01 * n as f64).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Labels in input order.
    pub labels: Vec<Label>,
    /// `None` when every point is noise and the median fallback was used.
    pub largest_cluster: Option<usize>,
    pub pivot: f64,
    pub params: DbscanParams,
}

/// DBSCAN on the real line. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Points are visited in ascending value
/// order, so cluster ids increase left to right and a border point reachable
/// from two clusters joins the left one.
pub fn dbscan_1d(values: &[f64], eps: f64, min_pts: usize) -> Result<Vec<Label>> {
    DbscanParams { eps, min_pts }.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("values", "must be non-empty"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("values", format!("non-finite value {v}")));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    // neighbourhood of sorted position i is the contiguous range [lo, hi)
    let neighbours = |i: usize| {
        let lo = sorted.partition_point(|&v| v < sorted[i] - eps);
        let hi = sorted.partition_point(|&v| v <= sorted[i] + eps);
        (lo, hi)
    };

    let n = sorted.len();
    let mut labels = vec![None::<Label>; n];
    let mut next_id = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start].is_some() {
            continue;
        }
        let (lo, hi) = neighbours(start);
        if hi - lo < min_pts {
            labels[start] = Some(Label::Noise);
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[start] = Some(Label::Cluster(id));
        queue.extend(lo..hi);
        while let Some(p) = queue.pop_front() {
            match labels[p] {
                Some(Label::Noise) => labels[p] = Some(Label::Cluster(id)),
                None => {
                    labels[p] = Some(Label::Cluster(id));
                    let (plo, phi) = neighbours(p);
                    if phi - plo >= min_pts {
                        queue.extend(plo..phi);
                    }
                }
                Some(Label::Cluster(_)) => {}
            }
        }
    }

    let mut out = vec![Label::Noise; n];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = labels[pos].unwrap_or(Label::Noise);
    }
    Ok(out)
}

/// Runs [`dbscan_1d`] and takes the pivot as the minimum of the largest
/// cluster. Ties on size go to the cluster with the smaller minimum. If every
/// point is noise the pivot falls back to the median.
pub fn estimate_pivot_with(values: &[f64], params: DbscanParams) -> Result<CalibrationResult> {
    let labels = dbscan_1d(values, params.eps, params.min_pts)?;
    let n_clusters = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    let mut minima = vec![f64::INFINITY; n_clusters];
    for (label, &v) in labels.iter().zip(values) {
        if let Label::Cluster(id) = label {
            sizes[*id] += 1;
            minima[*id] = minima[*id].min(v);
        }
    }
    let largest = (0..n_clusters).min_by(|&a, &b| {
        sizes[b]
            .cmp(&sizes[a])
            .then(minima[a].total_cmp(&minima[b]))
    });
    let pivot = match largest {
        Some(id) => minima[id],
        None => median(values),
    };
    Ok(CalibrationResult {
        labels,
        largest_cluster: largest,
        pivot,
        params,
    })
}

/// [`estimate_pivot_with`] using the default parameters for `values.len()`.
pub fn estimate_pivot(values: &[f64]) -> Result<CalibrationResult> {
    estimate_pivot_with(values, DbscanParams::default_for(values.len()))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BIMODAL: [f64; 4] = [0.10, 0.11, 0.12, 0.90];

    #[test]
    fn bimodal_fixture_clusters() {
        let labels = dbscan_1d(&BIMODAL, 0.05, 2).unwrap();
        assert_eq!(
            labels,
            vec![Label::Cluster(0), Label::Cluster(0), Label::Cluster(0), Label::Noise]
        );
    }

    #[test]
    fn bimodal_fixture_pivot() {
        let r = estimate_pivot(&BIMODAL).unwrap();
        assert_eq!(r.params.min_pts, 3);
        assert_eq!(r.pivot, 0.10);
        let mean = BIMODAL.iter().sum::<f64>() / 4.0;
        assert_ne!(r.pivot, mean);
    }

    #[test]
    fn identical_points_single_cluster() {
        let labels = dbscan_1d(&[0.3; 7], 0.01, 7).unwrap();
        assert!(labels.iter().all(|&l| l == Label::Cluster(0)));
    }

    #[test]
    fn sparse_points_all_noise_and_median_fallback() {
        let v = [0.0, 0.2, 0.4, 0.9];
        assert!(dbscan_1d(&v, 0.1, 2).unwrap().iter().all(|&l| l == Label::Noise));
        let r = estimate_pivot_with(&v, DbscanParams { eps: 0.1, min_pts: 2 }).unwrap();
        assert_eq!(r.largest_cluster, None);
        assert!((r.pivot - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_cluster_pivot_is_min() {
        let v: Vec<f64> = (0..50).map(|i| 0.3 + i as f64 * 0.004).collect();
        assert_eq!(estimate_pivot(&v).unwrap().pivot, 0.3);
    }

    #[test]
    fn tie_goes_to_smaller_minimum() {
        let v = [0.8, 0.81, 0.82, 0.2, 0.21, 0.22];
        let r = estimate_pivot_with(&v, DbscanParams { eps: 0.05, min_pts: 2 }).unwrap();
        assert_eq!(r.pivot, 0.2);
    }

    #[test]
    fn border_point_joins_left_cluster() {
        // 0.5 is within eps of both 0.45 and 0.55 but has only 3 neighbours.
        let v = [0.40, 0.42, 0.45, 0.5, 0.55, 0.58, 0.60];
        let labels = dbscan_1d(&v, 0.05, 4).unwrap();
        assert_eq!(labels[3], labels[0]);
        assert_ne!(labels[0], labels[6]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(dbscan_1d(&[], 0.1, 2).is_err());
        assert!(dbscan_1d(&[0.1], 0.0, 2).is_err());
        assert!(dbscan_1d(&[0.1], 0.1, 0).is_err());
        assert!(dbscan_1d(&[f64::NAN], 0.1, 1).is_err());
    }
}
