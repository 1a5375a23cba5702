//! Individual-ranking univariate microaggregation and the cluster-extreme
//! pre-processing used by the cluster-based sensitivity.
//!
//! Each attribute is clustered on its own: values are sorted (ties broken by
//! record index), cut into consecutive groups of `k`, and the `n mod k`
//! leftovers join the last group so every cluster has between `k` and
//! `2k - 1` members.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, Stage};
use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Record indices in ascending sorted order of the attribute value.
    pub members: Vec<usize>,
    pub centroid: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member values, in the cluster's sorted order.
    pub fn values(&self, column: &[f64]) -> Vec<f64> {
        self.members.iter().map(|&i| column[i]).collect()
    }
}

/// Partition of the records of one attribute into clusters that are
/// contiguous in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub attribute: String,
    pub k: usize,
    pub clusters: Vec<Cluster>,
    /// Record index to cluster index.
    pub assignment: Vec<usize>,
}

impl Clustering {
    pub fn n_records(&self) -> usize {
        self.assignment.len()
    }

    /// The column with each value replaced by its cluster centroid.
    pub fn centroid_column(&self) -> Vec<f64> {
        self.assignment
            .iter()
            .map(|&j| self.clusters[j].centroid)
            .collect()
    }

    /// Writes `attribute,cluster_index,size,min,max,centroid` rows.
    pub fn write_summary<W: Write>(&self, column: &[f64], w: &mut csv::Writer<W>) -> Result<()> {
        for (j, c) in self.clusters.iter().enumerate() {
            let vals = c.values(column);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            w.write_record([
                self.attribute.clone(),
                j.to_string(),
                c.len().to_string(),
                min.to_string(),
                max.to_string(),
                c.centroid.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// Clusters one column by individual ranking.
pub fn individual_ranking_cluster(attribute: &str, values: &[f64], k: usize) -> Result<Clustering> {
    let n = values.len();
    if k < 1 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > n {
        return Err(Error::param(format!(
            "k = {k} exceeds the number of records ({n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let n_clusters = n / k;
    let mut clusters = Vec::with_capacity(n_clusters);
    let mut assignment = vec![0; n];
    for j in 0..n_clusters {
        let start = j * k;
        let end = if j + 1 == n_clusters { n } else { start + k };
        let members = order[start..end].to_vec();
        for &i in &members {
            assignment[i] = j;
        }
        let vals: Vec<f64> = members.iter().map(|&i| values[i]).collect();
        clusters.push(Cluster {
            centroid: numeric::mean(&vals),
            members,
        });
    }

    Ok(Clustering {
        attribute: attribute.to_string(),
        k,
        clusters,
        assignment,
    })
}

/// Replaces every value by its cluster centroid, clustering each attribute
/// independently. Returns the clusterings for the sensitivity computations.
pub fn microaggregate(d: &Dataset, k: usize) -> Result<(Dataset, Vec<Clustering>)> {
    match d.stage() {
        Stage::Original | Stage::Preprocessed => {}
        other => {
            return Err(Error::param(format!(
                "microaggregation expects original or pre-processed data, got {other}"
            )))
        }
    }
    let clusterings = cluster_all(d, k)?;
    let columns = clusterings.iter().map(Clustering::centroid_column).collect();
    Ok((d.derive(columns, Stage::Microaggregated), clusterings))
}

/// One clustering per attribute, computed attribute-parallel.
pub fn cluster_all(d: &Dataset, k: usize) -> Result<Vec<Clustering>> {
    d.attributes()
        .par_iter()
        .zip(d.columns().par_iter())
        .map(|(name, col)| individual_ranking_cluster(name, col, k))
        .collect()
}

/// Order statistics of a cluster, counting tied values as repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterExtremes {
    pub min: f64,
    pub second_min: f64,
    pub third_min: f64,
    pub max: f64,
    pub second_max: f64,
    pub third_max: f64,
}

pub fn cluster_extremes(values: &[f64]) -> Result<ClusterExtremes> {
    if values.len() < 3 {
        return Err(Error::param(format!(
            "cluster extremes need at least 3 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(ClusterExtremes {
        min: sorted[0],
        second_min: sorted[1],
        third_min: sorted[2],
        max: sorted[n - 1],
        second_max: sorted[n - 2],
        third_max: sorted[n - 3],
    })
}

/// Applies the extreme-value replacement to one cluster in place: one record
/// holding the smallest value takes the second smallest value and one record
/// holding the largest value takes the second largest. Among tied records the
/// first in slice order is replaced.
pub fn preprocess_cluster(values: &mut [f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::param(format!(
            "pre-processing needs clusters of at least 3 values, got {}",
            values.len()
        )));
    }
    let mut lo = 0;
    let mut hi = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[lo] {
            lo = i;
        }
        if v > values[hi] {
            hi = i;
        }
    }
    let second_min = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != lo)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let second_max = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != hi)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    values[lo] = second_min;
    values[hi] = second_max;
    Ok(())
}

/// Pre-processes every cluster of every attribute. Cluster membership is
/// unchanged; within each cluster the replaced record is the one with the
/// lowest record index among those holding the extreme value.
pub fn preprocess_cbls(d: &Dataset, clusterings: &[Clustering]) -> Result<Dataset> {
    if clusterings.len() != d.n_attributes() {
        return Err(Error::param(format!(
            "{} clusterings for {} attributes",
            clusterings.len(),
            d.n_attributes()
        )));
    }
    let columns = d
        .columns()
        .par_iter()
        .zip(clusterings.par_iter())
        .map(|(col, clustering)| preprocess_column(col, clustering))
        .collect::<Result<Vec<_>>>()?;
    Ok(d.derive(columns, Stage::Preprocessed))
}

pub(crate) fn preprocess_column(col: &[f64], clustering: &Clustering) -> Result<Vec<f64>> {
    if clustering.n_records() != col.len() {
        return Err(Error::Alignment(format!(
            "clustering of '{}' covers {} records, column has {}",
            clustering.attribute,
            clustering.n_records(),
            col.len()
        )));
    }
    let mut out = col.to_vec();
    for c in &clustering.clusters {
        // Members are sorted by (value, index), so the first occurrence of
        // each extreme in this order is its lowest-index holder.
        let mut vals = c.values(col);
        preprocess_cluster(&mut vals)?;
        for (&i, v) in c.members.iter().zip(vals) {
            out[i] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(c: &Clustering) -> Vec<usize> {
        c.clusters.iter().map(Cluster::len).collect()
    }

    #[test]
    fn even_partition() {
        let c = individual_ranking_cluster("a", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3).unwrap();
        assert_eq!(c.clusters[0].members, vec![0, 1, 2]);
        assert_eq!(c.clusters[1].members, vec![3, 4, 5]);
        assert_eq!(c.clusters[0].centroid, 2.0);
        assert_eq!(c.clusters[1].centroid, 5.0);
    }

    #[test]
    fn leftovers_join_last_cluster() {
        let c = individual_ranking_cluster("a", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 3).unwrap();
        assert_eq!(sizes(&c), vec![3, 4]);
        assert_eq!(c.clusters[1].members, vec![3, 4, 5, 6]);

        let col: Vec<f64> = (0..1080).map(|i| f64::from(i % 97)).collect();
        let c = individual_ranking_cluster("a", &col, 100).unwrap();
        let mut expected = vec![100; 9];
        expected.push(180);
        assert_eq!(sizes(&c), expected);
    }

    #[test]
    fn invalid_k() {
        assert!(individual_ranking_cluster("a", &[1.0, 2.0], 0).is_err());
        assert!(individual_ranking_cluster("a", &[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn clusters_follow_sorted_order_not_row_order() {
        let c = individual_ranking_cluster("a", &[9.0, 1.0, 8.0, 2.0], 2).unwrap();
        assert_eq!(c.clusters[0].members, vec![1, 3]);
        assert_eq!(c.assignment, vec![1, 0, 1, 0]);
    }

    #[test]
    fn ties_break_by_record_index() {
        let c = individual_ranking_cluster("a", &[5.0, 5.0, 5.0, 5.0], 2).unwrap();
        assert_eq!(c.clusters[0].members, vec![0, 1]);
        assert_eq!(c.clusters[1].members, vec![2, 3]);
    }

    fn one_col(values: &[f64]) -> Dataset {
        Dataset::new(vec!["a".into()], vec![values.to_vec()], Stage::Original).unwrap()
    }

    #[test]
    fn microaggregate_replaces_by_centroids() {
        let (m, _) = microaggregate(&one_col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 3).unwrap();
        assert_eq!(m.column(0), &[2.0, 2.0, 2.0, 5.0, 5.0, 5.0]);
        assert_eq!(m.stage(), Stage::Microaggregated);
    }

    #[test]
    fn k_one_is_identity() {
        let vals = [3.5, -1.0, 7.25, 0.0];
        let (m, _) = microaggregate(&one_col(&vals), 1).unwrap();
        assert_eq!(m.column(0), &vals);
    }

    #[test]
    fn attributes_cluster_independently_and_rows_stay_aligned() {
        let d = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 10.0, 11.0], vec![100.0, 0.0, 101.0, 1.0]],
            Stage::Original,
        )
        .unwrap()
        .with_ids(vec!["r0".into(), "r1".into(), "r2".into(), "r3".into()])
        .unwrap();
        let (m, cl) = microaggregate(&d, 2).unwrap();
        assert_eq!(m.column(0), &[1.5, 1.5, 10.5, 10.5]);
        assert_eq!(m.column(1), &[100.5, 0.5, 100.5, 0.5]);
        assert_eq!(cl[1].assignment, vec![1, 0, 1, 0]);
        assert_eq!(m.ids(), d.ids());
    }

    #[test]
    fn rejects_masked_input() {
        let d = one_col(&[1.0, 2.0, 3.0]);
        let masked = d.derive(d.columns().to_vec(), Stage::Masked);
        assert!(microaggregate(&masked, 1).is_err());
    }

    #[test]
    fn extremes_with_repeats() {
        let e = cluster_extremes(&[3.0, 3.0, 3.0, 4.0, 5.0, 6.0, 6.0]).unwrap();
        assert_eq!(
            (e.min, e.second_min, e.third_min, e.max, e.second_max, e.third_max),
            (3.0, 3.0, 3.0, 6.0, 6.0, 5.0)
        );
        let e = cluster_extremes(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            (e.min, e.second_min, e.third_min, e.max, e.second_max, e.third_max),
            (1.0, 2.0, 3.0, 3.0, 2.0, 1.0)
        );
        let e = cluster_extremes(&[7.0; 3]).unwrap();
        assert!([e.min, e.second_min, e.third_min, e.max, e.second_max, e.third_max]
            .iter()
            .all(|&v| v == 7.0));
        assert!(cluster_extremes(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn preprocess_examples() {
        let mut v = [3.0, 3.0, 3.0, 4.0, 5.0, 6.0, 6.0];
        preprocess_cluster(&mut v).unwrap();
        assert_eq!(v, [3.0, 3.0, 3.0, 4.0, 5.0, 6.0, 6.0]);

        let mut v = [1.0, 4.0, 9.0];
        preprocess_cluster(&mut v).unwrap();
        assert_eq!(v, [4.0, 4.0, 4.0]);

        let mut v = [2.0, 5.0, 5.0];
        preprocess_cluster(&mut v).unwrap();
        assert_eq!(v, [5.0, 5.0, 5.0]);

        let mut v = [1.0, 2.0];
        assert!(preprocess_cluster(&mut v).is_err());
    }

    #[test]
    fn preprocess_replaces_lowest_index_holder() {
        // Records 1 and 3 share the minimum 0; records 0 and 2 share the maximum 9.
        let d = one_col(&[9.0, 0.0, 9.0, 0.0, 5.0, 5.0]);
        let cl = cluster_all(&d, 6).unwrap();
        let p = preprocess_cbls(&d, &cl).unwrap();
        // Ties mean the second extremes equal the extremes: nothing changes.
        assert_eq!(p.column(0), d.column(0));

        let d = one_col(&[9.0, 1.0, 8.0, 0.0, 0.0, 5.0]);
        let cl = cluster_all(&d, 6).unwrap();
        let p = preprocess_cbls(&d, &cl).unwrap();
        assert_eq!(p.column(0), &[8.0, 1.0, 8.0, 0.0, 0.0, 5.0]);
        assert_eq!(p.stage(), Stage::Preprocessed);
    }

    #[test]
    fn preprocess_requires_three_per_cluster() {
        let d = one_col(&[1.0, 2.0, 3.0, 4.0]);
        let cl = cluster_all(&d, 2).unwrap();
        assert!(matches!(preprocess_cbls(&d, &cl), Err(Error::Parameter(_))));
    }

    #[test]
    fn summary_rows() {
        let col = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let c = individual_ranking_cluster("a", &col, 3).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        c.write_summary(&col, &mut w).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "a,0,3,1,3,2\na,1,4,4,7,5.5\n");
    }

    fn column_strategy() -> impl Strategy<Value = Vec<f64>> {
        // Small integer pool forces plenty of ties.
        prop::collection::vec(prop_oneof![(0i32..8).prop_map(f64::from), -1e3f64..1e3], 1..120)
    }

    proptest! {
        #[test]
        fn clustering_invariants(col in column_strategy(), k_seed in 0usize..1000) {
            let n = col.len();
            let k = 1 + k_seed % n;
            let c = individual_ranking_cluster("a", &col, k).unwrap();
            let mut seen = vec![false; n];
            let mut prev_max = f64::NEG_INFINITY;
            for (j, cl) in c.clusters.iter().enumerate() {
                prop_assert!(cl.len() >= k && cl.len() < 2 * k);
                let vals = cl.values(&col);
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo >= prev_max);
                prev_max = hi;
                prop_assert!(lo <= cl.centroid && cl.centroid <= hi);
                for &i in &cl.members {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                    prop_assert_eq!(c.assignment[i], j);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn preprocess_is_idempotent(col in prop::collection::vec(-50.0f64..50.0, 3..60), k_seed in 0usize..100) {
            let k = 3 + k_seed % (col.len() - 2);
            let d = Dataset::new(vec!["a".into()], vec![col], Stage::Original).unwrap();
            let cl = cluster_all(&d, k).unwrap();
            let once = preprocess_cbls(&d, &cl).unwrap();
            let twice = preprocess_cbls(&once, &cl).unwrap();
            prop_assert_eq!(once.column(0), twice.column(0));
        }

        #[test]
        fn preprocess_narrows_to_second_extremes(vals in prop::collection::vec(-50.0f64..50.0, 3..40)) {
            let e = cluster_extremes(&vals).unwrap();
            let mut p = vals.clone();
            preprocess_cluster(&mut p).unwrap();
            let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, e.second_min);
            prop_assert_eq!(hi, e.second_max);
            let changed = vals.iter().zip(&p).filter(|(a, b)| a != b).count();
            prop_assert!(changed <= 2);
        }
    }
}
