//! Noise calibration for microaggregated centroids.
//!
//! Three per-cluster quantities are provided:
//!
//! * the global sensitivity of a mean over a bounded domain,
//!   `(maxA - minA) / |C|`;
//! * the local sensitivity at the actual cluster,
//!   `max(maxA - min C, max C - minA) / |C|`;
//! * the cluster-based local sensitivity of the mean of a pre-processed
//!   cluster, which depends only on the six extreme order statistics of the
//!   cluster and never on the domain.
//!
//! Each `*_sum` function returns the numerator (the largest change in the
//! cluster sum) so callers can compare values before the division by `|C|`.
//! Brute-force counterparts live in [`oracle`].

use std::io::Write;

use serde::Serialize;

use crate::dataset::AttributeDomain;
use crate::error::{Error, Result};
use crate::microaggregation::{cluster_extremes, ClusterExtremes, Clustering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityKind {
    Global,
    Local,
    ClusterBasedLocal,
}

impl SensitivityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityKind::Global => "global",
            SensitivityKind::Local => "local",
            SensitivityKind::ClusterBasedLocal => "cluster_based_local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterSensitivity {
    pub cluster: usize,
    pub size: usize,
    pub value: f64,
}

/// Per-cluster sensitivities of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityProfile {
    pub attribute: String,
    pub kind: SensitivityKind,
    pub clusters: Vec<ClusterSensitivity>,
}

impl SensitivityProfile {
    /// Computes `kind` for every cluster of `clustering` over the original
    /// `column`. `domain` is required for the global and local kinds.
    pub fn compute(
        kind: SensitivityKind,
        clustering: &Clustering,
        column: &[f64],
        domain: Option<&AttributeDomain>,
    ) -> Result<Self> {
        let need_domain = || {
            domain.ok_or_else(|| {
                Error::param(format!(
                    "{} sensitivity of '{}' needs a domain",
                    kind.as_str(),
                    clustering.attribute
                ))
            })
        };
        let clusters = clustering
            .clusters
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let value = match kind {
                    SensitivityKind::Global => global_centroid_sensitivity(need_domain()?, c.len())?,
                    SensitivityKind::Local => {
                        local_centroid_sensitivity(&c.values(column), need_domain()?)?
                    }
                    SensitivityKind::ClusterBasedLocal => {
                        cbls_sensitivity(&cluster_extremes(&c.values(column))?, c.len())?
                    }
                };
                Ok(ClusterSensitivity {
                    cluster: j,
                    size: c.len(),
                    value,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            attribute: clustering.attribute.clone(),
            kind,
            clusters,
        })
    }

    /// Min, median and max over clusters.
    pub fn digest(&self) -> SensitivityDigest {
        let mut v: Vec<f64> = self.clusters.iter().map(|c| c.value).collect();
        v.sort_by(f64::total_cmp);
        let median = if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
        };
        SensitivityDigest {
            attribute: self.attribute.clone(),
            kind: self.kind,
            clusters: v.len(),
            min: v[0],
            median,
            max: v[v.len() - 1],
        }
    }

    /// Appends `attribute,cluster_index,kind,size,sensitivity` rows.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for c in &self.clusters {
            w.write_record([
                self.attribute.clone(),
                c.cluster.to_string(),
                self.kind.as_str().to_string(),
                c.size.to_string(),
                c.value.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub const REPORT_HEADER: [&str; 5] = ["attribute", "cluster_index", "kind", "size", "sensitivity"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityDigest {
    pub attribute: String,
    pub kind: SensitivityKind,
    pub clusters: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn check_size(size: usize, min: usize) -> Result<()> {
    if size < min {
        return Err(Error::param(format!(
            "cluster size must be at least {min}, got {size}"
        )));
    }
    Ok(())
}

pub fn global_centroid_sensitivity(domain: &AttributeDomain, cluster_size: usize) -> Result<f64> {
    check_size(cluster_size, 1)?;
    Ok(domain.width() / cluster_size as f64)
}

pub fn local_sensitivity_sum(values: &[f64], domain: &AttributeDomain) -> Result<f64> {
    check_size(values.len(), 1)?;
    for &v in values {
        domain.check(v)?;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((domain.upper - lo).max(hi - domain.lower))
}

/// Largest change of the cluster mean when one member moves anywhere in the
/// domain.
pub fn local_centroid_sensitivity(values: &[f64], domain: &AttributeDomain) -> Result<f64> {
    Ok(local_sensitivity_sum(values, domain)? / values.len() as f64)
}

/// Largest change in the sum of a pre-processed cluster caused by moving one
/// member: either the smallest value jumps past the largest, or the largest
/// drops below the smallest.
pub fn cbls_sensitivity_sum(e: &ClusterExtremes) -> f64 {
    let upward = (e.max - e.second_min).abs()
        + (e.third_min - e.second_min).abs()
        + (e.max - e.second_max).abs();
    let downward = (e.min - e.second_max).abs()
        + (e.third_max - e.second_max).abs()
        + (e.min - e.second_min).abs();
    upward.max(downward)
}

pub fn cbls_sensitivity(extremes: &ClusterExtremes, cluster_size: usize) -> Result<f64> {
    check_size(cluster_size, 3)?;
    Ok(cbls_sensitivity_sum(extremes) / cluster_size as f64)
}

/// Exhaustive-replacement oracles. They enumerate candidate single-record
/// changes and measure the resulting change of the (pre-processed) cluster
/// sum directly, without using the closed forms above.
pub mod oracle {
    use super::*;
    use crate::microaggregation::preprocess_cluster;

    /// Max over members `r` and replacements `v` in `{minA, maxA}` of the
    /// change in the cluster sum.
    pub fn local_sensitivity_sum(values: &[f64], domain: &AttributeDomain) -> Result<f64> {
        check_size(values.len(), 1)?;
        let mut best: f64 = 0.0;
        for &x in values {
            for v in [domain.lower, domain.upper] {
                // The sums differ in exactly this one term.
                best = best.max((v - x).abs());
            }
        }
        Ok(best)
    }

    pub fn local_sensitivity(values: &[f64], domain: &AttributeDomain) -> Result<f64> {
        Ok(local_sensitivity_sum(values, domain)? / values.len() as f64)
    }

    /// Replacement candidates: domain endpoints, a uniform grid of
    /// `grid_points` over the domain, and every value already in the cluster.
    pub fn candidates(values: &[f64], domain: &AttributeDomain, grid_points: usize) -> Vec<f64> {
        let mut c = Vec::with_capacity(grid_points + values.len() + 2);
        c.push(domain.lower);
        c.push(domain.upper);
        for g in 0..grid_points {
            let t = g as f64 / (grid_points - 1) as f64;
            c.push(domain.lower + t * domain.width());
        }
        c.extend_from_slice(values);
        c
    }

    /// Max over members and candidate replacements of the change in the sum
    /// of the pre-processed cluster, membership held fixed.
    pub fn cbls_sensitivity_sum(
        values: &[f64],
        domain: &AttributeDomain,
        grid_points: usize,
    ) -> Result<f64> {
        check_size(values.len(), 3)?;
        if grid_points < 2 {
            return Err(Error::param("oracle grid needs at least 2 points"));
        }
        let mut base = values.to_vec();
        preprocess_cluster(&mut base)?;
        let base_sum: f64 = base.iter().sum();

        let mut best: f64 = 0.0;
        let mut scratch = values.to_vec();
        for r in 0..values.len() {
            for v in candidates(values, domain, grid_points) {
                scratch.copy_from_slice(values);
                scratch[r] = v;
                preprocess_cluster(&mut scratch)?;
                let s: f64 = scratch.iter().sum();
                best = best.max((s - base_sum).abs());
            }
        }
        Ok(best)
    }

    pub fn cbls_sensitivity(
        values: &[f64],
        domain: &AttributeDomain,
        grid_points: usize,
    ) -> Result<f64> {
        Ok(cbls_sensitivity_sum(values, domain, grid_points)? / values.len() as f64)
    }
}
