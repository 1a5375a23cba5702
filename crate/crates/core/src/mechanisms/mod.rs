//! Release mechanisms.
//!
//! * `dp`: Laplace noise on every value, calibrated to the domain width.
//! * `dp-um`: individual-ranking microaggregation, then one Laplace draw per
//!   cluster calibrated to the global centroid sensitivity.
//! * `idp-ls`: as `dp-um` with the local centroid sensitivity.
//! * `idp-cbls`: cluster-extreme pre-processing before computing centroids,
//!   with the cluster-based sensitivity; needs no domain bounds.
//!
//! Noise for attribute `a`, cluster `j` comes from [`noise_stream`]`(seed, a, j)`,
//! so output is independent of scheduling and thread count.

mod budget;
mod laplace;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use budget::{allocate_budget, PrivacyBudget};
pub use laplace::{derive_seed, laplace_sample, noise_stream};

use crate::dataset::{AttributeDomain, Dataset, Stage};
use crate::error::{Error, Result};
use crate::microaggregation::{individual_ranking_cluster, preprocess_column, Clustering};
use crate::numeric;
use crate::sensitivity::{ClusterSensitivity, SensitivityKind, SensitivityProfile};

/// Smallest `k` for which every cluster has the three values the
/// cluster-based sensitivity needs.
pub const MIN_K_CBLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dp")]
    Dp,
    #[serde(rename = "dp-um")]
    DpUm,
    #[serde(rename = "idp-ls")]
    IdpLs,
    #[serde(rename = "idp-cbls")]
    IdpCbls,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dp, Method::DpUm, Method::IdpLs, Method::IdpCbls];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dp => "dp",
            Method::DpUm => "dp-um",
            Method::IdpLs => "idp-ls",
            Method::IdpCbls => "idp-cbls",
        }
    }

    pub fn microaggregates(self) -> bool {
        self != Method::Dp
    }

    pub fn needs_domains(self) -> bool {
        self != Method::IdpCbls
    }

    pub fn min_k(self) -> usize {
        if self == Method::IdpCbls {
            MIN_K_CBLS
        } else {
            1
        }
    }

    pub fn validate_k(self, k: usize) -> Result<()> {
        if self.microaggregates() && k < self.min_k() {
            return Err(Error::param(format!(
                "k must be >= {} for {}, got {k}",
                self.min_k(),
                self
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::param(format!(
                    "unknown method '{s}' (expected dp, dp-um, idp-ls or idp-cbls)"
                ))
            })
    }
}

/// Everything that determines a release, apart from the input data.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub method: Method,
    pub epsilon: f64,
    /// Minimum cluster size; ignored by `dp`.
    pub k: usize,
    /// Attribute domains. Required by every method except `idp-cbls`.
    pub domains: Option<Vec<AttributeDomain>>,
    /// Optional per-attribute budget weights; equal split when absent.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    /// Clamp released values to the domains. `None` clamps whenever domains
    /// are available.
    pub clamp: Option<bool>,
}

impl MechanismConfig {
    pub fn clamps(&self) -> bool {
        self.clamp.unwrap_or(self.domains.is_some())
    }

    pub fn release(&self, d: &Dataset) -> Result<Release> {
        self.method.validate_k(self.k)?;
        let budget = allocate_budget(self.epsilon, d.n_attributes(), self.weights.as_deref())?;
        let clamp = self.clamps();
        if clamp && self.domains.is_none() {
            return Err(Error::param("clamping needs attribute domains"));
        }
        let domains = || {
            self.domains.as_deref().ok_or_else(|| {
                Error::param(format!("{} needs attribute domains", self.method))
            })
        };
        match self.method {
            Method::Dp => mechanism_dp(d, domains()?, &budget, self.seed, clamp),
            Method::DpUm => mechanism_dp_um(d, domains()?, &budget, self.k, self.seed, clamp),
            Method::IdpLs => mechanism_idp_ls(d, domains()?, &budget, self.k, self.seed, clamp),
            Method::IdpCbls => {
                let clamp_to = if clamp { self.domains.as_deref() } else { None };
                mechanism_idp_cbls(d, &budget, self.k, self.seed, clamp_to)
            }
        }
    }
}

/// One Laplace draw: the cluster (or record, for `dp`) it masks, its scale
/// and the sampled value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseDraw {
    pub cluster: usize,
    pub scale: f64,
    pub value: f64,
}

/// Output of a mechanism: the masked data plus what was used to produce it.
#[derive(Debug, Clone)]
pub struct Release {
    pub method: Method,
    pub dataset: Dataset,
    pub budget: PrivacyBudget,
    /// Per-attribute clusterings; empty for `dp`.
    pub clusterings: Vec<Clustering>,
    /// Per-attribute sensitivities. For `dp` each profile holds a single
    /// entry, the per-value sensitivity.
    pub profiles: Vec<SensitivityProfile>,
    /// Per-attribute draws, one per cluster (one per record for `dp`).
    pub draws: Vec<Vec<NoiseDraw>>,
    /// Released value of each draw before clamping, parallel to `draws`.
    pub noisy_centroids: Vec<Vec<f64>>,
}

fn check_inputs(d: &Dataset, domains: &[AttributeDomain], budget: &PrivacyBudget) -> Result<()> {
    check_stage_and_budget(d, budget)?;
    if domains.len() != d.n_attributes() {
        return Err(Error::param(format!(
            "{} domains for {} attributes",
            domains.len(),
            d.n_attributes()
        )));
    }
    for ((name, col), dom) in d.attributes().iter().zip(d.columns()).zip(domains) {
        if &dom.name != name {
            return Err(Error::param(format!(
                "domain '{}' given for attribute '{name}'",
                dom.name
            )));
        }
        for &v in col {
            dom.check(v)?;
        }
    }
    Ok(())
}

fn check_stage_and_budget(d: &Dataset, budget: &PrivacyBudget) -> Result<()> {
    if d.stage() != Stage::Original {
        return Err(Error::param(format!(
            "mechanisms take original data, got a {} dataset",
            d.stage()
        )));
    }
    if budget.n_attributes() != d.n_attributes() {
        return Err(Error::param(format!(
            "budget covers {} attributes, dataset has {}",
            budget.n_attributes(),
            d.n_attributes()
        )));
    }
    Ok(())
}

/// Plain Laplace noise on every value with scale `(maxA - minA) / eps_a`.
pub fn mechanism_dp(
    d: &Dataset,
    domains: &[AttributeDomain],
    budget: &PrivacyBudget,
    seed: u64,
    clamp: bool,
) -> Result<Release> {
    check_inputs(d, domains, budget)?;
    let per_attr: Vec<(Vec<f64>, Vec<NoiseDraw>, Vec<f64>)> = d
        .columns()
        .par_iter()
        .zip(domains.par_iter())
        .enumerate()
        .map(|(a, (col, dom))| {
            let scale = dom.width() / budget.share(a);
            let mut out = Vec::with_capacity(col.len());
            let mut draws = Vec::with_capacity(col.len());
            let mut noisy = Vec::with_capacity(col.len());
            for (i, &x) in col.iter().enumerate() {
                let noise = laplace_sample(&mut noise_stream(seed, a, i), scale)?;
                let v = x + noise;
                noisy.push(v);
                out.push(if clamp { dom.clamp(v) } else { v });
                draws.push(NoiseDraw {
                    cluster: i,
                    scale,
                    value: noise,
                });
            }
            Ok((out, draws, noisy))
        })
        .collect::<Result<_>>()?;

    let profiles = d
        .attributes()
        .iter()
        .zip(domains)
        .map(|(name, dom)| SensitivityProfile {
            attribute: name.clone(),
            kind: SensitivityKind::Global,
            clusters: vec![ClusterSensitivity {
                cluster: 0,
                size: 1,
                value: dom.width(),
            }],
        })
        .collect();

    let mut columns = Vec::with_capacity(per_attr.len());
    let mut draws = Vec::with_capacity(per_attr.len());
    let mut noisy_centroids = Vec::with_capacity(per_attr.len());
    for (c, dr, nz) in per_attr {
        columns.push(c);
        draws.push(dr);
        noisy_centroids.push(nz);
    }
    Ok(Release {
        method: Method::Dp,
        dataset: d.derive(columns, Stage::Masked),
        budget: budget.clone(),
        clusterings: Vec::new(),
        profiles,
        draws,
        noisy_centroids,
    })
}

/// Microaggregation plus one draw per cluster at the global centroid
/// sensitivity.
pub fn mechanism_dp_um(
    d: &Dataset,
    domains: &[AttributeDomain],
    budget: &PrivacyBudget,
    k: usize,
    seed: u64,
    clamp: bool,
) -> Result<Release> {
    check_inputs(d, domains, budget)?;
    let clamp_to = clamp.then_some(domains);
    clustered_release(
        Method::DpUm,
        d,
        Some(domains),
        budget,
        k,
        seed,
        clamp_to,
    )
}

/// As [`mechanism_dp_um`] with the local centroid sensitivity.
pub fn mechanism_idp_ls(
    d: &Dataset,
    domains: &[AttributeDomain],
    budget: &PrivacyBudget,
    k: usize,
    seed: u64,
    clamp: bool,
) -> Result<Release> {
    check_inputs(d, domains, budget)?;
    let clamp_to = clamp.then_some(domains);
    clustered_release(
        Method::IdpLs,
        d,
        Some(domains),
        budget,
        k,
        seed,
        clamp_to,
    )
}

/// Clusters the original values, pre-processes each cluster's extremes,
/// and releases the pre-processed centroids with noise at the cluster-based
/// sensitivity. Domains are used only for optional clamping.
pub fn mechanism_idp_cbls(
    d: &Dataset,
    budget: &PrivacyBudget,
    k: usize,
    seed: u64,
    clamp_to: Option<&[AttributeDomain]>,
) -> Result<Release> {
    Method::IdpCbls.validate_k(k)?;
    match clamp_to {
        Some(domains) => check_inputs(d, domains, budget)?,
        None => check_stage_and_budget(d, budget)?,
    }
    clustered_release(Method::IdpCbls, d, None, budget, k, seed, clamp_to)
}

struct AttributeRelease {
    column: Vec<f64>,
    clustering: Clustering,
    profile: SensitivityProfile,
    draws: Vec<NoiseDraw>,
    noisy: Vec<f64>,
}

fn clustered_release(
    method: Method,
    d: &Dataset,
    domains: Option<&[AttributeDomain]>,
    budget: &PrivacyBudget,
    k: usize,
    seed: u64,
    clamp_to: Option<&[AttributeDomain]>,
) -> Result<Release> {
    method.validate_k(k)?;
    let parts: Vec<AttributeRelease> = (0..d.n_attributes())
        .into_par_iter()
        .map(|a| {
            let name = &d.attributes()[a];
            let col = d.column(a);
            let clustering = individual_ranking_cluster(name, col, k)?;
            let domain = domains.map(|ds| &ds[a]);

            let (kind, centroids) = match method {
                Method::DpUm => (SensitivityKind::Global, plain_centroids(&clustering)),
                Method::IdpLs => (SensitivityKind::Local, plain_centroids(&clustering)),
                Method::IdpCbls => {
                    let pre = preprocess_column(col, &clustering)?;
                    let centroids = clustering
                        .clusters
                        .iter()
                        .map(|c| numeric::mean(&c.values(&pre)))
                        .collect();
                    (SensitivityKind::ClusterBasedLocal, centroids)
                }
                Method::Dp => unreachable!("dp does not microaggregate"),
            };
            let profile = SensitivityProfile::compute(kind, &clustering, col, domain)?;

            let eps = budget.share(a);
            let mut draws = Vec::with_capacity(clustering.clusters.len());
            let mut noisy = Vec::with_capacity(clustering.clusters.len());
            for (j, (centroid, sens)) in centroids.iter().zip(&profile.clusters).enumerate() {
                let scale = sens.value / eps;
                let noise = laplace_sample(&mut noise_stream(seed, a, j), scale)?;
                draws.push(NoiseDraw {
                    cluster: j,
                    scale,
                    value: noise,
                });
                noisy.push(centroid + noise);
            }
            let released: Vec<f64> = match clamp_to {
                Some(doms) => noisy.iter().map(|&v| doms[a].clamp(v)).collect(),
                None => noisy.clone(),
            };
            let column = clustering.assignment.iter().map(|&j| released[j]).collect();
            Ok(AttributeRelease {
                column,
                clustering,
                profile,
                draws,
                noisy,
            })
        })
        .collect::<Result<_>>()?;

    let mut columns = Vec::with_capacity(parts.len());
    let mut clusterings = Vec::with_capacity(parts.len());
    let mut profiles = Vec::with_capacity(parts.len());
    let mut draws = Vec::with_capacity(parts.len());
    let mut noisy_centroids = Vec::with_capacity(parts.len());
    for p in parts {
        columns.push(p.column);
        clusterings.push(p.clustering);
        profiles.push(p.profile);
        draws.push(p.draws);
        noisy_centroids.push(p.noisy);
    }
    Ok(Release {
        method,
        dataset: d.derive(columns, Stage::Masked),
        budget: budget.clone(),
        clusterings,
        profiles,
        draws,
        noisy_centroids,
    })
}

fn plain_centroids(c: &Clustering) -> Vec<f64> {
    c.clusters.iter().map(|c| c.centroid).collect()
}
