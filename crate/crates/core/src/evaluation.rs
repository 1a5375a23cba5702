//! Information loss and the experiment grid.
//!
//! The record distance is
//! `(1/m) * sqrt(sum_j (|x_j - y_j| / s_j)^2)` where `s_j` is the sample
//! variance of attribute `j` in the original data (or its square root with
//! [`Normalization::StdDev`]). SSE sums squared record distances; mean SSE
//! divides by the number of records.

use std::io::Write;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_aligned, column_stats, compute_domains, ColumnStats, Dataset};
use crate::error::{Error, Result};
use crate::mechanisms::{derive_seed, MechanismConfig, Method};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide each attribute difference by the sample variance.
    #[default]
    Variance,
    /// Divide by the sample standard deviation.
    StdDev,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(Normalization::Variance),
            "std_dev" | "std" => Ok(Normalization::StdDev),
            other => Err(Error::param(format!(
                "unknown normalization '{other}' (expected variance or std_dev)"
            ))),
        }
    }
}

impl Normalization {
    fn divisor(self, variance: f64) -> f64 {
        match self {
            Normalization::Variance => variance,
            Normalization::StdDev => variance.sqrt(),
        }
    }
}

/// Normalized distance between two records.
///
/// An attribute with zero variance contributes nothing when the values agree
/// and is an error when they differ.
pub fn record_distance(x: &[f64], y: &[f64], stats: &ColumnStats, norm: Normalization) -> Result<f64> {
    let m = stats.attributes.len();
    if x.len() != m || y.len() != m {
        return Err(Error::Alignment(format!(
            "records of length {} and {} for {m} attributes",
            x.len(),
            y.len()
        )));
    }
    let mut acc = 0.0;
    for ((a, b), s) in x.iter().zip(y).zip(&stats.attributes) {
        let diff = (a - b).abs();
        if diff == 0.0 {
            continue;
        }
        if s.variance == 0.0 {
            return Err(Error::DegenerateVariance {
                attribute: s.name.clone(),
            });
        }
        let t = diff / norm.divisor(s.variance);
        acc += t * t;
    }
    Ok(acc.sqrt() / m as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseReport {
    pub sse: f64,
    pub mean_sse: f64,
    /// Zero-variance attributes left out of the distance.
    pub excluded: Vec<String>,
}

/// SSE and mean SSE between aligned original and masked datasets.
///
/// Zero-variance attributes are dropped from the distance (with a warning);
/// the `1/m` factor still counts every attribute.
pub fn sse(original: &Dataset, masked: &Dataset, stats: &ColumnStats, norm: Normalization) -> Result<SseReport> {
    check_aligned(original, masked)?;
    if stats.attributes.len() != original.n_attributes() {
        return Err(Error::Alignment(format!(
            "statistics for {} attributes, dataset has {}",
            stats.attributes.len(),
            original.n_attributes()
        )));
    }
    let m = original.n_attributes() as f64;
    let mut excluded = Vec::new();
    let mut sse = 0.0;
    for (a, s) in stats.attributes.iter().enumerate() {
        if s.variance == 0.0 {
            warn!("attribute '{}' has zero variance; excluded from SSE", s.name);
            excluded.push(s.name.clone());
            continue;
        }
        let div = norm.divisor(s.variance);
        // Squared distance is additive over attributes: d^2 = sum_j t_j^2 / m^2.
        let col: f64 = original
            .column(a)
            .iter()
            .zip(masked.column(a))
            .map(|(x, y)| {
                let t = (x - y) / div;
                t * t
            })
            .sum();
        sse += col / (m * m);
    }
    Ok(SseReport {
        sse,
        mean_sse: sse / original.n_records() as f64,
        excluded,
    })
}

/// Parameter grid for the information-loss experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub ks: Vec<usize>,
    pub alphas: Vec<f64>,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Clamp released values to the alpha-scaled domains (default on for
    /// every method).
    #[serde(default)]
    pub clamp: Option<bool>,
    #[serde(default)]
    pub normalization: Normalization,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::param(format!("experiment grid has no {what}")));
        if self.methods.is_empty() {
            return empty("methods");
        }
        if self.epsilons.is_empty() {
            return empty("epsilon values");
        }
        if self.ks.is_empty() {
            return empty("k values");
        }
        if self.alphas.is_empty() {
            return empty("alpha values");
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions must be at least 1"));
        }
        if let Some(e) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::param(format!("epsilon must be positive, got {e}")));
        }
        if let Some(a) = self.alphas.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::param(format!("alpha must be positive, got {a}")));
        }
        Ok(())
    }

    /// Seed of one run. The method is deliberately not part of the seed:
    /// methods evaluated on the same (epsilon, k, alpha, run) share noise
    /// streams, which makes their comparison less noisy.
    pub fn run_seed(&self, epsilon: f64, k: Option<usize>, alpha: f64, run: usize) -> u64 {
        derive_seed(&[
            self.base_seed,
            epsilon.to_bits(),
            k.map_or(0, |k| k as u64),
            alpha.to_bits(),
            run as u64,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub epsilon: f64,
    pub k: usize,
    pub alpha: f64,
    pub run: usize,
    pub seed: u64,
    pub sse: f64,
    pub mean_sse: f64,
}

/// Average over the runs of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAverage {
    pub method: Method,
    pub epsilon: f64,
    pub k: usize,
    pub alpha: f64,
    pub runs: usize,
    pub sse: f64,
    pub mean_sse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<ExperimentResult>,
    pub averages: Vec<CellAverage>,
}

impl ExperimentOutput {
    pub fn average(&self, method: Method, epsilon: f64, k: usize, alpha: f64) -> Option<&CellAverage> {
        self.averages
            .iter()
            .find(|c| c.method == method && c.epsilon == epsilon && c.k == k && c.alpha == alpha)
    }

    pub fn write_results<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["method", "epsilon", "k", "alpha", "run", "sse", "mean_sse"])?;
        for r in &self.results {
            w.write_record([
                r.method.to_string(),
                r.epsilon.to_string(),
                r.k.to_string(),
                r.alpha.to_string(),
                r.run.to_string(),
                r.sse.to_string(),
                r.mean_sse.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<results csv>", e))?;
        Ok(())
    }

    pub fn write_averages<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["method", "epsilon", "k", "alpha", "runs", "sse", "mean_sse"])?;
        for c in &self.averages {
            w.write_record([
                c.method.to_string(),
                c.epsilon.to_string(),
                c.k.to_string(),
                c.alpha.to_string(),
                c.runs.to_string(),
                c.sse.to_string(),
                c.mean_sse.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<averages csv>", e))?;
        Ok(())
    }
}

struct Job {
    method: Method,
    epsilon: f64,
    /// `None` for dp, which is evaluated once and reported for every k.
    k: Option<usize>,
    alpha: f64,
    run: usize,
}

/// Runs every valid cell of `grid` on `dataset` (original stage).
///
/// Rows come out in grid order: alpha, epsilon, method, k, run. `dp` does not
/// depend on `k`; it is computed once per (epsilon, alpha, run) and the row
/// repeated for each k so plots show it as a flat line. Cells that cannot
/// run (k too small for the method, or larger than the dataset) are skipped
/// with a warning.
pub fn run_experiment(grid: &ExperimentGrid, dataset: &Dataset) -> Result<ExperimentOutput> {
    grid.validate()?;
    let stats = column_stats(dataset)?;
    let n = dataset.n_records();

    let mut domains = Vec::with_capacity(grid.alphas.len());
    for &alpha in &grid.alphas {
        domains.push(compute_domains(dataset, alpha)?);
    }

    let mut valid_ks: Vec<(Method, Vec<usize>)> = Vec::new();
    for &method in &grid.methods {
        let ks: Vec<usize> = grid
            .ks
            .iter()
            .copied()
            .filter(|&k| {
                if method.microaggregates() && k < method.min_k() {
                    warn!("skipping {method} with k = {k}: needs k >= {}", method.min_k());
                    false
                } else if k == 0 || k > n {
                    warn!("skipping {method} with k = {k}: dataset has {n} records");
                    false
                } else {
                    true
                }
            })
            .collect();
        valid_ks.push((method, ks));
    }

    let mut jobs = Vec::new();
    for (ai, &alpha) in grid.alphas.iter().enumerate() {
        for &epsilon in &grid.epsilons {
            for (method, ks) in &valid_ks {
                if ks.is_empty() {
                    continue;
                }
                let job_ks: Vec<Option<usize>> = if method.microaggregates() {
                    ks.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for k in job_ks {
                    for run in 0..grid.repetitions {
                        jobs.push((
                            ai,
                            Job {
                                method: *method,
                                epsilon,
                                k,
                                alpha,
                                run,
                            },
                        ));
                    }
                }
            }
        }
    }

    let evaluated: Vec<(Job, u64, f64, f64)> = jobs
        .into_par_iter()
        .map(|(ai, job)| {
            let seed = grid.run_seed(job.epsilon, job.k, job.alpha, job.run);
            let cfg = MechanismConfig {
                method: job.method,
                epsilon: job.epsilon,
                k: job.k.unwrap_or(1),
                domains: Some(domains[ai].clone()),
                weights: None,
                seed,
                clamp: Some(grid.clamp.unwrap_or(true)),
            };
            let release = cfg.release(dataset)?;
            let report = sse(dataset, &release.dataset, &stats, grid.normalization)?;
            Ok((job, seed, report.sse, report.mean_sse))
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    for (job, seed, sse, mean_sse) in evaluated {
        let ks: Vec<usize> = match job.k {
            Some(k) => vec![k],
            None => valid_ks
                .iter()
                .find(|(m, _)| *m == job.method)
                .map(|(_, ks)| ks.clone())
                .unwrap_or_default(),
        };
        for k in ks {
            results.push(ExperimentResult {
                method: job.method,
                epsilon: job.epsilon,
                k,
                alpha: job.alpha,
                run: job.run,
                seed,
                sse,
                mean_sse,
            });
        }
    }
    // dp rows were produced per run; regroup them so every cell's runs are
    // contiguous and cells follow grid order.
    results.sort_by_key(|r| {
        (
            cell_order(grid, r.alpha, r.epsilon, r.method, r.k),
            r.run,
        )
    });

    let averages = average_cells(&results);
    Ok(ExperimentOutput { results, averages })
}

fn cell_order(grid: &ExperimentGrid, alpha: f64, epsilon: f64, method: Method, k: usize) -> (usize, usize, usize, usize) {
    let pos_f = |xs: &[f64], x: f64| xs.iter().position(|&v| v == x).unwrap_or(usize::MAX);
    (
        pos_f(&grid.alphas, alpha),
        pos_f(&grid.epsilons, epsilon),
        grid.methods.iter().position(|&m| m == method).unwrap_or(usize::MAX),
        grid.ks.iter().position(|&v| v == k).unwrap_or(usize::MAX),
    )
}

fn average_cells(results: &[ExperimentResult]) -> Vec<CellAverage> {
    let mut out: Vec<CellAverage> = Vec::new();
    for chunk in results.chunk_by(|a, b| {
        a.method == b.method && a.epsilon == b.epsilon && a.k == b.k && a.alpha == b.alpha
    }) {
        let runs = chunk.len();
        let first = &chunk[0];
        out.push(CellAverage {
            method: first.method,
            epsilon: first.epsilon,
            k: first.k,
            alpha: first.alpha,
            runs,
            sse: chunk.iter().map(|r| r.sse).sum::<f64>() / runs as f64,
            mean_sse: chunk.iter().map(|r| r.mean_sse).sum::<f64>() / runs as f64,
        });
    }
    out
}
