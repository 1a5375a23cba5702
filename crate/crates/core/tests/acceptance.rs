//! Acceptance suite. Prints one PASS/FAIL line per criterion; run with
//! `cargo test -p idp-microagg --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use idp_microagg::dataset::{compute_domains, AttributeDomain, Dataset};
use idp_microagg::evaluation::{run_experiment, ExperimentGrid, ExperimentOutput, Normalization};
use idp_microagg::mechanisms::laplace_sample;
use idp_microagg::mechanisms::{MechanismConfig, Method};
use idp_microagg::microaggregation::{cluster_extremes, individual_ranking_cluster, preprocess_cluster};
use idp_microagg::numeric;
use idp_microagg::sensitivity::{self, oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeds fixed before any criterion was evaluated: each synthetic dataset is
/// seeded with its row count, every experiment uses the same base seed.
const BASE_SEED: u64 = 42;
const CENSUS_N: usize = 1000;
const CENSUS_M: usize = 9;
const WINE_N: usize = 4898;
const WINE_M: usize = 11;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    Outcome { name, pass, detail, elapsed: start.elapsed() }
}

fn census() -> Dataset {
    common::skewed_dataset(CENSUS_N, CENSUS_M, CENSUS_N as u64)
}

fn grid(methods: &[Method], epsilons: &[f64], ks: &[usize], alphas: &[f64], clamp: bool) -> ExperimentGrid {
    ExperimentGrid {
        methods: methods.to_vec(),
        epsilons: epsilons.to_vec(),
        ks: ks.to_vec(),
        alphas: alphas.to_vec(),
        repetitions: 10,
        base_seed: BASE_SEED,
        clamp: Some(clamp),
        normalization: Normalization::Variance,
    }
}

fn avg(out: &ExperimentOutput, method: Method, eps: f64, k: usize, alpha: f64) -> f64 {
    out.average(method, eps, k, alpha).expect("cell present").mean_sse
}

/// Cluster of `len` values drawn uniformly from a random sub-interval of
/// [0, 100]; about a third of clusters are rounded to integers so ties occur.
fn random_cluster(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let a: f64 = rng.gen_range(0.0..100.0);
    let b: f64 = rng.gen_range(0.0..100.0);
    let (lo, hi) = (a.min(b), a.max(b).max(a.min(b) + 1e-6));
    let round = rng.gen_bool(0.3);
    (0..len)
        .map(|_| {
            let v = rng.gen_range(lo..=hi);
            if round { v.round().clamp(0.0, 100.0) } else { v }
        })
        .collect()
}

fn domain_0_100() -> AttributeDomain {
    AttributeDomain::explicit("a", 0.0, 100.0).unwrap()
}

fn local_oracle_equivalence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dom = domain_0_100();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=20);
        let values = random_cluster(&mut rng, len);
        let closed = sensitivity::local_sensitivity_sum(&values, &dom).unwrap();
        let brute = oracle::local_sensitivity_sum(&values, &dom).unwrap();
        let closed_c = sensitivity::local_centroid_sensitivity(&values, &dom).unwrap();
        let brute_c = oracle::local_sensitivity(&values, &dom).unwrap();
        if closed != brute || closed_c != brute_c {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("1000 clusters, {mismatches} mismatches"))
}

fn cbls_oracle_equivalence() -> (bool, String) {
    let dom = domain_0_100();
    let worked = [3.0, 3.0, 3.0, 4.0, 5.0, 6.0, 6.0];
    let e = cluster_extremes(&worked).unwrap();
    let closed = sensitivity::cbls_sensitivity(&e, worked.len()).unwrap();
    let brute = oracle::cbls_sensitivity(&worked, &dom, 201).unwrap();
    let example_ok = (closed - 4.0 / 7.0).abs() < 1e-12 && (brute - 4.0 / 7.0).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(3..=20);
        let values = random_cluster(&mut rng, len);
        let e = cluster_extremes(&values).unwrap();
        let closed = sensitivity::cbls_sensitivity(&e, len).unwrap();
        let brute = oracle::cbls_sensitivity(&values, &dom, 201).unwrap();
        worst = worst.max((closed - brute).abs());
    }
    (
        example_ok && worst <= 1e-9,
        format!("{{3,3,3,4,5,6,6}} -> {closed:.6} (oracle {brute:.6}); 1000 clusters, max |diff| {worst:.2e}"),
    )
}

fn robustness_fuzz() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(3..=20);
        let values = random_cluster(&mut rng, len);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut modified = values.clone();
        let r = rng.gen_range(0..len);
        modified[r] = match rng.gen_range(0..4) {
            0 => 0.0,
            1 => 100.0,
            _ => rng.gen_range(0.0..=100.0),
        };
        preprocess_cluster(&mut modified).unwrap();
        if modified.iter().any(|&v| v < lo || v > hi) {
            violations += 1;
        }
    }
    (violations == 0, format!("10000 trials, {violations} violations"))
}

fn microaggregation_invariants() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut cases = 0usize;
    for n in 1..=200usize {
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { rng.gen_range(0..20) as f64 } else { rng.gen_range(-50.0..50.0) })
            .collect();
        for k in 1..=n {
            cases += 1;
            if let Err(msg) = check_clustering(&values, k) {
                failures.push(format!("n={n} k={k}: {msg}"));
            }
        }
    }
    let detail = match failures.first() {
        None => format!("{cases} (n, k) pairs"),
        Some(first) => format!("{} of {cases} failed, first: {first}", failures.len()),
    };
    (failures.is_empty(), detail)
}

fn check_clustering(values: &[f64], k: usize) -> Result<(), String> {
    let n = values.len();
    let c = individual_ranking_cluster("a", values, k).map_err(|e| e.to_string())?;

    let mut seen = vec![false; n];
    for (j, cluster) in c.clusters.iter().enumerate() {
        for &i in &cluster.members {
            if seen[i] {
                return Err(format!("record {i} in two clusters"));
            }
            seen[i] = true;
            if c.assignment[i] != j {
                return Err(format!("assignment of record {i} disagrees with membership"));
            }
        }
        if cluster.len() < k || cluster.len() > 2 * k - 1 {
            return Err(format!("cluster {j} has size {}", cluster.len()));
        }
        let vals = cluster.values(values);
        if vals.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("cluster {j} members are not in sorted order"));
        }
        if cluster.centroid != numeric::mean(&vals) {
            return Err(format!("cluster {j} centroid is not the member mean"));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err("not every record is assigned".into());
    }
    for (j, w) in c.clusters.windows(2).enumerate() {
        let left_max = w[0].values(values).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let right_min = w[1].values(values).into_iter().fold(f64::INFINITY, f64::min);
        if left_max > right_min {
            return Err(format!("clusters {j} and {} overlap in value", j + 1));
        }
    }

    let total = numeric::sum(values);
    let rebuilt = numeric::sum(&c.centroid_column());
    let scale = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if (total - rebuilt).abs() > 1e-9 * scale {
        return Err(format!("sum {total} became {rebuilt}"));
    }
    Ok(())
}

fn laplace_moments() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| laplace_sample(&mut rng, 1.0).unwrap()).collect();
    let mean = numeric::mean(&draws);
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let zero_ok = (0..1000).all(|_| laplace_sample(&mut rng, 0.0).unwrap() == 0.0);
    (
        mean.abs() <= 0.01 && (1.96..=2.04).contains(&var) && zero_ok,
        format!("mean {mean:.5}, variance {var:.5}, b=0 exact: {zero_ok}"),
    )
}

fn trend(d: &Dataset) -> (bool, String) {
    let out = run_experiment(&grid(&Method::ALL, &[0.01], &[50], &[1.5], false), d).unwrap();
    let [dp, um, ls, cbls] = Method::ALL.map(|m| avg(&out, m, 0.01, 50, 1.5));
    let ratio = dp / cbls;
    let pass = dp > um && um >= ls && ls > cbls && ratio > 100.0;
    (
        pass,
        format!("unclamped: dp {dp:.4e} > dp-um {um:.4e} >= idp-ls {ls:.4e} > idp-cbls {cbls:.4e}, dp/idp-cbls {ratio:.3e}"),
    )
}

fn trend_clamped_note(d: &Dataset) -> String {
    let out = run_experiment(&grid(&Method::ALL, &[0.01], &[50], &[1.5], true), d).unwrap();
    let [dp, um, ls, cbls] = Method::ALL.map(|m| avg(&out, m, 0.01, 50, 1.5));
    format!(
        "clamped to domains: dp {dp:.4e}, dp-um {um:.4e}, idp-ls {ls:.4e}, idp-cbls {cbls:.4e}, dp/idp-cbls {:.2}",
        dp / cbls
    )
}

fn domain_independence(d: &Dataset) -> (bool, String) {
    let release = |alpha: f64| {
        MechanismConfig {
            method: Method::IdpCbls,
            epsilon: 0.01,
            k: 50,
            domains: Some(compute_domains(d, alpha).unwrap()),
            weights: None,
            seed: BASE_SEED,
            clamp: Some(false),
        }
        .release(d)
        .unwrap()
        .dataset
    };
    let (a, b) = (release(1.5), release(3.0));
    let identical = a
        .columns()
        .iter()
        .zip(b.columns())
        .all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));

    let out = run_experiment(&grid(&[Method::DpUm, Method::IdpLs], &[0.01], &[50], &[1.5, 3.0], true), d).unwrap();
    let um = (avg(&out, Method::DpUm, 0.01, 50, 1.5), avg(&out, Method::DpUm, 0.01, 50, 3.0));
    let ls = (avg(&out, Method::IdpLs, 0.01, 50, 1.5), avg(&out, Method::IdpLs, 0.01, 50, 3.0));
    (
        identical && um.1 > um.0 && ls.1 > ls.0,
        format!(
            "idp-cbls bit-identical: {identical}; dp-um {:.4e} -> {:.4e}; idp-ls {:.4e} -> {:.4e}",
            um.0, um.1, ls.0, ls.1
        ),
    )
}

fn epsilon_monotonicity(d: &Dataset) -> (bool, String) {
    let out = run_experiment(&grid(&Method::ALL, &[0.01, 1.0], &[50], &[1.5], true), d).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in Method::ALL {
        let (lo, hi) = (avg(&out, m, 0.01, 50, 1.5), avg(&out, m, 1.0, 50, 1.5));
        pass &= hi <= 1.05 * lo;
        parts.push(format!("{m} {lo:.3e} -> {hi:.3e}"));
    }
    (pass, parts.join("; "))
}

fn k_shape() -> (bool, String) {
    let d = common::wine_like_dataset(WINE_N, WINE_M, WINE_N as u64);
    let out = run_experiment(&grid(&[Method::IdpCbls], &[1.0], &[10, 200], &[1.5], true), &d).unwrap();
    let (small, large) = (avg(&out, Method::IdpCbls, 1.0, 10, 1.5), avg(&out, Method::IdpCbls, 1.0, 200, 1.5));
    (small <= large, format!("epsilon 1: k=10 {small:.4e}, k=200 {large:.4e}"))
}

fn timed(o: Outcome, limit: Duration) -> Outcome {
    let within = o.elapsed <= limit;
    Outcome {
        pass: o.pass && within,
        detail: format!("{} [{:.2?}, limit {:.0?}]", o.detail, o.elapsed, limit),
        ..o
    }
}

#[test]
fn acceptance() {
    let d = census();
    let outcomes = vec![
        timed(check("local sensitivity matches oracle", local_oracle_equivalence), Duration::from_secs(5)),
        timed(check("cluster-based local sensitivity matches oracle", cbls_oracle_equivalence), Duration::from_secs(30)),
        check("pre-processing robustness fuzz", robustness_fuzz),
        check("microaggregation invariants", microaggregation_invariants),
        check("Laplace sampler moments", laplace_moments),
        timed(check("method ordering and accuracy ratio", || trend(&d)), Duration::from_secs(120)),
        check("idp-cbls independent of domain bounds", || domain_independence(&d)),
        check("monotonicity in epsilon", || epsilon_monotonicity(&d)),
        check("idp-cbls small k beats large k", k_shape),
    ];

    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    println!("note: {}", trend_clamped_note(&d));

    let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
