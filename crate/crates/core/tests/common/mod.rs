#![allow(dead_code)]

use idp_microagg::dataset::{Dataset, Stage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

/// `n` records over `m` positive right-skewed attributes. Attribute `j` is
/// log-normal with a shape that grows with `j`, scaled to a different
/// magnitude per attribute.
pub fn skewed_dataset(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = (0..m)
        .map(|j| {
            let sigma = 0.5 + 1.0 * j as f64 / m.max(2) as f64;
            let scale = 10f64.powi((j % 4) as i32 + 1);
            let dist = LogNormal::new(0.0, sigma).unwrap();
            (0..n).map(|_| (scale * dist.sample(&mut rng) * 100.0).round() / 100.0).collect()
        })
        .collect();
    let names = (0..m).map(|j| format!("attr{j}")).collect();
    Dataset::new(names, columns, Stage::Original).unwrap()
}

/// Mildly skewed measurements rounded to three significant digits, so values
/// repeat the way laboratory readings do.
pub fn wine_like_dataset(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = (0..m)
        .map(|j| {
            let sigma = 0.2 + 0.4 * j as f64 / m.max(2) as f64;
            let scale = 10f64.powi((j % 3) as i32);
            let dist = LogNormal::new(0.0, sigma).unwrap();
            (0..n)
                .map(|_| round_sig(scale * dist.sample(&mut rng), 3))
                .collect()
        })
        .collect();
    let names = (0..m).map(|j| format!("attr{j}")).collect();
    Dataset::new(names, columns, Stage::Original).unwrap()
}

fn round_sig(v: f64, digits: i32) -> f64 {
    let mag = 10f64.powi(digits - 1 - v.abs().log10().floor() as i32);
    (v * mag).round() / mag
}
