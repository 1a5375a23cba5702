//! Seedable Laplace noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One draw from Laplace(0, `scale`) by inverse-CDF sampling.
///
/// A uniform `u` on the open interval (-1/2, 1/2) maps to
/// `-scale * sign(u) * ln(1 - 2|u|)`. The uniform is consumed even when
/// `scale` is zero, so streams stay aligned across scales.
pub fn laplace_sample<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Result<f64> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::param(format!(
            "Laplace scale must be finite and non-negative, got {scale}"
        )));
    }
    let u = loop {
        let x: f64 = rng.gen();
        // x == 0 would put u on the closed end -1/2 where ln(0) diverges.
        if x > 0.0 {
            break x - 0.5;
        }
    };
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(-scale * u.signum() * (-2.0 * u.abs()).ln_1p())
}

/// Stable 64-bit mixing of a tuple of integers (splitmix64 finalizer chained
/// over the parts). Used for every derived seed so results never depend on
/// the standard library's hasher.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent noise stream for one (attribute, cluster) pair of a run.
pub fn noise_stream(seed: u64, attribute: usize, cluster: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, attribute as u64, cluster as u64]))
}
