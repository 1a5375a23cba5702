use serde::Serialize;

use crate::error::{Error, Result};

/// Total privacy budget and its split across attributes.
///
/// Attributes are released by sequential composition, so their shares add up
/// to the total. Clusters within an attribute are disjoint sets of records and
/// each centroid is released with the attribute's full share.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    shares: Vec<f64>,
}

impl PrivacyBudget {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn share(&self, attribute: usize) -> f64 {
        self.shares[attribute]
    }

    pub fn n_attributes(&self) -> usize {
        self.shares.len()
    }
}

/// Splits `epsilon` over `m` attributes, equally or proportionally to
/// `weights`.
pub fn allocate_budget(epsilon: f64, m: usize, weights: Option<&[f64]>) -> Result<PrivacyBudget> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    if m == 0 {
        return Err(Error::param("budget needs at least one attribute"));
    }
    let shares = match weights {
        None => vec![epsilon / m as f64; m],
        Some(w) => {
            if w.len() != m {
                return Err(Error::param(format!(
                    "{} budget weights for {m} attributes",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::param(format!(
                    "budget weights must be positive, got {bad}"
                )));
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|x| epsilon * x / total).collect()
        }
    };
    Ok(PrivacyBudget { epsilon, shares })
}
