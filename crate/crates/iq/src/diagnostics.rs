//! Quadrature-aware effective sample size.
//!
//! The metric measures the Euclidean distance between the normalized
//! combined weights and the quadrature weights, calibrated so the best case
//! (all importance weights equal) scores N and the worst case (all mass on
//! the node with the smallest quadrature weight) scores exactly 1:
//!
//! `ESS = N / ((N-1)/L2*^2 * L2^2 + 1)` with `L2 = ||wbar' - v||_2` and
//! `L2*^2 = sum_{i != j*} v_i^2 + (1 - v_{j*})^2`, `j* = argmin_j v_j`.
//!
//! Unlike the classical `(sum w)^2 / sum w^2`, the position of a one-hot
//! weight matters: mass stranded on a far tail node (small `v`) is penalized
//! harder than mass on the central node.

use crate::error::{IqError, Result};
use crate::igh::WeightedSet;
use crate::math::pairwise_sum;

#[derive(Debug, Clone, Copy)]
pub struct EssReport {
    /// In [1, N].
    pub ess_igh: f64,
    /// Distance between normalized combined weights and quadrature weights.
    pub l2: f64,
    /// Worst-case distance for this quadrature-weight vector.
    pub l2_star: f64,
    /// Index of the smallest quadrature weight (lowest index on ties).
    pub j_star: usize,
}

/// Compute the report for a weighted set. Errors when the combined weights
/// are all zero.
pub fn ess_igh(ws: &WeightedSet) -> Result<EssReport> {
    let v = ws.quad_weights();
    if ws.log_z_hat() == f64::NEG_INFINITY {
        return Err(IqError::DegenerateWeights);
    }
    let wbar = ws.normalized_weights();
    ess_from_weights(&wbar, v)
}

/// Same metric from precomputed normalized weights (used by tests and the
/// harness on pooled sets).
pub fn ess_from_weights(wbar: &[f64], v: &[f64]) -> Result<EssReport> {
    let n = v.len();
    if n == 0 || wbar.len() != n {
        return Err(IqError::DimMismatch {
            expected: n,
            got: wbar.len(),
        });
    }
    if n == 1 {
        // single node: both pmfs are the point mass
        return Ok(EssReport {
            ess_igh: 1.0,
            l2: 0.0,
            l2_star: 0.0,
            j_star: 0,
        });
    }
    let j_star = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let diffs: Vec<f64> = wbar.iter().zip(v).map(|(w, vi)| (w - vi) * (w - vi)).collect();
    let l2 = pairwise_sum(&diffs).sqrt();
    let sq: Vec<f64> = v.iter().map(|vi| vi * vi).collect();
    let l2_star_sq = pairwise_sum(&sq) - v[j_star] * v[j_star] + (1.0 - v[j_star]) * (1.0 - v[j_star]);
    let ess = n as f64 / ((n as f64 - 1.0) / l2_star_sq * l2 * l2 + 1.0);
    Ok(EssReport {
        ess_igh: ess,
        l2,
        l2_star: l2_star_sq.sqrt(),
        j_star,
    })
}

/// Classical effective sample size `(sum w)^2 / sum w^2`, kept for
/// comparative logging.
pub fn classical_ess(weights: &[f64]) -> f64 {
    let s = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let s2 = pairwise_sum(&sq);
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}
