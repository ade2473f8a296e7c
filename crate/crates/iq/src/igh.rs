//! Single-proposal importance quadrature: weighting, the three estimators,
//! resampling thinning, and the classical error bound.
//!
//! Importance weights are kept in the log domain and exponentiated only at
//! normalization time, so extreme target/proposal mismatch (real posteriors)
//! cannot underflow the estimators. Node weighting parallelizes across
//! points; every reduction uses the fixed pairwise order.

use crate::diagnostics;
use crate::error::{IqError, Result};
use crate::math::{ln_factorial, logsumexp, pairwise_sum};
use crate::par;
use crate::proposal::GaussianProposal;
use crate::rules::PointSet;
use crate::target::TargetDensity;
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;

/// Points with quadrature weights `v_n` and log importance weights
/// `log w_n`; the combined weight is `w'_n = w_n v_n N`.
#[derive(Debug, Clone)]
pub struct WeightedSet {
    dim: usize,
    points: Vec<f64>,
    quad_weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl WeightedSet {
    pub(crate) fn from_parts(
        dim: usize,
        points: Vec<f64>,
        quad_weights: Vec<f64>,
        log_weights: Vec<f64>,
    ) -> Result<Self> {
        debug_assert_eq!(points.len(), quad_weights.len() * dim);
        debug_assert_eq!(quad_weights.len(), log_weights.len());
        let ws = WeightedSet {
            dim,
            points,
            quad_weights,
            log_weights,
        };
        if ws.log_z_hat() == f64::NEG_INFINITY {
            return Err(IqError::DegenerateWeights);
        }
        Ok(ws)
    }

    pub fn len(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Importance weights `w_n` in the linear domain (may underflow for
    /// extreme posteriors; estimators never go through this path).
    pub fn is_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Combined weights `w'_n = w_n v_n N` in the linear domain.
    pub fn combined_weights(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.log_weights
            .iter()
            .zip(&self.quad_weights)
            .map(|(l, v)| l.exp() * v * n)
            .collect()
    }

    /// Normalized combined weights, computed with max-shift stabilization.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let logs: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.quad_weights)
            .map(|(l, v)| l + v.ln())
            .collect();
        let total = logsumexp(&logs);
        logs.iter().map(|l| (l - total).exp()).collect()
    }

    /// log of the normalizing-constant estimator `(1/N) sum w'_n`.
    pub fn log_z_hat(&self) -> f64 {
        let logs: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.quad_weights)
            .map(|(l, v)| l + v.ln())
            .collect();
        logsumexp(&logs)
    }

    pub fn z_hat(&self) -> f64 {
        self.log_z_hat().exp()
    }
}

/// Estimator bundle from one weighted set.
#[derive(Debug, Clone)]
pub struct Estimates {
    /// Available only when the caller supplied the true log Z.
    pub unnormalized: Option<Vec<f64>>,
    pub self_normalized: Vec<f64>,
    pub z_hat: f64,
    pub log_z_hat: f64,
    pub ess_igh: f64,
}

/// Weight every node of `ps` against `target`: `w_n = pi(x_n) / q(x_n)`
/// with `q` the generating proposal of `ps`. Nodes outside the target
/// support get weight zero. Errors when every weight vanishes.
pub fn weights(ps: &PointSet, target: &TargetDensity) -> Result<WeightedSet> {
    if target.dim() != ps.dim() {
        return Err(IqError::DimMismatch {
            expected: ps.dim(),
            got: target.dim(),
        });
    }
    let q = ps.proposal().clone();
    let log_w = par::map_range(ps.n_points(), |i| {
        let x = ps.point(i);
        let lp = target.log_unnorm(x);
        if lp == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            lp - q.logpdf(x)
        }
    });
    WeightedSet::from_parts(
        ps.dim(),
        (0..ps.n_points()).flat_map(|i| ps.point(i).to_vec()).collect(),
        ps.quad_weights().to_vec(),
        log_w,
    )
}

/// Evaluate the estimators for a vector-valued integrand `f`.
///
/// `z_hat = (1/N) sum w'_n`; the self-normalized estimate uses normalized
/// combined weights; the unnormalized estimate `(1/(Z N)) sum w'_n f(x_n)`
/// is produced only when `log_z` is supplied.
pub fn estimate<F>(ws: &WeightedSet, f: F, log_z: Option<f64>) -> Result<Estimates>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    if ws.is_empty() {
        return Err(IqError::InvalidParam("empty weighted set".into()));
    }
    let fx = par::map_range(ws.len(), |i| f(ws.point(i)));
    let k = fx[0].len();
    let log_z_hat = ws.log_z_hat();
    if log_z_hat == f64::NEG_INFINITY {
        return Err(IqError::DegenerateWeights);
    }
    let wbar = ws.normalized_weights();
    let mut self_normalized = vec![0.0; k];
    let mut terms = vec![0.0; ws.len()];
    for j in 0..k {
        for i in 0..ws.len() {
            terms[i] = wbar[i] * fx[i][j];
        }
        self_normalized[j] = pairwise_sum(&terms);
    }
    // sum v_n w_n f / Z, stabilized by the max log-weight
    let unnormalized = log_z.map(|lz| {
        let shift = ws
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; k];
        for (j, o) in out.iter_mut().enumerate() {
            for i in 0..ws.len() {
                terms[i] = ws.quad_weights[i] * (ws.log_weights[i] - shift).exp() * fx[i][j];
            }
            *o = pairwise_sum(&terms) * (shift - lz).exp();
        }
        out
    });
    let ess = diagnostics::ess_igh(ws)?.ess_igh;
    Ok(Estimates {
        unnormalized,
        self_normalized,
        z_hat: log_z_hat.exp(),
        log_z_hat,
        ess_igh: ess,
    })
}

/// Draw `n_prime` node indices with replacement, proportionally to the
/// quadrature weights, and return the thinned set with uniform quadrature
/// weights `1/n_prime`. Importance weights are recomputed on the survivors
/// by the caller (the whole point is to evaluate the target on fewer
/// points).
pub fn resample_thin<R: Rng + ?Sized>(ps: &PointSet, n_prime: usize, rng: &mut R) -> PointSet {
    assert!(n_prime >= 1, "n_prime must be at least 1");
    let dist = WeightedIndex::new(ps.quad_weights()).expect("quadrature weights are positive");
    let dim = ps.dim();
    let mut points = Vec::with_capacity(n_prime * dim);
    for _ in 0..n_prime {
        let idx = dist.sample(rng);
        points.extend_from_slice(ps.point(idx));
    }
    PointSet::from_parts(
        points,
        vec![1.0 / n_prime as f64; n_prime],
        ps.proposal().clone(),
    )
}

/// Upper bound `alpha! * sup|h^(2 alpha)| / (2 alpha)!` on the quadrature
/// error, computed in log space to survive large orders.
pub fn error_bound(alpha: usize, sup_deriv_2a: f64) -> f64 {
    assert!(sup_deriv_2a >= 0.0);
    if sup_deriv_2a == 0.0 {
        return 0.0;
    }
    (ln_factorial(alpha as u64) - ln_factorial(2 * alpha as u64) + sup_deriv_2a.ln()).exp()
}

/// Convenience: weight + estimate against a proposal in one call.
pub fn run<F>(
    target: &TargetDensity,
    q: &GaussianProposal,
    alpha: usize,
    f: F,
    log_z: Option<f64>,
) -> Result<Estimates>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let ps = crate::rules::hermite_points(q, alpha)?;
    let ws = weights(&ps, target)?;
    estimate(&ws, f, log_z)
}
