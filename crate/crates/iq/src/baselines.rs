//! Stochastic competitors: plain and self-normalized importance sampling,
//! randomized quasi-Monte Carlo importance sampling, and the sampling
//! analogues of the adaptive quadrature schemes.
//!
//! The adaptive baselines share the quadrature engines exactly — same
//! temporal-mixture weights, same moment matching, same covariance trust
//! region — so that any performance difference comes from random versus
//! deterministic node placement alone.

use crate::adapt::{
    adaptive_population, adaptive_single, AdaptOptions, AdaptTrace, MonteCarloNodes, Variant,
};
use crate::error::{IqError, Result};
use crate::igh::{self, Estimates};
use crate::math::normal_quantile;
use crate::proposal::GaussianProposal;
use crate::rules::PointSet;
use crate::target::TargetDensity;
use nalgebra::DMatrix;
use rand::Rng;

/// Monte Carlo estimates: the usual bundle plus the classical effective
/// sample size and the sample count.
#[derive(Debug, Clone)]
pub struct McEstimates {
    pub estimates: Estimates,
    pub classical_ess: f64,
    pub n: usize,
}

fn estimate_from_samples<F>(
    points: Vec<f64>,
    q: &GaussianProposal,
    target: &TargetDensity,
    f: F,
    log_z: Option<f64>,
) -> Result<McEstimates>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let ps = PointSet::from_samples(points, q.clone());
    let n = ps.n_points();
    let ws = igh::weights(&ps, target)?;
    let estimates = igh::estimate(&ws, f, log_z)?;
    // classical ESS is scale-invariant; compute it on shifted weights
    let shift = ws
        .log_weights()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ws.log_weights().iter().map(|l| (l - shift).exp()).collect();
    Ok(McEstimates {
        estimates,
        classical_ess: crate::diagnostics::classical_ess(&w),
        n,
    })
}

/// Importance sampling with `n` draws from `q`: unnormalized estimator when
/// `log_z` is known, self-normalized estimator, and `z_hat = (1/n) sum w`.
pub fn is_estimate<R, F>(
    target: &TargetDensity,
    q: &GaussianProposal,
    f: F,
    n: usize,
    rng: &mut R,
    log_z: Option<f64>,
) -> Result<McEstimates>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    if n == 0 {
        return Err(IqError::InvalidParam("need at least one sample".into()));
    }
    let dim = q.dim();
    let mut points = Vec::with_capacity(n * dim);
    for _ in 0..n {
        points.extend_from_slice(&q.sample(rng));
    }
    estimate_from_samples(points, q, target, f, log_z)
}

/// First `d` primes, enough for the supported dimension cap.
const HALTON_BASES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

/// Radical-inverse (van der Corput) value of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `n` Halton points in (0,1)^dim, skipping the first point of the
/// sequence, with a Cranley-Patterson rotation by `shift` (one uniform
/// shift per coordinate, wrapped modulo one).
fn rotated_halton(n: usize, dim: usize, shift: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n {
        for (d, s) in shift.iter().enumerate().take(dim) {
            let u = radical_inverse(i as u64 + 2, HALTON_BASES[d]) + s;
            let mut u = u - u.floor();
            // keep strictly inside (0,1) for the normal quantile
            u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            out.push(u);
        }
    }
    out
}

/// Randomized-QMC importance sampling: rotated Halton points pushed through
/// the inverse normal CDF per coordinate, then through `mu + L z`.
pub fn qmc_is_estimate<R, F>(
    target: &TargetDensity,
    q: &GaussianProposal,
    f: F,
    n: usize,
    rng: &mut R,
    log_z: Option<f64>,
) -> Result<McEstimates>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let dim = q.dim();
    if dim > HALTON_BASES.len() {
        return Err(IqError::InvalidParam(format!(
            "qmc supports dimension <= {}, got {dim}",
            HALTON_BASES.len()
        )));
    }
    if n == 0 {
        return Err(IqError::InvalidParam("need at least one point".into()));
    }
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let us = rotated_halton(n, dim, &shift);
    let l = q.chol();
    let mut points = Vec::with_capacity(n * dim);
    for i in 0..n {
        let z: Vec<f64> = (0..dim).map(|d| normal_quantile(us[i * dim + d])).collect();
        for r in 0..dim {
            let mut x = q.mu()[r];
            for c in 0..=r {
                x += l[(r, c)] * z[c];
            }
            points.push(x);
        }
    }
    estimate_from_samples(points, q, target, f, log_z)
}

/// Sampling analogue of the single-proposal adaptive scheme: `n` draws per
/// iteration, temporal-mixture denominators with full past reweighting, the
/// same moment matching and trust region.
pub fn amis<R, F>(
    target: &TargetDensity,
    init_mu: &[f64],
    init_sigma: &DMatrix<f64>,
    n: usize,
    t_iters: usize,
    rng: R,
    f: F,
) -> Result<AdaptTrace>
where
    R: Rng,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    amis_with(target, init_mu, init_sigma, n, t_iters, rng, f, AdaptOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn amis_with<R, F>(
    target: &TargetDensity,
    init_mu: &[f64],
    init_sigma: &DMatrix<f64>,
    n: usize,
    t_iters: usize,
    rng: R,
    f: F,
    opts: AdaptOptions,
) -> Result<AdaptTrace>
where
    R: Rng,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let source = MonteCarloNodes::new(n, rng);
    adaptive_single(
        target,
        init_mu,
        init_sigma,
        source,
        t_iters,
        Variant::TemporalMixture,
        f,
        opts,
    )
}

/// Sampling analogue of the population scheme: `n` draws per kernel and
/// iteration, mixture-denominator weights, Rao-Blackwellized moment
/// matching, kernel weights held equal.
pub fn m_pmc<R, F>(
    target: &TargetDensity,
    inits: &[(Vec<f64>, DMatrix<f64>)],
    n: usize,
    t_iters: usize,
    rng: R,
    f: F,
) -> Result<AdaptTrace>
where
    R: Rng,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let source = MonteCarloNodes::new(n, rng);
    adaptive_population(target, inits, source, t_iters, f, AdaptOptions::default())
}
