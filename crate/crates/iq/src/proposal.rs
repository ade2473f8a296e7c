//! Gaussian and equal-weight Gaussian-mixture proposal densities.
//!
//! Proposals are immutable after construction and cache their Cholesky
//! factor. Every log-density evaluation ticks a shared counter so adaptive
//! loops can report exact proposal-evaluation budgets.

use crate::error::{IqError, Result};
use crate::math::pairwise_sum;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Shared relaxed counter; clones observe the same count.
#[derive(Debug, Clone, Default)]
pub struct EvalCounter(Arc<AtomicU64>);

impl EvalCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Lower Cholesky factor, reporting the order of the first non-positive
/// leading minor on failure. Pivots at or below 1e-12 count as failures so
/// that near-singular covariances are rejected rather than silently kept.
pub(crate) fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 1e-12) {
            return Err(IqError::NotPositiveDefinite { minor: j + 1 });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Multivariate normal N(mu, Sigma) with cached factorization.
#[derive(Debug, Clone)]
pub struct GaussianProposal {
    mu: Vec<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    /// -(d/2) log(2 pi) - sum log L_ii
    log_norm: f64,
    evals: EvalCounter,
}

impl GaussianProposal {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(IqError::DimMismatch {
                expected: d,
                got: sigma.nrows(),
            });
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let a = sigma[(i, j)];
                let b = sigma[(j, i)];
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(IqError::InvalidParam(format!(
                        "covariance not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let chol = cholesky_lower(&sigma)?;
        let log_det_half: f64 = (0..d).map(|i| chol[(i, i)].ln()).sum();
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        Ok(GaussianProposal {
            mu,
            sigma,
            chol,
            log_norm,
            evals: EvalCounter::default(),
        })
    }

    /// Like [`GaussianProposal::new`] but retries with additive jitter
    /// `1e-9 * trace / d` up to three times when the covariance has lost
    /// positive definiteness (adapted covariances occasionally do).
    pub fn new_with_jitter(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        let mut s = sigma;
        let jitter = 1e-9 * s.trace().max(f64::MIN_POSITIVE) / d as f64;
        for attempt in 0..=3 {
            match GaussianProposal::new(mu.clone(), s.clone()) {
                Ok(q) => return Ok(q),
                Err(e) if attempt == 3 => return Err(e),
                Err(_) => {
                    for i in 0..d {
                        s[(i, i)] += jitter * 10f64.powi(attempt);
                    }
                }
            }
        }
        unreachable!()
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub(crate) fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Exact multivariate normal log-density.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        self.evals.bump();
        let d = self.dim();
        // forward-substitute L y = x - mu
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.mu[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * y[k];
            }
            y[i] = s / self.chol[(i, i)];
        }
        let quad: f64 = y.iter().map(|v| v * v).sum();
        self.log_norm - 0.5 * quad
    }

    /// One draw `mu + L z`, `z` i.i.d. standard normal from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.mu.clone();
        for r in 0..d {
            for c in 0..=r {
                x[r] += self.chol[(r, c)] * z[c];
            }
        }
        x
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.count()
    }

    pub fn reset_eval_count(&self) {
        self.evals.reset()
    }
}

/// Equal-weight mixture of Gaussian components.
#[derive(Debug, Clone)]
pub struct MixtureProposal {
    components: Vec<GaussianProposal>,
}

impl MixtureProposal {
    pub fn new(components: Vec<GaussianProposal>) -> Result<Self> {
        if components.is_empty() {
            return Err(IqError::InvalidParam("mixture needs at least one component".into()));
        }
        let d = components[0].dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != d) {
            return Err(IqError::DimMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        Ok(MixtureProposal { components })
    }

    pub fn components(&self) -> &[GaussianProposal] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Log of the equal-weight mixture density, max-shift stabilized.
    /// Evaluates (and counts) every component.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self.components.iter().map(|c| c.logpdf(x)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return m;
        }
        let shifted: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
        m + (pairwise_sum(&shifted) / self.components.len() as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn std_normal_1d() -> GaussianProposal {
        GaussianProposal::new(vec![0.0], dmatrix![1.0]).unwrap()
    }

    #[test]
    fn logpdf_standard_normal_mode() {
        assert_relative_eq!(std_normal_1d().logpdf(&[0.0]), -0.5 * (2.0 * PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn logpdf_bivariate_identity() {
        let q = GaussianProposal::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(q.logpdf(&[1.0, 1.0]), -(2.0 * PI).ln() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn logpdf_scalar_shifted() {
        let q = GaussianProposal::new(vec![1.0], dmatrix![4.0]).unwrap();
        assert_relative_eq!(q.logpdf(&[3.0]), -0.5 * (8.0 * PI).ln() - 0.5, epsilon = 1e-14);
    }

    #[test]
    fn asymmetric_and_singular_rejected() {
        let e = GaussianProposal::new(vec![0.0, 0.0], dmatrix![1.0, 0.5; 0.4, 1.0]);
        assert!(matches!(e, Err(IqError::InvalidParam(_))));
        let e = GaussianProposal::new(vec![0.0], dmatrix![1e-13]);
        assert!(matches!(e, Err(IqError::NotPositiveDefinite { minor: 1 })));
    }

    #[test]
    fn jitter_recovers_semidefinite() {
        // rank-1 outer product, PSD but singular
        let s = dmatrix![1.0, 1.0; 1.0, 1.0];
        let q = GaussianProposal::new_with_jitter(vec![0.0, 0.0], s).unwrap();
        assert!(q.logpdf(&[0.0, 0.0]).is_finite());
    }

    #[test]
    fn sampling_is_reproducible_and_unbiased() {
        let q = std_normal_1d();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(q.sample(&mut r1), q.sample(&mut r2));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| q.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean}"); // ~ 3 sigma / sqrt(n) bound
    }

    #[test]
    fn eval_counter_ticks_per_call_and_per_component() {
        let q = std_normal_1d();
        q.logpdf(&[0.3]);
        q.logpdf(&[0.4]);
        assert_eq!(q.eval_count(), 2);

        let a = std_normal_1d();
        let b = GaussianProposal::new(vec![1.0], dmatrix![1.0]).unwrap();
        let mix = MixtureProposal::new(vec![a.clone(), b.clone()]).unwrap();
        mix.logpdf(&[0.0]);
        assert_eq!(a.eval_count(), 1);
        assert_eq!(b.eval_count(), 1);
    }

    #[test]
    fn mixture_degenerate_cases() {
        let q = std_normal_1d();
        let m1 = MixtureProposal::new(vec![q.clone()]).unwrap();
        assert_relative_eq!(m1.logpdf(&[0.7]), q.logpdf(&[0.7]), epsilon = 1e-14);

        let m2 = MixtureProposal::new(vec![q.clone(), q.clone()]).unwrap();
        assert_relative_eq!(m2.logpdf(&[-0.3]), q.logpdf(&[-0.3]), epsilon = 1e-14);
    }

    #[test]
    fn mixture_far_modes_at_midpoint() {
        let a = GaussianProposal::new(vec![-10.0], dmatrix![1.0]).unwrap();
        let b = GaussianProposal::new(vec![10.0], dmatrix![1.0]).unwrap();
        let m = MixtureProposal::new(vec![a.clone(), b]).unwrap();
        // both terms equal, so the mixture at 0 equals either component at 0
        assert_relative_eq!(m.logpdf(&[0.0]), a.logpdf(&[0.0]), epsilon = 1e-12);
        assert_relative_eq!(a.logpdf(&[0.0]), -0.5 * (2.0 * PI).ln() - 50.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_is_permutation_invariant() {
        let comps: Vec<GaussianProposal> = (0..4)
            .map(|i| GaussianProposal::new(vec![i as f64], dmatrix![1.0 + i as f64]).unwrap())
            .collect();
        let m1 = MixtureProposal::new(comps.clone()).unwrap();
        let mut rev = comps;
        rev.reverse();
        let m2 = MixtureProposal::new(rev).unwrap();
        for x in [-3.0, 0.0, 0.5, 11.0] {
            assert_relative_eq!(m1.logpdf(&[x]), m2.logpdf(&[x]), epsilon = 1e-12);
        }
    }

    #[test]
    fn own_quadrature_reproduces_mean_and_covariance() {
        let sigma = dmatrix![1.5, 0.4; 0.4, 0.9];
        let q = GaussianProposal::new(vec![2.0, -1.0], sigma.clone()).unwrap();
        for alpha in 2..=6usize {
            let ps = crate::rules::hermite_points(&q, alpha).unwrap();
            let n = ps.n_points();
            let mut mean = [0.0; 2];
            for i in 0..n {
                for d in 0..2 {
                    mean[d] += ps.quad_weights()[i] * ps.point(i)[d];
                }
            }
            assert_relative_eq!(mean[0], 2.0, epsilon = 1e-10);
            assert_relative_eq!(mean[1], -1.0, epsilon = 1e-10);
            let mut cov = [[0.0; 2]; 2];
            for i in 0..n {
                let p = ps.point(i);
                for r in 0..2 {
                    for c in 0..2 {
                        cov[r][c] += ps.quad_weights()[i] * (p[r] - mean[r]) * (p[c] - mean[c]);
                    }
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    assert_relative_eq!(cov[r][c], sigma[(r, c)], epsilon = 1e-8);
                }
            }
        }
    }
}
