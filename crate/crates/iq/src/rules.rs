//! Classical one-dimensional quadrature rules, tensor-product grids, and
//! their mapping onto Gaussian proposals.
//!
//! Nodes and weights for Hermite, Legendre and Laguerre rules come from the
//! Golub-Welsch construction: eigenvalues of the symmetric tridiagonal Jacobi
//! matrix of the three-term recurrence are the nodes, and the squared first
//! eigenvector components (times the weight-function mass `mu0`) are the
//! weights. Both Chebyshev kinds use their closed forms.
//!
//! Two weight vectors are kept per rule. `raw_weights` are the textbook
//! weights (Hermite raw weights sum to sqrt(pi), Legendre to 2, and so on).
//! `weights` are normalized to sum to one, which is the convention the
//! estimators rely on: the normalizing-constant estimator
//! `(1/N) sum w'_n` is only consistent when the quadrature weights form a
//! probability vector.
//!
//! The change of variables for a Gaussian N(mu, Sigma) is
//! `x = mu + sqrt(2) * L * t` with `L * L^T = Sigma` (lower Cholesky), which
//! converts the e^{-t^2} weight convention of the Hermite rule into an
//! expectation under the Gaussian. The tensor grid enumerates per-dimension
//! node indices in row-major order (first dimension most significant), fixed
//! for reproducibility.

use crate::error::{IqError, Result};
use crate::math::pairwise_sum;
use crate::proposal::GaussianProposal;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Maximum supported points per dimension; the tridiagonal eigensolve is
/// validated up to this order.
pub const MAX_ALPHA: usize = 200;

/// Hard cap on tensor-grid size.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Hermite,
    Legendre,
    ChebyshevGauss,
    ChebyshevGauss2,
    Laguerre,
}

impl RuleKind {
    /// Total mass of the weight function over its domain.
    fn mu0(self) -> f64 {
        match self {
            RuleKind::Hermite => PI.sqrt(),
            RuleKind::Legendre => 2.0,
            RuleKind::ChebyshevGauss => PI,
            RuleKind::ChebyshevGauss2 => PI / 2.0,
            RuleKind::Laguerre => 1.0,
        }
    }
}

/// A one-dimensional rule: strictly increasing nodes with positive weights.
#[derive(Debug, Clone)]
pub struct Rule1D {
    pub kind: RuleKind,
    pub alpha: usize,
    pub nodes: Vec<f64>,
    /// Normalized weights (sum to one).
    pub weights: Vec<f64>,
    /// Textbook weights before normalization.
    pub raw_weights: Vec<f64>,
}

/// Gauss-Hermite rule of order `alpha` in the physicists' convention
/// (weight function e^{-x^2}).
pub fn hermite_rule(alpha: usize) -> Result<Rule1D> {
    classical_rule(RuleKind::Hermite, alpha)
}

/// Any Table-style classical rule.
pub fn classical_rule(kind: RuleKind, alpha: usize) -> Result<Rule1D> {
    if alpha == 0 || alpha > MAX_ALPHA {
        return Err(IqError::InvalidOrder { alpha });
    }
    let (mut nodes, mut raw) = match kind {
        RuleKind::Hermite => golub_welsch(
            alpha,
            |_| 0.0,
            |k| (k as f64 / 2.0).sqrt(),
            kind.mu0(),
        ),
        RuleKind::Legendre => golub_welsch(
            alpha,
            |_| 0.0,
            |k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            },
            kind.mu0(),
        ),
        RuleKind::Laguerre => golub_welsch(
            alpha,
            |k| 2.0 * k as f64 + 1.0,
            |k| k as f64,
            kind.mu0(),
        ),
        RuleKind::ChebyshevGauss => {
            // x_n = cos((2n-1)pi/(2 alpha)), v_n = pi/alpha; emitted ascending
            let a = alpha as f64;
            let nodes: Vec<f64> = (1..=alpha)
                .rev()
                .map(|n| ((2 * n - 1) as f64 * PI / (2.0 * a)).cos())
                .collect();
            let raw = vec![PI / a; alpha];
            (nodes, raw)
        }
        RuleKind::ChebyshevGauss2 => {
            // x_n = cos(n pi/(alpha+1)), v_n = pi/(alpha+1) sin^2(n pi/(alpha+1))
            let ap1 = alpha as f64 + 1.0;
            let mut nodes = Vec::with_capacity(alpha);
            let mut raw = Vec::with_capacity(alpha);
            for n in (1..=alpha).rev() {
                let theta = n as f64 * PI / ap1;
                nodes.push(theta.cos());
                raw.push(PI / ap1 * theta.sin() * theta.sin());
            }
            (nodes, raw)
        }
    };
    if kind != RuleKind::Laguerre {
        symmetrize(&mut nodes, &mut raw);
    }
    let total = pairwise_sum(&raw);
    let weights: Vec<f64> = raw.iter().map(|&w| w / total).collect();
    Ok(Rule1D {
        kind,
        alpha,
        nodes,
        weights,
        raw_weights: raw,
    })
}

/// Nodes/weights from the symmetric tridiagonal Jacobi matrix with diagonal
/// `diag(k)` (k = 0..alpha-1) and off-diagonal `off(k)` (k = 1..alpha-1).
fn golub_welsch(
    alpha: usize,
    diag: impl Fn(usize) -> f64,
    off: impl Fn(usize) -> f64,
    mu0: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(alpha, alpha);
    for k in 0..alpha {
        jacobi[(k, k)] = diag(k);
    }
    for k in 1..alpha {
        let b = off(k);
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut order: Vec<usize> = (0..alpha).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let nodes: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let raw: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v0 = eig.eigenvectors[(0, i)];
            mu0 * v0 * v0
        })
        .collect();
    (nodes, raw)
}

/// Enforce exact node symmetry about zero (eigensolves leave ~1e-16
/// asymmetries; downstream invariants want clean pairing).
fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

/// A full tensor-product grid on the reference domain.
#[derive(Debug, Clone)]
pub struct GridRule {
    pub dim: usize,
    pub alpha: usize,
    /// `n_points * dim`, row-major.
    points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GridRule {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// Cartesian product of `rule` over `dim` dimensions; the weight of a grid
/// point is the product of its per-dimension normalized weights.
pub fn tensor_grid(rule: &Rule1D, dim: usize) -> Result<GridRule> {
    if dim == 0 {
        return Err(IqError::InvalidParam("dim must be at least 1".into()));
    }
    let total = (rule.alpha as u128).pow(dim as u32);
    if total > MAX_GRID_POINTS as u128 {
        return Err(IqError::GridTooLarge {
            alpha: rule.alpha,
            dim,
            points: total,
            limit: MAX_GRID_POINTS,
        });
    }
    let n = total as usize;
    let mut points = vec![0.0; n * dim];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut rem = i;
        let mut w = 1.0;
        // row-major: first dimension most significant
        for d in (0..dim).rev() {
            let idx = rem % rule.alpha;
            rem /= rule.alpha;
            points[i * dim + d] = rule.nodes[idx];
            w *= rule.weights[idx];
        }
        weights[i] = w;
    }
    Ok(GridRule {
        dim,
        alpha: rule.alpha,
        points,
        weights,
    })
}

/// Quadrature points mapped onto a concrete Gaussian, carrying the normalized
/// quadrature weights `v_n` and the generating proposal.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    points: Vec<f64>,
    quad_weights: Vec<f64>,
    proposal: GaussianProposal,
}

impl PointSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn proposal(&self) -> &GaussianProposal {
        &self.proposal
    }

    /// A point set made of Monte Carlo draws carries uniform weights 1/N;
    /// used by the stochastic baselines so the same estimators apply.
    pub fn from_samples(points: Vec<f64>, proposal: GaussianProposal) -> Self {
        let dim = proposal.dim();
        assert_eq!(points.len() % dim, 0);
        let n = points.len() / dim;
        PointSet {
            dim,
            points,
            quad_weights: vec![1.0 / n as f64; n],
            proposal,
        }
    }

    pub(crate) fn from_parts(points: Vec<f64>, quad_weights: Vec<f64>, proposal: GaussianProposal) -> Self {
        let dim = proposal.dim();
        assert_eq!(points.len(), quad_weights.len() * dim);
        PointSet {
            dim,
            points,
            quad_weights,
            proposal,
        }
    }
}

/// Map a reference grid through `x = mu + sqrt(2) L t` for the Gaussian
/// N(mu, Sigma), `L` the lower Cholesky factor of Sigma.
pub fn map_to_gaussian(grid: &GridRule, mu: &[f64], sigma: &DMatrix<f64>) -> Result<PointSet> {
    let proposal = GaussianProposal::new(mu.to_vec(), sigma.clone())?;
    Ok(map_to_proposal(grid, &proposal))
}

/// Same mapping with an existing proposal (factorization reused).
pub fn map_to_proposal(grid: &GridRule, proposal: &GaussianProposal) -> PointSet {
    let dim = proposal.dim();
    assert_eq!(grid.dim, dim, "grid dimension must match proposal dimension");
    let l = proposal.chol();
    let mu = proposal.mu();
    let n = grid.n_points();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut points = vec![0.0; n * dim];
    for i in 0..n {
        let t = grid.point(i);
        for r in 0..dim {
            let mut acc = 0.0;
            for c in 0..=r {
                acc += l[(r, c)] * t[c];
            }
            points[i * dim + r] = mu[r] + sqrt2 * acc;
        }
    }
    PointSet::from_parts(points, grid.weights.clone(), proposal.clone())
}

/// Convenience: Hermite grid of order `alpha` mapped onto `proposal`.
pub fn hermite_points(proposal: &GaussianProposal, alpha: usize) -> Result<PointSet> {
    let rule = hermite_rule(alpha)?;
    let grid = tensor_grid(&rule, proposal.dim())?;
    Ok(map_to_proposal(&grid, proposal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn hermite_alpha_1_is_midpoint() {
        let r = hermite_rule(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![1.0]);
        assert_relative_eq!(r.raw_weights[0], PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn hermite_alpha_3_closed_form() {
        let r = hermite_rule(3).unwrap();
        let s = 1.5f64.sqrt();
        assert_relative_eq!(r.nodes[0], -s, epsilon = 1e-12);
        assert_relative_eq!(r.nodes[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.nodes[2], s, epsilon = 1e-12);
        assert_relative_eq!(r.weights[0], 1.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(r.weights[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.weights[2], 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn hermite_alpha_2_second_moment() {
        // sum v_n x_n^2 for the normalized rule equals the variance 1/2 of
        // the e^{-x^2} weight
        let r = hermite_rule(2).unwrap();
        let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, v)| v * x * x).sum();
        assert_relative_eq!(m2, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn order_bounds_rejected() {
        assert!(matches!(hermite_rule(0), Err(IqError::InvalidOrder { .. })));
        assert!(matches!(hermite_rule(201), Err(IqError::InvalidOrder { .. })));
        assert!(hermite_rule(200).is_ok());
    }

    #[test]
    fn hermite_raw_weights_match_closed_form() {
        // v_n = 2^{a-1} a! sqrt(pi) / (a^2 [H_{a-1}(x_n)]^2)
        fn hermite_poly(deg: usize, x: f64) -> f64 {
            let (mut hm, mut h) = (0.0, 1.0);
            for k in 0..deg {
                let next = 2.0 * x * h - 2.0 * k as f64 * hm;
                hm = h;
                h = next;
            }
            h
        }
        for alpha in 1..=10usize {
            let r = hermite_rule(alpha).unwrap();
            let a = alpha as f64;
            let fact: f64 = (1..=alpha).map(|k| k as f64).product();
            for (x, w) in r.nodes.iter().zip(&r.raw_weights) {
                let h = hermite_poly(alpha - 1, *x);
                let expect = 2f64.powi(alpha as i32 - 1) * fact * PI.sqrt() / (a * a * h * h);
                assert_relative_eq!(*w, expect, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn chebyshev_gauss_alpha_2() {
        let r = classical_rule(RuleKind::ChebyshevGauss, 2).unwrap();
        assert_relative_eq!(r.nodes[0], (3.0 * PI / 4.0).cos(), epsilon = 1e-15);
        assert_relative_eq!(r.nodes[1], (PI / 4.0).cos(), epsilon = 1e-15);
        assert_relative_eq!(r.raw_weights[0], PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.raw_weights[1], PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_alpha_2() {
        let r = classical_rule(RuleKind::Legendre, 2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_relative_eq!(r.nodes[0], -s, epsilon = 1e-12);
        assert_relative_eq!(r.nodes[1], s, epsilon = 1e-12);
        assert_relative_eq!(r.raw_weights[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.raw_weights[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn laguerre_alpha_1() {
        let r = classical_rule(RuleKind::Laguerre, 1).unwrap();
        assert_relative_eq!(r.nodes[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.raw_weights[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chebyshev2_matches_golub_welsch() {
        // Chebyshev-U recurrence: all off-diagonals 1/2, mu0 = pi/2
        for alpha in 1..=10usize {
            let closed = classical_rule(RuleKind::ChebyshevGauss2, alpha).unwrap();
            let (nodes, raw) = golub_welsch(alpha, |_| 0.0, |_| 0.5, PI / 2.0);
            for i in 0..alpha {
                assert_relative_eq!(closed.nodes[i], nodes[i], epsilon = 1e-10);
                assert_relative_eq!(closed.raw_weights[i], raw[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rules_are_sorted_positive_and_normalized() {
        for kind in [
            RuleKind::Hermite,
            RuleKind::Legendre,
            RuleKind::ChebyshevGauss,
            RuleKind::ChebyshevGauss2,
            RuleKind::Laguerre,
        ] {
            for alpha in [1usize, 2, 5, 9] {
                let r = classical_rule(kind, alpha).unwrap();
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]), "{kind:?} alpha={alpha}");
                assert!(r.weights.iter().all(|&w| w > 0.0));
                assert_relative_eq!(pairwise_sum(&r.weights), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hermite_nodes_symmetric_to_high_order() {
        for alpha in [2usize, 17, 64, 200] {
            let r = hermite_rule(alpha).unwrap();
            for i in 0..alpha {
                assert_relative_eq!(r.nodes[i], -r.nodes[alpha - 1 - i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tensor_grid_product_structure() {
        let r = hermite_rule(3).unwrap();
        let g = tensor_grid(&r, 2).unwrap();
        assert_eq!(g.n_points(), 9);
        assert_relative_eq!(pairwise_sum(&g.weights), 1.0, epsilon = 1e-10);
        // corner = (first, first) with weight (1/6)^2
        assert_relative_eq!(g.weights[0], 1.0 / 36.0, epsilon = 1e-12);
        assert_eq!(g.point(0)[0], r.nodes[0]);
        assert_eq!(g.point(0)[1], r.nodes[0]);
        // row-major: second point advances the last dimension
        assert_eq!(g.point(1)[0], r.nodes[0]);
        assert_eq!(g.point(1)[1], r.nodes[1]);
    }

    #[test]
    fn tensor_grid_alpha1_dim5() {
        let r = hermite_rule(1).unwrap();
        let g = tensor_grid(&r, 5).unwrap();
        assert_eq!(g.n_points(), 1);
        assert_eq!(g.point(0), &[0.0; 5]);
        assert_eq!(g.weights[0], 1.0);
    }

    #[test]
    fn tensor_grid_count_and_guard() {
        let r = hermite_rule(10).unwrap();
        assert_eq!(tensor_grid(&r, 5).unwrap().n_points(), 100_000);
        let r = hermite_rule(100).unwrap();
        assert!(matches!(
            tensor_grid(&r, 5),
            Err(IqError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn map_alpha1_gives_mean_point() {
        let r = hermite_rule(1).unwrap();
        let g = tensor_grid(&r, 2).unwrap();
        let ps = map_to_gaussian(&g, &[3.0, -1.0], &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(ps.point(0), &[3.0, -1.0]);
        assert_eq!(ps.quad_weights(), &[1.0]);
    }

    #[test]
    fn map_second_and_third_moments_exact() {
        // var 4, alpha 2: degree 2 <= 2*2-1
        let r = hermite_rule(2).unwrap();
        let g = tensor_grid(&r, 1).unwrap();
        let ps = map_to_gaussian(&g, &[0.0], &dmatrix![4.0]).unwrap();
        let m2: f64 = (0..ps.n_points())
            .map(|i| ps.quad_weights()[i] * ps.point(i)[0].powi(2))
            .sum();
        assert_relative_eq!(m2, 4.0, epsilon = 1e-12);

        // N(1,1), alpha 3: E[x^3] = mu^3 + 3 mu sigma^2 = 4, degree 3 <= 5
        let r = hermite_rule(3).unwrap();
        let g = tensor_grid(&r, 1).unwrap();
        let ps = map_to_gaussian(&g, &[1.0], &dmatrix![1.0]).unwrap();
        let m3: f64 = (0..ps.n_points())
            .map(|i| ps.quad_weights()[i] * ps.point(i)[0].powi(3))
            .sum();
        assert_relative_eq!(m3, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn map_rejects_non_pd_covariance() {
        let r = hermite_rule(2).unwrap();
        let g = tensor_grid(&r, 2).unwrap();
        let bad = dmatrix![1.0, 2.0; 2.0, 1.0]; // indefinite
        match map_to_gaussian(&g, &[0.0, 0.0], &bad) {
            Err(IqError::NotPositiveDefinite { minor }) => assert_eq!(minor, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn generation_is_bit_identical() {
        let a = hermite_rule(31).unwrap();
        let b = hermite_rule(31).unwrap();
        for i in 0..31 {
            assert_eq!(a.nodes[i].to_bits(), b.nodes[i].to_bits());
            assert_eq!(a.weights[i].to_bits(), b.weights[i].to_bits());
        }
        let g1 = tensor_grid(&a, 3).unwrap();
        let g2 = tensor_grid(&b, 3).unwrap();
        let sigma = dmatrix![2.0, 0.3, 0.0; 0.3, 1.0, -0.1; 0.0, -0.1, 0.5];
        let p1 = map_to_gaussian(&g1, &[1.0, -2.0, 0.5], &sigma).unwrap();
        let p2 = map_to_gaussian(&g2, &[1.0, -2.0, 0.5], &sigma).unwrap();
        for i in 0..p1.n_points() {
            assert_eq!(p1.point(i), p2.point(i));
        }
    }

    #[test]
    fn polynomial_exactness_against_analytic_moments() {
        use crate::math::gaussian_raw_moment;
        for alpha in 1..=10usize {
            let rule = hermite_rule(alpha).unwrap();
            let grid = tensor_grid(&rule, 1).unwrap();
            for (mu, sd) in [(0.0, 1.0), (1.0, 1.0), (-2.0, 0.5)] {
                let ps = map_to_gaussian(&grid, &[mu], &dmatrix![sd * sd]).unwrap();
                for p in 0..=(2 * alpha - 1) as u32 {
                    let est: f64 = (0..ps.n_points())
                        .map(|i| ps.quad_weights()[i] * ps.point(i)[0].powi(p as i32))
                        .sum();
                    let truth = gaussian_raw_moment(mu, sd, p);
                    // symmetric odd moments cancel term-by-term; allow
                    // roundoff at the scale of the summands
                    let scale: f64 = (0..ps.n_points())
                        .map(|i| ps.quad_weights()[i] * ps.point(i)[0].abs().powi(p as i32))
                        .sum();
                    let tol = 1e-9 * truth.abs().max(1.0) + 1e-15 * scale;
                    assert!(
                        (est - truth).abs() <= tol,
                        "alpha={alpha} mu={mu} sd={sd} p={p}: {est} vs {truth}"
                    );
                }
            }
        }
    }

    #[test]
    fn affine_equivariance_mean_exact_for_all_alpha() {
        let sigma = dmatrix![1.5, 0.2; 0.2, 0.8];
        for alpha in 1..=8usize {
            let rule = hermite_rule(alpha).unwrap();
            let grid = tensor_grid(&rule, 2).unwrap();
            let ps = map_to_gaussian(&grid, &[0.7, -0.3], &sigma).unwrap();
            let mut mean = [0.0; 2];
            for i in 0..ps.n_points() {
                for d in 0..2 {
                    mean[d] += ps.quad_weights()[i] * ps.point(i)[d];
                }
            }
            assert_relative_eq!(mean[0], 0.7, epsilon = 1e-10);
            assert_relative_eq!(mean[1], -0.3, epsilon = 1e-10);
        }
    }
}
