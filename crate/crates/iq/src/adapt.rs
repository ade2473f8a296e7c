//! Adaptive proposal schemes: a single Gaussian adapted by weighted moment
//! matching, and a population of Gaussian kernels adapted by
//! Rao-Blackwellized responsibilities under mixture weights.
//!
//! Both deterministic (quadrature-node) and stochastic (sampling) variants
//! run through the same engines, differing only in where the points come
//! from; the Monte Carlo baselines in [`crate::baselines`] reuse them so
//! that comparisons isolate node placement.
//!
//! Covariance updates are guarded by a trust region: the matched covariance
//! is eigenvalue-clamped to `[clamp_lo, clamp_hi]` in the metric of the
//! previous covariance, so a single near-degenerate weight set can neither
//! collapse nor explode the proposal. Fully degenerate iterations (every
//! weight zero) keep the previous parameters and inflate the covariance
//! fourfold.

use crate::error::{IqError, Result};
use crate::igh::{Estimates, WeightedSet};
use crate::math::{logaddexp, pairwise_sum};
use crate::par;
use crate::proposal::GaussianProposal;
use crate::rules::{hermite_rule, map_to_proposal, tensor_grid, GridRule, PointSet};
use crate::target::TargetDensity;
use nalgebra::DMatrix;
use rand::Rng;

/// Denominator scheme for the single-proposal adaptive method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Each point keeps the weight computed against the proposal that
    /// generated it; past points are never reweighted (linear cost).
    LastProposal,
    /// Each new proposal reweights every accumulated point: the denominator
    /// of a point born at iteration tau is the equal mixture of proposals
    /// tau..t. Pair-evaluation cost is N T (T + 1) / 2.
    TemporalMixture,
}

/// Trust-region bounds for covariance updates.
#[derive(Debug, Clone, Copy)]
pub struct AdaptOptions {
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        AdaptOptions {
            clamp_lo: 0.25,
            clamp_hi: 4.0,
        }
    }
}

/// Per-iteration snapshot of an adaptive run.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Proposal parameters used during this iteration (one entry for the
    /// single-proposal schemes, M for the population schemes).
    pub proposals: Vec<(Vec<f64>, DMatrix<f64>)>,
    /// Estimates over all points accumulated so far (equals `current` for
    /// the population schemes, which do not accumulate).
    pub pooled: Option<Estimates>,
    /// Estimates from this iteration's points only.
    pub current: Option<Estimates>,
    /// Cumulative target evaluations.
    pub target_evals: u64,
    /// Cumulative proposal (point, density) pair evaluations.
    pub proposal_evals: u64,
}

#[derive(Debug, Clone)]
pub struct AdaptTrace {
    pub records: Vec<IterationRecord>,
}

impl AdaptTrace {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("at least one iteration")
    }
}

/// Where an adaptive engine gets its points.
pub(crate) trait NodeSource {
    fn draw(&mut self, q: &GaussianProposal) -> Result<PointSet>;
}

pub(crate) struct QuadratureNodes {
    grid: GridRule,
}

impl QuadratureNodes {
    pub(crate) fn new(alpha: usize, dim: usize) -> Result<Self> {
        let rule = hermite_rule(alpha)?;
        Ok(QuadratureNodes {
            grid: tensor_grid(&rule, dim)?,
        })
    }
}

impl NodeSource for QuadratureNodes {
    fn draw(&mut self, q: &GaussianProposal) -> Result<PointSet> {
        Ok(map_to_proposal(&self.grid, q))
    }
}

pub(crate) struct MonteCarloNodes<R: Rng> {
    n: usize,
    rng: R,
}

impl<R: Rng> MonteCarloNodes<R> {
    pub(crate) fn new(n: usize, rng: R) -> Self {
        MonteCarloNodes { n, rng }
    }
}

impl<R: Rng> NodeSource for MonteCarloNodes<R> {
    fn draw(&mut self, q: &GaussianProposal) -> Result<PointSet> {
        let dim = q.dim();
        let mut points = Vec::with_capacity(self.n * dim);
        for _ in 0..self.n {
            points.extend_from_slice(&q.sample(&mut self.rng));
        }
        Ok(PointSet::from_samples(points, q.clone()))
    }
}

/// Weighted mean and covariance of a pooled weighted set.
///
/// Errors with [`IqError::DegenerateWeights`] when the combined weights all
/// vanish; callers keep the previous parameters and inflate the covariance.
pub fn moment_match(ws: &WeightedSet) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if ws.log_z_hat() == f64::NEG_INFINITY {
        return Err(IqError::DegenerateWeights);
    }
    let wbar = ws.normalized_weights();
    let d = ws.dim();
    let n = ws.len();
    let mut mu = vec![0.0; d];
    let mut terms = vec![0.0; n];
    for (j, m) in mu.iter_mut().enumerate() {
        for i in 0..n {
            terms[i] = wbar[i] * ws.point(i)[j];
        }
        *m = pairwise_sum(&terms);
    }
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    for r in 0..d {
        for c in 0..=r {
            for i in 0..n {
                let p = ws.point(i);
                terms[i] = wbar[i] * (p[r] - mu[r]) * (p[c] - mu[c]);
            }
            let v = pairwise_sum(&terms);
            sigma[(r, c)] = v;
            sigma[(c, r)] = v;
        }
    }
    Ok((mu, sigma))
}

/// Eigenvalue-clamp `new` relative to `prev`: eigenvalues of
/// `L^-1 new L^-T` (with `prev = L L^T`) are clipped to `[lo, hi]`.
fn clamp_covariance(new: &DMatrix<f64>, prev: &GaussianProposal, lo: f64, hi: f64) -> DMatrix<f64> {
    let d = new.nrows();
    let l = prev.chol();
    // b = L^-1 new L^-T by two forward substitutions
    let mut a = new.clone();
    for col in 0..d {
        for i in 0..d {
            let mut s = a[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * a[(k, col)];
            }
            a[(i, col)] = s / l[(i, i)];
        }
    }
    let mut b = a.transpose();
    for col in 0..d {
        for i in 0..d {
            let mut s = b[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * b[(k, col)];
            }
            b[(i, col)] = s / l[(i, i)];
        }
    }
    let sym = (&b + b.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut scaled = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let lam = eig.eigenvalues[i].clamp(lo, hi);
        let col = eig.eigenvectors.column(i);
        for r in 0..d {
            for c in 0..d {
                scaled[(r, c)] += lam * col[r] * col[c];
            }
        }
    }
    let out = l * scaled * l.transpose();
    (&out + out.transpose()) * 0.5
}

struct GroupState {
    points: PointSet,
    log_pi: Vec<f64>,
    /// LastProposal: log q_tau at each point. TemporalMixture: running
    /// log sum of exp(log q_i(x)) over proposals i = tau..t.
    log_den: Vec<f64>,
    /// Number of proposals folded into `log_den`.
    den_count: usize,
}

fn evaluate_target(target: &TargetDensity, ps: &PointSet) -> Vec<f64> {
    par::map_range(ps.n_points(), |i| target.log_unnorm(ps.point(i)))
}

fn evaluate_proposal(q: &GaussianProposal, ps: &PointSet) -> Vec<f64> {
    par::map_range(ps.n_points(), |i| q.logpdf(ps.point(i)))
}

fn pooled_weighted_set(groups: &[GroupState], dim: usize) -> Result<WeightedSet> {
    let t = groups.len() as f64;
    let mut points = Vec::new();
    let mut quad = Vec::new();
    let mut log_w = Vec::new();
    for g in groups {
        for i in 0..g.points.n_points() {
            points.extend_from_slice(g.points.point(i));
            quad.push(g.points.quad_weights()[i] / t);
            log_w.push(if g.log_pi[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                g.log_pi[i] - (g.log_den[i] - (g.den_count as f64).ln())
            });
        }
    }
    WeightedSet::from_parts(dim, points, quad, log_w)
}

fn group_weighted_set(g: &GroupState, dim: usize) -> Result<WeightedSet> {
    let n = g.points.n_points();
    let mut points = Vec::with_capacity(n * dim);
    for i in 0..n {
        points.extend_from_slice(g.points.point(i));
    }
    let log_w = (0..n)
        .map(|i| {
            if g.log_pi[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                g.log_pi[i] - (g.log_den[i] - (g.den_count as f64).ln())
            }
        })
        .collect();
    WeightedSet::from_parts(dim, points, g.points.quad_weights().to_vec(), log_w)
}

pub(crate) fn adaptive_single<S, F>(
    target: &TargetDensity,
    init_mu: &[f64],
    init_sigma: &DMatrix<f64>,
    mut source: S,
    t_iters: usize,
    variant: Variant,
    f: F,
    opts: AdaptOptions,
) -> Result<AdaptTrace>
where
    S: NodeSource,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    if t_iters == 0 {
        return Err(IqError::InvalidParam("need at least one iteration".into()));
    }
    let dim = target.dim();
    if init_mu.len() != dim {
        return Err(IqError::DimMismatch {
            expected: dim,
            got: init_mu.len(),
        });
    }
    let target_evals_0 = target.eval_count();
    let mut proposals: Vec<GaussianProposal> =
        vec![GaussianProposal::new(init_mu.to_vec(), init_sigma.clone())?];
    let mut groups: Vec<GroupState> = Vec::with_capacity(t_iters);
    let mut records = Vec::with_capacity(t_iters);

    for _t in 0..t_iters {
        let q = proposals.last().unwrap().clone();
        let ps = source.draw(&q)?;
        let log_pi = evaluate_target(target, &ps);
        let log_q_on_new = evaluate_proposal(&q, &ps);
        if variant == Variant::TemporalMixture {
            for g in groups.iter_mut() {
                let lq = evaluate_proposal(&q, &g.points);
                for (d, l) in g.log_den.iter_mut().zip(lq) {
                    *d = logaddexp(*d, l);
                }
                g.den_count += 1;
            }
        }
        groups.push(GroupState {
            points: ps,
            log_pi,
            log_den: log_q_on_new,
            den_count: 1,
        });

        let pooled_ws = pooled_weighted_set(&groups, dim);
        let current_ws = group_weighted_set(groups.last().unwrap(), dim);
        let pooled_est = pooled_ws
            .as_ref()
            .ok()
            .and_then(|ws| crate::igh::estimate(ws, &f, target.log_z()).ok());
        let current_est = current_ws
            .ok()
            .and_then(|ws| crate::igh::estimate(&ws, &f, target.log_z()).ok());

        let next = match pooled_ws.as_ref().ok().and_then(|ws| moment_match(ws).ok()) {
            Some((mu_hat, sigma_hat)) => {
                let clamped = clamp_covariance(&sigma_hat, &q, opts.clamp_lo, opts.clamp_hi);
                GaussianProposal::new_with_jitter(mu_hat.clone(), clamped)
                    .or_else(|_| GaussianProposal::new_with_jitter(mu_hat, q.sigma().clone()))
                    .unwrap_or_else(|_| q.clone())
            }
            None => {
                // every weight vanished: hold position, widen fourfold
                GaussianProposal::new_with_jitter(q.mu().to_vec(), q.sigma() * 4.0)
                    .unwrap_or_else(|_| q.clone())
            }
        };
        records.push(IterationRecord {
            proposals: vec![(q.mu().to_vec(), q.sigma().clone())],
            pooled: pooled_est,
            current: current_est,
            target_evals: target.eval_count() - target_evals_0,
            proposal_evals: proposals.iter().map(|p| p.eval_count()).sum(),
        });
        proposals.push(next);
    }
    Ok(AdaptTrace { records })
}

/// Adaptive importance quadrature with a single Gaussian proposal: select
/// nodes, weight, moment-match, repeat for `t_iters` rounds. Estimates at
/// iteration t pool all `N t` accumulated points under the chosen variant's
/// denominators.
pub fn am_igh<F>(
    target: &TargetDensity,
    init_mu: &[f64],
    init_sigma: &DMatrix<f64>,
    alpha: usize,
    t_iters: usize,
    variant: Variant,
    f: F,
) -> Result<AdaptTrace>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    am_igh_with(
        target,
        init_mu,
        init_sigma,
        alpha,
        t_iters,
        variant,
        f,
        AdaptOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn am_igh_with<F>(
    target: &TargetDensity,
    init_mu: &[f64],
    init_sigma: &DMatrix<f64>,
    alpha: usize,
    t_iters: usize,
    variant: Variant,
    f: F,
    opts: AdaptOptions,
) -> Result<AdaptTrace>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let source = QuadratureNodes::new(alpha, target.dim())?;
    adaptive_single(target, init_mu, init_sigma, source, t_iters, variant, f, opts)
}

pub(crate) fn adaptive_population<S, F>(
    target: &TargetDensity,
    inits: &[(Vec<f64>, DMatrix<f64>)],
    mut source: S,
    t_iters: usize,
    f: F,
    opts: AdaptOptions,
) -> Result<AdaptTrace>
where
    S: NodeSource,
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    if inits.is_empty() {
        return Err(IqError::InvalidParam("need at least one kernel".into()));
    }
    if t_iters == 0 {
        return Err(IqError::InvalidParam("need at least one iteration".into()));
    }
    let dim = target.dim();
    let m = inits.len();
    let target_evals_0 = target.eval_count();
    let mut kernels: Vec<GaussianProposal> = inits
        .iter()
        .map(|(mu, sigma)| GaussianProposal::new_with_jitter(mu.clone(), sigma.clone()))
        .collect::<Result<_>>()?;
    let mut proposal_evals_done: u64 = 0;
    let mut records = Vec::with_capacity(t_iters);

    for _t in 0..t_iters {
        let sets: Vec<PointSet> = kernels
            .iter()
            .map(|q| source.draw(q))
            .collect::<Result<_>>()?;
        let n = sets[0].n_points();
        let total = m * n;
        // component log-densities at every pooled point: the mixture
        // denominator and the responsibilities share these evaluations
        let comp_logq: Vec<Vec<f64>> = par::map_range(total, |idx| {
            let x = sets[idx / n].point(idx % n);
            kernels.iter().map(|q| q.logpdf(x)).collect()
        });
        let log_pi: Vec<f64> = par::map_range(total, |idx| {
            let x = sets[idx / n].point(idx % n);
            target.log_unnorm(x)
        });
        let mut points = Vec::with_capacity(total * dim);
        let mut quad = Vec::with_capacity(total);
        for ps in &sets {
            for i in 0..n {
                points.extend_from_slice(ps.point(i));
                quad.push(ps.quad_weights()[i] / m as f64);
            }
        }
        let log_w: Vec<f64> = (0..total)
            .map(|idx| {
                if log_pi[idx] == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                let lq = &comp_logq[idx];
                let mx = lq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mix = mx + (lq.iter().map(|l| (l - mx).exp()).sum::<f64>() / m as f64).ln();
                log_pi[idx] - mix
            })
            .collect();

        let ws = WeightedSet::from_parts(dim, points, quad, log_w);
        let est = ws
            .as_ref()
            .ok()
            .and_then(|w| crate::igh::estimate(w, &f, target.log_z()).ok());

        // Rao-Blackwellized per-kernel moment matching
        proposal_evals_done += kernels.iter().map(|q| q.eval_count()).sum::<u64>();
        if let Ok(ws) = &ws {
            let wbar = ws.normalized_weights();
            let resp: Vec<Vec<f64>> = (0..total)
                .map(|idx| {
                    let lq = &comp_logq[idx];
                    let mx = lq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = lq.iter().map(|l| (l - mx).exp()).sum();
                    lq.iter().map(|l| (l - mx).exp() / denom).collect()
                })
                .collect();
            let mut next = Vec::with_capacity(m);
            for (k, q) in kernels.iter().enumerate() {
                let mass = {
                    let terms: Vec<f64> = (0..total).map(|i| wbar[i] * resp[i][k]).collect();
                    pairwise_sum(&terms)
                };
                if mass < 1e-12 {
                    next.push(q.clone()); // starved kernel holds its params
                    continue;
                }
                let mut mu = vec![0.0; dim];
                for (j, mj) in mu.iter_mut().enumerate() {
                    let terms: Vec<f64> = (0..total)
                        .map(|i| wbar[i] * resp[i][k] * ws.point(i)[j])
                        .collect();
                    *mj = pairwise_sum(&terms) / mass;
                }
                let mut sigma = DMatrix::<f64>::zeros(dim, dim);
                for r in 0..dim {
                    for c in 0..=r {
                        let terms: Vec<f64> = (0..total)
                            .map(|i| {
                                let p = ws.point(i);
                                wbar[i] * resp[i][k] * (p[r] - mu[r]) * (p[c] - mu[c])
                            })
                            .collect();
                        let v = pairwise_sum(&terms) / mass;
                        sigma[(r, c)] = v;
                        sigma[(c, r)] = v;
                    }
                }
                let clamped = clamp_covariance(&sigma, q, opts.clamp_lo, opts.clamp_hi);
                let updated = GaussianProposal::new_with_jitter(mu.clone(), clamped)
                    .or_else(|_| GaussianProposal::new_with_jitter(mu, q.sigma().clone()))
                    .unwrap_or_else(|_| q.clone());
                next.push(updated);
            }
            kernels = next;
        } else {
            // all weights vanished everywhere: widen every kernel
            kernels = kernels
                .iter()
                .map(|q| {
                    GaussianProposal::new_with_jitter(q.mu().to_vec(), q.sigma() * 4.0)
                        .unwrap_or_else(|_| q.clone())
                })
                .collect();
        }

        records.push(IterationRecord {
            proposals: sets
                .iter()
                .map(|s| (s.proposal().mu().to_vec(), s.proposal().sigma().clone()))
                .collect(),
            pooled: est.clone(),
            current: est,
            target_evals: target.eval_count() - target_evals_0,
            proposal_evals: proposal_evals_done,
        });
    }
    Ok(AdaptTrace { records })
}

/// Population adaptive importance quadrature: `M` equal-weight Gaussian
/// kernels, mixture-denominator weights, Rao-Blackwellized moment matching.
/// Kernel count and equal mixture weights are preserved across iterations;
/// each iteration's estimates use that iteration's `M N` points.
pub fn m_pigh<F>(
    target: &TargetDensity,
    inits: &[(Vec<f64>, DMatrix<f64>)],
    alpha: usize,
    t_iters: usize,
    f: F,
) -> Result<AdaptTrace>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    let source = QuadratureNodes::new(alpha, target.dim())?;
    adaptive_population(target, inits, source, t_iters, f, AdaptOptions::default())
}
