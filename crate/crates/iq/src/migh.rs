//! Multiple-proposal importance quadrature.
//!
//! Each of the `M` proposals contributes its own `N` quadrature points; the
//! schemes differ only in the weight denominator: `Standard` divides by the
//! generating proposal, `DeterministicMixture` by the equal-weight mixture
//! of all `M` proposals (one mixture evaluation costs `M` component
//! evaluations per point, the price of its much lower mismatch).
//!
//! The pooled set stores quadrature weights rescaled by `1/M`, so it sums to
//! one and the single-proposal estimators apply verbatim: with
//! `N_total = M N` the combined weights `w v_pooled N_total = w v N` and the
//! pooled normalizing estimator `(1/(M N)) sum w'` come out right.

use crate::error::{IqError, Result};
use crate::igh::{Estimates, WeightedSet};
use crate::par;
use crate::proposal::MixtureProposal;
use crate::rules::PointSet;
use crate::target::TargetDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Per-proposal denominator `q_m`.
    Standard,
    /// Shared denominator: the equal-weight mixture of all proposals.
    DeterministicMixture,
}

/// Pool the weighted points of all proposals under `scheme`.
///
/// Every point set must carry the same number of points (ragged pools are
/// rejected) and share the target dimension.
pub fn weights(pointsets: &[PointSet], target: &TargetDensity, scheme: Scheme) -> Result<WeightedSet> {
    if pointsets.is_empty() {
        return Err(IqError::InvalidParam("need at least one proposal".into()));
    }
    let n = pointsets[0].n_points();
    let dim = pointsets[0].dim();
    for ps in pointsets {
        if ps.n_points() != n {
            return Err(IqError::InvalidParam(
                "all proposals must contribute the same number of points".into(),
            ));
        }
        if ps.dim() != dim {
            return Err(IqError::DimMismatch {
                expected: dim,
                got: ps.dim(),
            });
        }
    }
    if target.dim() != dim {
        return Err(IqError::DimMismatch {
            expected: dim,
            got: target.dim(),
        });
    }
    let m = pointsets.len();
    let mixture = match scheme {
        Scheme::DeterministicMixture => Some(MixtureProposal::new(
            pointsets.iter().map(|ps| ps.proposal().clone()).collect(),
        )?),
        Scheme::Standard => None,
    };
    let flat: Vec<(usize, usize)> = (0..m)
        .flat_map(|mi| (0..n).map(move |ni| (mi, ni)))
        .collect();
    let log_w = par::map_slice(&flat, |&(mi, ni)| {
        let ps = &pointsets[mi];
        let x = ps.point(ni);
        let lp = target.log_unnorm(x);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let lq = match &mixture {
            Some(mix) => mix.logpdf(x),
            None => ps.proposal().logpdf(x),
        };
        lp - lq
    });
    let mut points = Vec::with_capacity(m * n * dim);
    let mut quad = Vec::with_capacity(m * n);
    for ps in pointsets {
        for i in 0..n {
            points.extend_from_slice(ps.point(i));
            quad.push(ps.quad_weights()[i] / m as f64);
        }
    }
    WeightedSet::from_parts(dim, points, quad, log_w)
}

/// Estimators over the pooled set; identical to the single-proposal
/// estimators thanks to the pooled quadrature-weight convention.
pub fn estimate<F>(pooled: &WeightedSet, f: F, log_z: Option<f64>) -> Result<Estimates>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    crate::igh::estimate(pooled, f, log_z)
}
