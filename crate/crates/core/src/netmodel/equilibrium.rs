use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{squared_distance, FinancialNetwork};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Enumeration visits all `2^n` failure sets.
pub const MAX_ENUMERATED_INSTITUTIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EquilibriumState<T> {
    /// Market values as solved, possibly negative.
    pub v: Vec<T>,
    /// `v` clamped at zero, for reporting only.
    pub v_display: Vec<T>,
    pub failed: Vec<bool>,
    /// Equilibrium cost with the exact step.
    pub residual: T,
}

impl<T: Scalar> EquilibriumState<T> {
    fn new(v: Vec<T>, thresholds: &[T], residual: T) -> Self {
        let failed = v.iter().zip(thresholds).map(|(&vi, &ci)| vi < ci).collect();
        let v_display = v.iter().map(|&x| x.max(T::zero())).collect();
        Self {
            v,
            v_display,
            failed,
            residual,
        }
    }

    pub fn failure_count(&self) -> usize {
        self.failed.iter().filter(|&&f| f).count()
    }
}

/// Starting point of the monotone fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartPoint {
    /// No institution failed; converges to the greatest equilibrium.
    FromAbove,
    /// Every institution failed; converges to the least equilibrium.
    FromBelow,
}

/// Iterates `v <- M (D p - b(v))` from one of the two extreme starting
/// points. The map is monotone, so at most `n + 1` sweeps are needed.
pub fn fixed_point_equilibrium<T: Scalar>(
    net: &FinancialNetwork<T>,
    start: StartPoint,
    max_iter: usize,
    tol: T,
) -> Result<EquilibriumState<T>> {
    if max_iter == 0 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }
    if !(tol > T::zero()) {
        return Err(Error::param("tol", "must be positive"));
    }
    let sys = net.system()?;
    let n = net.n();
    let initial_losses = match start {
        StartPoint::FromAbove => vec![T::zero(); n],
        StartPoint::FromBelow => net.failure_losses().to_vec(),
    };
    let mut v = sys.market_values(&initial_losses);
    let mut best: Option<(T, Vec<T>)> = None;
    for _ in 0..max_iter {
        let next = sys.image(&v);
        let residual = squared_distance(&v, &next);
        if residual <= tol {
            return Ok(EquilibriumState::new(v, net.thresholds(), residual));
        }
        if best.as_ref().map_or(true, |(r, _)| residual < *r) {
            best = Some((residual, v.clone()));
        }
        v = next;
    }
    let (residual, best) = best.expect("at least one sweep ran");
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: residual.as_f64(),
        best: best.iter().map(|x| x.as_f64()).collect(),
    })
}

/// Every self-consistent equilibrium, found by solving the linear system
/// for each candidate failure set. Sorted by failure count, then by the
/// failure set read as a bitmask.
pub fn enumerate_equilibria<T: Scalar>(net: &FinancialNetwork<T>) -> Result<Vec<EquilibriumState<T>>> {
    let n = net.n();
    if n > MAX_ENUMERATED_INSTITUTIONS {
        return Err(Error::InstanceTooLarge {
            what: "equilibrium enumeration",
            size: n,
            limit: MAX_ENUMERATED_INSTITUTIONS,
        });
    }
    let sys = net.system()?;
    let beta = net.failure_losses();
    let thresholds = net.thresholds();
    let mut found: Vec<(u32, EquilibriumState<T>)> = (0..1u32 << n)
        .into_par_iter()
        .filter_map(|mask| {
            let losses: Vec<T> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { beta[i] } else { T::zero() })
                .collect();
            let v = sys.market_values(&losses);
            let consistent = (0..n).all(|i| (v[i] < thresholds[i]) == (mask >> i & 1 == 1));
            consistent.then(|| {
                let residual = sys.residual(&v);
                (mask, EquilibriumState::new(v, thresholds, residual))
            })
        })
        .collect();
    found.sort_by_key(|(mask, _)| (mask.count_ones(), *mask));
    Ok(found.into_iter().map(|(_, s)| s).collect())
}
