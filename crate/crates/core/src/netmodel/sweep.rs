use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    enumerate_equilibria, fixed_point_equilibrium, perturb_with_noise, unit_noise, EquilibriumState,
    FinancialNetwork, StartPoint,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SWEEP_CSV_HEADER: &str = "amplitude,failure_count,policy,converged,seed";

/// Which equilibrium a sweep reports when several exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumPolicy {
    #[serde(rename = "above")]
    FromAbove,
    #[serde(rename = "below")]
    FromBelow,
    /// Maximum-failure member of the enumerated set.
    #[serde(rename = "worst")]
    WorstOverEnumeration,
}

impl fmt::Display for EquilibriumPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FromAbove => "above",
            Self::FromBelow => "below",
            Self::WorstOverEnumeration => "worst",
        })
    }
}

impl FromStr for EquilibriumPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "above" => Ok(Self::FromAbove),
            "below" => Ok(Self::FromBelow),
            "worst" => Ok(Self::WorstOverEnumeration),
            other => Err(Error::param("policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// How shocks are drawn across the amplitude grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// Independent noise per row, seeded with `seed ^ row`.
    Fresh,
    /// One unit noise vector drawn from `seed`, scaled by each amplitude.
    Shared,
}

/// Default convergence tolerance for the equilibrium cost, scaled to the
/// network's asset value.
pub(crate) fn default_tolerance<T: Scalar>(net: &FinancialNetwork<T>) -> T {
    let scale = net
        .direct_values()
        .iter()
        .fold(T::one(), |m, v| m.max(v.abs()));
    T::lit(1e-9) * scale
}

pub fn solve_with_policy<T: Scalar>(
    net: &FinancialNetwork<T>,
    policy: EquilibriumPolicy,
) -> Result<EquilibriumState<T>> {
    let tol = default_tolerance(net);
    let max_iter = 2 * net.n() + 4;
    match policy {
        EquilibriumPolicy::FromAbove => fixed_point_equilibrium(net, StartPoint::FromAbove, max_iter, tol),
        EquilibriumPolicy::FromBelow => fixed_point_equilibrium(net, StartPoint::FromBelow, max_iter, tol),
        EquilibriumPolicy::WorstOverEnumeration => enumerate_equilibria(net)?
            .into_iter()
            .last()
            .ok_or_else(|| Error::param("network", "no self-consistent equilibrium found")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    /// `None` when the equilibrium could not be computed for this row.
    pub failure_count: Option<usize>,
    pub policy: EquilibriumPolicy,
    pub converged: bool,
    pub seed: u64,
}

pub fn failure_sweep<T: Scalar>(
    net: &FinancialNetwork<T>,
    amplitudes: &[f64],
    policy: EquilibriumPolicy,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    failure_sweep_with(net, amplitudes, policy, seed, NoiseMode::Fresh)
}

/// Failure count per shock amplitude. Rows are independent and evaluated
/// in parallel; per-row errors are recorded in the row, not propagated.
pub fn failure_sweep_with<T: Scalar>(
    net: &FinancialNetwork<T>,
    amplitudes: &[f64],
    policy: EquilibriumPolicy,
    seed: u64,
    noise: NoiseMode,
) -> Result<Vec<SweepRow>> {
    if amplitudes.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("amplitudes", "must be sorted ascending"));
    }
    if let Some(a) = amplitudes.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::param("amplitudes", format!("{a} is not a finite nonnegative amplitude")));
    }
    let shared = unit_noise(net.m(), seed);
    let rows = amplitudes
        .par_iter()
        .enumerate()
        .map(|(row, &amplitude)| {
            let (noise_vec, row_seed) = match noise {
                NoiseMode::Fresh => {
                    let s = seed ^ row as u64;
                    (unit_noise(net.m(), s), s)
                }
                NoiseMode::Shared => (shared.clone(), seed),
            };
            let outcome = perturb_with_noise(net, amplitude, &noise_vec)
                .and_then(|shocked| solve_with_policy(&shocked, policy));
            let (failure_count, converged) = match outcome {
                Ok(state) => (Some(state.failure_count()), true),
                Err(Error::NonConvergence { best, .. }) => {
                    let thresholds = net.thresholds();
                    let count = best
                        .iter()
                        .zip(thresholds)
                        .filter(|(&v, c)| v < c.as_f64())
                        .count();
                    (Some(count), false)
                }
                Err(_) => (None, false),
            };
            SweepRow {
                amplitude,
                failure_count,
                policy,
                converged,
                seed: row_seed,
            }
        })
        .collect();
    Ok(rows)
}

/// Edges of the crash transition in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionWindow {
    /// Largest amplitude with zero failures.
    pub last_zero_failures: Option<f64>,
    /// Smallest amplitude at which every institution fails.
    pub first_all_failed: Option<f64>,
    /// `first_all_failed - last_zero_failures`.
    pub width: Option<f64>,
    pub sweep_range: f64,
}

pub fn transition_window(rows: &[SweepRow], n: usize) -> TransitionWindow {
    let last_zero_failures = rows
        .iter()
        .filter(|r| r.failure_count == Some(0))
        .map(|r| r.amplitude)
        .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))));
    let first_all_failed = rows
        .iter()
        .filter(|r| r.failure_count == Some(n))
        .map(|r| r.amplitude)
        .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.min(a))));
    let width = match (last_zero_failures, first_all_failed) {
        (Some(z), Some(f)) => Some(f - z),
        _ => None,
    };
    let sweep_range = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b.amplitude - a.amplitude,
        _ => 0.0,
    };
    TransitionWindow {
        last_zero_failures,
        first_all_failed,
        width,
        sweep_range,
    }
}

/// Writes the sweep CSV. `comment`, when given, is emitted first as
/// `#`-prefixed lines.
pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write, comment: Option<&str>) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let count = r.failure_count.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.amplitude, count, r.policy, r.converged, r.seed
        )?;
    }
    Ok(())
}
