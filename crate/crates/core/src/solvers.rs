//! Ground-state search for compiled Ising programs and decoding of the
//! result back into market values.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costpoly::{decode_values, polynomial_cost, BitEncoding};
use crate::error::{Error, Result};
use crate::isingcompile::IsingProgram;
use crate::netmodel::{equilibrium_residual, FinancialNetwork};
use crate::scalar::Scalar;
use crate::stepapprox::{eval_step, heaviside, StepApproximant};

pub const MAX_EXHAUSTIVE_SPINS: usize = 28;
/// Degenerate minimizers kept by exhaustive search.
pub const MAX_REPORTED_MINIMIZERS: usize = 1024;

const INNER_BITS: usize = 16;

/// Geometric temperature ladder for simulated annealing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_initial: f64,
    pub t_final: f64,
    pub steps: usize,
    pub sweeps_per_step: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl AnnealSchedule {
    /// Starts at twice the largest single-spin energy scale and cools by a
    /// factor of 1000 over 100 steps of 50 sweeps, 20 restarts.
    pub fn default_for<T: Scalar>(program: &IsingProgram<T>, seed: u64) -> Self {
        let mut scale = program.field_vector().iter().map(|h| h.abs().as_f64()).collect::<Vec<_>>();
        for (&(i, j), &w) in &program.couplings {
            scale[i] += w.abs().as_f64();
            scale[j] += w.abs().as_f64();
        }
        let top = scale.into_iter().fold(0.0, f64::max);
        let t_initial = if top > 0.0 { 2.0 * top } else { 1.0 };
        Self {
            t_initial,
            t_final: 1e-3 * t_initial,
            steps: 100,
            sweeps_per_step: 50,
            restarts: 20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("t_final", "must be positive and finite"));
        }
        if !(self.t_initial > self.t_final && self.t_initial.is_finite()) {
            return Err(Error::param("t_initial", "must be finite and above t_final"));
        }
        if self.steps < 2 {
            return Err(Error::param("steps", "at least 2 temperatures"));
        }
        if self.sweeps_per_step == 0 {
            return Err(Error::param("sweeps_per_step", "at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "at least 1"));
        }
        Ok(())
    }

    pub fn temperatures(&self) -> Vec<f64> {
        let ratio = (self.t_final / self.t_initial).powf(1.0 / (self.steps - 1) as f64);
        (0..self.steps).map(|k| self.t_initial * ratio.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Exhaustive,
    Anneal,
}

/// Bits are serialized as `"0110..."` strings.
mod bitstrings {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_string(bits: &[u8]) -> String {
        bits.iter().map(|&b| if b != 0 { '1' } else { '0' }).collect()
    }

    pub fn from_str(s: &str) -> Result<Vec<u8>, String> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(format!("bad bit {other:?}")),
            })
            .collect()
    }

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        from_str(&s).map_err(serde::de::Error::custom)
    }

    pub mod many {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(all: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(all.iter().map(|b| super::to_string(b)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| super::from_str(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

pub use bitstrings::to_string as bitstring;

/// Market values read off the logical bits of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecodedSolution<T> {
    pub values: Vec<T>,
    /// `v_i < v_crit_i`.
    pub failed: Vec<bool>,
    pub failure_count: usize,
    /// Equilibrium cost with the exact step; zero at a true equilibrium.
    pub exact_residual: T,
    /// Equilibrium cost with the polynomial step.
    pub polynomial_residual: T,
    /// `|Poly_i(v_i) - H(v_i - v_crit_i)|` per institution.
    pub step_errors: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveResult<T> {
    pub method: SolveMethod,
    #[serde(with = "bitstrings")]
    pub bits: Vec<u8>,
    /// Program energy of `bits`, re-evaluated from scratch.
    pub energy: T,
    /// Every configuration within tolerance of the minimum (exhaustive
    /// search only), lexicographically sorted.
    #[serde(with = "bitstrings::many")]
    pub minimizers: Vec<Vec<u8>>,
    pub minimizers_truncated: bool,
    /// Best energy reached by each annealing restart.
    pub restart_energies: Vec<T>,
    pub decoded: Option<DecodedSolution<T>>,
}

impl<T: Scalar> SolveResult<T> {
    /// Distinct restart energies (to `digits` significant digits) with counts.
    pub fn energy_histogram(&self, digits: usize) -> Vec<(String, usize)> {
        let mut h: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for e in &self.restart_energies {
            let key = format!("{:.*e}", digits.saturating_sub(1), e.as_f64());
            h.entry(key.clone()).or_insert((e.as_f64(), 0)).1 += 1;
        }
        let mut v: Vec<(String, f64, usize)> = h.into_iter().map(|(k, (e, c))| (k, e, c)).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v.into_iter().map(|(k, _, c)| (k, c)).collect()
    }
}

fn energy_scale<T: Scalar>(program: &IsingProgram<T>) -> T {
    program.offset.abs()
        + program.fields.values().map(|h| h.abs()).sum::<T>()
        + program.couplings.values().map(|w| w.abs()).sum::<T>()
}

fn tie_tolerance<T: Scalar>(program: &IsingProgram<T>) -> T {
    let rel = T::lit(1e-9).max(T::lit(1e4) * T::epsilon());
    rel * energy_scale(program).max(T::one())
}

fn bits_of(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| (mask >> i & 1) as u8).collect()
}

/// Sort key matching lexicographic order of the bitstring (spin 0 first).
fn lex_key(mask: u64) -> u64 {
    mask.reverse_bits()
}

fn local_fields<T: Scalar>(h: &[T], adj: &[Vec<(usize, T)>], spins: &[T]) -> Vec<T> {
    h.iter()
        .zip(adj)
        .map(|(&hi, nb)| hi + nb.iter().map(|&(j, w)| w * spins[j]).sum::<T>())
        .collect()
}

struct BlockScan<T> {
    best: T,
    candidates: BTreeMap<u64, (u64, T)>,
    truncated: bool,
}

impl<T: Scalar> BlockScan<T> {
    fn offer(&mut self, e: T, mask: u64, tol: T) {
        if e < self.best {
            self.best = e;
            let limit = e + tol;
            self.candidates.retain(|_, (_, ce)| *ce <= limit);
        }
        if e <= self.best + tol {
            self.candidates.insert(lex_key(mask), (mask, e));
            if self.candidates.len() > MAX_REPORTED_MINIMIZERS {
                self.candidates.pop_last();
                self.truncated = true;
            }
        }
    }
}

/// Gray-code walk over the low bits with the high bits fixed to `high`.
fn scan_block<T: Scalar>(
    program: &IsingProgram<T>,
    h: &[T],
    adj: &[Vec<(usize, T)>],
    low: usize,
    high: u64,
    tol: T,
) -> BlockScan<T> {
    let n = program.num_spins();
    let mut mask = high << low;
    let bits = bits_of(mask, n);
    let mut spins: Vec<T> = bits.iter().map(|&b| crate::isingcompile::spin_of(b)).collect();
    let mut local = local_fields(h, adj, &spins);
    let mut e = program.energy(&bits);
    let mut scan = BlockScan {
        best: e,
        candidates: BTreeMap::new(),
        truncated: false,
    };
    scan.offer(e, mask, tol);
    let two = T::lit(2.0);
    for t in 1u64..1 << low {
        let i = t.trailing_zeros() as usize;
        let s = spins[i];
        e -= two * s * local[i];
        spins[i] = -s;
        let ds = -two * s;
        for &(j, w) in &adj[i] {
            local[j] += w * ds;
        }
        mask ^= 1 << i;
        scan.offer(e, mask, tol);
    }
    scan
}

/// Enumerates all `2^N` configurations. Returns the lexicographically
/// smallest global minimizer and every other minimizer found.
pub fn solve_exhaustive<T: Scalar>(program: &IsingProgram<T>) -> Result<SolveResult<T>> {
    let n = program.num_spins();
    if n > MAX_EXHAUSTIVE_SPINS {
        return Err(Error::InstanceTooLarge {
            what: "exhaustive search",
            size: n,
            limit: MAX_EXHAUSTIVE_SPINS,
        });
    }
    let h = program.field_vector();
    let adj = program.adjacency();
    let tol = tie_tolerance(program);
    let low = n.min(INNER_BITS);
    let blocks: Vec<BlockScan<T>> = (0..1u64 << (n - low))
        .into_par_iter()
        .map(|high| scan_block(program, &h, &adj, low, high, tol))
        .collect();

    let mut truncated = blocks.iter().any(|b| b.truncated);
    let approx_best = blocks.iter().map(|b| b.best).fold(T::infinity(), T::min);
    let mut exact: Vec<(Vec<u8>, T)> = blocks
        .iter()
        .flat_map(|b| b.candidates.values())
        .filter(|(_, e)| *e <= approx_best + tol)
        .map(|&(mask, _)| {
            let bits = bits_of(mask, n);
            let e = program.energy(&bits);
            (bits, e)
        })
        .collect();
    let best = exact.iter().map(|(_, e)| *e).fold(T::infinity(), T::min);
    exact.retain(|(_, e)| *e <= best + tol);
    exact.sort_by(|a, b| a.0.cmp(&b.0));
    if exact.len() > MAX_REPORTED_MINIMIZERS {
        exact.truncate(MAX_REPORTED_MINIMIZERS);
        truncated = true;
    }
    let bits = exact[0].0.clone();
    let energy = program.energy(&bits);
    Ok(SolveResult {
        method: SolveMethod::Exhaustive,
        bits,
        energy,
        minimizers: exact.into_iter().map(|(b, _)| b).collect(),
        minimizers_truncated: truncated,
        restart_energies: Vec::new(),
        decoded: None,
    })
}

fn anneal_once<T: Scalar>(
    program: &IsingProgram<T>,
    h: &[T],
    adj: &[Vec<(usize, T)>],
    temps: &[f64],
    sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, T) {
    let n = program.num_spins();
    let mut bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1u8)).collect();
    let mut spins: Vec<T> = bits.iter().map(|&b| crate::isingcompile::spin_of(b)).collect();
    let mut local = local_fields(h, adj, &spins);
    let mut e = program.energy(&bits);
    let mut best = (bits.clone(), e);
    let two = T::lit(2.0);

    let flip = |i: usize, bits: &mut Vec<u8>, spins: &mut Vec<T>, local: &mut Vec<T>| {
        let s = spins[i];
        spins[i] = -s;
        bits[i] ^= 1;
        for &(j, w) in &adj[i] {
            local[j] -= two * s * w;
        }
    };

    for &t in temps {
        for _ in 0..sweeps {
            for i in 0..n {
                let delta = -two * spins[i] * local[i];
                let d = delta.as_f64();
                if d <= 0.0 || rng.gen::<f64>() < (-d / t).exp() {
                    flip(i, &mut bits, &mut spins, &mut local);
                    e += delta;
                    if e < best.1 {
                        best = (bits.clone(), e);
                    }
                }
            }
        }
    }
    // zero-temperature quench from the best state seen
    bits = best.0.clone();
    spins = bits.iter().map(|&b| crate::isingcompile::spin_of(b)).collect();
    local = local_fields(h, adj, &spins);
    loop {
        let mut improved = false;
        for i in 0..n {
            let delta = -two * spins[i] * local[i];
            if delta < T::zero() {
                flip(i, &mut bits, &mut spins, &mut local);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    let quenched = program.energy(&bits);
    let start = program.energy(&best.0);
    if quenched <= start {
        (bits, quenched)
    } else {
        (best.0, start)
    }
}

/// Metropolis single-spin-flip annealing, best of independent restarts.
/// Restart `r` draws from stream `r` of a generator seeded with
/// `schedule.seed`, so results do not depend on thread scheduling and
/// adding restarts never worsens the answer.
pub fn solve_anneal<T: Scalar>(program: &IsingProgram<T>, schedule: &AnnealSchedule) -> Result<SolveResult<T>> {
    schedule.validate()?;
    let h = program.field_vector();
    let adj = program.adjacency();
    let temps = schedule.temperatures();
    let runs: Vec<(Vec<u8>, T)> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
            rng.set_stream(r as u64);
            anneal_once(program, &h, &adj, &temps, schedule.sweeps_per_step, &mut rng)
        })
        .collect();
    let restart_energies: Vec<T> = runs.iter().map(|(_, e)| *e).collect();
    let (bits, energy) = runs
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)))
        .expect("at least one restart");
    Ok(SolveResult {
        method: SolveMethod::Anneal,
        bits,
        energy,
        minimizers: Vec::new(),
        minimizers_truncated: false,
        restart_energies,
        decoded: None,
    })
}

/// Decodes the logical segment (the first `n (2q + 1)` bits) of a solution.
pub fn decode_solution<T: Scalar>(
    bits: &[u8],
    enc: &BitEncoding<T>,
    net: &FinancialNetwork<T>,
    approximants: &[StepApproximant<T>],
) -> Result<DecodedSolution<T>> {
    let n = net.n();
    if approximants.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: approximants.len(),
        });
    }
    let values = decode_values(bits, n, enc)?;
    let failed: Vec<bool> = values.iter().zip(net.thresholds()).map(|(&v, &c)| v < c).collect();
    let step_errors = values
        .iter()
        .zip(approximants)
        .map(|(&v, a)| (eval_step(a, v).value - heaviside(v - a.v_crit())).abs())
        .collect();
    Ok(DecodedSolution {
        failure_count: failed.iter().filter(|&&f| f).count(),
        exact_residual: equilibrium_residual(net, &values)?,
        polynomial_residual: polynomial_cost(net, approximants, &values)?,
        values,
        failed,
        step_errors,
    })
}
