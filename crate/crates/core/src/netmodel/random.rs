use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{linear_market_values, FinancialNetwork};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomNetworkParams {
    pub n: usize,
    pub m: usize,
    pub min_self_ownership: f64,
    pub price_range: (f64, f64),
    /// Failure loss as a fraction of unperturbed direct asset value.
    pub beta_frac: f64,
    /// Failure threshold as a fraction of the unperturbed market value.
    pub theta: f64,
    pub seed: u64,
}

impl Default for RandomNetworkParams {
    fn default() -> Self {
        Self {
            n: 10,
            m: 20,
            min_self_ownership: 0.5,
            price_range: (0.0, 100.0),
            beta_frac: 0.8,
            theta: 0.5,
            seed: 0,
        }
    }
}

impl RandomNetworkParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "need at least one institution"));
        }
        if !(self.min_self_ownership > 0.0 && self.min_self_ownership <= 1.0) {
            return Err(Error::param("min_self_ownership", "must lie in (0, 1]"));
        }
        let (lo, hi) = self.price_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(Error::param("price_range", format!("invalid range [{lo}, {hi}]")));
        }
        if !(self.beta_frac.is_finite() && self.beta_frac >= 0.0) {
            return Err(Error::param("beta_frac", "must be finite and >= 0"));
        }
        if !self.theta.is_finite() {
            return Err(Error::param("theta", "must be finite"));
        }
        Ok(())
    }
}

/// Uniform weights renormalized to a uniform random total in `[0, cap]`.
fn renormalized_column(rng: &mut ChaCha8Rng, len: usize, cap: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
    let total = if cap > 0.0 { rng.gen_range(0.0..=cap) } else { 0.0 };
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || total == 0.0 {
        return vec![0.0; len];
    }
    let mut col: Vec<f64> = weights.iter().map(|w| total * w / sum).collect();
    let s: f64 = col.iter().sum();
    if s > cap {
        col.iter_mut().for_each(|x| *x *= cap / s);
    }
    col
}

/// Seeded random network. Draw order is fixed (C columns, D columns,
/// prices) so a seed always reproduces the same network.
pub fn random_network<T: Scalar>(params: &RandomNetworkParams) -> Result<FinancialNetwork<T>> {
    params.validate()?;
    let RandomNetworkParams { n, m, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut c = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let col = renormalized_column(&mut rng, n - 1, 1.0 - params.min_self_ownership);
        let others = (0..n).filter(|&i| i != j);
        for (i, x) in others.zip(col) {
            c[(i, j)] = T::lit(x);
        }
    }
    let mut d = Matrix::<T>::zeros(n, m);
    for k in 0..m {
        let col = renormalized_column(&mut rng, n, 1.0);
        for (i, x) in col.into_iter().enumerate() {
            d[(i, k)] = T::lit(x);
        }
    }
    let (lo, hi) = params.price_range;
    let prices: Vec<T> = (0..m)
        .map(|_| T::lit(if hi > lo { rng.gen_range(lo..=hi) } else { lo }))
        .collect();

    let provisional = FinancialNetwork::new(d, c, prices, vec![T::zero(); n], vec![T::zero(); n])?;
    let v0 = linear_market_values(&provisional)?;
    let theta = T::lit(params.theta);
    let beta_frac = T::lit(params.beta_frac);
    let thresholds = v0.iter().map(|&v| theta * v).collect();
    let losses = provisional
        .direct_values()
        .iter()
        .map(|&dp| beta_frac * dp)
        .collect();
    provisional.with_failure_parameters(thresholds, losses)
}

/// A price shock: each price drops by an independent uniform draw from
/// `[0, amplitude]`, clamped so prices stay nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    pub seed: u64,
}

/// `m` draws from `U[0, 1)`; scaling by the amplitude gives the shock.
pub fn unit_noise(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.gen::<f64>()).collect()
}

pub fn perturb_with_noise<T: Scalar>(
    net: &FinancialNetwork<T>,
    amplitude: f64,
    unit: &[f64],
) -> Result<FinancialNetwork<T>> {
    if unit.len() != net.m() {
        return Err(Error::LengthMismatch {
            expected: net.m(),
            got: unit.len(),
        });
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::param("amplitude", "must be finite and >= 0"));
    }
    let prices = net
        .prices()
        .iter()
        .zip(unit)
        .map(|(&p, &u)| (p - T::lit(amplitude * u)).max(T::zero()))
        .collect();
    net.with_prices(prices)
}

pub fn apply_perturbation<T: Scalar>(
    net: &FinancialNetwork<T>,
    spec: &PerturbationSpec,
) -> Result<FinancialNetwork<T>> {
    perturb_with_noise(net, spec.amplitude, &unit_noise(net.m(), spec.seed))
}
