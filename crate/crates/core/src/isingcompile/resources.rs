//! Qubit and interaction-term counts for a compiled instance.

use serde::{Deserialize, Serialize};

use crate::costpoly::BooleanPolynomial;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::boolean_to_spin;

/// Term-count bounds above this are reported in floating point.
pub const EXACT_COUNT_LIMIT: u128 = 1_000_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    /// `sum_{a=0}^{2r} C(n (2q + 1), a)`.
    pub n_terms_bound: f64,
    /// Set when the bound exceeded [`EXACT_COUNT_LIMIT`] and was summed in
    /// floating point.
    pub approximate: bool,
    /// `(e n q / r)^(2r)`.
    pub n_terms_asymptotic: f64,
    /// Stored Boolean monomials, when a polynomial was supplied.
    pub n_terms_actual: Option<usize>,
    /// Spin-basis monomials after conversion, when a polynomial was supplied.
    pub n_spin_terms: Option<usize>,
    pub n_logical: usize,
    pub n_ancilla: f64,
    /// True when `n_ancilla` counts gadgets of an actual polynomial rather
    /// than the worst case `sum_{a>=3} a C(n (2q + 1), a)`.
    pub n_ancilla_exact: bool,
    pub n_qubits_total: f64,
}

fn binomial_u128(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) / (i + 1) stays integral at every step
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{a=lo}^{hi} weight(a) C(n, a)` in floating point.
pub fn binomial_sum_f64(n: u64, lo: u64, hi: u64, weight: impl Fn(u64) -> f64) -> f64 {
    (lo..=hi.min(n)).map(|a| weight(a) * binomial_f64(n, a)).sum()
}

/// Exact weighted binomial sum, `None` on overflow.
fn binomial_sum_exact(n: u64, lo: u64, hi: u64, weight: impl Fn(u64) -> u128) -> Option<u128> {
    (lo..=hi.min(n)).try_fold(0u128, |acc, a| {
        let c = binomial_u128(n as u128, a as u128)?;
        acc.checked_add(c.checked_mul(weight(a))?)
    })
}

/// Counts for `n` institutions, `2q + 1` bits per value and step order
/// `r`. With a polynomial, actual term and ancilla counts are included.
pub fn estimate_resources<T: Scalar>(
    n: usize,
    q: usize,
    r: usize,
    poly: Option<&BooleanPolynomial<T>>,
) -> Result<ResourceEstimate> {
    if n == 0 {
        return Err(Error::param("n", "at least one institution"));
    }
    if r == 0 {
        return Err(Error::param("r", "step order must be at least 1"));
    }
    let n_logical = n * (2 * q + 1);
    let bits = n_logical as u64;
    let top = 2 * r as u64;

    let (n_terms_bound, approximate) = match binomial_sum_exact(bits, 0, top, |_| 1) {
        Some(v) if v <= EXACT_COUNT_LIMIT => (v as f64, false),
        _ => (binomial_sum_f64(bits, 0, top, |_| 1.0), true),
    };
    let n_terms_asymptotic = (std::f64::consts::E * (n * q) as f64 / r as f64).powi(2 * r as i32);

    let (n_terms_actual, n_spin_terms, n_ancilla, n_ancilla_exact) = match poly {
        Some(p) => {
            if p.num_bits() != n_logical {
                return Err(Error::LengthMismatch {
                    expected: n_logical,
                    got: p.num_bits(),
                });
            }
            let spin = boolean_to_spin(p);
            let anc: usize = spin.terms().map(|(m, _)| m.degree()).filter(|&k| k >= 3).sum();
            (Some(p.len()), Some(spin.len()), anc as f64, true)
        }
        None => {
            let bound = match binomial_sum_exact(bits, 3, top, |a| a as u128) {
                Some(v) if v <= EXACT_COUNT_LIMIT => v as f64,
                _ => binomial_sum_f64(bits, 3, top, |a| a as f64),
            };
            (None, None, bound, false)
        }
    };

    Ok(ResourceEstimate {
        n,
        q,
        r,
        n_terms_bound,
        approximate,
        n_terms_asymptotic,
        n_terms_actual,
        n_spin_terms,
        n_logical,
        n_ancilla,
        n_ancilla_exact,
        n_qubits_total: n_logical as f64 + n_ancilla,
    })
}
