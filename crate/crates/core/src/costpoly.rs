//! The equilibrium cost as a multilinear polynomial over market-value bits.
//!
//! Each market value is written with `2q + 1` bits of weights
//! `2^-q, ..., 2^q` times a currency scale `s`. Substituting that encoding
//! and a polynomial step approximant into
//!
//! ```text
//! G = sum_i ( v_i - sum_j M_ij (D p - beta (1 - Poly(x_j)))_j )^2
//! ```
//!
//! with `M = diag(self_ownership) (I - C)^-1` gives a pseudo-Boolean
//! polynomial of degree at most twice the approximant order.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{linear_market_values, FinancialNetwork, StartPoint};
use crate::scalar::Scalar;
use crate::stepapprox::{build_step_approximant, eval_step, StepApproximant};

/// Sorted, duplicate-free variable indices. The empty monomial is the
/// constant term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Monomial(Vec<usize>);

impl Monomial {
    pub fn constant() -> Self {
        Self(Vec::new())
    }

    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn var(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Product of Boolean monomials (`x^2 = x`).
    pub fn union(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self(out)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

/// Multilinear pseudo-Boolean polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BooleanPolynomial<T> {
    #[serde(with = "crate::serde_pairs")]
    terms: BTreeMap<Monomial, T>,
    num_bits: usize,
}

impl<T: Scalar> BooleanPolynomial<T> {
    pub fn zero(num_bits: usize) -> Self {
        Self {
            terms: BTreeMap::new(),
            num_bits,
        }
    }

    pub fn constant(c: T, num_bits: usize) -> Self {
        let mut p = Self::zero(num_bits);
        p.add_term(Monomial::constant(), c);
        p
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    /// Adds `c` to the coefficient of `m`; exact zeros are not stored.
    pub fn add_term(&mut self, m: Monomial, c: T) {
        if let Some(i) = m.max_index() {
            assert!(i < self.num_bits, "bit index {i} out of range {}", self.num_bits);
        }
        let value = self.coefficient(&m) + c;
        if value == T::zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, value);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, T)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> T {
        self.terms.get(m).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> T {
        self.terms.values().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * k)).collect(),
            num_bits: self.num_bits,
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, &c) in &other.terms {
            *self.terms.entry(m.clone()).or_insert_with(T::zero) += c;
        }
        self.terms.retain(|_, c| *c != T::zero());
    }

    /// Product with multilinear reduction.
    pub fn mul(&self, other: &Self) -> Self {
        let mut acc: HashMap<Monomial, T> = HashMap::with_capacity(self.len() * other.len());
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                *acc.entry(a.union(b)).or_insert_with(T::zero) += ca * cb;
            }
        }
        Self {
            terms: acc.into_iter().filter(|(_, c)| *c != T::zero()).collect(),
            num_bits: self.num_bits.max(other.num_bits),
        }
    }

    /// Drops terms with `|c| < rel * max|c|`; returns how many were dropped.
    pub fn prune(&mut self, rel: T) -> usize {
        let cut = rel * self.max_abs_coefficient();
        let before = self.terms.len();
        self.terms.retain(|_, c| c.abs() >= cut);
        before - self.terms.len()
    }

    /// Text dump: one `i j k : coefficient` line per monomial in
    /// lexicographic order, the constant as ` : coefficient`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (m, c) in &self.terms {
            let idx: Vec<String> = m.0.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{} : {}", idx.join(" "), c);
        }
        out
    }

    pub fn parse_dump(text: &str, num_bits: usize) -> Result<Self> {
        let mut p = Self::zero(num_bits);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            let (lhs, rhs) = line
                .split_once(':')
                .ok_or_else(|| parse_err("missing `:`".into()))?;
            let idx = lhs
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| parse_err(format!("index `{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(&i) = idx.iter().find(|&&i| i >= num_bits) {
                return Err(parse_err(format!("index {i} >= {num_bits}")));
            }
            let c: T = rhs
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("coefficient `{}`", rhs.trim())))?;
            p.add_term(Monomial::new(idx), c);
        }
        Ok(p)
    }
}

/// Value of `poly` on a 0/1 assignment.
pub fn eval_polynomial<T: Scalar>(poly: &BooleanPolynomial<T>, bits: &[u8]) -> Result<T> {
    if bits.len() != poly.num_bits {
        return Err(Error::LengthMismatch {
            expected: poly.num_bits,
            got: bits.len(),
        });
    }
    Ok(poly
        .terms
        .iter()
        .filter(|(m, _)| m.0.iter().all(|&i| bits[i] != 0))
        .map(|(_, &c)| c)
        .sum())
}

/// Fixed-point binary encoding of a market value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BitEncoding<T> {
    q: usize,
    weights: Vec<T>,
    scale: T,
    v_max: T,
}

impl<T: Scalar> BitEncoding<T> {
    pub fn new(q: usize, scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::param("scale", "must be positive and finite"));
        }
        if q > 24 {
            return Err(Error::param("q", "at most 24 (49 bits per value)"));
        }
        let two = T::lit(2.0);
        let weights: Vec<T> = (0..=2 * q).map(|k| two.powi(k as i32 - q as i32)).collect();
        let v_max = two.powi(q as i32 + 1) - two.powi(-(q as i32));
        Ok(Self {
            q,
            weights,
            scale,
            v_max,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn bits_per_value(&self) -> usize {
        2 * self.q + 1
    }

    /// `2^-q, ..., 2^q`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Largest encodable value in encoded units.
    pub fn v_max(&self) -> T {
        self.v_max
    }

    /// Largest encodable market value.
    pub fn v_max_currency(&self) -> T {
        self.v_max * self.scale
    }

    /// Half a grid step in currency units.
    pub fn resolution(&self) -> T {
        self.scale * T::lit(2.0).powi(-(self.q as i32) - 1)
    }
}

/// Bits of the grid point nearest `v`; ties go to the smaller value.
pub fn encode_value<T: Scalar>(v: T, enc: &BitEncoding<T>) -> Result<Vec<u8>> {
    let t = v / enc.scale;
    let slack = T::lit(4.0) * T::epsilon() * enc.v_max;
    if !(v >= T::zero()) || t > enc.v_max + slack {
        return Err(Error::OutOfRange {
            value: v.as_f64(),
            max: enc.v_max_currency().as_f64(),
        });
    }
    let steps = t * T::lit(2.0).powi(enc.q as i32);
    let top = T::lit(2.0).powi(enc.bits_per_value() as i32) - T::one();
    let k = (steps - T::lit(0.5)).ceil().max(T::zero()).min(top);
    let k = k.to_u64().expect("grid index fits u64");
    Ok((0..enc.bits_per_value()).map(|a| (k >> a & 1) as u8).collect())
}

pub fn decode_bits<T: Scalar>(bits: &[u8], enc: &BitEncoding<T>) -> Result<T> {
    if bits.len() != enc.bits_per_value() {
        return Err(Error::LengthMismatch {
            expected: enc.bits_per_value(),
            got: bits.len(),
        });
    }
    let sum: T = bits
        .iter()
        .zip(&enc.weights)
        .filter(|(&b, _)| b != 0)
        .map(|(_, &w)| w)
        .sum();
    Ok(enc.scale * sum)
}

/// Decodes the first `n (2q + 1)` bits into `n` market values.
pub fn decode_values<T: Scalar>(bits: &[u8], n: usize, enc: &BitEncoding<T>) -> Result<Vec<T>> {
    let w = enc.bits_per_value();
    if bits.len() < n * w {
        return Err(Error::LengthMismatch {
            expected: n * w,
            got: bits.len(),
        });
    }
    bits[..n * w].chunks(w).map(|c| decode_bits(c, enc)).collect()
}

/// Market value of institution `i` as a linear polynomial in its bits.
fn value_polynomial<T: Scalar>(i: usize, enc: &BitEncoding<T>, num_bits: usize) -> BooleanPolynomial<T> {
    let w = enc.bits_per_value();
    let mut p = BooleanPolynomial::zero(num_bits);
    for (a, &weight) in enc.weights.iter().enumerate() {
        p.add_term(Monomial::var(i * w + a), enc.scale * weight);
    }
    p
}

/// `Poly((v_i(bits) - v_crit) / v_max)` expanded by Horner's rule.
fn step_polynomial<T: Scalar>(
    i: usize,
    approx: &StepApproximant<T>,
    enc: &BitEncoding<T>,
    num_bits: usize,
) -> BooleanPolynomial<T> {
    let mut x = value_polynomial(i, enc, num_bits).scaled(T::one() / approx.v_max());
    x.add_term(Monomial::constant(), -approx.v_crit() / approx.v_max());
    let coeffs = approx.power_coeffs();
    let mut acc = BooleanPolynomial::constant(coeffs[approx.degree()], num_bits);
    for &a in coeffs[..approx.degree()].iter().rev() {
        acc = acc.mul(&x);
        acc.add_term(Monomial::constant(), a);
    }
    acc
}

/// Expands the equilibrium cost into a Boolean polynomial over the
/// `n (2q + 1)` market-value bits. `approximants[i]` is institution `i`'s
/// step approximant. No pruning is applied here.
pub fn build_cost_polynomial<T: Scalar>(
    net: &FinancialNetwork<T>,
    enc: &BitEncoding<T>,
    approximants: &[StepApproximant<T>],
) -> Result<BooleanPolynomial<T>> {
    let n = net.n();
    if approximants.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: approximants.len(),
        });
    }
    let num_bits = n * enc.bits_per_value();
    let sys = net.system()?;
    let influence = sys.influence_matrix();
    let base = sys.market_values(&vec![T::zero(); n]);
    let beta = net.failure_losses();
    let step_polys: Vec<BooleanPolynomial<T>> = approximants
        .par_iter()
        .enumerate()
        .map(|(j, a)| step_polynomial(j, a, enc, num_bits))
        .collect();
    let max_order = approximants.iter().map(StepApproximant::order).max().unwrap_or(0);
    let bound = 2 * max_order;

    let squares: Vec<BooleanPolynomial<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // r_i = v_i - base_i + sum_j M_ij beta_j (1 - Poly_j)
            let mut r = value_polynomial(i, enc, num_bits);
            let shift: T = (0..n).map(|j| influence[(i, j)] * beta[j]).sum();
            r.add_term(Monomial::constant(), shift - base[i]);
            for (j, poly) in step_polys.iter().enumerate() {
                let k = influence[(i, j)] * beta[j];
                if k != T::zero() {
                    r.add_assign(&poly.scaled(-k));
                }
            }
            r.mul(&r)
        })
        .collect();

    let mut g = BooleanPolynomial::zero(num_bits);
    for sq in &squares {
        g.add_assign(sq);
    }
    let degree = g.degree();
    if degree > bound {
        return Err(Error::DegreeOverflow { degree, bound });
    }
    Ok(g)
}

/// Equilibrium cost with the polynomial step, evaluated directly on market
/// values through a linear solve (no bit expansion).
pub fn polynomial_cost<T: Scalar>(
    net: &FinancialNetwork<T>,
    approximants: &[StepApproximant<T>],
    v: &[T],
) -> Result<T> {
    let sys = net.system()?;
    let losses: Vec<T> = v
        .iter()
        .zip(approximants)
        .zip(net.failure_losses())
        .map(|((&vi, a), &b)| b * (T::one() - eval_step(a, vi).value))
        .collect();
    let image = sys.market_values(&losses);
    Ok(v.iter().zip(&image).map(|(&a, &b)| (a - b) * (a - b)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostOptions {
    pub q: usize,
    /// Legendre truncation order of the step approximant.
    pub order: usize,
    /// Largest linear market value maps to `v_max / headroom`.
    pub headroom: f64,
    /// Relative pruning threshold for tiny coefficients.
    pub prune_rel: f64,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            q: 1,
            order: 3,
            headroom: 1.25,
            prune_rel: 1e-12,
        }
    }
}

/// Everything needed to build, audit and decode a cost polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CostModel<T> {
    pub options: CostOptions,
    pub encoding: BitEncoding<T>,
    pub approximants: Vec<StepApproximant<T>>,
    pub polynomial: BooleanPolynomial<T>,
    pub pruned_terms: usize,
    /// Institutions whose classical equilibrium value lies outside
    /// `[0, v_max]` and so cannot be encoded exactly.
    pub unrepresentable: Vec<usize>,
}

impl<T: Scalar> CostModel<T> {
    pub fn build(net: &FinancialNetwork<T>, options: CostOptions) -> Result<Self> {
        if options.order == 0 {
            return Err(Error::param("r", "step order must be at least 1"));
        }
        if !(options.headroom >= 1.0) {
            return Err(Error::param("headroom", "must be >= 1"));
        }
        if !(options.prune_rel >= 0.0 && options.prune_rel < 1.0) {
            return Err(Error::param("prune_rel", "must lie in [0, 1)"));
        }
        let encoding = encoding_for(net, options.q, options.headroom)?;
        let approximants = net
            .thresholds()
            .iter()
            .map(|&c| build_step_approximant(options.order, c, encoding.v_max_currency()))
            .collect::<Result<Vec<_>>>()?;
        let mut polynomial = build_cost_polynomial(net, &encoding, &approximants)?;
        let pruned_terms = polynomial.prune(T::lit(options.prune_rel));

        let tol = crate::netmodel::default_tolerance(net);
        let classical = crate::netmodel::fixed_point_equilibrium(net, StartPoint::FromAbove, 2 * net.n() + 4, tol)?;
        let unrepresentable = classical
            .v
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < T::zero() || v > encoding.v_max_currency())
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            options,
            encoding,
            approximants,
            polynomial,
            pruned_terms,
            unrepresentable,
        })
    }

    pub fn num_bits(&self) -> usize {
        self.polynomial.num_bits()
    }
}

/// Encoding whose range is `headroom` times the largest linear market value.
pub fn encoding_for<T: Scalar>(net: &FinancialNetwork<T>, q: usize, headroom: f64) -> Result<BitEncoding<T>> {
    let top = linear_market_values(net)?
        .into_iter()
        .fold(T::zero(), T::max);
    let unit = BitEncoding::<T>::new(q, T::one())?;
    let scale = if top > T::zero() {
        T::lit(headroom) * top / unit.v_max()
    } else {
        T::one()
    };
    BitEncoding::new(q, scale)
}
