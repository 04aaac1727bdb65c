//! Truncated Fourier-Legendre approximation of the Heaviside step.
//!
//! On `[-1, 1]` the step expands as `1/2 + sum_l c_l P_l(x)` with
//! `c_l = (P_{l-1}(0) - P_{l+1}(0)) / 2`, which vanishes for every even
//! `l >= 2`. An approximant of order `L` keeps `l = 0..=L` and is rescaled
//! to market values through `x = (v - v_crit) / v_max`.
//!
//! The monomial form of a high-order approximant is badly conditioned
//! (coefficient magnitudes near `1e24` at `L = 70`), so the power-basis
//! coefficients are also kept exactly as dyadic rationals and power-basis
//! evaluation runs in exact integer arithmetic before a final rounding.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `P_l(x)` by the Bonnet recurrence `(k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}`.
pub fn legendre_poly<T: Scalar>(l: usize, x: T) -> T {
    let mut prev = T::one();
    if l == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..l {
        let kf = T::from_usize_lossy(k);
        let next = ((kf + kf + T::one()) * x * cur - kf * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact step with the healthy-at-threshold convention `H(0) = 1`.
pub fn heaviside<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Polynomial `sum_j numerators[j] x^j / 2^denominator_exp`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPolynomial {
    numerators: Vec<BigInt>,
    denominator_exp: u32,
}

impl DyadicPolynomial {
    pub fn degree(&self) -> usize {
        self.numerators
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    pub fn coefficient_f64(&self, j: usize) -> f64 {
        dyadic_to_f64(&self.numerators[j], self.denominator_exp as i64)
    }

    /// Evaluates exactly at the binary value of `x`, rounding once at the end.
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        let deg = self.degree();
        let e = self.denominator_exp as i64;
        if x == T::zero() {
            return T::lit(dyadic_to_f64(&self.numerators[0], e));
        }
        let (mantissa, exp, sign) = x.integer_decode();
        let mut m = BigInt::from(mantissa);
        if sign < 0 {
            m = -m;
        }
        // x = m / 2^f, with f >= 0
        let f: u64 = if exp >= 0 {
            m <<= exp as usize;
            0
        } else {
            (-(exp as i64)) as u64
        };
        let mut acc = self.numerators[deg].clone();
        for j in (0..deg).rev() {
            acc = acc * &m + (&self.numerators[j] << (f as usize * (deg - j)));
        }
        T::lit(dyadic_to_f64(&acc, e + (f as i64) * deg as i64))
    }
}

/// `num / 2^exp` rounded to `f64` without overflowing intermediates.
fn dyadic_to_f64(num: &BigInt, exp: i64) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let bits = num.bits() as i64;
    let shift = (bits - 64).max(0);
    let top = (num >> shift as usize).to_f64().expect("64-bit value fits f64");
    let mut scale = shift - exp;
    let mut out = top;
    // apply 2^scale in steps that stay inside f64's exponent range
    while scale > 1000 {
        out *= 2f64.powi(1000);
        scale -= 1000;
    }
    while scale < -1000 {
        out *= 2f64.powi(-1000);
        scale += 1000;
    }
    out * 2f64.powi(scale as i32)
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `P_l(0)` as `(numerator, exponent)` with value `numerator / 2^exponent`.
fn legendre_at_zero_exact(l: u64) -> (BigInt, u32) {
    if l % 2 == 1 {
        return (BigInt::zero(), 0);
    }
    let k = l / 2;
    let sign = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    (sign * binomial(2 * k, k), 2 * k as u32)
}

/// Exact step coefficients `c_0..=c_L` scaled to the common denominator
/// `2^(L + 2)`.
fn step_coefficients_exact(order: usize) -> (Vec<BigInt>, u32) {
    let denom = order as u32 + 2;
    let lift = |(num, e): (BigInt, u32)| num << (denom - e) as usize;
    let mut coeffs = vec![BigInt::one() << (denom - 1) as usize];
    for l in 1..=order as u64 {
        let a = lift(legendre_at_zero_exact(l - 1));
        let b = lift(legendre_at_zero_exact(l + 1));
        // (a - b) / 2: both are even multiples once lifted by at least 1
        let diff = a - b;
        debug_assert!(diff.is_even());
        coeffs.push(diff >> 1usize);
    }
    (coeffs, denom)
}

/// Monomial coefficients of `P_l` scaled by `2^l`:
/// `2^l P_l(x) = sum_k (-1)^k C(l,k) C(2l-2k, l) x^(l-2k)`.
fn legendre_monomials_scaled(l: u64) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); l as usize + 1];
    for k in 0..=l / 2 {
        let term = binomial(l, k) * binomial(2 * l - 2 * k, l);
        out[(l - 2 * k) as usize] = if k % 2 == 0 { term } else { -term };
    }
    out
}

fn power_basis_exact(order: usize) -> DyadicPolynomial {
    let (coeffs, c_exp) = step_coefficients_exact(order);
    let denominator_exp = c_exp + order as u32;
    let mut numerators = vec![BigInt::zero(); order + 1];
    for (l, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let lift = order - l;
        for (j, a) in legendre_monomials_scaled(l as u64).into_iter().enumerate() {
            if !a.is_zero() {
                numerators[j] += (c * a) << lift;
            }
        }
    }
    DyadicPolynomial {
        numerators,
        denominator_exp,
    }
}

/// Closed-form coefficients `c_l` for `l = 0..=order`, evaluated in `T`.
pub fn step_legendre_coefficients<T: Scalar>(order: usize) -> Vec<T> {
    let zero_vals: Vec<T> = (0..=order + 1).map(|l| legendre_poly(l, T::zero())).collect();
    let half = T::lit(0.5);
    std::iter::once(half)
        .chain((1..=order).map(|l| half * (zero_vals[l - 1] - zero_vals[l + 1])))
        .collect()
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for i in 0..7 {
        let dx = h * T::lit(XGK[i]);
        let pair = f(center - dx) + f(center + dx);
        kronrod += T::lit(WGK[i]) * pair;
        if i % 2 == 1 {
            gauss += T::lit(WG[i / 2]) * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn recurse<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T, tol: T, depth: usize) -> T {
        let (value, err) = gauss_kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return value;
        }
        let mid = T::lit(0.5) * (a + b);
        let half_tol = T::lit(0.5) * tol;
        recurse(f, a, mid, half_tol, depth - 1) + recurse(f, mid, b, half_tol, depth - 1)
    }
    recurse(&f, a, b, tol, 40)
}

/// Quadrature oracle `c_l = (2l + 1)/2 * int_0^1 P_l(x) dx`.
pub fn quadrature_coefficient<T: Scalar>(l: usize) -> T {
    let integral = integrate(|x: T| legendre_poly(l, x), T::zero(), T::one(), T::lit(1e-13));
    T::from_usize_lossy(2 * l + 1) * T::lit(0.5) * integral
}

/// Truncated Legendre step approximant, rescaled to market values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StepApproximant<T> {
    order: usize,
    legendre_coeffs: Vec<T>,
    power_coeffs: Vec<T>,
    v_crit: T,
    v_max: T,
    #[serde(skip)]
    exact: Option<DyadicPolynomial>,
}

impl<T: Scalar> StepApproximant<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Actual polynomial degree: `order` when odd, `order - 1` when even,
    /// since even coefficients above zero vanish.
    pub fn degree(&self) -> usize {
        if self.order % 2 == 1 {
            self.order
        } else {
            self.order.saturating_sub(1)
        }
    }

    pub fn legendre_coeffs(&self) -> &[T] {
        &self.legendre_coeffs
    }

    /// Monomial coefficients `a_0..=a_L` on the unit interval, rounded to `T`.
    pub fn power_coeffs(&self) -> &[T] {
        &self.power_coeffs
    }

    pub fn v_crit(&self) -> T {
        self.v_crit
    }

    pub fn v_max(&self) -> T {
        self.v_max
    }

    pub fn to_unit(&self, v: T) -> T {
        (v - self.v_crit) / self.v_max
    }

    fn exact(&self) -> DyadicPolynomial {
        self.exact
            .clone()
            .unwrap_or_else(|| power_basis_exact(self.order))
    }

    /// Power-basis value at `x` on the unit interval.
    pub fn eval_unit(&self, x: T) -> T {
        match &self.exact {
            Some(p) => p.eval(x),
            None => power_basis_exact(self.order).eval(x),
        }
    }

    /// Legendre-basis value at `x`, summed with the Bonnet recurrence.
    pub fn eval_unit_legendre(&self, x: T) -> T {
        let mut prev = T::one();
        let mut cur = x;
        let mut acc = self.legendre_coeffs[0];
        if self.order >= 1 {
            acc += self.legendre_coeffs[1] * x;
        }
        for k in 1..self.order {
            let kf = T::from_usize_lossy(k);
            let next = ((kf + kf + T::one()) * x * cur - kf * prev) / (kf + T::one());
            prev = cur;
            cur = next;
            acc += self.legendre_coeffs[k + 1] * cur;
        }
        acc
    }

    /// Naive Horner evaluation of the rounded monomial coefficients.
    /// Accurate only for small orders.
    pub fn eval_unit_rounded(&self, x: T) -> T {
        self.power_coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &a| acc * x + a)
    }

    /// Exact rational monomial coefficients.
    pub fn exact_power_coeffs(&self) -> DyadicPolynomial {
        self.exact()
    }
}

/// Result of [`eval_step`]: the approximant value and whether `v` was
/// outside `[0, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValue<T> {
    pub value: T,
    pub out_of_domain: bool,
}

pub fn build_step_approximant<T: Scalar>(order: usize, v_crit: T, v_max: T) -> Result<StepApproximant<T>> {
    if order == 0 {
        return Err(Error::param("order", "must be at least 1"));
    }
    if !(v_max > T::zero() && v_max.is_finite()) {
        return Err(Error::param("v_max", "must be positive and finite"));
    }
    if !v_crit.is_finite() {
        return Err(Error::param("v_crit", "must be finite"));
    }
    let legendre_coeffs = step_legendre_coefficients::<T>(order);
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(1e3));
    for (l, &c) in legendre_coeffs.iter().enumerate() {
        let q = quadrature_coefficient::<T>(l);
        if (c - q).abs() > tol {
            return Err(Error::CoefficientMismatch {
                l,
                closed_form: c.as_f64(),
                quadrature: q.as_f64(),
            });
        }
    }
    let exact = power_basis_exact(order);
    let power_coeffs = (0..=order).map(|j| T::lit(exact.coefficient_f64(j))).collect();
    Ok(StepApproximant {
        order,
        legendre_coeffs,
        power_coeffs,
        v_crit,
        v_max,
        exact: Some(exact),
    })
}

/// Approximant value at market value `v`, evaluated in the power basis.
pub fn eval_step<T: Scalar>(approx: &StepApproximant<T>, v: T) -> StepValue<T> {
    StepValue {
        value: approx.eval_unit(approx.to_unit(v)),
        out_of_domain: v < T::zero() || v > approx.v_max,
    }
}

/// `(x, exact step, approximant)` rows on an even grid over `[-1, 1]`.
pub fn approximation_grid<T: Scalar>(approx: &StepApproximant<T>, points: usize) -> Vec<(T, T, T)> {
    let denom = T::from_usize_lossy(points.saturating_sub(1).max(1));
    (0..points)
        .map(|i| {
            let x = T::lit(-1.0) + T::lit(2.0) * T::from_usize_lossy(i) / denom;
            (x, heaviside(x), approx.eval_unit_legendre(x))
        })
        .collect()
}

/// L2 distance from the exact step on `[-1, 1]`, by quadrature.
pub fn l2_error<T: Scalar>(approx: &StepApproximant<T>) -> T {
    let tol = T::lit(1e-12);
    let left = integrate(|x| approx.eval_unit_legendre(x).powi(2), -T::one(), T::zero(), tol);
    let right = integrate(
        |x| (T::one() - approx.eval_unit_legendre(x)).powi(2),
        T::zero(),
        T::one(),
        tol,
    );
    (left + right).sqrt()
}

/// Maximum deviation from the exact step on `points` evenly spaced samples
/// of `[-1, 1]` with `|x| >= exclusion`.
pub fn sup_error<T: Scalar>(approx: &StepApproximant<T>, points: usize, exclusion: T) -> T {
    approximation_grid(approx, points)
        .into_iter()
        .filter(|(x, _, _)| x.abs() >= exclusion)
        .fold(T::zero(), |m, (_, exact, a)| m.max((exact - a).abs()))
}
