//! Cross-holding financial network model.
//!
//! `n` institutions hold fractions `D` of `m` assets with prices `p`, and
//! fractions `C` of each other. Self-ownership of institution `j` is
//! `1 - sum_i C[i][j]`. Market values solve
//!
//! ```text
//! v = diag(self_ownership) (I - C)^-1 (D p - b(v))
//! ```
//!
//! where `b_i(v) = beta_i` when `v_i < v_crit_i` and `0` otherwise.

mod equilibrium;
mod random;
mod sweep;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Scalar;

pub use equilibrium::{
    enumerate_equilibria, fixed_point_equilibrium, EquilibriumState, StartPoint,
    MAX_ENUMERATED_INSTITUTIONS,
};
pub use random::{
    apply_perturbation, perturb_with_noise, random_network, unit_noise, PerturbationSpec,
    RandomNetworkParams,
};
pub(crate) use sweep::default_tolerance;
pub use sweep::{
    failure_sweep, failure_sweep_with, solve_with_policy, transition_window, write_sweep_csv,
    EquilibriumPolicy, NoiseMode, SweepRow, TransitionWindow, SWEEP_CSV_HEADER,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FinancialNetwork<T> {
    ownership: Matrix<T>,
    cross_holdings: Matrix<T>,
    prices: Vec<T>,
    thresholds: Vec<T>,
    failure_losses: Vec<T>,
}

impl<T: Scalar> FinancialNetwork<T> {
    /// Builds a network, checking every model invariant. The first
    /// violation found is reported with its indices.
    pub fn new(
        ownership: Matrix<T>,
        cross_holdings: Matrix<T>,
        prices: Vec<T>,
        thresholds: Vec<T>,
        failure_losses: Vec<T>,
    ) -> Result<Self> {
        let net = Self {
            ownership,
            cross_holdings,
            prices,
            thresholds,
            failure_losses,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        let n = self.cross_holdings.rows();
        let m = self.prices.len();
        if n == 0 {
            return bad("network has no institutions".into());
        }
        if self.cross_holdings.cols() != n {
            return bad(format!("C is {}x{}, expected {n}x{n}", n, self.cross_holdings.cols()));
        }
        if self.ownership.rows() != n || self.ownership.cols() != m {
            return bad(format!(
                "D is {}x{}, expected {n}x{m}",
                self.ownership.rows(),
                self.ownership.cols()
            ));
        }
        if self.thresholds.len() != n {
            return bad(format!("v_crit has {} entries, expected {n}", self.thresholds.len()));
        }
        if self.failure_losses.len() != n {
            return bad(format!("beta has {} entries, expected {n}", self.failure_losses.len()));
        }
        let unit = |x: T| x.is_finite() && x >= T::zero() && x <= T::one();
        for i in 0..n {
            for k in 0..m {
                let x = self.ownership[(i, k)];
                if !unit(x) {
                    return bad(format!("D[{i}][{k}] = {x} not in [0, 1]"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let x = self.cross_holdings[(i, j)];
                if !unit(x) {
                    return bad(format!("C[{i}][{j}] = {x} not in [0, 1]"));
                }
                if i == j && x != T::zero() {
                    return bad(format!("C[{i}][{i}] = {x}, diagonal must be 0"));
                }
            }
        }
        for j in 0..n {
            let s = self.cross_holdings.column_sum(j);
            if s >= T::one() {
                return bad(format!("column {j} of C sums to {s}, must be < 1"));
            }
        }
        let slack = T::one() + T::epsilon() * T::from_usize_lossy(4 * n.max(1));
        for k in 0..m {
            let s = self.ownership.column_sum(k);
            if s > slack {
                return bad(format!("column {k} of D sums to {s}, must be <= 1"));
            }
        }
        for (k, &x) in self.prices.iter().enumerate() {
            if !x.is_finite() || x < T::zero() {
                return bad(format!("p[{k}] = {x} must be finite and >= 0"));
            }
        }
        for (i, &x) in self.thresholds.iter().enumerate() {
            if !x.is_finite() {
                return bad(format!("v_crit[{i}] = {x} must be finite"));
            }
        }
        for (i, &x) in self.failure_losses.iter().enumerate() {
            if !x.is_finite() || x < T::zero() {
                return bad(format!("beta[{i}] = {x} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.cross_holdings.rows()
    }

    pub fn m(&self) -> usize {
        self.prices.len()
    }

    pub fn ownership(&self) -> &Matrix<T> {
        &self.ownership
    }

    pub fn cross_holdings(&self) -> &Matrix<T> {
        &self.cross_holdings
    }

    pub fn prices(&self) -> &[T] {
        &self.prices
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn failure_losses(&self) -> &[T] {
        &self.failure_losses
    }

    /// Diagonal of the self-ownership matrix.
    pub fn self_ownership(&self) -> Vec<T> {
        (0..self.n())
            .map(|j| T::one() - self.cross_holdings.column_sum(j))
            .collect()
    }

    /// Asset value held directly by each institution, `D p`.
    pub fn direct_values(&self) -> Vec<T> {
        self.ownership.mul_vec(&self.prices)
    }

    /// Same network with new asset prices.
    pub fn with_prices(&self, prices: Vec<T>) -> Result<Self> {
        Self::new(
            self.ownership.clone(),
            self.cross_holdings.clone(),
            prices,
            self.thresholds.clone(),
            self.failure_losses.clone(),
        )
    }

    pub fn with_failure_parameters(&self, thresholds: Vec<T>, failure_losses: Vec<T>) -> Result<Self> {
        Self::new(
            self.ownership.clone(),
            self.cross_holdings.clone(),
            self.prices.clone(),
            thresholds,
            failure_losses,
        )
    }

    /// Factors `I - C` once so that repeated equilibrium evaluations are
    /// back-substitutions only.
    pub fn system(&self) -> Result<EquilibriumSystem<T>> {
        let n = self.n();
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= self.cross_holdings[(i, j)];
            }
        }
        Ok(EquilibriumSystem {
            lu: Lu::factor(&a)?,
            self_ownership: self.self_ownership(),
            direct: self.direct_values(),
            thresholds: self.thresholds.clone(),
            failure_losses: self.failure_losses.clone(),
        })
    }

    pub fn cast<U: Scalar>(&self) -> FinancialNetwork<U> {
        let v = |xs: &[T]| xs.iter().map(|x| U::lit(x.as_f64())).collect();
        FinancialNetwork {
            ownership: self.ownership.cast(),
            cross_holdings: self.cross_holdings.cast(),
            prices: v(&self.prices),
            thresholds: v(&self.thresholds),
            failure_losses: v(&self.failure_losses),
        }
    }
}

/// Factored equilibrium map of one network.
#[derive(Debug, Clone)]
pub struct EquilibriumSystem<T> {
    lu: Lu<T>,
    self_ownership: Vec<T>,
    direct: Vec<T>,
    thresholds: Vec<T>,
    failure_losses: Vec<T>,
}

impl<T: Scalar> EquilibriumSystem<T> {
    pub fn n(&self) -> usize {
        self.self_ownership.len()
    }

    /// `diag(self_ownership) (I - C)^-1 (D p - losses)`.
    pub fn market_values(&self, losses: &[T]) -> Vec<T> {
        let rhs: Vec<T> = self.direct.iter().zip(losses).map(|(&d, &b)| d - b).collect();
        let equity = self.lu.solve(&rhs);
        equity
            .iter()
            .zip(&self.self_ownership)
            .map(|(&e, &c)| c * e)
            .collect()
    }

    pub fn failure_term(&self, v: &[T]) -> Vec<T> {
        failure_term_for(&self.thresholds, &self.failure_losses, v)
    }

    /// One application of the equilibrium map.
    pub fn image(&self, v: &[T]) -> Vec<T> {
        self.market_values(&self.failure_term(v))
    }

    /// Squared distance between `v` and its image under the equilibrium
    /// map with the exact step.
    pub fn residual(&self, v: &[T]) -> T {
        squared_distance(v, &self.image(v))
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn failure_losses(&self) -> &[T] {
        &self.failure_losses
    }

    /// Dense `diag(self_ownership) (I - C)^-1`, built column by column
    /// from unit-vector solves.
    pub fn influence_matrix(&self) -> Matrix<T> {
        let n = self.n();
        let mut out = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.lu.solve(&e);
            for i in 0..n {
                out[(i, j)] = self.self_ownership[i] * col[i];
            }
            e[j] = T::zero();
        }
        out
    }
}

pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn failure_term_for<T: Scalar>(thresholds: &[T], losses: &[T], v: &[T]) -> Vec<T> {
    v.iter()
        .zip(thresholds)
        .zip(losses)
        .map(|((&vi, &ci), &bi)| if vi < ci { bi } else { T::zero() })
        .collect()
}

/// Market values with no failures.
pub fn linear_market_values<T: Scalar>(net: &FinancialNetwork<T>) -> Result<Vec<T>> {
    let sys = net.system()?;
    Ok(sys.market_values(&vec![T::zero(); net.n()]))
}

/// `beta_i` where `v_i < v_crit_i`, zero otherwise (no failure exactly at
/// the threshold).
pub fn exact_failure_term<T: Scalar>(net: &FinancialNetwork<T>, v: &[T]) -> Vec<T> {
    failure_term_for(&net.thresholds, &net.failure_losses, v)
}

/// Equilibrium cost `|v - M (D p - b(v))|^2` with the exact step.
pub fn equilibrium_residual<T: Scalar>(net: &FinancialNetwork<T>, v: &[T]) -> Result<T> {
    if v.len() != net.n() {
        return Err(Error::LengthMismatch {
            expected: net.n(),
            got: v.len(),
        });
    }
    Ok(net.system()?.residual(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr<T> {
    Nested(Vec<Vec<T>>),
    Flat(Vec<T>),
}

/// On-disk JSON layout of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkFile<T> {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "D")]
    d: MatrixRepr<T>,
    #[serde(rename = "C")]
    c: MatrixRepr<T>,
    pub p: Vec<T>,
    pub v_crit: Vec<T>,
    pub beta: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn to_matrix<T: Scalar>(repr: MatrixRepr<T>, rows: usize, cols: usize, name: &str) -> Result<Matrix<T>> {
    let m = match repr {
        MatrixRepr::Nested(r) if r.is_empty() && rows * cols == 0 => Matrix::zeros(rows, cols),
        MatrixRepr::Nested(r) => Matrix::from_rows(r)?,
        MatrixRepr::Flat(f) => Matrix::from_flat(rows, cols, f).map_err(|_| {
            Error::InvalidNetwork(format!("{name} flat data does not have {rows}x{cols} entries"))
        })?,
    };
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::InvalidNetwork(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

impl<T: Scalar> NetworkFile<T> {
    pub fn from_network(net: &FinancialNetwork<T>, config: Option<serde_json::Value>) -> Self {
        Self {
            n: net.n(),
            m: net.m(),
            d: MatrixRepr::Nested(net.ownership.to_rows()),
            c: MatrixRepr::Nested(net.cross_holdings.to_rows()),
            p: net.prices.clone(),
            v_crit: net.thresholds.clone(),
            beta: net.failure_losses.clone(),
            config,
        }
    }

    pub fn into_network(self) -> Result<FinancialNetwork<T>> {
        let d = to_matrix(self.d, self.n, self.m, "D")?;
        let c = to_matrix(self.c, self.n, self.n, "C")?;
        if self.p.len() != self.m {
            return Err(Error::InvalidNetwork(format!(
                "p has {} entries, expected m = {}",
                self.p.len(),
                self.m
            )));
        }
        FinancialNetwork::new(d, c, self.p, self.v_crit, self.beta)
    }
}

pub fn network_to_json<T: Scalar>(
    net: &FinancialNetwork<T>,
    config: Option<serde_json::Value>,
) -> Result<String> {
    Ok(serde_json::to_string_pretty(&NetworkFile::from_network(net, config))?)
}

pub fn network_from_json<T: Scalar>(text: &str) -> Result<FinancialNetwork<T>> {
    serde_json::from_str::<NetworkFile<T>>(text)?.into_network()
}

pub fn read_network<T: Scalar>(path: impl AsRef<Path>) -> Result<FinancialNetwork<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    network_from_json(&text)
}

pub fn write_network<T: Scalar>(
    net: &FinancialNetwork<T>,
    path: impl AsRef<Path>,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let text = network_to_json(net, config)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
