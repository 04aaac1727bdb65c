pub mod costpoly;
pub mod error;
pub mod isingcompile;
pub mod linalg;
pub mod netmodel;
pub mod scalar;
mod serde_pairs;
pub mod solvers;
pub mod stepapprox;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Network = netmodel::FinancialNetwork<f64>;
pub type Network32 = netmodel::FinancialNetwork<f32>;
pub type Approximant = stepapprox::StepApproximant<f64>;
pub type Approximant32 = stepapprox::StepApproximant<f32>;
pub type Polynomial = costpoly::BooleanPolynomial<f64>;
pub type Polynomial32 = costpoly::BooleanPolynomial<f32>;
pub type Encoding = costpoly::BitEncoding<f64>;
pub type Program = isingcompile::IsingProgram<f64>;
pub type Program32 = isingcompile::IsingProgram<f32>;
pub type Solution = solvers::SolveResult<f64>;
