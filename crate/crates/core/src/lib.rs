//! Spectral asymptotics ("capacity") of Volterra-type quadratic forms with
//! finite-rank skew part, and their use in second-variation analysis of
//! optimal control problems.

pub mod asympt;
pub mod capacity;
pub mod cli;
pub mod control;
pub mod error;
pub mod galerkin;
pub mod legendre;
pub mod matfun;
pub mod modelbvp;

pub use error::{Error, Result};
pub use matfun::{MatrixFunction, SymplecticForm};
