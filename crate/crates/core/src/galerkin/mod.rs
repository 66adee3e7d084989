//! Galerkin discretization of the Volterra form, restriction to constraint
//! subspaces, spectra, and the finite-rank skew-part factorization.

mod assemble;
mod factorize;
mod restrict;
mod spectrum;

pub use assemble::{assemble, basis_values, quadrature_nodes};
pub use factorize::{capacity_bound, skew_factorize, SkewFactorization, DEFAULT_RANK_TOL};
pub use restrict::{constraint_matrix, restrict, RestrictedForm};
pub use spectrum::{spectrum, spectrum_of_matrix, SpectrumResult};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{err, Result};
use crate::matfun::{MatrixFunction, SymplecticForm};

const MODULE: &str = "galerkin";

pub const DEFAULT_BASIS_SIZE: usize = 256;

/// Which finite-codimension subspace the form is restricted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubspaceSelector {
    None,
    /// `∫ (1-t)^{l-1}/(l-1)! v(t) dt = 0` componentwise for `l = 1..=count`.
    MomentConstraints { count: usize },
    /// Rows `w_i` of a `c x k` function; constraints `∫ w_i(t)·v(t) dt = 0`.
    Custom { functionals: MatrixFunction },
}

impl SubspaceSelector {
    /// The moment constraints written out as explicit functionals on R^k.
    pub fn moment_functionals(count: usize, k: usize) -> Result<MatrixFunction> {
        if count == 0 {
            return Err(err!(Domain, MODULE, "moment constraint count must be positive"));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count * k * k);
        for l in 1..=count {
            // (1-t)^{l-1}/(l-1)! expanded in monomials of t.
            let mut poly = vec![0.0; l];
            let fact: f64 = (1..l).map(|v| v as f64).product();
            for (d, c) in poly.iter_mut().enumerate() {
                let binom = binomial(l - 1, d);
                *c = if d % 2 == 0 { binom } else { -binom } / fact;
            }
            for comp in 0..k {
                for col in 0..k {
                    rows.push(if col == comp { poly.clone() } else { vec![0.0] });
                }
            }
        }
        MatrixFunction::from_monomials(count * k, k, &rows)
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The quadratic form `-∫⟨H v, v⟩ + sign · ⟨v, K v⟩` with
/// `K v(t) = Z_tᵀ J ∫₀ᵗ Z_τ v(τ) dτ`.
///
/// `kernel_sign` is +1 for the bare Volterra form and -1 for a second
/// variation, where the double integral enters with a minus sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormSpec {
    pub z: MatrixFunction,
    pub h: Option<MatrixFunction>,
    pub form: SymplecticForm,
    pub selector: SubspaceSelector,
    pub kernel_sign: f64,
}

impl QuadraticFormSpec {
    /// The bare Volterra form `⟨v, K v⟩` on all of L².
    pub fn volterra(z: MatrixFunction) -> Result<Self> {
        let form = SymplecticForm::new(z.rows())?;
        Ok(Self { z, h: None, form, selector: SubspaceSelector::None, kernel_sign: 1.0 })
    }

    pub fn with_selector(mut self, selector: SubspaceSelector) -> Self {
        self.selector = selector;
        self
    }

    pub fn with_h(mut self, h: MatrixFunction) -> Result<Self> {
        let k = self.k();
        if h.rows() != k || h.cols() != k {
            return Err(err!(Shape, MODULE, "H must be {k}x{k}, got {}x{}", h.rows(), h.cols()));
        }
        let asym = h.sub(&h.transpose())?.coeff_max_abs();
        if asym > 1e-12 * h.coeff_max_abs().max(1.0) {
            return Err(err!(Invalid, MODULE, "H is not pointwise symmetric (coefficient asymmetry {asym:e})"));
        }
        self.h = Some(h);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.rows() != self.form.dim() {
            return Err(err!(Shape, MODULE, "Z has {} rows but J is {}-dimensional", self.z.rows(), self.form.dim()));
        }
        if let Some(h) = &self.h {
            if h.rows() != self.k() || h.cols() != self.k() {
                return Err(err!(Shape, MODULE, "H must be {0}x{0}", self.k()));
            }
        }
        if let SubspaceSelector::Custom { functionals } = &self.selector {
            if functionals.cols() != self.k() {
                return Err(err!(Shape, MODULE, "constraint functionals must have {} columns", self.k()));
            }
        }
        Ok(())
    }

    /// Number of control components.
    pub fn k(&self) -> usize {
        self.z.cols()
    }
}

/// `‖(M - Mᵀ)/2‖_F`.
pub(crate) fn skew_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..i {
            let d = 0.5 * (m[(i, j)] - m[(j, i)]);
            acc += 2.0 * d * d;
        }
    }
    acc.sqrt()
}

pub(crate) fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}
