use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{skew_norm, symmetrized, RestrictedForm, MODULE};
use crate::error::{err, Result};

/// Relative threshold below which eigenvalues count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-12;

/// Signed spectrum split into monotone arrangements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// λ₁ ≥ λ₂ ≥ ... > 0.
    pub positive: Vec<f64>,
    /// λ₋₁ ≤ λ₋₂ ≤ ... < 0.
    pub negative: Vec<f64>,
    pub asymmetry_residual: f64,
    /// Galerkin basis size N per component.
    pub discretization: usize,
}

impl SpectrumResult {
    /// Builds the arrangements from an unordered list of eigenvalues.
    pub fn from_eigenvalues(eigs: &[f64], discretization: usize, asymmetry_residual: f64) -> Self {
        let scale = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = ZERO_EIG_TOL * scale;
        let mut positive: Vec<f64> = eigs.iter().copied().filter(|v| *v > cut).collect();
        let mut negative: Vec<f64> = eigs.iter().copied().filter(|v| *v < -cut).collect();
        positive.sort_by(|a, b| b.partial_cmp(a).unwrap());
        negative.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { positive, negative, asymmetry_residual, discretization }
    }

    /// Every eigenvalue multiplied by `a > 0`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            positive: self.positive.iter().map(|v| v * a).collect(),
            negative: self.negative.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }

    /// λ_n for n ∈ ℤ \ {0}; positive n index the positive arrangement.
    pub fn get(&self, n: i64) -> Option<f64> {
        match n {
            0 => None,
            n if n > 0 => self.positive.get(n as usize - 1).copied(),
            n => self.negative.get((-n) as usize - 1).copied(),
        }
    }

    /// CSV table `n,eigenvalue`, negative indices first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,eigenvalue\n");
        for (i, v) in self.negative.iter().enumerate().rev() {
            out.push_str(&format!("{},{}\n", -(i as i64 + 1), v));
        }
        for (i, v) in self.positive.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

/// Eigenvalues of a restricted form.
pub fn spectrum(restricted: &RestrictedForm, discretization: usize) -> Result<SpectrumResult> {
    let eigs = symmetric_eigenvalues(&restricted.matrix)?;
    Ok(SpectrumResult::from_eigenvalues(&eigs, discretization, restricted.asymmetry_residual))
}

/// Eigenvalues of the symmetric part of an arbitrary square matrix.
pub fn spectrum_of_matrix(m: &DMatrix<f64>, discretization: usize) -> Result<SpectrumResult> {
    if m.nrows() != m.ncols() {
        return Err(err!(Shape, MODULE, "spectrum of a non-square {}x{} matrix", m.nrows(), m.ncols()));
    }
    let eigs = symmetric_eigenvalues(&symmetrized(m))?;
    Ok(SpectrumResult::from_eigenvalues(&eigs, discretization, skew_norm(m)))
}

fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eigs: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    if eigs.iter().any(|v| !v.is_finite()) {
        return Err(err!(Numerical, MODULE, "eigensolver returned non-finite values"));
    }
    Ok(eigs)
}
