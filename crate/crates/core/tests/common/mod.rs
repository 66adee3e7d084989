#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volterra_capacity::asympt::{self, CapacityFit, Window};
use volterra_capacity::galerkin::{self, QuadraticFormSpec, SpectrumResult, SubspaceSelector};
use volterra_capacity::MatrixFunction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries are polynomials of degree ≤ `deg` with coefficients in [-1, 1].
pub fn random_poly(rng: &mut ChaCha8Rng, rows: usize, cols: usize, deg: usize) -> MatrixFunction {
    let entries: Vec<Vec<f64>> =
        (0..rows * cols).map(|_| (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    MatrixFunction::from_monomials(rows, cols, &entries).unwrap()
}

/// Z = I₂: n = 1, k = 2, order 1, ξ = 1.
pub fn identity_z() -> MatrixFunction {
    MatrixFunction::identity(2)
}

/// Z = (t; 1): order 2, (ξ₊, ξ₋) = (1, 0).
pub fn t_one() -> MatrixFunction {
    MatrixFunction::from_monomials(2, 1, &[vec![0.0, 1.0], vec![1.0]]).unwrap()
}

/// 6x2 instance with A₁ = A₂ = 0 and ξ = 1 at order 3.
pub fn order_three() -> MatrixFunction {
    MatrixFunction::from_monomials(
        6,
        2,
        &[
            vec![1.0],
            vec![0.0],
            vec![0.0],
            vec![1.0],
            vec![0.0],
            vec![0.0, 1.0],
            vec![0.0],
            vec![0.0, 0.0, 0.5],
            vec![0.0, 0.0, -0.5],
            vec![0.0],
            vec![0.0, 1.0],
            vec![0.0],
        ],
    )
    .unwrap()
}

pub fn spectrum_of(z: &MatrixFunction, selector: SubspaceSelector, n: usize) -> SpectrumResult {
    let spec = QuadraticFormSpec::volterra(z.clone()).unwrap().with_selector(selector.clone());
    let m = galerkin::assemble(&spec, n).unwrap();
    let r = galerkin::restrict(&m, &selector, n).unwrap();
    galerkin::spectrum(&r, n).unwrap()
}

/// Spectrum on the moment-constrained subspace matching order `j`, and its fit.
pub fn fit_on_v(z: &MatrixFunction, j: usize, n: usize, window: Window) -> (CapacityFit, SpectrumResult) {
    let s = spectrum_of(z, SubspaceSelector::MomentConstraints { count: j.div_ceil(2) }, n);
    let fit = asympt::fit_capacity(&s, window, 8).unwrap();
    (fit, s)
}
