mod common;

use nalgebra::{dmatrix, DMatrix};
use volterra_capacity::asympt::{self, Window};
use volterra_capacity::capacity;
use volterra_capacity::control::{self, TripleSpec};
use volterra_capacity::galerkin::{self, SpectrumResult};
use volterra_capacity::{Error, MatrixFunction, SymplecticForm};

use common::{fit_on_v, identity_z, random_poly, t_one};

fn minus_identity(k: usize) -> MatrixFunction {
    MatrixFunction::constant(&-DMatrix::<f64>::identity(k, k))
}

fn assembled_spectrum(spec: &galerkin::QuadraticFormSpec, n: usize) -> SpectrumResult {
    let m = galerkin::assemble(spec, n).unwrap();
    let r = galerkin::restrict(&m, &spec.selector, n).unwrap();
    galerkin::spectrum(&r, n).unwrap()
}

#[test]
fn second_variation_examples() {
    let spec = control::second_variation(&minus_identity(2), &MatrixFunction::zeros(2, 2)).unwrap();
    let m = galerkin::assemble(&spec, 12).unwrap();
    assert!((m - DMatrix::<f64>::identity(24, 24)).amax() < 1e-13);

    // H = 0: the pure Volterra form with the second-variation sign.
    let z = random_poly(&mut common::rng(21), 2, 2, 2);
    let spec = control::second_variation(&MatrixFunction::zeros(2, 2), &z).unwrap();
    let plain = galerkin::QuadraticFormSpec::volterra(z).unwrap();
    let a = galerkin::assemble(&spec, 16).unwrap();
    let b = galerkin::assemble(&plain, 16).unwrap();
    assert!((a + b).amax() < 1e-14);
}

#[test]
fn second_variation_clusters_at_one() {
    let spec = control::second_variation(&minus_identity(2), &identity_z()).unwrap();
    let s = assembled_spectrum(&spec, 256);
    assert!(s.negative.is_empty());
    let all: Vec<f64> = s.positive.clone();
    let far = all.iter().filter(|v| (*v - 1.0).abs() > 0.1).count();
    assert!(far <= 8, "{far} eigenvalues away from 1");
    // The deviations from 1 carry the compact part's capacity.
    let deviations: Vec<f64> = all.iter().map(|v| v - 1.0).collect();
    let d = SpectrumResult::from_eigenvalues(&deviations, 256, 0.0);
    let fit = asympt::fit_capacity(&d, Window::default_for(256), 8).unwrap();
    let (p, m) = fit.sides();
    assert!((p - 1.0).abs() < 0.05 && (m - 1.0).abs() < 0.05, "({p}, {m})");
}

#[test]
fn realize_examples() {
    let z = random_poly(&mut common::rng(22), 4, 3, 3);
    let triple = TripleSpec::new(z.clone()).unwrap();
    let lq = control::realize_lq(&triple).unwrap();
    assert_eq!(lq.b, z.row_block(2, 4).unwrap());
    assert_eq!(lq.omega, z.row_block(0, 2).unwrap());

    let h = MatrixFunction::zeros(3, 3);
    let a = galerkin::assemble(&control::second_variation(&h, &lq.z().unwrap()).unwrap(), 24).unwrap();
    let b = galerkin::assemble(&control::second_variation(&h, &z).unwrap(), 24).unwrap();
    assert!((a - b).amax() <= 1e-12);

    let zero = control::realize_lq(&TripleSpec::new(MatrixFunction::zeros(2, 1)).unwrap()).unwrap();
    assert_eq!(zero.b.coeff_max_abs() + zero.omega.coeff_max_abs(), 0.0);
    assert!(TripleSpec::new(MatrixFunction::zeros(3, 1)).is_err());
}

#[test]
fn gram_examples_and_monotonicity() {
    assert!(!control::gram(&MatrixFunction::zeros(2, 1), 1.0, 1e-12).unwrap().surjective);
    let x_identity = MatrixFunction::vstack(&MatrixFunction::zeros(2, 2), &MatrixFunction::identity(2)).unwrap();
    let g = control::gram(&x_identity, 1.0, 1e-12).unwrap();
    assert!((g.matrix - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14 && g.surjective);
    let z = MatrixFunction::from_monomials(2, 2, &[vec![0.0], vec![0.0], vec![0.0, 1.0], vec![1.0]]).unwrap();
    assert!((control::gram(&z, 1.0, 1e-12).unwrap().matrix[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);

    let z = random_poly(&mut common::rng(23), 4, 2, 3);
    let mut previous = DMatrix::<f64>::zeros(2, 2);
    for i in 1..=20 {
        let g = control::gram(&z, i as f64 / 20.0, 1e-12).unwrap().matrix;
        let step = &g - &previous;
        let min = step.symmetric_eigenvalues().min();
        assert!(min >= -1e-13, "t = {}: {min}", i as f64 / 20.0);
        previous = g;
    }
}

#[test]
fn goh_examples() {
    let iso = MatrixFunction::vstack(&random_poly(&mut common::rng(24), 2, 2, 2), &MatrixFunction::zeros(2, 2)).unwrap();
    assert!(control::goh_check(&iso, 1e-10).unwrap().pass);

    let report = control::goh_check(&identity_z(), 1e-10).unwrap();
    assert!(!report.pass);
    let predicted = report.predicted_capacity.unwrap();
    assert!((predicted.value.unwrap() - 1.0).abs() < 1e-12);

    assert!(control::goh_check(&t_one(), 1e-10).unwrap().pass);
}

#[test]
fn goh_failure_gives_two_sided_spectrum() {
    let z = MatrixFunction::from_monomials(2, 2, &[vec![1.0, 0.5], vec![0.0, 1.0], vec![0.3], vec![1.0, 0.0, -1.0]]).unwrap();
    assert!(!control::goh_check(&z, 1e-10).unwrap().pass);
    let (fit, _) = fit_on_v(&z, 1, 256, Window::default_for(256));
    let (p, m) = fit.sides();
    assert!((p - m).abs() <= 0.05 * p.max(m), "({p}, {m})");
}

#[test]
fn glc_examples() {
    // Z = (t; 1): A₂ = Zᵀ J Z' ≡ 1 > 0, so the condition fails everywhere.
    let a2 = capacity::build_aj(&t_one(), 2, &SymplecticForm::new(2).unwrap()).unwrap();
    assert!((a2.eval(0.6).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    let r = control::glc_check(&t_one(), 1e-10).unwrap();
    assert!(!r.pass && (r.witness_value - 1.0).abs() < 1e-14);

    // (1; t) flips the sign: A₂ ≡ -1.
    let flipped = MatrixFunction::from_monomials(2, 1, &[vec![1.0], vec![0.0, 1.0]]).unwrap();
    assert!(control::glc_check(&flipped, 1e-10).unwrap().pass);

    let constant = MatrixFunction::constant(&dmatrix![1.0; 0.0]);
    assert!(control::glc_check(&constant, 1e-10).unwrap().pass);

    assert!(matches!(control::glc_check(&identity_z(), 1e-10), Err(Error::Precondition { .. })));
}

#[test]
fn hessian_bound_examples() {
    let hb = control::hessian_bound(&identity_z(), &minus_identity(2)).unwrap();
    assert!((hb.bound - 1.0).abs() < 1e-12);
    let trace: f64 = hb.hessian.eval(0.5).unwrap().trace();
    assert!((trace - 2.0).abs() < 1e-12);
    assert!(!hb.sampled);

    assert_eq!(control::hessian_bound(&MatrixFunction::zeros(2, 2), &minus_identity(2)).unwrap().bound, 0.0);

    // H = -2I is Z / √2 in normalized coordinates: capacity and bound halve.
    let h2 = MatrixFunction::constant(&(DMatrix::<f64>::identity(2, 2) * -2.0));
    let hb = control::hessian_bound(&identity_z(), &h2).unwrap();
    let rescaled = identity_z().scale(1.0 / 2f64.sqrt());
    let xi = capacity::predict_capacity(&rescaled, &SymplecticForm::new(2).unwrap(), 8, 1e-10).unwrap().value.unwrap();
    assert!((hb.bound - 0.5).abs() < 1e-12 && (xi - 0.5).abs() < 1e-12);
    let (fit, _) = fit_on_v(&rescaled, 1, 256, Window::default_for(256));
    assert!(hb.bound >= fit.value.unwrap());

    let singular = MatrixFunction::from_monomials(1, 1, &[vec![-0.5, 1.0]]).unwrap();
    assert!(control::hessian_bound(&t_one(), &singular).is_err());
}

#[test]
fn hessian_bound_with_varying_h() {
    let h = MatrixFunction::from_monomials(2, 2, &[vec![-1.0, -1.0], vec![0.0], vec![0.0], vec![-2.0, 0.5]]).unwrap();
    let hb = control::hessian_bound(&identity_z(), &h).unwrap();
    assert!(hb.sampled && hb.projection_residual < 1e-8);
    // ∫ tr((-H)^{-1}) = ∫ 1/(1+t) + 1/(2-t/2) = ln 2 + 2 ln(4/3).
    let expected = 2f64.ln() + 2.0 * (4.0f64 / 3.0).ln();
    assert!((hb.trace_integral - expected).abs() < 1e-8, "{}", hb.trace_integral);
}

#[test]
fn gauge_examples() {
    let mut rng = common::rng(25);
    let z = random_poly(&mut rng, 4, 2, 2);
    assert!(control::gauge_equivalent(&z, &z, 1e-12).unwrap().equivalent);
    let triple = TripleSpec::new(z.clone()).unwrap();
    let (y, x) = (triple.y().unwrap(), triple.x().unwrap());
    let deform = |g: DMatrix<f64>| MatrixFunction::vstack(&y.add(&x.left_mul_const(&g).unwrap()).unwrap(), &x).unwrap();
    assert!(control::gauge_equivalent(&z, &deform(dmatrix![2.0, 0.5; 0.5, -1.0]), 1e-10).unwrap().equivalent);
    let r = control::gauge_equivalent(&z, &deform(dmatrix![0.0, 0.7; -0.7, 0.0]), 1e-10).unwrap();
    assert!(!r.equivalent && r.max_deviation > 1e-3);
    assert!(control::gauge_equivalent(&z, &identity_z(), 1e-10).is_err());
}
