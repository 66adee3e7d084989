//! Second variations built from control data, LQ realization of a given
//! Volterra form, and Goh / generalized Legendre condition checks.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::capacity::{self, build_aj, CapacityResult};
use crate::error::{err, Result};
use crate::galerkin::{QuadraticFormSpec, SubspaceSelector};
use crate::legendre;
use crate::matfun::{MatrixFunction, SymplecticForm};

const MODULE: &str = "control";

/// Grid density for pointwise condition checks (breakpoints are added).
pub const CONDITION_GRID: usize = 512;

/// Dynamics `B_t u` and running cost `½|u|² + ⟨Ω_t u, x⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblemLQ {
    pub b: MatrixFunction,
    pub omega: MatrixFunction,
}

impl ControlProblemLQ {
    /// The Z = (Ω; B) this problem induces.
    pub fn z(&self) -> Result<MatrixFunction> {
        MatrixFunction::vstack(&self.omega, &self.b)
    }
}

/// Lagrangian subspace the endpoint integral must land in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianSelector {
    /// `{(p, 0)}`.
    Vertical,
}

/// Symplectic space, Lagrangian subspace and Z = (Y; X).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleSpec {
    pub form: SymplecticForm,
    pub pi: LagrangianSelector,
    pub z: MatrixFunction,
}

impl TripleSpec {
    pub fn new(z: MatrixFunction) -> Result<Self> {
        Ok(Self { form: SymplecticForm::new(z.rows())?, pi: LagrangianSelector::Vertical, z })
    }

    /// Upper half of Z.
    pub fn y(&self) -> Result<MatrixFunction> {
        self.z.row_block(0, self.form.half_dim())
    }

    /// Lower half of Z.
    pub fn x(&self) -> Result<MatrixFunction> {
        self.z.row_block(self.form.half_dim(), self.form.dim())
    }
}

/// The form `-∫⟨H u, u⟩ - ∫∫_{τ<t} σ(Z_τ u_τ, Z_t u_t)` on `{u : ∫ X u = 0}`.
pub fn second_variation(h: &MatrixFunction, z: &MatrixFunction) -> Result<QuadraticFormSpec> {
    let triple = TripleSpec::new(z.clone())?;
    let x = triple.x()?;
    let mut spec = QuadraticFormSpec::volterra(z.clone())?.with_h(h.clone())?;
    spec.kernel_sign = -1.0;
    spec.selector = SubspaceSelector::Custom { functionals: x };
    Ok(spec)
}

/// `B = X`, `Ω = Y`.
pub fn realize_lq(triple: &TripleSpec) -> Result<ControlProblemLQ> {
    Ok(ControlProblemLQ { b: triple.x()?, omega: triple.y()? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramReport {
    pub t: f64,
    #[serde(serialize_with = "ser_matrix")]
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub surjective: bool,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// `Γ_t = ∫₀ᵗ X Xᵀ` with X the lower half of Z; surjective iff its smallest
/// eigenvalue exceeds `tol`.
pub fn gram(z: &MatrixFunction, t: f64, tol: f64) -> Result<GramReport> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(err!(Domain, MODULE, "Gram time must lie in (0, 1], got {t}"));
    }
    let x = TripleSpec::new(z.clone())?.x()?;
    let integrand = x.mul(&x.transpose())?;
    let g = integrand.integrate(0.0, t)?;
    let g = (&g + g.transpose()) * 0.5;
    let min_eigenvalue = g.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GramReport { t, matrix: g, min_eigenvalue, surjective: min_eigenvalue > tol })
}

/// Pass/fail outcome of a pointwise condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    /// Grid time of the largest violation (or of the largest value examined).
    pub witness_t: f64,
    pub witness_value: f64,
    pub threshold: f64,
    /// Predicted 1-capacity when the Goh condition fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_capacity: Option<CapacityResult>,
}

fn scale_of(z: &MatrixFunction, d1: usize, d2: usize) -> f64 {
    let a = z.derivative(d1).sup_norm_on_grid(CONDITION_GRID).0;
    let b = z.derivative(d2).sup_norm_on_grid(CONDITION_GRID).0;
    (a * b).max(1.0)
}

/// Largest |A₁(t)| entry over the grid against `tol` (relative to |Z|²).
fn goh_sup(z: &MatrixFunction, tol: f64) -> Result<(f64, f64, f64)> {
    let form = SymplecticForm::new(z.rows())?;
    let a1 = build_aj(z, 1, &form)?;
    let threshold = tol * scale_of(z, 0, 0);
    let (sup, t) = a1.sup_norm_on_grid(CONDITION_GRID);
    Ok((sup, t, threshold))
}

/// Goh condition `Zᵀ J Z ≡ 0`. On failure the predicted two-sided
/// 1-capacity is attached.
pub fn goh_check(z: &MatrixFunction, tol: f64) -> Result<ConditionReport> {
    let (sup, t, threshold) = goh_sup(z, tol)?;
    let pass = sup <= threshold;
    let predicted_capacity = if pass {
        None
    } else {
        let form = SymplecticForm::new(z.rows())?;
        Some(capacity::predict_capacity(z, &form, 1, tol)?)
    };
    Ok(ConditionReport { pass, witness_t: t, witness_value: sup, threshold, predicted_capacity })
}

/// Generalized Legendre condition: `σ(Z' v, Z v) ≤ 0`, i.e. the symmetric
/// A₂ = Zᵀ J Z' is negative semidefinite on the grid. Requires the Goh
/// condition.
pub fn glc_check(z: &MatrixFunction, tol: f64) -> Result<ConditionReport> {
    let (sup, t, threshold) = goh_sup(z, tol)?;
    if sup > threshold {
        return Err(err!(
            Precondition,
            MODULE,
            "generalized Legendre check needs Zᵀ J Z ≡ 0, but |A₁| = {sup:e} at t = {t}"
        ));
    }
    let form = SymplecticForm::new(z.rows())?;
    let a2 = build_aj(z, 2, &form)?;
    let threshold = tol * scale_of(z, 0, 1);
    let (witness_t, witness_value) = max_eig_on_grid(&a2);
    Ok(ConditionReport { pass: witness_value <= threshold, witness_t, witness_value, threshold, predicted_capacity: None })
}

fn max_eig_on_grid(a: &MatrixFunction) -> (f64, f64) {
    a.grid(CONDITION_GRID)
        .into_iter()
        .map(|t| {
            let m = a.eval_unchecked(t);
            let sym = (&m + m.transpose()) * 0.5;
            (t, sym.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

fn min_eig_on_grid(a: &MatrixFunction) -> (f64, f64) {
    let neg = a.scale(-1.0);
    let (t, v) = max_eig_on_grid(&neg);
    (t, -v)
}

/// Sign of the symmetric part of even A_j, j ≤ j_max. Only j = 2 is a
/// certified necessary condition; higher orders are exploratory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HigherOrderEntry {
    pub j: usize,
    pub max_eigenvalue: f64,
    pub max_at: f64,
    pub min_eigenvalue: f64,
    pub min_at: f64,
    pub certified: bool,
}

pub fn higher_order_signs(z: &MatrixFunction, j_max: usize) -> Result<Vec<HigherOrderEntry>> {
    let form = SymplecticForm::new(z.rows())?;
    (2..=j_max)
        .step_by(2)
        .map(|j| {
            let aj = build_aj(z, j, &form)?;
            let (max_at, max_eigenvalue) = max_eig_on_grid(&aj);
            let (min_at, min_eigenvalue) = min_eig_on_grid(&aj);
            Ok(HigherOrderEntry { j, max_eigenvalue, max_at, min_eigenvalue, min_at, certified: j == 2 })
        })
        .collect()
}

/// Hessian of the maximized Hamiltonian and the capacity bound it yields.
#[derive(Debug, Clone, Serialize)]
pub struct HessianBound {
    /// `J Z H⁻¹ Zᵀ J`.
    pub hessian: MatrixFunction,
    /// True when H varies and the Hessian was projected from samples.
    pub sampled: bool,
    /// Max deviation of the projected Hessian from the samples (0 if exact).
    pub projection_residual: f64,
    /// `∫ tr Hess`.
    pub trace_integral: f64,
    /// L² norm over t of the largest singular value of `Z (-H)^{-1/2}`.
    pub r_norm: f64,
    pub bound: f64,
}

fn is_constant(f: &MatrixFunction) -> bool {
    f.degree() == 0 && f.pieces().len() == 1
}

/// `(-H)^{-1/2}` at one time, or an error when `-H` is not positive definite.
fn inv_sqrt_neg(h: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let neg = -(h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(neg);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * scale) {
        return Err(err!(
            Precondition,
            MODULE,
            "H is not negative definite at t = {t} (smallest eigenvalue of -H is {min:e})"
        ));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Bound `ξ ≤ (√k ‖R‖₂ / 2) √(∫ tr Hess)` with `R_t` the largest singular
/// value of `Z_t (-H_t)^{-1/2}`, the coordinates in which the H term is the
/// identity.
pub fn hessian_bound(z: &MatrixFunction, h: &MatrixFunction) -> Result<HessianBound> {
    let k = z.cols();
    if h.rows() != k || h.cols() != k {
        return Err(err!(Shape, MODULE, "H must be {k}x{k}, got {}x{}", h.rows(), h.cols()));
    }
    let form = SymplecticForm::new(z.rows())?;
    let jm = form.matrix();
    for t in h.grid(CONDITION_GRID) {
        let ht = h.eval_unchecked(t);
        if ht.clone().try_inverse().is_none() {
            return Err(err!(Numerical, MODULE, "H is singular at t = {t}"));
        }
        inv_sqrt_neg(&ht, t)?;
    }

    let (hessian, sampled, projection_residual) = if is_constant(h) {
        let hinv = h.eval(0.0)?.try_inverse().ok_or_else(|| err!(Numerical, MODULE, "H is singular"))?;
        let inner = z.right_mul_const(&hinv)?.mul(&z.transpose())?;
        (inner.left_mul_const(&jm)?.right_mul_const(&jm)?, false, 0.0)
    } else {
        let bps = crate::matfun::merge_breakpoints(z.breakpoints(), h.breakpoints());
        let degree = 2 * z.degree() + crate::matfun::DEFAULT_DEGREE;
        let (f, res) = MatrixFunction::from_fn(form.dim(), form.dim(), bps, degree, |t| {
            let zt = z.eval_unchecked(t);
            let hinv = h.eval_unchecked(t).try_inverse().unwrap_or_else(|| DMatrix::zeros(k, k));
            &jm * &zt * hinv * zt.transpose() * &jm
        })?;
        (f, true, res)
    };

    // Both integrands are evaluated pointwise with composite Gauss rules on
    // the common partition; the r-integrand has kinks where singular values cross.
    let knots = {
        let mut k = vec![0.0];
        k.extend(crate::matfun::merge_breakpoints(z.breakpoints(), h.breakpoints()));
        k.push(1.0);
        k
    };
    let integrand = |t: f64| -> Result<(f64, f64)> {
        let zt = z.eval_unchecked(t);
        let zn = &zt * inv_sqrt_neg(&h.eval_unchecked(t), t)?;
        let r = zn.clone().singular_values().iter().cloned().fold(0.0, f64::max);
        Ok((r * r, zn.norm_squared()))
    };
    let rule = legendre::gauss_legendre(64);
    let composite = |panels: usize| -> Result<(f64, f64)> {
        let mut acc = (0.0, 0.0);
        for w in knots.windows(2) {
            let step = (w[1] - w[0]) / panels as f64;
            for p in 0..panels {
                let a = w[0] + step * p as f64;
                let (xs, ws) = rule.mapped(a, a + step);
                for (t, wt) in xs.into_iter().zip(ws) {
                    let (r2, tr) = integrand(t)?;
                    acc.0 += wt * r2;
                    acc.1 += wt * tr;
                }
            }
        }
        Ok(acc)
    };
    let mut panels = 1;
    let mut prev = composite(panels)?;
    for _ in 0..8 {
        panels *= 2;
        let cur = composite(panels)?;
        let change = ((cur.0 - prev.0).abs() / cur.0.abs().max(f64::MIN_POSITIVE))
            .max((cur.1 - prev.1).abs() / cur.1.abs().max(f64::MIN_POSITIVE));
        prev = cur;
        if change < 1e-10 {
            break;
        }
    }
    let (r2_integral, trace_integral) = prev;
    let r_norm = r2_integral.sqrt();
    let bound = (k as f64).sqrt() * r_norm / 2.0 * trace_integral.sqrt();
    Ok(HessianBound { hessian, sampled, projection_residual, trace_integral, r_norm, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeReport {
    pub equivalent: bool,
    pub max_deviation: f64,
}

/// Compares the kernels `Z_tᵀ J Z_τ` of two functions on a 2-D grid.
pub fn gauge_equivalent(z1: &MatrixFunction, z2: &MatrixFunction, tol: f64) -> Result<GaugeReport> {
    if z1.rows() != z2.rows() || z1.cols() != z2.cols() {
        return Err(err!(Shape, MODULE, "{}x{} vs {}x{}", z1.rows(), z1.cols(), z2.rows(), z2.cols()));
    }
    let jm = SymplecticForm::new(z1.rows())?.matrix();
    let mut grid = z1.grid(65);
    grid.extend(z2.grid(65));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let left1: Vec<DMatrix<f64>> = grid.iter().map(|&t| z1.eval_unchecked(t).transpose() * &jm).collect();
    let left2: Vec<DMatrix<f64>> = grid.iter().map(|&t| z2.eval_unchecked(t).transpose() * &jm).collect();
    let right1: Vec<DMatrix<f64>> = grid.iter().map(|&t| z1.eval_unchecked(t)).collect();
    let right2: Vec<DMatrix<f64>> = grid.iter().map(|&t| z2.eval_unchecked(t)).collect();
    let mut max_deviation: f64 = 0.0;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let d = &left1[i] * &right1[j] - &left2[i] * &right2[j];
            max_deviation = max_deviation.max(d.amax());
        }
    }
    Ok(GaugeReport { equivalent: max_deviation <= tol, max_deviation })
}
