use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::Serialize;

use super::{assemble, QuadraticFormSpec, MODULE};
use crate::error::{err, Result};
use crate::matfun::{MatrixFunction, SymplecticForm};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Finite-rank factorization of the skew part `(K - K*)/2`.
///
/// With the orthonormal frame `F` the skew kernel equals
/// `½ F_tᵀ a0 F_τ`; with `canonical_frame` it equals `½ Z̃_tᵀ J Z̃_τ`.
#[derive(Debug, Clone, Serialize)]
pub struct SkewFactorization {
    pub rank: usize,
    /// Skew 2m x 2m matrix of the kernel in the orthonormal frame.
    #[serde(serialize_with = "ser_matrix")]
    pub a0: DMatrix<f64>,
    /// Rows are L²-orthonormal functions spanning the image of the skew part.
    pub frame: MatrixFunction,
    /// Frame in which the skew kernel takes the canonical form with J.
    pub canonical_frame: MatrixFunction,
    /// Positive imaginary parts of the skew part's eigenvalues, descending.
    pub skew_eigs: Vec<f64>,
    /// Hilbert–Schmidt distance (on the triangle τ < t) between the
    /// reconstructed and the input skew kernels.
    pub reconstruction_error: f64,
    /// Hilbert–Schmidt norm of the input skew kernel on the triangle.
    pub kernel_norm: f64,
    /// Tolerance that produced an even rank.
    pub rank_tol: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl SkewFactorization {
    pub fn m(&self) -> usize {
        self.rank / 2
    }
}

/// Factorizes the skew part of the Volterra kernel of `spec` from an N-term
/// Galerkin discretization. The H term is symmetric and does not enter.
pub fn skew_factorize(spec: &QuadraticFormSpec, n: usize, tol: f64) -> Result<SkewFactorization> {
    if !(tol > 0.0) {
        return Err(err!(Domain, MODULE, "rank tolerance must be positive, got {tol}"));
    }
    let bare = QuadraticFormSpec { h: None, ..spec.clone() };
    let m = assemble(&bare, n)?;
    let a = (&m - m.transpose()) * 0.5;
    let k = spec.k();

    let svd = SVD::new(a.clone(), true, false);
    let u_all = svd.u.as_ref().ok_or_else(|| err!(Numerical, MODULE, "SVD of skew part failed"))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&x, &y| sv[y].partial_cmp(&sv[x]).unwrap());
    let count = |tol: f64| order.iter().filter(|&&i| smax > 0.0 && sv[i] > tol * smax).count();
    let mut rank_tol = tol;
    let mut rank = count(rank_tol);
    if rank % 2 == 1 {
        rank_tol *= 10.0;
        rank = count(rank_tol);
        if rank % 2 == 1 {
            return Err(err!(
                Tolerance,
                MODULE,
                "odd numerical rank {rank} of a skew matrix at tolerances {tol:e} and {rank_tol:e}"
            ));
        }
    }

    let input_kernel = kernel_coefficients(&spec.z, &spec.form, spec.kernel_sign);
    let kernel_norm = input_kernel.norm() * std::f64::consts::FRAC_1_SQRT_2;
    if rank == 0 {
        let empty = MatrixFunction::zeros(1, k);
        return Ok(SkewFactorization {
            rank: 0,
            a0: DMatrix::zeros(0, 0),
            frame: empty.clone(),
            canonical_frame: empty,
            skew_eigs: Vec::new(),
            reconstruction_error: kernel_norm,
            kernel_norm,
            rank_tol,
        });
    }

    let mut u = DMatrix::zeros(a.nrows(), rank);
    for (col, &i) in order.iter().take(rank).enumerate() {
        u.set_column(col, &u_all.column(i));
    }
    let s = u.transpose() * &a * &u;
    let s = (&s - s.transpose()) * 0.5;
    let frame = frame_from_columns(&u, k, n)?;

    let (pairs, skew_eigs) = canonical_pairs(&s)?;
    let mhalf = rank / 2;
    // T = diag(√(2a)) Oᵀ with O = [u_1..u_m, w_1..w_m], so Tᵀ J T = 2S.
    let mut t = DMatrix::zeros(rank, rank);
    for (i, (uu, ww)) in pairs.iter().enumerate() {
        let amp = (2.0 * skew_eigs[i]).sqrt();
        t.set_row(i, &(uu.transpose() * amp));
        t.set_row(mhalf + i, &(ww.transpose() * amp));
    }
    let canonical_frame = frame.left_mul_const(&t)?;

    let jform = SymplecticForm::with_half_dim(mhalf);
    let rebuilt = kernel_coefficients_on(&canonical_frame, &jform, 1.0, &spec.z);
    let input = kernel_coefficients_on(&spec.z, &spec.form, spec.kernel_sign, &canonical_frame);
    let reconstruction_error = (rebuilt - input).norm() * std::f64::consts::FRAC_1_SQRT_2;

    Ok(SkewFactorization {
        rank,
        a0: s * 2.0,
        frame,
        canonical_frame,
        skew_eigs,
        reconstruction_error,
        kernel_norm,
        rank_tol,
    })
}

/// `2√m · √(Σ a_i²)` over the positive imaginary parts `a_i`.
pub fn capacity_bound(f: &SkewFactorization) -> f64 {
    let m = f.m() as f64;
    2.0 * m.sqrt() * f.skew_eigs.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Frame functions `φ_a(t) = Σ U[(l,q), a] √(2q+1) P_q(2t-1) u_l`, one row each.
fn frame_from_columns(u: &DMatrix<f64>, k: usize, n: usize) -> Result<MatrixFunction> {
    let rank = u.ncols();
    let coeffs: Vec<Vec<Vec<f64>>> = (0..rank)
        .map(|a| {
            (0..k)
                .map(|l| (0..n).map(|q| u[(l * n + q, a)] * ((2 * q + 1) as f64).sqrt()).collect())
                .collect()
        })
        .collect();
    MatrixFunction::new(rank, k, Vec::new(), vec![coeffs])
}

/// Orthonormal pairs `(u_i, w_i)` with `S u_i = a_i w_i`, `S w_i = -a_i u_i`.
fn canonical_pairs(s: &DMatrix<f64>) -> Result<(Vec<(nalgebra::DVector<f64>, nalgebra::DVector<f64>)>, Vec<f64>)> {
    let r = s.nrows();
    let neg_sq = -(s * s);
    let neg_sq = (&neg_sq + neg_sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(neg_sq);
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
    let mut chosen: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut pairs = Vec::new();
    let mut amps = Vec::new();
    for i in idx {
        if pairs.len() == r / 2 {
            break;
        }
        let mut v = eig.eigenvectors.column(i).into_owned();
        for c in &chosen {
            let d = c.dot(&v);
            v.axpy(-d, c, 1.0);
        }
        let nv = v.norm();
        if nv < 0.5 {
            continue;
        }
        v /= nv;
        let sv = s * &v;
        let a = sv.norm();
        if !(a > 0.0) {
            return Err(err!(Numerical, MODULE, "degenerate block in the skew normal form"));
        }
        let w = sv / a;
        chosen.push(v.clone());
        chosen.push(w.clone());
        pairs.push((v, w));
        amps.push(a);
    }
    if pairs.len() != r / 2 {
        return Err(err!(Numerical, MODULE, "could not pair {} skew directions", r));
    }
    Ok((pairs, amps))
}

/// Coefficients of the kernel `sign · ½ Z_tᵀ J Z_τ` in the orthonormal
/// piecewise Legendre basis on the partition of `z`.
fn kernel_coefficients(z: &MatrixFunction, form: &SymplecticForm, sign: f64) -> DMatrix<f64> {
    let c = orthonormal_coefficients(z);
    (c.transpose() * form.matrix() * &c) * (0.5 * sign)
}

/// As `kernel_coefficients`, with `z` first refined to share partition and
/// coefficient length with `other`.
fn kernel_coefficients_on(
    z: &MatrixFunction,
    form: &SymplecticForm,
    sign: f64,
    other: &MatrixFunction,
) -> DMatrix<f64> {
    let merged = crate::matfun::merge_breakpoints(z.breakpoints(), other.breakpoints());
    let zr = z.refine(&merged).expect("refinement onto merged knots");
    let or = other.refine(&merged).expect("refinement onto merged knots");
    let len = zr.degree().max(or.degree()) + 1;
    let c = orthonormal_coefficients_len(&zr, len);
    (c.transpose() * form.matrix() * &c) * (0.5 * sign)
}

fn orthonormal_coefficients(z: &MatrixFunction) -> DMatrix<f64> {
    orthonormal_coefficients_len(z, z.degree() + 1)
}

/// `C[r, (l, piece, p)]`: coefficient of row r, column l against the
/// orthonormal basis function `√((2p+1)/(b-a)) P_p` on each piece.
fn orthonormal_coefficients_len(z: &MatrixFunction, len: usize) -> DMatrix<f64> {
    let pieces = z.pieces().len();
    let width = z.cols() * pieces * len;
    let mut c = DMatrix::zeros(z.rows(), width);
    for (pi, piece) in z.pieces().iter().enumerate() {
        let h = piece.interval[1] - piece.interval[0];
        for r in 0..z.rows() {
            for l in 0..z.cols() {
                for (p, v) in z.entry_coeffs(pi, r, l).iter().enumerate() {
                    c[(r, (l * pieces + pi) * len + p)] = v * (h / (2 * p + 1) as f64).sqrt();
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_z_has_rank_zero() {
        let spec = QuadraticFormSpec::volterra(MatrixFunction::zeros(2, 2)).unwrap();
        let f = skew_factorize(&spec, 8, 1e-9).unwrap();
        assert_eq!(f.rank, 0);
        assert_eq!(capacity_bound(&f), 0.0);
    }

    #[test]
    fn identity_z_factorization() {
        let spec = QuadraticFormSpec::volterra(MatrixFunction::identity(2)).unwrap();
        let f = skew_factorize(&spec, 16, 1e-9).unwrap();
        assert_eq!(f.rank, 2);
        assert!((f.skew_eigs[0] - 0.5).abs() < 1e-12);
        assert!((capacity_bound(&f) - 1.0).abs() < 1e-12);
        assert!(f.reconstruction_error < 1e-12 * f.kernel_norm.max(1.0));
        // Frame rows are L²-orthonormal.
        let gram = f.frame.mul(&f.frame.transpose()).unwrap().integrate(0.0, 1.0).unwrap();
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        assert!((&f.a0 + f.a0.transpose()).amax() < 1e-15);
    }
}
