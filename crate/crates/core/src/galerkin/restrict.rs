use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;

use super::{skew_norm, symmetrized, SubspaceSelector, MODULE};
use crate::error::{err, Result};
use crate::galerkin::assemble::{basis_values, quadrature_nodes};
use crate::matfun::MatrixFunction;

/// Relative singular-value cutoff for the rank of the constraint matrix.
const CONSTRAINT_RANK_TOL: f64 = 1e-10;

/// A Galerkin matrix compressed onto an orthonormal basis of the discrete
/// constraint null space and symmetrized.
#[derive(Debug, Clone, Serialize)]
pub struct RestrictedForm {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    /// Frobenius norm of the skew part before symmetrization.
    pub asymmetry_residual: f64,
    /// Number of independent constraints actually imposed.
    pub codimension: usize,
    /// Number of constraint functionals supplied.
    pub requested: usize,
    pub rank_deficient: bool,
    /// Columns: orthonormal basis of the retained subspace in Galerkin
    /// coordinates. `None` when no constraint was applied.
    #[serde(skip)]
    pub basis: Option<DMatrix<f64>>,
}

/// `C[i, l*N + q] = ∫ w_i,l(t) e_q(t) dt` for the selector's functionals.
pub fn constraint_matrix(selector: &SubspaceSelector, k: usize, n: usize) -> Result<Option<DMatrix<f64>>> {
    let w = match selector {
        SubspaceSelector::None => return Ok(None),
        SubspaceSelector::MomentConstraints { count } => SubspaceSelector::moment_functionals(*count, k)?,
        SubspaceSelector::Custom { functionals } => functionals.clone(),
    };
    if w.cols() != k {
        return Err(err!(Shape, MODULE, "constraint functionals have {} columns, expected {k}", w.cols()));
    }
    Ok(Some(functional_coefficients(&w, n)))
}

fn functional_coefficients(w: &MatrixFunction, n: usize) -> DMatrix<f64> {
    let k = w.cols();
    let (ts, ws) = quadrature_nodes(&w.knots(), n + w.degree() + 1);
    let e = basis_values(&ts, n);
    let mut c = DMatrix::zeros(w.rows(), k * n);
    for (i, &t) in ts.iter().enumerate() {
        let wt = w.eval_unchecked(t);
        for r in 0..w.rows() {
            for l in 0..k {
                let v = ws[i] * wt[(r, l)];
                if v == 0.0 {
                    continue;
                }
                for q in 0..n {
                    c[(r, l * n + q)] += v * e[(i, q)];
                }
            }
        }
    }
    c
}

/// Householder reflector `I - β v vᵀ` with `v` supported on indices `≥ start`.
struct Reflector {
    start: usize,
    v: DVector<f64>,
    beta: f64,
}

impl Reflector {
    /// Reflector mapping `x[start..]` onto a multiple of the first unit vector.
    fn annihilating(x: &DVector<f64>, start: usize) -> Option<Reflector> {
        let tail = x.rows(start, x.len() - start);
        let norm = tail.norm();
        if norm == 0.0 {
            return None;
        }
        let mut v: DVector<f64> = tail.into_owned();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vv = v.norm_squared();
        if vv == 0.0 {
            return None;
        }
        Some(Reflector { start, v, beta: 2.0 / vv })
    }

    fn apply_vec(&self, x: &mut DVector<f64>) {
        let len = self.v.len();
        let mut seg = x.rows_mut(self.start, len);
        let d = self.beta * self.v.dot(&seg);
        seg.axpy(-d, &self.v, 1.0);
    }

    /// `M ← H M H`.
    fn apply_two_sided(&self, m: &mut DMatrix<f64>) {
        let len = self.v.len();
        // Left: rows start..start+len.
        let rows = m.rows(self.start, len);
        let vt_m = rows.transpose() * &self.v;
        let mut rows = m.rows_mut(self.start, len);
        rows.ger(-self.beta, &self.v, &vt_m, 1.0);
        // Right: columns start..start+len.
        let cols = m.columns(self.start, len);
        let m_v = cols * &self.v;
        let mut cols = m.columns_mut(self.start, len);
        cols.ger(-self.beta, &m_v, &self.v, 1.0);
    }
}

/// Restricts `m` (size kN) to the null space of the selector's constraints.
///
/// With no selector the matrix is only symmetrized; the residual then
/// measures the full skew part. A rank-deficient constraint set is reported
/// through `rank_deficient` and the independent part is imposed.
pub fn restrict(m: &DMatrix<f64>, selector: &SubspaceSelector, n: usize) -> Result<RestrictedForm> {
    if m.nrows() != m.ncols() || n == 0 || !m.nrows().is_multiple_of(n) {
        return Err(err!(Shape, MODULE, "matrix of size {}x{} is not a multiple of N = {n}", m.nrows(), m.ncols()));
    }
    let k = m.nrows() / n;
    let Some(c) = constraint_matrix(selector, k, n)? else {
        return Ok(RestrictedForm {
            asymmetry_residual: skew_norm(m),
            matrix: symmetrized(m),
            codimension: 0,
            requested: 0,
            rank_deficient: false,
            basis: None,
        });
    };
    let requested = c.nrows();
    let dim = m.nrows();
    let svd = SVD::new(c.clone(), false, true);
    let vt = svd.v_t.as_ref().ok_or_else(|| err!(Numerical, MODULE, "constraint SVD failed"))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let rank_idx: Vec<usize> =
        order.into_iter().filter(|&i| smax > 0.0 && svd.singular_values[i] > CONSTRAINT_RANK_TOL * smax).collect();
    let codim = rank_idx.len();
    if codim >= dim {
        return Err(err!(Domain, MODULE, "constraints leave no subspace ({codim} independent constraints, dimension {dim})"));
    }

    // QR of the row-space basis by Householder reflectors.
    let mut panel = DMatrix::zeros(dim, codim);
    for (col, &i) in rank_idx.iter().enumerate() {
        panel.set_column(col, &vt.row(i).transpose());
    }
    let mut reflectors = Vec::with_capacity(codim);
    for col in 0..codim {
        let x = panel.column(col).into_owned();
        if let Some(h) = Reflector::annihilating(&x, col) {
            for c2 in col..codim {
                let mut y = panel.column(c2).into_owned();
                h.apply_vec(&mut y);
                panel.set_column(c2, &y);
            }
            reflectors.push(h);
        }
    }
    let mut work = m.clone();
    for h in &reflectors {
        h.apply_two_sided(&mut work);
    }
    let block = work.view((codim, codim), (dim - codim, dim - codim)).into_owned();

    let mut basis = DMatrix::zeros(dim, dim - codim);
    for j in 0..dim - codim {
        let mut x = DVector::zeros(dim);
        x[codim + j] = 1.0;
        for h in reflectors.iter().rev() {
            h.apply_vec(&mut x);
        }
        basis.set_column(j, &x);
    }

    Ok(RestrictedForm {
        asymmetry_residual: skew_norm(&block),
        matrix: symmetrized(&block),
        codimension: codim,
        requested,
        rank_deficient: codim < requested,
        basis: Some(basis),
    })
}
