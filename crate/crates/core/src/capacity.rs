//! The matrix family A_j(t) built from derivatives of Z, the pointwise μ
//! functions, and the predicted j-capacity.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{err, Result};
use crate::legendre;
use crate::matfun::{MatrixFunction, SymplecticForm};

const MODULE: &str = "capacity";

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_J_MAX: usize = 8;

/// Sup-norm test grid size for the "identically zero" decision.
const ZERO_TEST_GRID: usize = 256;
const BASE_NODES: usize = 64;
const QUAD_REL_TOL: f64 = 1e-9;
const MAX_PANEL_DOUBLINGS: usize = 10;

/// Capacity order: a positive integer or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(usize),
    Infinite,
}

impl Order {
    pub fn finite(self) -> Option<usize> {
        match self {
            Order::Finite(j) => Some(j),
            Order::Infinite => None,
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(j) => s.serialize_u64(*j as u64),
            Order::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(j) if j >= 1 => Ok(Order::Finite(j)),
            Raw::Str(s) if s == "infinity" => Ok(Order::Infinite),
            _ => Err(serde::de::Error::custom("order must be a positive integer or \"infinity\"")),
        }
    }
}

/// μ at one time: a single value for odd orders, a (plus, minus) pair for even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuValue {
    Single(f64),
    Pair(f64, f64),
}

impl MuValue {
    fn as_vec(self) -> Vec<f64> {
        match self {
            MuValue::Single(v) => vec![v],
            MuValue::Pair(p, m) => vec![p, m],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSample {
    pub t: f64,
    pub mu: Vec<f64>,
}

/// Predicted capacity and the data it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub order: Order,
    /// ξ for odd orders.
    pub value: Option<f64>,
    /// (ξ₊, ξ₋) for even orders.
    pub value_pair: Option<(f64, f64)>,
    pub mu_samples: Vec<MuSample>,
    pub remainder_order: f64,
    /// Relative change of ∫μ at the last panel doubling.
    pub quadrature_tol: f64,
    /// Zero-test details for every order examined.
    pub zero_test: ZeroTest,
}

impl Serialize for CapacityResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("order", &self.order)?;
        if let Some(v) = self.value {
            map.serialize_entry("value", &v)?;
        }
        if let Some((p, m)) = self.value_pair {
            map.serialize_entry("value_pair", &[p, m])?;
        }
        map.serialize_entry("mu_samples", &self.mu_samples)?;
        map.serialize_entry("remainder_order", &self.remainder_order)?;
        map.serialize_entry("quadrature_tol", &self.quadrature_tol)?;
        map.serialize_entry("zero_test", &self.zero_test)?;
        map.end()
    }
}

impl CapacityResult {
    /// Values as `(ξ₊, ξ₋)`; odd orders report ξ on both sides.
    pub fn sides(&self) -> Option<(f64, f64)> {
        match (self.value, self.value_pair) {
            (Some(v), _) => Some((v, v)),
            (_, Some(p)) => Some(p),
            _ => None,
        }
    }
}

/// Outcome of testing A_1, A_2, ... for vanishing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroTest {
    pub order: Order,
    /// Per examined order: (j, coefficient max, grid sup, threshold).
    pub checks: Vec<ZeroCheck>,
    /// Largest ratio grid_sup / threshold among orders declared zero;
    /// values close to 1 mean the decision was marginal.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroCheck {
    pub j: usize,
    pub coeff_norm: f64,
    pub grid_sup: f64,
    pub threshold: f64,
}

/// A_j(t) for a 2n x k function Z.
///
/// With `d = ceil(j/2) - 1`: odd `j` gives `(Z^(d))ᵀ J Z^(d)`, forced exactly
/// skew, and even `j` gives `(Z^(d))ᵀ J Z^(d+1)`.
pub fn build_aj(z: &MatrixFunction, j: usize, form: &SymplecticForm) -> Result<MatrixFunction> {
    if j == 0 {
        return Err(err!(Domain, MODULE, "order j must be at least 1"));
    }
    if z.rows() != form.dim() {
        return Err(err!(Shape, MODULE, "Z has {} rows but J is {}x{}", z.rows(), form.dim(), form.dim()));
    }
    let d = j.div_ceil(2) - 1;
    let low = z.derivative(d);
    if j % 2 == 1 {
        MatrixFunction::sandwich(&low, form, &low)?.skew_part_exact()
    } else {
        MatrixFunction::sandwich(&low, form, &z.derivative(d + 1))
    }
}

/// Smallest j ≤ j_max with A_j not identically zero.
///
/// A_j counts as nonzero only when both its largest Legendre coefficient and
/// its sup over a 256-point grid exceed `tol * max(1, scale)`, where `scale`
/// is the product of the grid sup-norms of the two derivatives of Z entering A_j.
pub fn first_nonzero_order(z: &MatrixFunction, form: &SymplecticForm, j_max: usize, tol: f64) -> Result<ZeroTest> {
    if !(tol > 0.0) {
        return Err(err!(Domain, MODULE, "tolerance must be positive, got {tol}"));
    }
    if j_max == 0 {
        return Err(err!(Domain, MODULE, "j_max must be at least 1"));
    }
    let mut checks = Vec::new();
    let mut margin: f64 = 0.0;
    for j in 1..=j_max {
        let aj = build_aj(z, j, form)?;
        let d = j.div_ceil(2) - 1;
        let s_low = z.derivative(d).sup_norm_on_grid(ZERO_TEST_GRID).0;
        let s_high = if j % 2 == 1 { s_low } else { z.derivative(d + 1).sup_norm_on_grid(ZERO_TEST_GRID).0 };
        let threshold = tol * (s_low * s_high).max(1.0);
        let coeff_norm = aj.coeff_max_abs();
        let grid_sup = aj.sup_norm_on_grid(ZERO_TEST_GRID).0;
        checks.push(ZeroCheck { j, coeff_norm, grid_sup, threshold });
        if coeff_norm > threshold && grid_sup > threshold {
            return Ok(ZeroTest { order: Order::Finite(j), checks, margin });
        }
        margin = margin.max(grid_sup / threshold);
    }
    Ok(ZeroTest { order: Order::Infinite, checks, margin })
}

/// μ of a single matrix value of A_j.
pub fn mu_at_matrix(a: &DMatrix<f64>, j: usize) -> Result<MuValue> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(err!(Numerical, MODULE, "A_j has non-finite entries"));
    }
    let root = 1.0 / j as f64;
    if j % 2 == 1 {
        // Singular values of a skew matrix come in equal pairs ρ, ρ for each
        // eigenvalue pair ±iρ; summing all of them counts every ρ twice.
        let sv = a.clone().singular_values();
        if sv.iter().any(|v| !v.is_finite()) {
            return Err(err!(Numerical, MODULE, "non-finite singular values of skew A_j"));
        }
        Ok(MuValue::Single(0.5 * sv.iter().map(|s| s.max(0.0).powf(root)).sum::<f64>()))
    } else {
        let sym = (a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        if eig.iter().any(|v| !v.is_finite()) {
            return Err(err!(Numerical, MODULE, "non-finite eigenvalues of symmetric A_j"));
        }
        let plus = eig.iter().filter(|v| **v > 0.0).map(|v| v.powf(root)).sum();
        let minus = eig.iter().filter(|v| **v < 0.0).map(|v| (-v).powf(root)).sum();
        Ok(MuValue::Pair(plus, minus))
    }
}

/// μ profile of A_j sampled at the base quadrature nodes of each piece.
pub fn mu_profile(aj: &MatrixFunction, j: usize) -> Result<Vec<MuSample>> {
    if j == 0 {
        return Err(err!(Domain, MODULE, "order j must be at least 1"));
    }
    let rule = legendre::gauss_legendre(BASE_NODES);
    let mut out = Vec::new();
    for w in aj.knots().windows(2) {
        let (xs, _) = rule.mapped(w[0], w[1]);
        for t in xs {
            out.push(MuSample { t, mu: mu_at_matrix(&aj.eval(t)?, j)?.as_vec() });
        }
    }
    Ok(out)
}

/// ∫₀¹ μ dt per component, by composite Gauss rules refined until the
/// relative change drops below 1e-9. Returns the integrals and the last
/// relative change.
pub fn integrate_mu(aj: &MatrixFunction, j: usize) -> Result<(Vec<f64>, f64)> {
    let rule = legendre::gauss_legendre(BASE_NODES);
    let width = if j % 2 == 1 { 1 } else { 2 };
    let composite = |panels: usize| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; width];
        for w in aj.knots().windows(2) {
            let h = (w[1] - w[0]) / panels as f64;
            for p in 0..panels {
                let a = w[0] + h * p as f64;
                let (xs, ws) = rule.mapped(a, a + h);
                for (t, wt) in xs.into_iter().zip(ws) {
                    for (dst, v) in acc.iter_mut().zip(mu_at_matrix(&aj.eval(t)?, j)?.as_vec()) {
                        *dst += wt * v;
                    }
                }
            }
        }
        Ok(acc)
    };
    let mut panels = 1;
    let mut prev = composite(panels)?;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_PANEL_DOUBLINGS {
        panels *= 2;
        let cur = composite(panels)?;
        change = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| if b.abs() > 0.0 { (a - b).abs() / b.abs() } else { (a - b).abs() })
            .fold(0.0, f64::max);
        prev = cur;
        if change < QUAD_REL_TOL {
            break;
        }
    }
    Ok((prev, change))
}

/// Capacity predicted from the first non-vanishing A_j.
pub fn predict_capacity(z: &MatrixFunction, form: &SymplecticForm, j_max: usize, tol: f64) -> Result<CapacityResult> {
    let zero_test = first_nonzero_order(z, form, j_max, tol)?;
    let Order::Finite(j) = zero_test.order else {
        return Ok(CapacityResult {
            order: Order::Infinite,
            value: None,
            value_pair: None,
            mu_samples: Vec::new(),
            remainder_order: 0.5,
            quadrature_tol: 0.0,
            zero_test,
        });
    };
    let aj = build_aj(z, j, form)?;
    capacity_from_aj(&aj, j, zero_test)
}

/// Capacity for a known order j from A_j directly.
pub fn capacity_from_aj(aj: &MatrixFunction, j: usize, zero_test: ZeroTest) -> Result<CapacityResult> {
    let (integrals, quadrature_tol) = integrate_mu(aj, j)?;
    let jf = j as i32;
    let (value, value_pair) = if j % 2 == 1 {
        (Some(integrals[0].powi(jf)), None)
    } else {
        (None, Some((integrals[0].powi(jf), integrals[1].powi(jf))))
    };
    Ok(CapacityResult {
        order: Order::Finite(j),
        value,
        value_pair,
        mu_samples: mu_profile(aj, j)?,
        remainder_order: 0.5,
        quadrature_tol,
        zero_test,
    })
}
