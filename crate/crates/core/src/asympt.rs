//! Counting functions, capacity fits from computed spectra, and checks of
//! capacity arithmetic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::capacity::Order;
use crate::error::{err, Result};
use crate::galerkin::SpectrumResult;

const MODULE: &str = "asympt";

/// Fewest entries a sign needs inside the window to be fitted.
pub const MIN_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Inclusive range of 1-based eigenvalue indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start: start.max(1), end }
    }

    /// `[N/12, N/6]` for a basis of size N.
    pub fn default_for(n: usize) -> Self {
        Self::new(n / 12, n / 6)
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `C_j(n) = #{l : |λ_l| > n^{-j}}` on one side of the spectrum.
pub fn counting_function(spectrum: &SpectrumResult, j: usize, n: f64, sign: Sign) -> usize {
    if j == 0 || !(n > 0.0) {
        return 0;
    }
    let threshold = n.powi(-(j as i32));
    let side = match sign {
        Sign::Plus => &spectrum.positive,
        Sign::Minus => &spectrum.negative,
    };
    // Arrangements are sorted by decreasing magnitude.
    side.partition_point(|v| v.abs() > threshold)
}

/// Fit of one side of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideFit {
    /// Least-squares slope of ln|λ_n| against ln n.
    pub slope: f64,
    /// Median of |λ_n| (π n)^j over the window, for the common order j.
    pub value: f64,
    /// Max relative deviation of |λ_n| (π n)^j from `value`.
    pub residual: f64,
    /// Entries used.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityFit {
    /// Real slope estimate (negated, averaged over fitted sides).
    pub slope: f64,
    pub order: Order,
    /// ξ for odd orders: mean of the fitted sides.
    pub value: Option<f64>,
    /// (ξ₊, ξ₋) for even orders; an unfitted side reads 0.
    pub value_pair: Option<(f64, f64)>,
    pub window: Window,
    pub residual: f64,
    pub plus: Option<SideFit>,
    pub minus: Option<SideFit>,
}

impl CapacityFit {
    /// Values as `(ξ₊, ξ₋)` from the per-side fits, 0 where absent.
    pub fn sides(&self) -> (f64, f64) {
        (self.plus.as_ref().map_or(0.0, |f| f.value), self.minus.as_ref().map_or(0.0, |f| f.value))
    }

    /// The single value for odd orders or the larger side for even ones.
    pub fn headline(&self) -> Option<f64> {
        self.value.or(self.value_pair.map(|(p, m)| p.max(m)))
    }
}

fn side_points(side: &[f64], window: Window) -> Vec<(f64, f64)> {
    (window.start..=window.end)
        .filter_map(|n| side.get(n - 1).map(|v| (n as f64, v.abs())))
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .collect()
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn value_fit(points: &[(f64, f64)], j: usize, slope: f64) -> SideFit {
    let scaled: Vec<f64> = points.iter().map(|(n, v)| v * (PI * n).powi(j as i32)).collect();
    let value = median(scaled.clone());
    let residual = scaled.iter().map(|x| (x / value - 1.0).abs()).fold(0.0, f64::max);
    SideFit { slope, value, residual, count: points.len() }
}

/// Estimates order and capacity from the eigenvalues with indices in `window`.
///
/// Each sign with at least eight entries in the window is fitted; signs with
/// fewer count as absent. The order is the rounded negated mean slope, and
/// capacity is declared infinite when that slope exceeds `j_max + 1/2` or no
/// side can be fitted.
pub fn fit_capacity(spectrum: &SpectrumResult, window: Window, j_max: usize) -> Result<CapacityFit> {
    if window.len() < MIN_WINDOW {
        return Err(err!(Domain, MODULE, "window {}..={} has fewer than {MIN_WINDOW} indices", window.start, window.end));
    }
    let plus_pts = side_points(&spectrum.positive, window);
    let minus_pts = side_points(&spectrum.negative, window);
    let plus_pts = (plus_pts.len() >= MIN_WINDOW).then_some(plus_pts);
    let minus_pts = (minus_pts.len() >= MIN_WINDOW).then_some(minus_pts);
    let slopes: Vec<f64> = [&plus_pts, &minus_pts].iter().filter_map(|p| p.as_ref().map(|p| ls_slope(p))).collect();
    let infinite = CapacityFit {
        slope: f64::NEG_INFINITY,
        order: Order::Infinite,
        value: None,
        value_pair: None,
        window,
        residual: 0.0,
        plus: None,
        minus: None,
    };
    if slopes.is_empty() {
        return Ok(infinite);
    }
    let slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    if -slope > j_max as f64 + 0.5 {
        return Ok(CapacityFit { slope, ..infinite });
    }
    let j = ((-slope).round() as usize).max(1);
    let plus = plus_pts.map(|p| {
        let s = ls_slope(&p);
        value_fit(&p, j, s)
    });
    let minus = minus_pts.map(|p| {
        let s = ls_slope(&p);
        value_fit(&p, j, s)
    });
    let residual = [&plus, &minus].iter().filter_map(|f| f.as_ref().map(|f| f.residual)).fold(0.0, f64::max);
    let (value, value_pair) = if j % 2 == 1 {
        let vals: Vec<f64> = [&plus, &minus].iter().filter_map(|f| f.as_ref().map(|f| f.value)).collect();
        (Some(vals.iter().sum::<f64>() / vals.len() as f64), None)
    } else {
        (None, Some((plus.as_ref().map_or(0.0, |f| f.value), minus.as_ref().map_or(0.0, |f| f.value))))
    };
    Ok(CapacityFit { slope, order: Order::Finite(j), value, value_pair, window, residual, plus, minus })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditivityReport {
    pub pass: bool,
    pub order: Option<usize>,
    /// Expected `(ξ₊, ξ₋)` of the sum.
    pub expected: (f64, f64),
    pub observed: (f64, f64),
    pub max_rel_error: f64,
    pub message: String,
}

/// Checks that the capacity of a direct sum is `(ʲ√ξ₁ + ʲ√ξ₂)ʲ`, side by side.
pub fn check_additivity(fit1: &CapacityFit, fit2: &CapacityFit, merged: &CapacityFit, tol: f64) -> AdditivityReport {
    let fail = |message: String| AdditivityReport {
        pass: false,
        order: None,
        expected: (0.0, 0.0),
        observed: merged.sides(),
        max_rel_error: f64::INFINITY,
        message,
    };
    let (Some(j1), Some(j2), Some(jm)) = (fit1.order.finite(), fit2.order.finite(), merged.order.finite()) else {
        return fail("additivity needs finite orders".into());
    };
    if j1 != j2 || j1 != jm {
        return fail(format!("order mismatch: {j1}, {j2}, merged {jm}"));
    }
    let root = 1.0 / j1 as f64;
    let combine = |a: f64, b: f64| (a.powf(root) + b.powf(root)).powi(j1 as i32);
    let (p1, m1) = fit1.sides();
    let (p2, m2) = fit2.sides();
    let expected = (combine(p1, p2), combine(m1, m2));
    let observed = merged.sides();
    let rel = |e: f64, o: f64| if o == 0.0 && e == 0.0 { 0.0 } else { (o - e).abs() / o.abs().max(e.abs()) };
    let max_rel_error = rel(expected.0, observed.0).max(rel(expected.1, observed.1));
    AdditivityReport {
        pass: max_rel_error <= tol,
        order: Some(j1),
        expected,
        observed,
        max_rel_error,
        message: format!("relative deviation {max_rel_error:.3e} against tolerance {tol:.1e}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterlacingReport {
    pub pass: bool,
    pub codimension: usize,
    pub compared: usize,
    pub violations: usize,
    /// Largest violation magnitude (0 when none).
    pub worst: f64,
}

/// Verifies `λ_n(Q|U) ≤ λ_n(Q) ≤ λ_{n-d}(Q|U)` on both sides, treating
/// arrangements as padded with zeros.
pub fn check_restriction_stability(full: &SpectrumResult, restricted: &SpectrumResult, d: usize) -> InterlacingReport {
    let scale = full
        .positive
        .iter()
        .chain(&full.negative)
        .chain(&restricted.positive)
        .chain(&restricted.negative)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut compared = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (a, b) in [(&full.positive, &restricted.positive), (&full.negative, &restricted.negative)] {
        let get = |s: &Vec<f64>, n: usize| s.get(n - 1).map_or(0.0, |v| v.abs());
        let len = a.len().max(b.len() + d);
        for n in 1..=len {
            compared += 1;
            let lo = get(b, n);
            let mid = get(a, n);
            let hi = if n > d { get(b, n - d) } else { f64::INFINITY };
            let excess = (lo - mid).max(mid - hi).max(0.0);
            if excess > tol {
                violations += 1;
                worst = worst.max(excess);
            }
        }
    }
    InterlacingReport { pass: violations == 0, codimension: d, compared, violations, worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(pos: impl Fn(usize) -> f64, neg: impl Fn(usize) -> f64, count: usize) -> SpectrumResult {
        SpectrumResult {
            positive: (1..=count).map(&pos).filter(|v| *v > 0.0).collect(),
            negative: (1..=count).map(&neg).filter(|v| *v < 0.0).collect(),
            asymmetry_residual: 0.0,
            discretization: count,
        }
    }

    #[test]
    fn counting_examples() {
        let empty = synthetic(|_| 0.0, |_| 0.0, 0);
        assert_eq!(counting_function(&empty, 1, 10.0, Sign::Plus), 0);
        let ideal = synthetic(|l| 1.0 / (PI * l as f64), |_| 0.0, 1000);
        for n in [5.0, 31.4, 100.0, 250.0] {
            // λ_l > 1/n  ⟺  l < n/π
            let expected = (1..=1000).filter(|&l| (l as f64) < n / PI).count();
            assert_eq!(counting_function(&ideal, 1, n, Sign::Plus), expected);
        }
    }

    #[test]
    fn fit_exact_sequences() {
        let s = synthetic(|n| 1.0 / (PI * n as f64), |_| 0.0, 200);
        let f = fit_capacity(&s, Window::new(10, 40), 8).unwrap();
        assert_eq!(f.order, Order::Finite(1));
        assert!((f.value.unwrap() - 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);

        let s = synthetic(|n| 5.0 / (PI * n as f64).powi(2), |n| -3.0 / (PI * n as f64).powi(2), 200);
        let f = fit_capacity(&s, Window::new(10, 40), 8).unwrap();
        assert_eq!(f.order, Order::Finite(2));
        let (p, m) = f.value_pair.unwrap();
        assert!((p - 5.0).abs() < 1e-13 && (m - 3.0).abs() < 1e-13);
    }

    #[test]
    fn fast_decay_is_infinite() {
        let s = synthetic(|n| (-(n as f64)).exp(), |_| 0.0, 60);
        let f = fit_capacity(&s, Window::new(20, 40), 8).unwrap();
        assert_eq!(f.order, Order::Infinite);
        let empty = synthetic(|_| 0.0, |_| 0.0, 0);
        assert_eq!(fit_capacity(&empty, Window::new(1, 20), 8).unwrap().order, Order::Infinite);
    }

    #[test]
    fn small_window_is_an_error() {
        let s = synthetic(|n| 1.0 / n as f64, |_| 0.0, 50);
        assert!(fit_capacity(&s, Window::new(10, 16), 8).is_err());
    }

    #[test]
    fn additivity_examples() {
        let mk = |j: usize, xi: f64| {
            let s = synthetic(|n| xi / (PI * n as f64).powi(j as i32), |_| 0.0, 400);
            fit_capacity(&s, Window::new(20, 60), 8).unwrap()
        };
        let (a, b) = (mk(1, 1.0), mk(1, 1.0));
        let fake = mk(1, 2.0);
        let r = check_additivity(&a, &b, &fake, 1e-12);
        assert!(r.pass, "{r:?}");
        assert!((r.expected.0 - 2.0).abs() < 1e-12);
        let r = check_additivity(&mk(2, 4.0), &mk(2, 9.0), &mk(2, 25.0), 1e-12);
        assert!(r.pass);
        assert!((r.expected.0 - 25.0).abs() < 1e-12);
        assert!(!check_additivity(&mk(1, 1.0), &mk(2, 1.0), &mk(2, 1.0), 0.1).pass);
    }

    #[test]
    fn interlacing_examples() {
        let full = synthetic(|n| [3.0, 2.0, 1.0].get(n - 1).copied().unwrap_or(0.0), |_| 0.0, 3);
        let r0 = check_restriction_stability(&full, &full, 0);
        assert!(r0.pass);
        let restricted = synthetic(|n| [2.0, 1.0].get(n - 1).copied().unwrap_or(0.0), |_| 0.0, 2);
        assert!(check_restriction_stability(&full, &restricted, 1).pass);
        let wrong = synthetic(|n| [5.0, 1.0].get(n - 1).copied().unwrap_or(0.0), |_| 0.0, 2);
        assert!(!check_restriction_stability(&full, &wrong, 1).pass);
    }
}
