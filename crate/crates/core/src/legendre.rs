//! Legendre series on the reference interval [-1, 1] and Gauss–Legendre rules.
//!
//! Coefficient vectors `c` represent `f(x) = Σ c[p] P_p(x)`. All operations
//! (derivative, antiderivative, product) are closed-form coefficient maps, so
//! they stay exact up to floating-point rounding.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes and weights mapped affinely onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|&s| mid + half * s).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Cached Gauss–Legendre rule with `n` points.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.lock().unwrap().insert(n, Arc::clone(&rule));
    rule
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1, "Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values P_0(x), ..., P_{n-1}(x).
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push(x);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Evaluates a Legendre series at x (Clenshaw recurrence).
pub fn eval(c: &[f64], x: f64) -> f64 {
    let n = c.len();
    match n {
        0 => 0.0,
        1 => c[0],
        _ => {
            let mut b1 = 0.0;
            let mut b2 = 0.0;
            for k in (1..n).rev() {
                let kf = k as f64;
                let alpha = (2.0 * kf + 1.0) / (kf + 1.0) * x;
                let beta = -(kf + 1.0) / (kf + 2.0);
                let b0 = c[k] + alpha * b1 + beta * b2;
                b2 = b1;
                b1 = b0;
            }
            c[0] + x * b1 - 0.5 * b2
        }
    }
}

/// Coefficients of d/dx of the series. Output has length `max(len - 1, 1)`.
pub fn derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut work = c.to_vec();
    let mut der = vec![0.0; n - 1];
    for j in (2..n).rev() {
        der[j - 1] = (2 * j - 1) as f64 * work[j];
        work[j - 2] += work[j];
    }
    der[0] = work[1];
    der
}

/// Antiderivative vanishing at x = -1. Output has length `len + 1`.
pub fn antiderivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n == 0 {
        return vec![0.0];
    }
    let mut out = vec![0.0; n + 1];
    out[1] = c[0];
    for j in 1..n {
        let t = c[j] / (2 * j + 1) as f64;
        out[j + 1] += t;
        out[j - 1] -= t;
    }
    // Fix the constant so the antiderivative vanishes at -1.
    let at_minus_one: f64 = out
        .iter()
        .enumerate()
        .map(|(p, &v)| if p % 2 == 0 { v } else { -v })
        .sum();
    out[0] -= at_minus_one;
    out
}

/// Multiplies the series by x.
pub fn mulx(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n + 1];
    if n == 0 {
        return out;
    }
    out[1] = c[0];
    for i in 1..n {
        let s = (2 * i + 1) as f64;
        out[i + 1] += c[i] * (i + 1) as f64 / s;
        out[i - 1] += c[i] * i as f64 / s;
    }
    out
}

/// Product of two series; result has degree `deg(a) + deg(b)`.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let (a, b) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let len = a.len() + b.len() - 1;
    let mut out = vec![0.0; len];
    // q_i = P_i · b, built with the Legendre recurrence applied to series.
    let mut prev: Vec<f64> = b.to_vec();
    let mut cur: Vec<f64> = mulx(b);
    accumulate(&mut out, a[0], &prev);
    if a.len() > 1 {
        accumulate(&mut out, a[1], &cur);
    }
    for i in 1..a.len().saturating_sub(1) {
        let fi = i as f64;
        let xcur = mulx(&cur);
        let mut next = vec![0.0; xcur.len()];
        for (p, v) in next.iter_mut().enumerate() {
            let lower = prev.get(p).copied().unwrap_or(0.0);
            *v = ((2.0 * fi + 1.0) * xcur[p] - fi * lower) / (fi + 1.0);
        }
        accumulate(&mut out, a[i + 1], &next);
        prev = cur;
        cur = next;
    }
    out
}

fn accumulate(out: &mut [f64], scale: f64, series: &[f64]) {
    if scale == 0.0 {
        return;
    }
    for (o, s) in out.iter_mut().zip(series) {
        *o += scale * s;
    }
}

/// Least-squares projection of samples taken at the nodes of `rule` onto
/// Legendre polynomials of degree `< len`. Exact for polynomials whenever
/// `2 * (len - 1) < 2 * rule.len()`.
pub fn project(rule: &GaussRule, samples: &[f64], len: usize) -> Vec<f64> {
    let mut c = vec![0.0; len];
    for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let vals = legendre_values(len, x);
        let fw = w * samples[i];
        for (p, v) in vals.iter().enumerate() {
            c[p] += fw * v;
        }
    }
    for (p, cp) in c.iter_mut().enumerate() {
        *cp *= (2 * p + 1) as f64 / 2.0;
    }
    c
}

/// Monomial coefficients (in x on [-1, 1]) converted to Legendre coefficients.
pub fn from_monomial(m: &[f64]) -> Vec<f64> {
    // Horner in series arithmetic: f = m0 + x (m1 + x (m2 + ...)).
    let mut acc = vec![0.0];
    for &coef in m.iter().rev() {
        acc = mulx(&acc);
        acc[0] += coef;
    }
    trim_len(&mut acc, m.len().max(1));
    acc
}

fn trim_len(c: &mut Vec<f64>, len: usize) {
    c.truncate(len);
}

/// Integral over [-1, 1] of P_p: 2 for p = 0, zero otherwise.
pub fn definite_integral(c: &[f64]) -> f64 {
    c.first().map_or(0.0, |c0| 2.0 * c0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64, 257, 700] {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!(close(wsum, 2.0, 1e-13), "n={n} weight sum {wsum}");
            // ∫ x^{2n-2} over [-1,1] = 2/(2n-1)
            let deg = 2 * n - 2;
            let integral: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            assert!(close(integral, 2.0 / (deg as f64 + 1.0), 1e-12), "n={n}");
        }
    }

    #[test]
    fn clenshaw_matches_recurrence() {
        let c = [0.3, -1.2, 0.7, 2.0, -0.4];
        for &x in &[-1.0, -0.3, 0.0, 0.55, 1.0] {
            let vals = legendre_values(c.len(), x);
            let direct: f64 = c.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!(close(eval(&c, x), direct, 1e-14));
        }
    }

    #[test]
    fn derivative_inverts_antiderivative() {
        let c = [1.0, 2.0, -3.0, 0.5, 0.25];
        let back = derivative(&antiderivative(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!(close(*a, *b, 1e-14));
        }
        assert!(eval(&antiderivative(&c), -1.0).abs() < 1e-14);
    }

    #[test]
    fn product_matches_pointwise() {
        let a = [0.5, -1.0, 0.25, 2.0];
        let b = [1.0, 0.0, -0.5, 0.3, 0.1, -0.7];
        let p = mul(&a, &b);
        assert_eq!(p.len(), a.len() + b.len() - 1);
        for &x in &[-0.9, -0.2, 0.4, 0.99] {
            assert!(close(eval(&p, x), eval(&a, x) * eval(&b, x), 1e-13));
        }
    }

    #[test]
    fn monomial_conversion() {
        // 1 + 2x + 3x^2
        let c = from_monomial(&[1.0, 2.0, 3.0]);
        for &x in &[-1.0, 0.3, 1.0] {
            assert!(close(eval(&c, x), 1.0 + 2.0 * x + 3.0 * x * x, 1e-14));
        }
    }
}
