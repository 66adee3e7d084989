//! Closed-form spectra of the constant-coefficient model problems, direct-sum
//! merging, and the index-shift eigenvalue bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{err, Result};
use crate::galerkin::SpectrumResult;

const MODULE: &str = "modelbvp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// Order 2k.
    Even,
    /// Order 2k - 1.
    Odd,
}

/// Model problem with coefficient `mu`, half-order `k` and interval length `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpectrum {
    pub mu: f64,
    pub k: usize,
    pub length: f64,
    pub parity: Parity,
}

impl ModelSpectrum {
    pub fn new(mu: f64, k: usize, length: f64, parity: Parity) -> Result<Self> {
        if k == 0 {
            return Err(err!(Domain, MODULE, "half-order k must be at least 1"));
        }
        if !(length > 0.0 && length <= 1.0) {
            return Err(err!(Domain, MODULE, "length must lie in (0, 1], got {length}"));
        }
        if !mu.is_finite() {
            return Err(err!(Domain, MODULE, "mu must be finite"));
        }
        Ok(Self { mu, k, length, parity })
    }

    /// Decay order j: 2k for even parity, 2k - 1 for odd.
    pub fn order(&self) -> usize {
        match self.parity {
            Parity::Even => 2 * self.k,
            Parity::Odd => 2 * self.k - 1,
        }
    }

    /// Leading constant ξ in λ_r ≈ ξ / (π r)^j, per sign `(ξ₊, ξ₋)`.
    pub fn capacity(&self) -> (f64, f64) {
        let xi = self.mu.abs() * self.length.powi(self.order() as i32);
        match self.parity {
            Parity::Odd => (xi, xi),
            Parity::Even if self.mu > 0.0 => (xi, 0.0),
            Parity::Even if self.mu < 0.0 => (0.0, xi),
            Parity::Even => (0.0, 0.0),
        }
    }

    /// `|λ_r|` for r ≥ 1 on whichever side is populated.
    pub fn magnitude(&self, r: usize) -> f64 {
        let j = self.order() as i32;
        let pair = r.div_ceil(2) as f64;
        self.mu.abs() * self.length.powi(j) / (2.0 * PI * pair).powi(j)
    }

    /// Positive arrangement λ₁ ≥ λ₂ ≥ ..., lazily; empty when no positive part.
    pub fn positive(&self) -> impl Iterator<Item = f64> + '_ {
        let on = self.mu != 0.0 && (self.parity == Parity::Odd || self.mu > 0.0);
        (1..).take_while(move |_| on).map(move |r| self.magnitude(r))
    }

    /// Negative arrangement λ₋₁ ≤ λ₋₂ ≤ ..., lazily. For odd parity this is
    /// the exact mirror of the positive side.
    pub fn negative(&self) -> impl Iterator<Item = f64> + '_ {
        let on = self.mu != 0.0 && (self.parity == Parity::Odd || self.mu < 0.0);
        (1..).take_while(move |_| on).map(move |r| -self.magnitude(r))
    }

    /// Both arrangements truncated to `count` entries each.
    pub fn spectrum(&self, count: usize) -> SpectrumResult {
        SpectrumResult {
            positive: self.positive().take(count).collect(),
            negative: self.negative().take(count).collect(),
            asymmetry_residual: 0.0,
            discretization: 0,
        }
    }

    /// `#{r ≥ 1 : |λ_r| ≥ s}` from the closed form.
    pub fn count_at_least(&self, s: f64) -> usize {
        if self.mu == 0.0 || !(s > 0.0) {
            return 0;
        }
        let j = self.order() as f64;
        let x = (self.mu.abs() * self.length.powf(j) / s).powf(1.0 / j) / (2.0 * PI);
        let mut pairs = x.floor() as usize;
        // Guard the floor against rounding at exact eigenvalues.
        while self.magnitude(2 * pairs + 1) >= s {
            pairs += 1;
        }
        while pairs > 0 && self.magnitude(2 * pairs) < s {
            pairs -= 1;
        }
        2 * pairs
    }
}

/// First `count` entries of the model's arrangement: the positive side, or
/// the negative side when only that one is populated.
pub fn exact_spectrum(model: &ModelSpectrum, count: usize) -> Vec<f64> {
    if model.mu == 0.0 {
        return Vec::new();
    }
    if model.parity == Parity::Even && model.mu < 0.0 {
        model.negative().take(count).collect()
    } else {
        model.positive().take(count).collect()
    }
}

/// Merged monotone arrangement (by decreasing magnitude) of several
/// arrangements of the same sign, truncated to `count`.
pub fn merge_direct_sum(spectra: &[Vec<f64>], count: usize) -> Vec<f64> {
    let mut heads = vec![0usize; spectra.len()];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut best: Option<usize> = None;
        for (i, s) in spectra.iter().enumerate() {
            if let Some(v) = s.get(heads[i]) {
                if best.is_none_or(|b| v.abs() > spectra[b][heads[b]].abs()) {
                    best = Some(i);
                }
            }
        }
        let Some(b) = best else { break };
        out.push(spectra[b][heads[b]]);
        heads[b] += 1;
    }
    out
}

/// Direct sum of signed spectra, each side merged separately.
pub fn merge_spectra(spectra: &[SpectrumResult], count: usize) -> SpectrumResult {
    let pos: Vec<Vec<f64>> = spectra.iter().map(|s| s.positive.clone()).collect();
    let neg: Vec<Vec<f64>> = spectra.iter().map(|s| s.negative.clone()).collect();
    SpectrumResult {
        positive: merge_direct_sum(&pos, count),
        negative: merge_direct_sum(&neg, count),
        asymmetry_residual: spectra.iter().map(|s| s.asymmetry_residual).fold(0.0, f64::max),
        discretization: spectra.iter().map(|s| s.discretization).max().unwrap_or(0),
    }
}

/// Two-sided bounds `(lower, upper)` on the r-th eigenvalue magnitude of a
/// form whose j-capacity equals the model's, perturbed by an index shift of
/// at most `2mk` plus the parity correction. The upper bound is infinite
/// when the shifted index is not positive.
pub fn shift_bounds(model: &ModelSpectrum, m: usize, r: usize) -> Result<(f64, f64)> {
    let threshold = (m * model.k).max(1);
    if r < threshold {
        return Err(err!(Domain, MODULE, "index r = {r} is below the validity threshold {threshold}"));
    }
    let (xi_p, xi_m) = model.capacity();
    let xi = xi_p.max(xi_m);
    let j = model.order() as i32;
    let p = (r % 2) as i64;
    let shift = 2 * (m * model.k) as i64 + p;
    let r = r as i64;
    let lower = xi / (PI * (r + shift) as f64).powi(j);
    let upper = if r - shift > 0 { xi / (PI * (r - shift) as f64).powi(j) } else { f64::INFINITY };
    Ok((lower, upper))
}

/// CSV table `r,eigenvalue` with negative indices for the negative side.
pub fn to_csv(spectrum: &SpectrumResult) -> String {
    let mut out = String::from("r,eigenvalue\n");
    for (i, v) in spectrum.negative.iter().enumerate().rev() {
        out.push_str(&format!("{},{}\n", -(i as i64 + 1), v));
    }
    for (i, v) in spectrum.positive.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}
