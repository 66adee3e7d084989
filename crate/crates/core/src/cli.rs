//! Batch front-end: reads a problem spec, runs the requested analyses and
//! writes one artifact per analysis plus a summary with cross-checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asympt::{self, CapacityFit, Window};
use crate::capacity::{self, CapacityResult, Order};
use crate::control;
use crate::error::{Error, Result};
use crate::galerkin::{self, QuadraticFormSpec, SkewFactorization, SpectrumResult, SubspaceSelector};
use crate::matfun::{MatrixFunction, SymplecticForm};
use crate::modelbvp::{self, ModelSpectrum, Parity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Capacity,
    Spectrum,
    Fit,
    Factorize,
    Bound,
    Conditions,
    Realize,
    Model,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: f64,
    pub k: usize,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "even")]
    pub parity: Parity,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn one() -> f64 {
    1.0
}
fn even() -> Parity {
    Parity::Even
}
fn default_count() -> usize {
    100
}
fn default_n() -> usize {
    galerkin::DEFAULT_BASIS_SIZE
}
fn default_tol() -> f64 {
    capacity::DEFAULT_TOL
}
fn default_j_max() -> usize {
    capacity::DEFAULT_J_MAX
}
fn default_fit_tolerance() -> f64 {
    0.05
}

/// Problem description read from JSON. Paths are relative to the spec file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub z: Option<PathBuf>,
    #[serde(default)]
    pub h: Option<PathBuf>,
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub window: Option<[usize; 2]>,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default)]
    pub selector: Option<SubspaceSelector>,
    /// Relative tolerance for predicted-versus-fitted capacity.
    #[serde(default = "default_fit_tolerance")]
    pub fit_tolerance: f64,
    #[serde(default)]
    pub model: Option<ModelParams>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid { module: "cli", msg });
        if self.analyses.is_empty() {
            return bad("no analyses requested".into());
        }
        if !(4..=2048).contains(&self.n) {
            return bad(format!("n = {} outside [4, 2048]", self.n));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return bad(format!("tol = {} outside (0, 1e-2]", self.tol));
        }
        if !(1..=16).contains(&self.j_max) {
            return bad(format!("j_max = {} outside [1, 16]", self.j_max));
        }
        if !(self.fit_tolerance > 0.0 && self.fit_tolerance < 1.0) {
            return bad(format!("fit_tolerance = {} outside (0, 1)", self.fit_tolerance));
        }
        if let Some([a, b]) = self.window {
            if a == 0 || b < a + asympt::MIN_WINDOW - 1 {
                return bad(format!("window [{a}, {b}] must start at 1 or later and hold at least {} indices", asympt::MIN_WINDOW));
            }
        }
        let needs_z = self.analyses.iter().any(|a| *a != Analysis::Model);
        if needs_z && self.z.is_none() {
            return bad("analyses other than `model` need a `z` file".into());
        }
        if self.analyses.contains(&Analysis::Model) && self.model.is_none() {
            return bad("`model` analysis needs a `model` block".into());
        }
        Ok(())
    }
}

/// Options that do not belong to the problem itself.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    pub verbose: bool,
}

/// Outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    FailedCheck,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::FailedCheck => 2,
        }
    }
}

/// Exit code for a finished or failed run: 0 ok, 2 failed cross-check, 1 error.
pub fn exit_code(result: &Result<RunStatus>) -> i32 {
    match result {
        Ok(s) => s.exit_code(),
        Err(_) => 1,
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Parse { path: path.display().to_string(), source })
}

/// Writes through a temporary file and a rename so readers never see a
/// partial artifact.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |source| Error::Io { path: target.display().to_string(), source };
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, &target).map_err(io)
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(dir, name, &text)
}

fn tagged<T: Serialize>(provenance: &str, result: &T) -> Value {
    json!({ "provenance": provenance, "result": result })
}

fn number(value: f64, provenance: &str) -> Value {
    json!({ "value": value, "provenance": provenance })
}

#[derive(Debug, Clone, Serialize)]
struct CrossCheck {
    name: String,
    pass: bool,
    detail: Value,
}

struct Runner<'a> {
    spec: &'a ProblemSpec,
    options: RunOptions,
    z: Option<MatrixFunction>,
    h: Option<MatrixFunction>,
    prediction: Option<CapacityResult>,
    spectrum: Option<(SpectrumResult, Value)>,
    fit: Option<CapacityFit>,
    factorization: Option<SkewFactorization>,
    checks: Vec<CrossCheck>,
    values: BTreeMap<String, Value>,
}

impl Runner<'_> {
    fn log(&self, msg: &str) {
        if self.options.verbose {
            eprintln!("volcap: {msg}");
        }
    }

    fn z(&self) -> &MatrixFunction {
        self.z.as_ref().expect("validated: z present")
    }

    fn form(&self) -> Result<SymplecticForm> {
        SymplecticForm::new(self.z().rows())
    }

    fn prediction(&mut self) -> Result<CapacityResult> {
        if self.prediction.is_none() {
            self.log("predicting capacity");
            let p = capacity::predict_capacity(self.z(), &self.form()?, self.spec.j_max, self.spec.tol)?;
            self.prediction = Some(p);
        }
        Ok(self.prediction.clone().unwrap())
    }

    fn selector(&mut self) -> Result<SubspaceSelector> {
        if let Some(s) = &self.spec.selector {
            return Ok(s.clone());
        }
        Ok(match self.prediction()?.order {
            Order::Finite(j) => SubspaceSelector::MomentConstraints { count: j.div_ceil(2) },
            Order::Infinite => SubspaceSelector::None,
        })
    }

    fn spectrum(&mut self) -> Result<SpectrumResult> {
        if self.spectrum.is_none() {
            let selector = self.selector()?;
            self.log(&format!("assembling Galerkin matrix, N = {}", self.spec.n));
            let form = QuadraticFormSpec::volterra(self.z().clone())?.with_selector(selector.clone());
            let m = galerkin::assemble(&form, self.spec.n)?;
            let restricted = galerkin::restrict(&m, &selector, self.spec.n)?;
            let symmetry = self.symmetry_probe(&m, restricted.basis.as_ref());
            let s = galerkin::spectrum(&restricted, self.spec.n)?;
            let meta = json!({
                "selector": selector,
                "codimension": restricted.codimension,
                "rank_deficient": restricted.rank_deficient,
                "symmetry_probe": symmetry,
            });
            self.spectrum = Some((s, meta));
        }
        Ok(self.spectrum.as_ref().unwrap().0.clone())
    }

    /// `|⟨u, M v⟩ - ⟨M u, v⟩|` for seeded random unit vectors in the subspace.
    fn symmetry_probe(&self, m: &nalgebra::DMatrix<f64>, basis: Option<&nalgebra::DMatrix<f64>>) -> Value {
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed);
        let dim = basis.map_or(m.nrows(), |b| b.ncols());
        let mut worst: f64 = 0.0;
        for _ in 0..4 {
            let mut draw = || {
                let c = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                let v = basis.map_or(c.clone(), |b| b * c);
                let n = v.norm();
                v / n
            };
            let u = draw();
            let v = draw();
            let d = (u.dot(&(m * &v)) - v.dot(&(m * &u))).abs();
            worst = worst.max(d);
        }
        json!({ "seed": self.options.seed, "samples": 4, "max_deviation": number(worst, "computed") })
    }

    fn window(&self) -> Window {
        match self.spec.window {
            Some([a, b]) => Window::new(a, b),
            None => Window::default_for(self.spec.n),
        }
    }

    fn fit(&mut self) -> Result<CapacityFit> {
        if self.fit.is_none() {
            let s = self.spectrum()?;
            self.log("fitting capacity");
            self.fit = Some(asympt::fit_capacity(&s, self.window(), self.spec.j_max)?);
        }
        Ok(self.fit.clone().unwrap())
    }

    fn factorization(&mut self) -> Result<SkewFactorization> {
        if self.factorization.is_none() {
            self.log("factorizing the skew part");
            let form = QuadraticFormSpec::volterra(self.z().clone())?;
            let n = self.spec.n.min(256).max(self.z().degree() + 1).max(4);
            self.factorization = Some(galerkin::skew_factorize(&form, n, galerkin::DEFAULT_RANK_TOL)?);
        }
        Ok(self.factorization.clone().unwrap())
    }

    fn run_analysis(&mut self, analysis: Analysis, out: &Path) -> Result<()> {
        match analysis {
            Analysis::Capacity => {
                let p = self.prediction()?;
                if let Some(v) = p.value {
                    self.values.insert("predicted_capacity".into(), number(v, "predicted"));
                }
                if let Some((a, b)) = p.value_pair {
                    self.values.insert("predicted_capacity_plus".into(), number(a, "predicted"));
                    self.values.insert("predicted_capacity_minus".into(), number(b, "predicted"));
                }
                write_json(out, "capacity.json", &tagged("predicted", &p))
            }
            Analysis::Spectrum => {
                let s = self.spectrum()?;
                let meta = self.spectrum.as_ref().unwrap().1.clone();
                write_json(out, "spectrum.json", &json!({ "provenance": "computed", "result": s, "meta": meta }))?;
                write_atomic(out, "spectrum.csv", &s.to_csv())
            }
            Analysis::Fit => {
                let f = self.fit()?;
                let p = self.prediction()?;
                let s = self.spectrum()?;
                write_json(out, "fit.json", &tagged("fitted", &f))?;
                write_atomic(out, "plot.csv", &plot_csv(&s, &p))?;
                let (fp, fm) = f.sides();
                self.values.insert("fitted_capacity_plus".into(), number(fp, "fitted"));
                self.values.insert("fitted_capacity_minus".into(), number(fm, "fitted"));
                self.checks.push(compare_prediction(&p, &f, self.spec.fit_tolerance));
                Ok(())
            }
            Analysis::Factorize => {
                let f = self.factorization()?;
                let pass = f.reconstruction_error <= 1e-8 * f.kernel_norm.max(f64::MIN_POSITIVE) || f.kernel_norm == 0.0;
                self.checks.push(CrossCheck {
                    name: "factorization_roundtrip".into(),
                    pass,
                    detail: json!({
                        "reconstruction_error": number(f.reconstruction_error, "computed"),
                        "kernel_norm": number(f.kernel_norm, "computed"),
                    }),
                });
                write_json(out, "factorization.json", &tagged("computed", &f))
            }
            Analysis::Bound => {
                let f = self.factorization()?;
                let bound = galerkin::capacity_bound(&f);
                // Both bounds control the 1-capacity, which vanishes when the
                // spectrum decays faster than 1/n.
                let fit = self.fit()?;
                let fitted_one = match fit.order {
                    Order::Finite(1) => fit.headline().unwrap_or(0.0),
                    _ => 0.0,
                };
                let mut doc = json!({
                    "skew_bound": number(bound, "predicted"),
                    "fitted_one_capacity": number(fitted_one, "fitted"),
                });
                self.values.insert("skew_bound".into(), number(bound, "predicted"));
                self.checks.push(CrossCheck {
                    name: "skew_bound_dominates_fit".into(),
                    pass: bound >= fitted_one,
                    detail: json!({ "bound": number(bound, "predicted"), "fitted": number(fitted_one, "fitted") }),
                });
                if let Some(h) = &self.h {
                    let hb = control::hessian_bound(self.z(), h)?;
                    doc["hessian_bound"] = json!({
                        "bound": number(hb.bound, "predicted"),
                        "trace_integral": number(hb.trace_integral, "computed"),
                        "r_norm": number(hb.r_norm, "computed"),
                        "sampled": hb.sampled,
                        "hessian": hb.hessian,
                    });
                    self.values.insert("hessian_bound".into(), number(hb.bound, "predicted"));
                    self.checks.push(CrossCheck {
                        name: "hessian_bound_dominates_fit".into(),
                        pass: hb.bound >= fitted_one,
                        detail: json!({ "bound": number(hb.bound, "predicted"), "fitted": number(fitted_one, "fitted") }),
                    });
                }
                write_json(out, "bound.json", &doc)
            }
            Analysis::Conditions => {
                let z = self.z().clone();
                let goh = control::goh_check(&z, self.spec.tol)?;
                let glc = if goh.pass { Some(control::glc_check(&z, self.spec.tol)?) } else { None };
                let gram = control::gram(&z, 1.0, self.spec.tol)?;
                let higher = control::higher_order_signs(&z, self.spec.j_max)?;
                write_json(
                    out,
                    "conditions.json",
                    &json!({
                        "provenance": "computed",
                        "goh": goh,
                        "generalized_legendre": glc,
                        "gram": gram,
                        "higher_order_experimental": higher,
                    }),
                )
            }
            Analysis::Realize => {
                let triple = control::TripleSpec::new(self.z().clone())?;
                let lq = control::realize_lq(&triple)?;
                let gap = lq.z()?.sub(self.z())?.coeff_max_abs();
                let roundtrip = gap <= 1e-12 * self.z().coeff_max_abs().max(1.0);
                self.checks.push(CrossCheck { name: "realization_roundtrip".into(), pass: roundtrip, detail: json!({ "max_coefficient_gap": number(gap, "computed") }) });
                write_json(out, "realize.json", &tagged("computed", &lq))
            }
            Analysis::Model => {
                let p = self.spec.model.as_ref().expect("validated: model present");
                let model = ModelSpectrum::new(p.mu, p.k, p.length, p.parity)?;
                write_atomic(out, "model.csv", &modelbvp::to_csv(&model.spectrum(p.count)))
            }
        }
    }
}

fn compare_prediction(p: &CapacityResult, f: &CapacityFit, tol: f64) -> CrossCheck {
    let detail = |pass_order: bool, dev: f64| {
        json!({
            "predicted_order": p.order,
            "fitted_order": f.order,
            "fitted_slope": number(f.slope, "fitted"),
            "order_match": pass_order,
            "max_relative_deviation": number(dev, "computed"),
            "tolerance": tol,
        })
    };
    let order_match = p.order == f.order;
    let dev = match (p.sides(), order_match) {
        (Some((pp, pm)), true) => {
            let (fp, fm) = f.sides();
            let scale = pp.max(pm);
            if scale > 0.0 { ((fp - pp).abs().max((fm - pm).abs())) / scale } else { 0.0 }
        }
        (None, true) => 0.0,
        _ => f64::INFINITY,
    };
    let pass = order_match && dev <= tol;
    CrossCheck { name: "predicted_vs_fitted_capacity".into(), pass, detail: detail(order_match, dev) }
}

/// `n, λ_n, predicted λ_n = ξ/(πn)^j` for both signs.
fn plot_csv(s: &SpectrumResult, p: &CapacityResult) -> String {
    let mut out = String::from("n,lambda_n,predicted_lambda_n\n");
    let (xp, xm) = p.sides().unwrap_or((0.0, 0.0));
    let j = p.order.finite();
    let predicted = |n: i64, xi: f64| match j {
        Some(j) => {
            let v = xi / (std::f64::consts::PI * n.unsigned_abs() as f64).powi(j as i32);
            if n < 0 { -v } else { v }
        }
        None => 0.0,
    };
    for (i, v) in s.negative.iter().enumerate().rev() {
        let n = -(i as i64 + 1);
        out.push_str(&format!("{n},{v},{}\n", predicted(n, xm)));
    }
    for (i, v) in s.positive.iter().enumerate() {
        let n = i as i64 + 1;
        out.push_str(&format!("{n},{v},{}\n", predicted(n, xp)));
    }
    out
}

/// Runs every requested analysis. Errors in individual analyses are recorded
/// in the summary and turn the run into an error (exit 1).
pub fn run(spec_path: &Path, out: &Path, options: RunOptions) -> Result<RunStatus> {
    let spec: ProblemSpec = read_json(spec_path)?;
    spec.validate()?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let z = spec.z.as_ref().map(|p| read_json::<MatrixFunction>(&base.join(p))).transpose()?;
    let h = spec.h.as_ref().map(|p| read_json::<MatrixFunction>(&base.join(p))).transpose()?;
    fs::create_dir_all(out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;

    let mut analyses = spec.analyses.clone();
    analyses.sort();
    analyses.dedup();
    let mut runner = Runner {
        spec: &spec,
        options,
        z,
        h,
        prediction: None,
        spectrum: None,
        fit: None,
        factorization: None,
        checks: Vec::new(),
        values: BTreeMap::new(),
    };
    let mut statuses = BTreeMap::new();
    let mut first_error: Option<Error> = None;
    for a in &analyses {
        let key = serde_json::to_value(a).unwrap().as_str().unwrap().to_string();
        match runner.run_analysis(*a, out) {
            Ok(()) => {
                statuses.insert(key, json!({ "status": "ok" }));
            }
            Err(e) => {
                runner.log(&format!("{key} failed: {e}"));
                statuses.insert(key, json!({ "status": "error", "module": e.module(), "message": e.to_string() }));
                first_error.get_or_insert(e);
            }
        }
    }
    let all_pass = runner.checks.iter().all(|c| c.pass);
    let summary = json!({
        "analyses": statuses,
        "cross_checks": runner.checks,
        "values": runner.values,
        "knobs": {
            "n": spec.n,
            "tol": spec.tol,
            "j_max": spec.j_max,
            "window": runner.window(),
            "fit_tolerance": spec.fit_tolerance,
            "seed": options.seed,
        },
    });
    write_json(out, "summary.json", &summary)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(if all_pass { RunStatus::Ok } else { RunStatus::FailedCheck })
}
