//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use volterra_capacity::asympt::{self, Window};
use volterra_capacity::capacity::{self, Order};
use volterra_capacity::control::{self, TripleSpec};
use volterra_capacity::galerkin::{self, QuadraticFormSpec, SpectrumResult, SubspaceSelector};
use volterra_capacity::modelbvp::{self, ModelSpectrum, Parity};
use volterra_capacity::{MatrixFunction, SymplecticForm};

use common::{fit_on_v, identity_z, order_three, random_poly, rng, spectrum_of, t_one};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Eigenvalues of the periodic second-difference operator `-D²` on a grid of
/// `m` points, from the FFT of its circulant stencil.
fn periodic_laplacian_eigenvalues(m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let mut col = vec![Complex::new(0.0, 0.0); m];
    col[0] = Complex::new(2.0 / (h * h), 0.0);
    col[1] = Complex::new(-1.0 / (h * h), 0.0);
    col[m - 1] = Complex::new(-1.0 / (h * h), 0.0);
    FftPlanner::new().plan_fft_forward(m).process(&mut col);
    let mut eigs: Vec<f64> = col.iter().map(|c| c.re).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

fn criterion_1() -> Outcome {
    let model = ModelSpectrum::new(1.0, 1, 1.0, Parity::Even).unwrap();
    let exact = modelbvp::exact_spectrum(&model, 4);
    let a = 1.0 / (2.0 * PI).powi(2);
    let b = 1.0 / (4.0 * PI).powi(2);
    let expected = [a, a, b, b];
    let machine = exact.iter().zip(&expected).all(|(x, e)| rel(*x, *e) <= 4.0 * f64::EPSILON);
    // The model operator is the inverse of -d²/dt² on mean-zero periodic functions.
    let lap = periodic_laplacian_eigenvalues(4096);
    let fd: Vec<f64> = lap[1..5].iter().map(|v| 1.0 / v).collect();
    let worst = fd.iter().zip(&exact).map(|(f, e)| rel(*f, *e)).fold(0.0, f64::max);
    outcome(machine && worst <= 1e-3, format!("closed form exact: {machine}, finite-difference max rel. error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let z = identity_z();
    let form = SymplecticForm::new(2).unwrap();
    let a1 = capacity::build_aj(&z, 1, &form).unwrap().eval(0.5).unwrap();
    let shape_ok = (a1 - DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).amax() == 0.0;
    let predicted = capacity::predict_capacity(&z, &form, 8, 1e-10).unwrap();
    let xi = predicted.value.unwrap();
    let (fit, _) = fit_on_v(&z, 1, 512, Window::new(40, 85));
    let (p, m) = fit.sides();
    let pass = shape_ok && predicted.order == Order::Finite(1) && rel(xi, 1.0) < 1e-9 && rel(p, xi) <= 0.03 && rel(m, xi) <= 0.03;
    outcome(pass, format!("predicted ξ = {xi:.6}, fitted ξ₊ = {p:.4}, ξ₋ = {m:.4} (N = 512, window [40, 85])"))
}

fn criterion_3() -> Outcome {
    // Z = [[ξ₁, ξ₃], [0, ξ₂]] with ξ₁ = ξ₂ = 1, ξ₃ = 0.
    let z = MatrixFunction::from_monomials(2, 2, &[vec![1.0], vec![0.0], vec![0.0], vec![1.0]]).unwrap();
    let form = SymplecticForm::new(2).unwrap();
    let xi = capacity::predict_capacity(&z, &form, 8, 1e-10).unwrap().value.unwrap();

    let spec = QuadraticFormSpec::volterra(z.clone()).unwrap();
    let m = galerkin::assemble(&spec, 64).unwrap();
    let skew = (&m - m.transpose()) * 0.5;
    let sv = skew.singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Singular values of a real skew matrix are the |ρ| of its ±iρ pairs.
    let skew_ok = (sv[0] - 0.5).abs() <= 1e-6 && (sv[1] - 0.5).abs() <= 1e-6 && sv[2] <= 1e-6;

    let f = galerkin::skew_factorize(&spec, 64, galerkin::DEFAULT_RANK_TOL).unwrap();
    let bound = galerkin::capacity_bound(&f);
    let (fit, _) = fit_on_v(&z, 1, 512, Window::new(40, 85));
    let fitted = fit.headline().unwrap();
    let pass = rel(xi, 1.0) < 1e-9 && skew_ok && f.rank == 2 && (f.skew_eigs[0] - 0.5).abs() <= 1e-6 && rel(bound, 1.0) < 1e-9 && bound >= fitted;
    outcome(
        pass,
        format!(
            "predicted ξ = {xi:.6}, skew pair ±{:.8}i, factorized ±{:.8}i, bound = {bound:.6} ≥ fitted {fitted:.4}",
            sv[0], f.skew_eigs[0]
        ),
    )
}

fn criterion_4() -> Outcome {
    let z = t_one();
    let form = SymplecticForm::new(2).unwrap();
    let a1 = capacity::build_aj(&z, 1, &form).unwrap().coeff_max_abs();
    let a2 = capacity::build_aj(&z, 2, &form).unwrap().coeff_max_abs();
    let predicted = capacity::predict_capacity(&z, &form, 8, 1e-10).unwrap();
    let (pp, pm) = predicted.sides().unwrap();
    let (fit, _) = fit_on_v(&z, 2, 512, Window::new(40, 85));
    let (fp, fm) = fit.sides();
    let scale = pp.max(pm);
    let side_ok = |f: f64, p: f64| (f - p).abs() <= 0.05 * if p > 0.0 { p } else { scale };
    let pass = a1 == 0.0 && a2 > 0.0 && fit.order == Order::Finite(2) && predicted.order == Order::Finite(2) && side_ok(fp, pp) && side_ok(fm, pm);
    outcome(
        pass,
        format!("slope {:.4} → j = 2, predicted (ξ₊, ξ₋) = ({pp:.4}, {pm:.4}), fitted ({fp:.4}, {fm:.4})", fit.slope),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut rank_hits = 0;
    let mut worst_err: f64 = 0.0;
    let mut all_even = true;
    for trial in 0..20 {
        let m = 1 + trial % 3;
        let deg = r.random_range(2..=6);
        let z = random_poly(&mut r, 2 * m, 2, deg);
        let spec = QuadraticFormSpec::volterra(z).unwrap();
        let f = galerkin::skew_factorize(&spec, 32, galerkin::DEFAULT_RANK_TOL).unwrap();
        if f.rank == 2 * m {
            rank_hits += 1;
        }
        all_even &= f.rank.is_multiple_of(2);
        worst_err = worst_err.max(f.reconstruction_error / f.kernel_norm);
    }
    outcome(
        rank_hits == 20 && all_even && worst_err <= 1e-8,
        format!("rank recovered {rank_hits}/20, all even: {all_even}, worst relative HS error {worst_err:.2e}"),
    )
}

fn model_side(j: usize, xi: f64, count: usize) -> SpectrumResult {
    let (k, parity) = if j == 1 { (1, Parity::Odd) } else { (1, Parity::Even) };
    ModelSpectrum::new(xi, k, 1.0, parity).unwrap().spectrum(count)
}

fn criterion_6() -> Outcome {
    let count = 4000;
    let window = Window::new(1000, 2000);
    let mut additivity = 0;
    let mut worst_add: f64 = 0.0;
    let mut total = 0;
    for j in [1, 2] {
        for x1 in [1.0, 4.0] {
            for x2 in [1.0, 9.0] {
                total += 1;
                let s1 = model_side(j, x1, count);
                let s2 = model_side(j, x2, count);
                let merged = modelbvp::merge_spectra(&[s1.clone(), s2.clone()], count);
                let f1 = asympt::fit_capacity(&s1, window, 8).unwrap();
                let f2 = asympt::fit_capacity(&s2, window, 8).unwrap();
                let fm = asympt::fit_capacity(&merged, window, 8).unwrap();
                let report = asympt::check_additivity(&f1, &f2, &fm, 0.02);
                worst_add = worst_add.max(report.max_rel_error);
                additivity += report.pass as usize;
            }
        }
    }

    let mut interlacing = 0;
    let mut cases = 0;
    for z in [identity_z(), t_one(), order_three()] {
        let k = z.cols();
        let full = spectrum_of(&z, SubspaceSelector::None, 128);
        for d in 1..=3usize {
            cases += 1;
            let functionals = SubspaceSelector::moment_functionals(d.div_ceil(k), k).unwrap().row_block(0, d).unwrap();
            let restricted = spectrum_of(&z, SubspaceSelector::Custom { functionals }, 128);
            interlacing += asympt::check_restriction_stability(&full, &restricted, d).pass as usize;
        }
    }

    let (base, s) = fit_on_v(&identity_z(), 1, 256, Window::default_for(256));
    let mut homogeneous = true;
    for a in [0.25, 2.0, 8.0] {
        let f = asympt::fit_capacity(&s.scaled(a), Window::default_for(256), 8).unwrap();
        homogeneous &= f.order == base.order && f.value == base.value.map(|v| v * a);
    }
    outcome(
        additivity == total && interlacing == cases && homogeneous,
        format!(
            "additivity {additivity}/{total} (worst {worst_add:.2e}), interlacing {interlacing}/{cases}, homogeneity exact: {homogeneous}"
        ),
    )
}

fn window_max(s: &SpectrumResult, j: usize, w: Window) -> f64 {
    (w.start..=w.end)
        .flat_map(|n| [s.get(n as i64), s.get(-(n as i64))].into_iter().flatten().map(move |v| v.abs() * (n as f64).powi(j as i32)))
        .fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, z) in [(1usize, identity_z()), (2, t_one()), (3, order_three())] {
        let at = |n: usize| {
            let s = spectrum_of(&z, SubspaceSelector::MomentConstraints { count: j.div_ceil(2) }, n);
            window_max(&s, j, Window::default_for(n))
        };
        let (a, b) = (at(256), at(512));
        let change = (a - b).abs() / a.max(b);
        pass &= a.is_finite() && b.is_finite() && a > 0.0 && change < 0.2;
        parts.push(format!("j={j}: {a:.4e} → {b:.4e} ({:.1}%)", 100.0 * change));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let form = SymplecticForm::new(4).unwrap();
    let mut goh_fail_ok = 0;
    let mut goh_pass_ok = 0;
    for _ in 0..10 {
        let z = random_poly(&mut r, 4, 2, 3);
        let a1_zero = capacity::build_aj(&z, 1, &form).unwrap().coeff_max_abs() <= 1e-12;
        let goh = control::goh_check(&z, 1e-10).unwrap();
        goh_fail_ok += (!a1_zero && !goh.pass) as usize;
        // Isotropic image: Z = (P; 0).
        let p = random_poly(&mut r, 2, 2, 3);
        let iso = MatrixFunction::vstack(&p, &MatrixFunction::zeros(2, 2)).unwrap();
        goh_pass_ok += control::goh_check(&iso, 1e-10).unwrap().pass as usize;
    }

    // Z = (S₀ + t S₁; I) with symmetric S₀, S₁: A₁ ≡ 0 and A₂ ≡ S₁.
    let mut glc_ok = 0;
    for trial in 0..10 {
        let sym = |r: &mut rand_chacha::ChaCha8Rng| {
            let a = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
            &a * a.transpose()
        };
        let s0 = {
            let a = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
            &a + a.transpose()
        };
        let definite = sym(&mut r) + DMatrix::identity(2, 2) * 0.1;
        let negative = trial % 2 == 0;
        let s1 = if negative { -definite } else { definite };
        let mut entries = Vec::new();
        for i in 0..2 {
            for c in 0..2 {
                entries.push(vec![s0[(i, c)], s1[(i, c)]]);
            }
        }
        for i in 0..2 {
            for c in 0..2 {
                entries.push(vec![if i == c { 1.0 } else { 0.0 }]);
            }
        }
        let z = MatrixFunction::from_monomials(4, 2, &entries).unwrap();
        let glc = control::glc_check(&z, 1e-10).unwrap();
        glc_ok += (glc.pass == negative) as usize;
    }

    let z = MatrixFunction::from_monomials(2, 2, &[vec![1.0], vec![0.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0]]).unwrap();
    let goh_fails = !control::goh_check(&z, 1e-10).unwrap().pass;
    let (fit, _) = fit_on_v(&z, 1, 512, Window::new(40, 85));
    let (p, m) = fit.sides();
    let symmetric = (p - m).abs() <= 0.05 * p.max(m);
    outcome(
        goh_fail_ok == 10 && goh_pass_ok == 10 && glc_ok == 10 && goh_fails && symmetric,
        format!("Goh fails on A₁≢0 {goh_fail_ok}/10, passes on isotropic {goh_pass_ok}/10, GLC {glc_ok}/10, two-sided ξ₊ = {p:.4}, ξ₋ = {m:.4}"),
    )
}

fn inverse_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let mut roundtrip = 0;
    let mut sym_true = 0;
    let mut skew_false = 0;
    for _ in 0..10 {
        let z = random_poly(&mut r, 4, 2, 4);
        let h = MatrixFunction::constant(&(-DMatrix::<f64>::identity(2, 2)));
        let sv = control::second_variation(&h, &z).unwrap();
        let lq = control::realize_lq(&TripleSpec::new(sv.z.clone()).unwrap()).unwrap();
        roundtrip += (lq.z().unwrap() == z) as usize;

        let triple = TripleSpec::new(z.clone()).unwrap();
        let (y, x) = (triple.y().unwrap(), triple.x().unwrap());
        let g = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
        let deform = |g: &DMatrix<f64>| MatrixFunction::vstack(&y.add(&x.left_mul_const(g).unwrap()).unwrap(), &x).unwrap();
        let sym = &g + g.transpose();
        let skew = &g - g.transpose();
        sym_true += control::gauge_equivalent(&z, &deform(&sym), 1e-10).unwrap().equivalent as usize;
        skew_false += (!control::gauge_equivalent(&z, &deform(&skew), 1e-10).unwrap().equivalent) as usize;
    }

    // Strong Legendre: -H constant positive definite. In the coordinates
    // v = (-H)^{1/2} u the compact part is the Volterra form of Z (-H)^{-1/2}.
    let mut dominated = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..100 {
        let z = random_poly(&mut r, 2, 2, 2);
        let a = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
        let neg_h = &a * a.transpose() + DMatrix::identity(2, 2) * 0.5;
        let h = MatrixFunction::constant(&(-neg_h.clone()));
        let bound = control::hessian_bound(&z, &h).unwrap().bound;
        let normalized = z.right_mul_const(&inverse_sqrt(&neg_h)).unwrap();
        let (fit, _) = fit_on_v(&normalized, 1, 256, Window::default_for(256));
        let fitted = match fit.order {
            Order::Finite(1) => fit.headline().unwrap(),
            _ => 0.0,
        };
        dominated += (bound >= fitted) as usize;
        if fitted > 0.0 {
            tightest = tightest.min(bound / fitted);
        }
    }
    outcome(
        roundtrip == 10 && sym_true == 10 && skew_false == 10 && dominated == 100,
        format!(
            "roundtrip {roundtrip}/10, symmetric gauge {sym_true}/10, skew gauge rejected {skew_false}/10, Hessian bound dominates {dominated}/100 (min ratio {tightest:.3})"
        ),
    )
}

fn run_cli(spec: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_volcap"))
        .args(["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "17"])
        .status()
        .map(|s| s.code() == Some(0))
        .unwrap_or(false)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let z = serde_json::to_string(&t_one()).unwrap();
    let h = serde_json::to_string(&MatrixFunction::constant(&(-DMatrix::<f64>::identity(1, 1)))).unwrap();
    fs::write(dir.path().join("z.json"), z).unwrap();
    fs::write(dir.path().join("h.json"), h).unwrap();
    let spec = r#"{
        "z": "z.json",
        "h": "h.json",
        "analyses": ["capacity", "spectrum", "fit", "factorize", "bound", "conditions", "realize"],
        "n": 128
    }"#;
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ran = run_cli(&spec_path, &a) && run_cli(&spec_path, &b);
    let mut names: Vec<String> = fs::read_dir(&a)
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    let json: Vec<&String> = names.iter().filter(|n| n.ends_with(".json")).collect();
    let identical = json.iter().all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok());
    outcome(ran && json.len() >= 7 && identical, format!("{} JSON artifacts byte-identical: {identical}", json.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("model spectrum exactness", criterion_1),
        ("order-1 capacity vs Galerkin", criterion_2),
        ("two-component example end-to-end", criterion_3),
        ("order-2 capacity", criterion_4),
        ("factorization roundtrip", criterion_5),
        ("capacity arithmetic", criterion_6),
        ("magnitude bound stability", criterion_7),
        ("condition checkers", criterion_8),
        ("control identities", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{verdict}] {name}: {} ({:.1} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
