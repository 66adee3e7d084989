use nalgebra::DMatrix;

use super::{QuadraticFormSpec, MODULE};
use crate::error::{err, Result};
use crate::legendre;
use crate::matfun::merge_breakpoints;

/// Composite Gauss nodes and weights with `per_panel` nodes on each interval
/// between consecutive knots.
pub fn quadrature_nodes(knots: &[f64], per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = legendre::gauss_legendre(per_panel);
    let mut ts = Vec::with_capacity(per_panel * (knots.len() - 1));
    let mut ws = Vec::with_capacity(ts.capacity());
    for w in knots.windows(2) {
        let (x, wt) = rule.mapped(w[0], w[1]);
        ts.extend(x);
        ws.extend(wt);
    }
    (ts, ws)
}

/// `E[i, p] = √(2p+1) P_p(2 t_i - 1)`: orthonormal Legendre basis on [0, 1].
pub fn basis_values(ts: &[f64], n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(ts.len(), n);
    for (i, &t) in ts.iter().enumerate() {
        for (p, v) in legendre::legendre_values(n, 2.0 * t - 1.0).into_iter().enumerate() {
            e[(i, p)] = ((2 * p + 1) as f64).sqrt() * v;
        }
    }
    e
}

/// Spectral integration matrix on [-1, 1]: `(S f)(x_i) ≈ ∫_{-1}^{x_i} f`
/// from samples at the Gauss nodes, exact for polynomials of degree < P.
fn integration_matrix(p: usize) -> DMatrix<f64> {
    let rule = legendre::gauss_legendre(p);
    // Values of P_0..P_p at the nodes.
    let vals: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| legendre::legendre_values(p + 1, x)).collect();
    // I_m(x) = ∫_{-1}^x P_m = (P_{m+1} - P_{m-1}) / (2m + 1), I_0 = x + 1.
    let anti = DMatrix::from_fn(p, p, |i, m| {
        if m == 0 {
            rule.nodes[i] + 1.0
        } else {
            (vals[i][m + 1] - vals[i][m - 1]) / (2 * m + 1) as f64
        }
    });
    let analysis = DMatrix::from_fn(p, p, |m, j| (m as f64 + 0.5) * vals[j][m] * rule.weights[j]);
    anti * analysis
}

/// Galerkin matrix `M[a, b] = -∫⟨H e_b, e_a⟩ + sign · ⟨e_a, K e_b⟩` over the
/// orthonormal basis `e_(s,p)(t) = √(2p+1) P_p(2t-1) · u_s`, indexed
/// component-major as `s * N + p`.
pub fn assemble(spec: &QuadraticFormSpec, n: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if n < 4 {
        return Err(err!(Domain, MODULE, "basis size must be at least 4, got {n}"));
    }
    let k = spec.k();
    let dim2n = spec.z.rows();
    let kn = k * n;
    let mut bps = spec.z.breakpoints().to_vec();
    let mut deg = spec.z.degree();
    if let Some(h) = &spec.h {
        bps = merge_breakpoints(&bps, h.breakpoints());
        deg = deg.max(h.degree());
    }
    let mut knots = vec![0.0];
    knots.extend(bps);
    knots.push(1.0);
    // Inner integrand has degree ≤ deg + N - 1 and the outer one ≤ 2N + 2 deg - 1.
    let p = n + deg + 1;
    let (ts, ws) = quadrature_nodes(&knots, p);
    let e = basis_values(&ts, n);
    let jm = spec.form.matrix();
    let zs: Vec<DMatrix<f64>> = ts.iter().map(|&t| spec.z.eval(t)).collect::<Result<_>>()?;

    // F[i, r*kN + l*N + q] = Z[r, l](t_i) E[i, q]
    let width = dim2n * kn;
    let mut f = DMatrix::zeros(ts.len(), width);
    for (i, z) in zs.iter().enumerate() {
        for r in 0..dim2n {
            for l in 0..k {
                let zrl = z[(r, l)];
                if zrl == 0.0 {
                    continue;
                }
                let base = r * kn + l * n;
                for q in 0..n {
                    f[(i, base + q)] = zrl * e[(i, q)];
                }
            }
        }
    }

    // W[i, :] = ∫₀^{t_i} F: within-panel spectral integration plus the
    // accumulated totals of earlier panels.
    let smat = integration_matrix(p);
    let mut wmat = DMatrix::zeros(ts.len(), width);
    let mut carry = nalgebra::RowDVector::zeros(width);
    for (panel, kw) in knots.windows(2).enumerate() {
        let rows = panel * p..(panel + 1) * p;
        let fp = f.rows(rows.start, p);
        let mut block = (&smat * fp) * (0.5 * (kw[1] - kw[0]));
        for mut row in block.row_iter_mut() {
            row += &carry;
        }
        for (ii, i) in rows.clone().enumerate() {
            carry += fp.row(ii) * ws[i];
        }
        wmat.rows_mut(rows.start, p).copy_from(&block);
    }
    drop(f);

    // U[i, s*kN + c] = Σ_r (Zᵀ J)(t_i)[s, r] W[i, r*kN + c]
    let mut u = DMatrix::zeros(ts.len(), k * kn);
    for (i, z) in zs.iter().enumerate() {
        let g = z.transpose() * &jm;
        for s in 0..k {
            for r in 0..dim2n {
                let coef = spec.kernel_sign * g[(s, r)];
                if coef == 0.0 {
                    continue;
                }
                for c in 0..kn {
                    u[(i, s * kn + c)] += coef * wmat[(i, r * kn + c)];
                }
            }
        }
    }
    drop(wmat);

    let mut ew = e.clone();
    for (i, w) in ws.iter().enumerate() {
        ew.row_mut(i).scale_mut(*w);
    }
    let ewt = ew.transpose();
    let blocks = &ewt * u;
    let mut m = DMatrix::zeros(kn, kn);
    for s in 0..k {
        m.rows_mut(s * n, n).copy_from(&blocks.columns(s * kn, kn));
    }

    if let Some(h) = &spec.h {
        let hs: Vec<DMatrix<f64>> = ts.iter().map(|&t| h.eval(t)).collect::<Result<_>>()?;
        for s in 0..k {
            for l in 0..k {
                let mut weighted = e.clone();
                for (i, hv) in hs.iter().enumerate() {
                    weighted.row_mut(i).scale_mut(ws[i] * hv[(s, l)]);
                }
                let gram = e.transpose() * weighted;
                let mut block = m.view_mut((s * n, l * n), (n, n));
                block -= gram;
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(err!(Numerical, MODULE, "assembled matrix has non-finite entries"));
    }
    Ok(m)
}
