//! Piecewise-polynomial matrix-valued functions on [0, 1].
//!
//! Every piece stores, for each matrix entry, the coefficients of a Legendre
//! series in the local variable `s = (2t - a - b) / (b - a)` of its interval
//! `[a, b]`. Differentiation, antidifferentiation and products act directly on
//! coefficients. Non-polynomial data enters only through [`MatrixFunction::from_fn`],
//! which projects onto the basis and reports the residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};
use crate::legendre;

const MODULE: &str = "matfun";

/// Knots closer than this are treated as identical when partitions merge.
const KNOT_EPS: f64 = 1e-13;

/// Default polynomial degree used when projecting non-polynomial inputs.
pub const DEFAULT_DEGREE: usize = 16;

/// The standard symplectic matrix `J = [[0, -I], [I, 0]]` on R^{2n}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymplecticForm {
    half_dim: usize,
}

impl SymplecticForm {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(err!(Shape, MODULE, "symplectic dimension must be even and positive, got {dim}"));
        }
        Ok(Self { half_dim: dim / 2 })
    }

    pub fn with_half_dim(n: usize) -> Self {
        Self { half_dim: n.max(1) }
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.half_dim;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = -1.0;
            j[(n + i, i)] = 1.0;
        }
        j
    }

    /// `J * B` computed by row permutation and negation, so coefficients are
    /// copied exactly.
    pub fn apply(&self, b: &MatrixFunction) -> Result<MatrixFunction> {
        let n = self.half_dim;
        if b.rows != 2 * n {
            return Err(err!(Shape, MODULE, "J is {0}x{0} but operand has {1} rows", 2 * n, b.rows));
        }
        let mut out = b.clone();
        for piece in out.pieces.iter_mut() {
            let src = piece.entries.clone();
            for r in 0..2 * n {
                let (from, sign) = if r < n { (r + n, -1.0) } else { (r - n, 1.0) };
                for c in 0..b.cols {
                    let dst = &mut piece.entries[r * b.cols + c];
                    for (d, s) in dst.iter_mut().zip(&src[from * b.cols + c]) {
                        *d = sign * s;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One polynomial piece: Legendre coefficients per entry, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub interval: [f64; 2],
    /// `entries[r * cols + c][p]`; all entries share the same length.
    entries: Vec<Vec<f64>>,
}

impl Piece {
    fn len(&self) -> usize {
        self.entries.first().map_or(1, Vec::len)
    }

    fn local(&self, t: f64) -> f64 {
        let [a, b] = self.interval;
        ((2.0 * t - a - b) / (b - a)).clamp(-1.0, 1.0)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.interval[1] - self.interval[0])
    }

    pub fn coeffs(&self, rows: usize, cols: usize) -> Vec<Vec<Vec<f64>>> {
        (0..rows)
            .map(|r| (0..cols).map(|c| self.entries[r * cols + c].clone()).collect())
            .collect()
    }

    /// Re-expands the piece on a sub-interval. Exact for polynomials.
    fn restricted(&self, a: f64, b: f64) -> Piece {
        let len = self.len();
        if (a - self.interval[0]).abs() <= KNOT_EPS && (b - self.interval[1]).abs() <= KNOT_EPS {
            return self.clone();
        }
        let rule = legendre::gauss_legendre(len);
        let (xs, _) = rule.mapped(a, b);
        let locals: Vec<f64> = xs.iter().map(|&t| self.local(t)).collect();
        let entries = self
            .entries
            .iter()
            .map(|c| {
                let samples: Vec<f64> = locals.iter().map(|&s| legendre::eval(c, s)).collect();
                legendre::project(&rule, &samples, len)
            })
            .collect();
        Piece { interval: [a, b], entries }
    }

    fn padded(&self, len: usize) -> Piece {
        let entries = self
            .entries
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.resize(len.max(c.len()), 0.0);
                c
            })
            .collect();
        Piece { interval: self.interval, entries }
    }
}

/// A piecewise-polynomial matrix function on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFunctionRepr", into = "MatrixFunctionRepr")]
pub struct MatrixFunction {
    rows: usize,
    cols: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct PieceRepr {
    interval: [f64; 2],
    coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFunctionRepr {
    rows: usize,
    cols: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<PieceRepr>,
}

impl From<MatrixFunction> for MatrixFunctionRepr {
    fn from(f: MatrixFunction) -> Self {
        let pieces = f
            .pieces
            .iter()
            .map(|p| PieceRepr { interval: p.interval, coeffs: p.coeffs(f.rows, f.cols) })
            .collect();
        MatrixFunctionRepr { rows: f.rows, cols: f.cols, breakpoints: f.breakpoints, pieces }
    }
}

impl TryFrom<MatrixFunctionRepr> for MatrixFunction {
    type Error = Error;

    fn try_from(repr: MatrixFunctionRepr) -> Result<Self> {
        let mut pieces = Vec::with_capacity(repr.pieces.len());
        for p in repr.pieces {
            if p.coeffs.len() != repr.rows || p.coeffs.iter().any(|row| row.len() != repr.cols) {
                return Err(err!(Shape, MODULE, "piece coefficient tensor is not {}x{}", repr.rows, repr.cols));
            }
            let entries: Vec<Vec<f64>> = p.coeffs.into_iter().flatten().collect();
            pieces.push(Piece { interval: p.interval, entries });
        }
        MatrixFunction::from_parts(repr.rows, repr.cols, repr.breakpoints, pieces)
    }
}

fn knots_of(breakpoints: &[f64]) -> Vec<f64> {
    let mut k = Vec::with_capacity(breakpoints.len() + 2);
    k.push(0.0);
    k.extend_from_slice(breakpoints);
    k.push(1.0);
    k
}

/// Union of two sorted interior breakpoint lists.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        if out.last().is_none_or(|&l| x - l > KNOT_EPS) {
            out.push(x);
        }
    }
    out
}

impl MatrixFunction {
    fn from_parts(rows: usize, cols: usize, breakpoints: Vec<f64>, mut pieces: Vec<Piece>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(err!(Shape, MODULE, "matrix functions need at least one row and column"));
        }
        let knots = knots_of(&breakpoints);
        if knots.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(err!(Invalid, MODULE, "breakpoints must be strictly increasing inside (0, 1)"));
        }
        if pieces.len() != knots.len() - 1 {
            return Err(err!(Invalid, MODULE, "{} pieces for {} intervals", pieces.len(), knots.len() - 1));
        }
        for (i, p) in pieces.iter_mut().enumerate() {
            if p.interval[0] != knots[i] || p.interval[1] != knots[i + 1] {
                return Err(err!(
                    Invalid,
                    MODULE,
                    "piece {i} covers {:?} but the partition expects [{}, {}]",
                    p.interval,
                    knots[i],
                    knots[i + 1]
                ));
            }
            if p.entries.len() != rows * cols {
                return Err(err!(Shape, MODULE, "piece {i} has {} entries, expected {}", p.entries.len(), rows * cols));
            }
            if p.entries.iter().flatten().any(|c| !c.is_finite()) {
                return Err(err!(Invalid, MODULE, "piece {i} has non-finite coefficients"));
            }
            let len = p.entries.iter().map(Vec::len).max().unwrap_or(1).max(1);
            for e in p.entries.iter_mut() {
                e.resize(len, 0.0);
            }
        }
        Ok(Self { rows, cols, breakpoints, pieces })
    }

    /// Builds a function from per-piece coefficient tensors `[row][col][p]`.
    pub fn new(rows: usize, cols: usize, breakpoints: Vec<f64>, coeffs: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let knots = knots_of(&breakpoints);
        if coeffs.len() + 1 != knots.len() {
            return Err(err!(Invalid, MODULE, "{} coefficient tensors for {} intervals", coeffs.len(), knots.len() - 1));
        }
        let mut pieces = Vec::with_capacity(coeffs.len());
        for (i, c) in coeffs.into_iter().enumerate() {
            if c.len() != rows || c.iter().any(|row| row.len() != cols) {
                return Err(err!(Shape, MODULE, "coefficient tensor {i} is not {rows}x{cols}"));
            }
            pieces.push(Piece { interval: [knots[i], knots[i + 1]], entries: c.into_iter().flatten().collect() });
        }
        Self::from_parts(rows, cols, breakpoints, pieces)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(&DMatrix::zeros(rows, cols))
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| vec![m[(r, c)]])
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            breakpoints: Vec::new(),
            pieces: vec![Piece { interval: [0.0, 1.0], entries }],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&DMatrix::identity(n, n))
    }

    /// Single-piece function whose entries are polynomials in `t` given by
    /// monomial coefficients, row-major: `entries[r * cols + c][d]` multiplies `t^d`.
    pub fn from_monomials(rows: usize, cols: usize, entries: &[Vec<f64>]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(err!(Shape, MODULE, "expected {} monomial lists, got {}", rows * cols, entries.len()));
        }
        // t = (1 + s) / 2 on the single piece [0, 1].
        let t_series = [0.5, 0.5];
        let converted = entries
            .iter()
            .map(|m| {
                let mut acc = vec![0.0];
                for &coef in m.iter().rev() {
                    acc = legendre::mul(&acc, &t_series);
                    acc[0] += coef;
                }
                acc.truncate(m.len().max(1));
                acc
            })
            .collect();
        Self::from_parts(rows, cols, Vec::new(), vec![Piece { interval: [0.0, 1.0], entries: converted }])
    }

    /// Projects an arbitrary function onto piecewise Legendre polynomials of
    /// the given degree. Returns the function and the maximum absolute
    /// deviation observed on a check grid.
    pub fn from_fn<F>(rows: usize, cols: usize, breakpoints: Vec<f64>, degree: usize, f: F) -> Result<(Self, f64)>
    where
        F: Fn(f64) -> DMatrix<f64>,
    {
        let knots = knots_of(&breakpoints);
        let len = degree + 1;
        let rule = legendre::gauss_legendre(2 * len + 8);
        let mut pieces = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            let (xs, _) = rule.mapped(w[0], w[1]);
            let samples: Vec<DMatrix<f64>> = xs.iter().map(|&t| f(t)).collect();
            if let Some(bad) = samples.iter().find(|m| m.nrows() != rows || m.ncols() != cols) {
                return Err(err!(Shape, MODULE, "sampled {}x{}, expected {rows}x{cols}", bad.nrows(), bad.ncols()));
            }
            let mut entries = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let vals: Vec<f64> = samples.iter().map(|m| m[(r, c)]).collect();
                    entries.push(legendre::project(&rule, &vals, len));
                }
            }
            pieces.push(Piece { interval: [w[0], w[1]], entries });
        }
        let out = Self::from_parts(rows, cols, breakpoints, pieces)?;
        let mut residual: f64 = 0.0;
        for w in knots.windows(2) {
            for i in 0..=64 {
                // Stay inside the open piece so the right-limit convention
                // does not compare against the neighbouring piece.
                let t = w[0] + (w[1] - w[0]) * (i as f64 / 64.0).min(1.0 - 1e-12);
                let diff = out.eval_unchecked(t) - f(t);
                residual = residual.max(diff.amax());
            }
        }
        Ok((out, residual))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Knots including the endpoints 0 and 1.
    pub fn knots(&self) -> Vec<f64> {
        knots_of(&self.breakpoints)
    }

    /// Maximum polynomial degree over pieces.
    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    /// Raw Legendre coefficients of entry `(r, c)` on piece `i`.
    pub fn entry_coeffs(&self, piece: usize, r: usize, c: usize) -> &[f64] {
        &self.pieces[piece].entries[r * self.cols + c]
    }

    fn piece_index(&self, t: f64) -> usize {
        // Right-continuous: the piece with a <= t < b, the last one at t = 1.
        self.breakpoints.partition_point(|&b| b <= t)
    }

    /// Value at `t`, using the right limit at interior breakpoints.
    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(err!(Domain, MODULE, "evaluation point {t} outside [0, 1]"));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> DMatrix<f64> {
        let piece = &self.pieces[self.piece_index(t)];
        let s = piece.local(t);
        let vals = legendre::legendre_values(piece.len(), s);
        DMatrix::from_fn(self.rows, self.cols, |r, c| {
            piece.entries[r * self.cols + c].iter().zip(&vals).map(|(a, b)| a * b).sum()
        })
    }

    /// Exact derivative of the given order, piece by piece.
    pub fn derivative(&self, order: usize) -> MatrixFunction {
        let mut out = self.clone();
        for _ in 0..order {
            for piece in out.pieces.iter_mut() {
                let scale = 1.0 / piece.half_width();
                for e in piece.entries.iter_mut() {
                    *e = legendre::derivative(e).into_iter().map(|v| v * scale).collect();
                }
            }
        }
        out
    }

    /// Antiderivative that vanishes at t = 0 and is continuous across knots.
    pub fn antiderivative(&self) -> MatrixFunction {
        let mut out = self.clone();
        let mut carry = vec![0.0; self.rows * self.cols];
        for piece in out.pieces.iter_mut() {
            let scale = piece.half_width();
            for (e, offset) in piece.entries.iter_mut().zip(carry.iter_mut()) {
                let mut a: Vec<f64> = legendre::antiderivative(e).into_iter().map(|v| v * scale).collect();
                a[0] += *offset;
                *offset = legendre::eval(&a, 1.0);
                *e = a;
            }
        }
        out
    }

    /// `∫_a^b F(t) dt` entrywise.
    pub fn integrate(&self, a: f64, b: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(err!(Domain, MODULE, "integration limits [{a}, {b}] outside [0, 1]"));
        }
        if a > b {
            return Err(err!(Domain, MODULE, "lower limit {a} exceeds upper limit {b}"));
        }
        let mut total = DMatrix::zeros(self.rows, self.cols);
        for piece in &self.pieces {
            let [pa, pb] = piece.interval;
            let lo = a.max(pa);
            let hi = b.min(pb);
            if hi <= lo {
                continue;
            }
            let scale = piece.half_width();
            let full = lo == pa && hi == pb;
            let (slo, shi) = (piece.local(lo), piece.local(hi));
            for r in 0..self.rows {
                for c in 0..self.cols {
                    let e = &piece.entries[r * self.cols + c];
                    let v = if full {
                        legendre::definite_integral(e)
                    } else {
                        let anti = legendre::antiderivative(e);
                        legendre::eval(&anti, shi) - legendre::eval(&anti, slo)
                    };
                    total[(r, c)] += scale * v;
                }
            }
        }
        Ok(total)
    }

    /// Re-expresses the function on a finer partition containing all current
    /// breakpoints.
    pub fn refine(&self, breakpoints: &[f64]) -> Result<MatrixFunction> {
        let merged = merge_breakpoints(&self.breakpoints, breakpoints);
        if merged.len() != breakpoints.len() {
            return Err(err!(Invalid, MODULE, "refinement must contain every existing breakpoint"));
        }
        if merged == self.breakpoints {
            return Ok(self.clone());
        }
        let knots = knots_of(&merged);
        let pieces = knots
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.pieces[self.piece_index(mid)].restricted(w[0], w[1])
            })
            .collect();
        Self::from_parts(self.rows, self.cols, merged, pieces)
    }

    /// Both operands re-expressed on their common refinement.
    fn aligned(&self, other: &MatrixFunction) -> Result<(MatrixFunction, MatrixFunction)> {
        let merged = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        Ok((self.refine(&merged)?, other.refine(&merged)?))
    }

    pub fn transpose(&self) -> MatrixFunction {
        let mut out = self.clone();
        out.rows = self.cols;
        out.cols = self.rows;
        for (dst, src) in out.pieces.iter_mut().zip(&self.pieces) {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    dst.entries[c * self.rows + r] = src.entries[r * self.cols + c].clone();
                }
            }
        }
        out
    }

    /// Pointwise matrix product `self(t) * other(t)`.
    pub fn mul(&self, other: &MatrixFunction) -> Result<MatrixFunction> {
        if self.cols != other.rows {
            return Err(err!(Shape, MODULE, "cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let (a, b) = self.aligned(other)?;
        let mut pieces = Vec::with_capacity(a.pieces.len());
        for (pa, pb) in a.pieces.iter().zip(&b.pieces) {
            let len = pa.len() + pb.len() - 1;
            let mut entries = vec![vec![0.0; len]; a.rows * b.cols];
            for r in 0..a.rows {
                for c in 0..b.cols {
                    let dst = &mut entries[r * b.cols + c];
                    for m in 0..a.cols {
                        let x = &pa.entries[r * a.cols + m];
                        let y = &pb.entries[m * b.cols + c];
                        if x.iter().all(|v| *v == 0.0) || y.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        for (d, v) in dst.iter_mut().zip(legendre::mul(x, y)) {
                            *d += v;
                        }
                    }
                }
            }
            pieces.push(Piece { interval: pa.interval, entries });
        }
        Self::from_parts(a.rows, b.cols, a.breakpoints, pieces)
    }

    fn zip_with(&self, other: &MatrixFunction, f: impl Fn(f64, f64) -> f64) -> Result<MatrixFunction> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(err!(Shape, MODULE, "{}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let (a, b) = self.aligned(other)?;
        let pieces = a
            .pieces
            .iter()
            .zip(&b.pieces)
            .map(|(pa, pb)| {
                let len = pa.len().max(pb.len());
                let (pa, pb) = (pa.padded(len), pb.padded(len));
                let entries = pa
                    .entries
                    .iter()
                    .zip(&pb.entries)
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| f(*u, *v)).collect())
                    .collect();
                Piece { interval: pa.interval, entries }
            })
            .collect();
        Self::from_parts(self.rows, self.cols, a.breakpoints, pieces)
    }

    pub fn add(&self, other: &MatrixFunction) -> Result<MatrixFunction> {
        self.zip_with(other, |u, v| u + v)
    }

    pub fn sub(&self, other: &MatrixFunction) -> Result<MatrixFunction> {
        self.zip_with(other, |u, v| u - v)
    }

    pub fn scale(&self, s: f64) -> MatrixFunction {
        let mut out = self.clone();
        for p in out.pieces.iter_mut() {
            for e in p.entries.iter_mut() {
                e.iter_mut().for_each(|v| *v *= s);
            }
        }
        out
    }

    /// Left multiplication by a constant matrix.
    pub fn left_mul_const(&self, m: &DMatrix<f64>) -> Result<MatrixFunction> {
        MatrixFunction::constant(m).mul(self)
    }

    /// Right multiplication by a constant matrix.
    pub fn right_mul_const(&self, m: &DMatrix<f64>) -> Result<MatrixFunction> {
        self.mul(&MatrixFunction::constant(m))
    }

    /// Rows `start..end`, coefficients copied exactly.
    pub fn row_block(&self, start: usize, end: usize) -> Result<MatrixFunction> {
        if start >= end || end > self.rows {
            return Err(err!(Shape, MODULE, "row range {start}..{end} invalid for {} rows", self.rows));
        }
        let mut out = self.clone();
        out.rows = end - start;
        for (dst, src) in out.pieces.iter_mut().zip(&self.pieces) {
            dst.entries = src.entries[start * self.cols..end * self.cols].to_vec();
        }
        Ok(out)
    }

    /// Stacks `top` over `bottom`; coefficients copied exactly.
    pub fn vstack(top: &MatrixFunction, bottom: &MatrixFunction) -> Result<MatrixFunction> {
        if top.cols != bottom.cols {
            return Err(err!(Shape, MODULE, "cannot stack {} columns on {}", top.cols, bottom.cols));
        }
        let (a, b) = top.aligned(bottom)?;
        let pieces = a
            .pieces
            .iter()
            .zip(&b.pieces)
            .map(|(pa, pb)| {
                let len = pa.len().max(pb.len());
                let mut entries = pa.padded(len).entries;
                entries.extend(pb.padded(len).entries);
                Piece { interval: pa.interval, entries }
            })
            .collect();
        Self::from_parts(top.rows + bottom.rows, top.cols, a.breakpoints, pieces)
    }

    /// Largest absolute Legendre coefficient.
    pub fn coeff_max_abs(&self) -> f64 {
        self.pieces.iter().flat_map(|p| p.entries.iter().flatten()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Evaluation grid: `n` equispaced points on [0, 1] plus every breakpoint
    /// together with a point just to its left, sorted.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let mut pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        for &b in &self.breakpoints {
            pts.push(b);
            pts.push((b - 1e-9).max(0.0));
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        pts
    }

    /// Largest entry magnitude over `grid(n)` and where it occurs.
    pub fn sup_norm_on_grid(&self, n: usize) -> (f64, f64) {
        self.grid(n)
            .into_iter()
            .map(|t| (self.eval_unchecked(t).amax(), t))
            .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
    }

    /// `A(t)^T J B(t)`.
    pub fn sandwich(a: &MatrixFunction, j: &SymplecticForm, b: &MatrixFunction) -> Result<MatrixFunction> {
        if a.rows != j.dim() || b.rows != j.dim() {
            return Err(err!(Shape, MODULE, "sandwich needs {} rows, got {} and {}", j.dim(), a.rows, b.rows));
        }
        a.transpose().mul(&j.apply(b)?)
    }

    /// Forces exact skew-symmetry of a square function: the strictly lower
    /// triangle becomes the negated upper triangle and the diagonal vanishes.
    pub fn skew_part_exact(&self) -> Result<MatrixFunction> {
        if self.rows != self.cols {
            return Err(err!(Shape, MODULE, "skew part of a non-square {}x{} function", self.rows, self.cols));
        }
        let mut out = self.clone();
        let n = self.rows;
        for (dst, src) in out.pieces.iter_mut().zip(&self.pieces) {
            for r in 0..n {
                for c in 0..n {
                    let v: Vec<f64> = if r == c {
                        vec![0.0; src.len()]
                    } else {
                        src.entries[r * n + c]
                            .iter()
                            .zip(&src.entries[c * n + r])
                            .map(|(x, y)| 0.5 * (x - y))
                            .collect()
                    };
                    dst.entries[r * n + c] = v;
                }
            }
            for r in 0..n {
                for c in 0..r {
                    let up = dst.entries[c * n + r].clone();
                    dst.entries[r * n + c] = up.into_iter().map(|v| -v).collect();
                }
            }
        }
        Ok(out)
    }
}
