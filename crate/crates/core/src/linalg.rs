//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`, stored column-major. `vec`
//! stacks columns, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)` holds with the plain
//! (non-conjugated) transpose of `B`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

const HERMITIAN_TOL: f64 = 1e-10;
const EIG_TOL: f64 = 1e-14;
const EIG_MAX_ITERS: usize = 10_000;
const SVD_MAX_ITERS: usize = 10_000;
/// `sigma_min / sigma_max` below which a matrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Rejects matrices with NaN or infinite entries.
pub fn check_finite(a: &CMatrix, op: &'static str) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { op, row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = CMatrix::zeros(m * p, n * q);
    for j in 0..n {
        for i in 0..m {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            out.view_mut((i * p, j * q), (p, q))
                .zip_apply(b, |o, bv| *o = s * bv);
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `rows * cols` vector column by column.
pub fn unvec(c: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if c.len() != rows * cols {
        return Err(Error::Dimension {
            op: "unvec",
            expected: format!("length {}", rows * cols),
            got: format!("length {}", c.len()),
        });
    }
    Ok(CMatrix::from_column_slice(rows, cols, c.as_slice()))
}

/// Length of the half-vectorization of an `n x n` matrix.
pub fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` (with `i >= j`) inside `vech`.
pub fn vech_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    // columns 0..j hold n + (n-1) + ... + (n-j+1) entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Half-vectorization: stacks the lower triangle column by column,
/// `[A11, ..., An1, A22, ..., An2, ..., Ann]`. Symmetry is not required.
pub fn vech(a: &CMatrix) -> Result<CVector> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::NotSquare {
            op: "vech",
            rows: r,
            cols: c,
        });
    }
    let mut out = Vec::with_capacity(vech_len(r));
    for j in 0..r {
        for i in j..r {
            out.push(a[(i, j)]);
        }
    }
    Ok(CVector::from_vec(out))
}

/// Rebuilds the symmetric matrix whose `vech` is `v`; the result is exactly
/// symmetric. Equivalent to `unvec(D_n v, n, n)`.
pub fn unvech(v: &CVector, n: usize) -> Result<CMatrix> {
    if v.len() != vech_len(n) {
        return Err(Error::Dimension {
            op: "unvech",
            expected: format!("length {}", vech_len(n)),
            got: format!("length {}", v.len()),
        });
    }
    let mut out = CMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            out[(i, j)] = v[k];
            out[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(out)
}

/// The duplication matrix `D_n` (`n² x n(n+1)/2`), stored as the vech column
/// selected by each of its rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicationMatrix {
    n: usize,
    row_to_col: Vec<usize>,
}

impl DuplicationMatrix {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "duplication matrix needs n >= 1");
        let mut row_to_col = vec![0; n * n];
        let mut k = 0;
        for j in 0..n {
            for i in j..n {
                row_to_col[i + j * n] = k;
                row_to_col[j + i * n] = k;
                k += 1;
            }
        }
        Self { n, row_to_col }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.n * self.n
    }

    pub fn cols(&self) -> usize {
        vech_len(self.n)
    }

    /// vech column that row `r` of the matrix selects.
    pub fn column_of_row(&self, r: usize) -> usize {
        self.row_to_col[r]
    }

    /// Dense real 0/1 form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows(), self.cols());
        for (r, &c) in self.row_to_col.iter().enumerate() {
            d[(r, c)] = 1.0;
        }
        d
    }

    /// `D v`, i.e. `vec` of the symmetric matrix with `vech` equal to `v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.cols());
        CVector::from_iterator(self.rows(), self.row_to_col.iter().map(|&c| v[c]))
    }

    /// `Dᵀ w` for a length-`n²` vector `w`.
    pub fn transpose_apply(&self, w: &CVector) -> CVector {
        assert_eq!(w.len(), self.rows());
        let mut out = CVector::zeros(self.cols());
        for (r, &c) in self.row_to_col.iter().enumerate() {
            out[c] += w[r];
        }
        out
    }

    /// `B D` for `B` with `n²` columns, computed by summing columns.
    pub fn right_apply(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.ncols(), self.rows());
        let mut out = CMatrix::zeros(b.nrows(), self.cols());
        for (r, &c) in self.row_to_col.iter().enumerate() {
            let src = b.column(r);
            let mut dst = out.column_mut(c);
            dst += src;
        }
        out
    }
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `A - Aᴴ`.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    let (r, c) = a.shape();
    let mut worst = 0.0_f64;
    for j in 0..c {
        for i in 0..r {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Checks squareness and Hermitian symmetry (relative tolerance 1e-10).
pub fn ensure_hermitian(a: &CMatrix, op: &'static str) -> Result<()> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::NotSquare {
            op,
            rows: r,
            cols: c,
        });
    }
    let residual = hermitian_residual(a);
    if residual > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian { op, residual });
    }
    Ok(())
}

/// An upper bound on the largest eigenvalue of a Hermitian matrix.
///
/// Returns the exact value when the symmetric eigen-solver converges, the
/// Gershgorin row-sum bound otherwise.
pub fn max_eigenvalue_hermitian(a: &CMatrix) -> Result<f64> {
    ensure_hermitian(a, "max_eigenvalue_hermitian")?;
    check_finite(a, "max_eigenvalue_hermitian")?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let h = hermitian_part(a);
    match nalgebra::SymmetricEigen::try_new(h, EIG_TOL, EIG_MAX_ITERS) {
        Some(eig) => Ok(eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)),
        None => Ok(gershgorin_bound(a)),
    }
}

/// `max_i (Re a_ii + sum_{j != i} |a_ij|)`, always `>= lambda_max`.
pub fn gershgorin_bound(a: &CMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let off: f64 = (0..a.ncols())
                .filter(|&j| j != i)
                .map(|j| a[(i, j)].norm())
                .sum();
            a[(i, i)].re + off
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Full singular value decomposition `a = left · diag(σ) · rightᴴ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x m` unitary.
    pub left: CMatrix,
    /// `min(m, n)` nonincreasing nonnegative values.
    pub singular_values: DVector<f64>,
    /// `n x n` unitary.
    pub right: CMatrix,
}

impl Svd {
    /// The `m x n` rectangular diagonal factor.
    pub fn sigma(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.left.nrows(), self.right.nrows());
        for (k, &v) in self.singular_values.iter().enumerate() {
            s[(k, k)] = C64::new(v, 0.0);
        }
        s
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.left * self.sigma() * self.right.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    check_finite(a, "svd")?;
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd {
            left: CMatrix::identity(m, m),
            singular_values: DVector::zeros(0),
            right: CMatrix::identity(n, n),
        });
    }
    let mut dec = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::NoConvergence("svd"))?;
    dec.sort_by_singular_values();
    let u = dec.u.ok_or(Error::NoConvergence("svd"))?;
    let v_t = dec.v_t.ok_or(Error::NoConvergence("svd"))?;
    Ok(Svd {
        left: complete_unitary(&u),
        singular_values: dec.singular_values,
        right: complete_unitary(&v_t.adjoint()),
    })
}

/// Extends a matrix with orthonormal columns to a square unitary matrix.
fn complete_unitary(q: &CMatrix) -> CMatrix {
    let (m, k) = q.shape();
    if k == m {
        return q.clone();
    }
    let mut cols: Vec<CVector> = q.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..m {
        if cols.len() == m {
            break;
        }
        let mut v = CVector::zeros(m);
        v[e] = ONE;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 0.5 {
            cols.push(v.unscale(nrm));
        }
    }
    CMatrix::from_columns(&cols)
}

/// The unitary matrix closest to `x` in Frobenius norm (polar factor
/// `left · rightᴴ` of the SVD). Errors when `x` is rank deficient.
pub fn nearest_unitary(x: &CMatrix) -> Result<CMatrix> {
    let (u, ratio) = polar_unitary(x)?;
    if !(ratio > RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(u)
}

/// Polar unitary factor together with `sigma_min / sigma_max`. For rank
/// deficient input the factor is one of several Frobenius minimizers.
pub fn polar_unitary(x: &CMatrix) -> Result<(CMatrix, f64)> {
    let (r, c) = x.shape();
    if r != c {
        return Err(Error::NotSquare {
            op: "nearest_unitary",
            rows: r,
            cols: c,
        });
    }
    let dec = svd(x)?;
    let smax = dec.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = dec
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    Ok((&dec.left * dec.right.adjoint(), ratio))
}

/// `‖AᴴA − I‖_F`.
pub fn unitarity_residual(a: &CMatrix) -> f64 {
    let n = a.ncols();
    (a.adjoint() * a - CMatrix::identity(n, n)).norm()
}

/// `xᴴ A y`.
pub fn bilinear(x: &CVector, a: &CMatrix, y: &CVector) -> C64 {
    x.dotc(&(a * y))
}

/// The `n x n` unitary DFT matrix.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |i, k| {
        let ang = -2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
        C64::from_polar(scale, ang)
    })
}
