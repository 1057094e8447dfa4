//! Dense complex matrix primitives.
//!
//! Determinants are only ever exposed as `ln|det|`, accumulated from LU pivot
//! moduli; raw determinants of the sector sums overflow long before the block
//! sizes of interest.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Pivot moduli below this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-30;

const HERMITIAN_TOL: f64 = 1e-8;

/// Square dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    /// Row-major real entries.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: rows.len(),
            });
        }
        Self::new(DMatrix::from_fn(dim, dim, |i, j| C64::new(rows[i * dim + j], 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { diag[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest |imaginary part| over all entries.
    pub fn max_imag(&self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// ‖M − M†‖_F / ‖M‖_F (0 for the zero matrix).
    pub fn hermiticity_defect(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.0 - self.0.adjoint()).norm() / norm
    }

    /// ‖M†M − I‖_F.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(n, n)).norm()
    }

    /// Principal ℓ−1 dimensional compression onto the orthogonal complement of
    /// the normalized all-ones vector.
    pub fn compress_off_uniform(&self) -> Self {
        let basis = uniform_complement_basis(self.dim());
        Self(basis.adjoint() * &self.0 * &basis)
    }

    /// Submatrix over rows and columns `0..k`.
    pub fn leading_block(&self, k: usize) -> Self {
        Self(self.0.view((0, 0), (k, k)).into_owned())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

/// Orthonormal basis (as columns) of the complement of (1,…,1)/√n, taken from
/// the Householder reflector that maps e₀ onto the uniform vector.
fn uniform_complement_basis(n: usize) -> DMatrix<C64> {
    if n <= 1 {
        return DMatrix::zeros(n, 0);
    }
    let u = 1.0 / (n as f64).sqrt();
    let mut v = vec![u; n];
    v[0] -= 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    DMatrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let delta = if i == col { 1.0 } else { 0.0 };
        C64::new(delta - 2.0 * v[i] * v[col] / vv, 0.0)
    })
}

/// LU factors with row pivots; column-major storage, unit lower triangle implicit.
struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &ComplexMatrix) -> Result<Self> {
        let n = m.dim();
        let mut a: Vec<C64> = m.0.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let col_k = &a[k * n..(k + 1) * n];
            let (p, best) = col_k[k..]
                .iter()
                .enumerate()
                .map(|(i, z)| (i + k, z.norm_sqr()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let pivot_mod = best.sqrt();
            if !(pivot_mod >= SINGULAR_PIVOT) {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: pivot_mod,
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(j * n + k, j * n + p);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / a[k * n + k];
            for z in &mut a[k * n + k + 1..(k + 1) * n] {
                *z *= inv;
            }
            let (left, right) = a.split_at_mut((k + 1) * n);
            let lcol = &left[k * n + k + 1..(k + 1) * n];
            for col in right.chunks_exact_mut(n) {
                let ukj = col[k];
                if ukj.re == 0.0 && ukj.im == 0.0 {
                    continue;
                }
                for (x, l) in col[k + 1..].iter_mut().zip(lcol) {
                    *x -= l * ukj;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    fn log_abs_det(&self) -> f64 {
        (0..self.n).map(|k| self.lu[k * self.n + k].norm().ln()).sum()
    }

    /// Solves in place for one right-hand side already permuted.
    fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for k in 0..n {
            let bk = b[k];
            if bk.re == 0.0 && bk.im == 0.0 {
                continue;
            }
            let col = &self.lu[k * n..(k + 1) * n];
            for (x, l) in b[k + 1..].iter_mut().zip(&col[k + 1..]) {
                *x -= l * bk;
            }
        }
        for k in (0..n).rev() {
            let col = &self.lu[k * n..(k + 1) * n];
            b[k] /= col[k];
            let bk = b[k];
            for (x, u) in b[..k].iter_mut().zip(&col[..k]) {
                *x -= u * bk;
            }
        }
    }

    fn inverse(&self) -> ComplexMatrix {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for (j, col) in out.chunks_exact_mut(n).enumerate() {
            // column j of P·I: unit entry at the row that moved into position j's slot
            for (row, &src) in self.perm.iter().enumerate() {
                if src == j {
                    col[row] = C64::new(1.0, 0.0);
                }
            }
            self.solve_in_place(col);
        }
        ComplexMatrix(DMatrix::from_vec(n, n, out))
    }
}

pub fn invert(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(Lu::factor(m)?.inverse())
}

/// Natural log of |det M|, summed over pivot moduli.
pub fn log_abs_det(m: &ComplexMatrix) -> Result<f64> {
    Ok(Lu::factor(m)?.log_abs_det())
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: defect });
    }
    let n = m.dim();
    let eig = nalgebra::SymmetricEigen::new(hermitize(m).0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen {
        values,
        vectors: ComplexMatrix(vectors),
    })
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let v = eig.vectors.as_matrix();
    let d: Vec<C64> = eig.values.iter().map(|&x| f(x)).collect();
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * d[j]);
    Ok(ComplexMatrix(scaled * v.adjoint()))
}

/// Nearest unitary in Frobenius norm, U = M (M†M)^(-1/2), by scaled Newton
/// iteration X ← (ζX + ζ⁻¹X^(-†))/2.
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.dim();
    if n == 0 {
        return Ok(m.clone());
    }
    let mut x = m.clone();
    let tol = 1e-14 * (n as f64).sqrt();
    let mut scaled = true;
    for _ in 0..100 {
        let xinv_h = invert(&x)?.adjoint();
        let zeta = if scaled {
            (xinv_h.frobenius_norm() / x.frobenius_norm()).sqrt()
        } else {
            1.0
        };
        let next = ComplexMatrix(
            &x.0 * C64::new(0.5 * zeta, 0.0) + &xinv_h.0 * C64::new(0.5 / zeta, 0.0),
        );
        let change = (&next.0 - &x.0).norm();
        x = next;
        if change < 1e-2 {
            scaled = false;
        }
        if change <= tol {
            break;
        }
    }
    Ok(x)
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix((&m.0 + m.0.adjoint()) * C64::new(0.5, 0.0))
}
