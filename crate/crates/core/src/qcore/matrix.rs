use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense row-major complex matrix. Kets are stored as `n x 1` columns.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), ncols, data)
    }

    /// Column vector.
    pub fn ket(amplitudes: &[C64]) -> Self {
        Self {
            rows: amplitudes.len(),
            cols: 1,
            data: amplitudes.to_vec(),
        }
    }

    /// Computational basis ket `|index⟩` in dimension `dim`.
    pub fn basis_ket(dim: usize, index: usize) -> Self {
        let mut k = Self::zeros(dim, 1);
        k.data[index] = ONE;
        k
    }

    /// `|a⟩⟨b|` for column vectors `a`, `b`.
    pub fn outer(a: &CMatrix, b: &CMatrix) -> Self {
        debug_assert!(a.cols == 1 && b.cols == 1);
        let mut m = Self::zeros(a.rows, b.rows);
        for i in 0..a.rows {
            let ai = a.data[i];
            if ai == ZERO {
                continue;
            }
            for j in 0..b.rows {
                m.data[i * b.rows + j] = ai * b.data[j].conj();
            }
        }
        m
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &CMatrix) -> Self {
        Self::outer(v, v)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Matrix product. Panics on inner-dimension mismatch; use
    /// [`CMatrix::try_matmul`] for a checked version.
    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        self.try_matmul(other).expect("matmul dimension mismatch")
    }

    pub fn try_matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![ZERO; n * m];
        // Kraus operators here are very sparse; skipping zero entries of the
        // left factor is the dominant saving.
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * m..(k + 1) * m];
                for (o, &b) in row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(CMatrix {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `A · self · B†`
    pub fn sandwich(&self, left: &CMatrix, right: &CMatrix) -> CMatrix {
        let tmp = left.matmul(self);
        // (tmp · right†)_{ij} = Σ_k tmp_ik conj(right_jk)
        let n = tmp.rows;
        let m = right.rows;
        let mut out = vec![ZERO; n * m];
        for j in 0..m {
            for k in 0..right.cols {
                let r = right.data[j * right.cols + k];
                if r == ZERO {
                    continue;
                }
                let rc = r.conj();
                for i in 0..n {
                    out[i * m + j] += tmp.data[i * tmp.cols + k] * rc;
                }
            }
        }
        CMatrix {
            rows: n,
            cols: m,
            data: out,
        }
    }

    /// `U · self · U†`
    pub fn conjugate_by(&self, u: &CMatrix) -> CMatrix {
        self.sandwich(u, u)
    }

    pub fn add_assign_scaled(&mut self, other: &CMatrix, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Largest absolute elementwise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &CMatrix, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .adjoint()
                .matmul(self)
                .approx_eq(&CMatrix::identity(self.rows), tol)
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> CMatrix {
        let adj = self.adjoint();
        let mut out = self.clone();
        for (a, &b) in out.data.iter_mut().zip(&adj.data) {
            *a = (*a + b) * 0.5;
        }
        out
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.rows;
        let h = self.hermitian_part();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &h.data);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigen-decomposition of the Hermitian part: eigenvalues descending with
    /// the matching normalized eigenvectors as kets.
    pub fn hermitian_eigen(&self) -> Vec<(f64, CMatrix)> {
        let n = self.rows;
        let h = self.hermitian_part();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &h.data);
        let eig = m.symmetric_eigen();
        let mut pairs: Vec<(f64, CMatrix)> = (0..n)
            .map(|k| {
                let col: Vec<C64> = (0..n).map(|i| eig.eigenvectors[(i, k)]).collect();
                (eig.eigenvalues[k], CMatrix::ket(&col))
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }

    /// `⟨a|b⟩` for kets.
    pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
        a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product; `a`'s indices are major.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![ZERO; rows * cols];
    for ai in 0..a.rows {
        for aj in 0..a.cols {
            let av = a.data[ai * a.cols + aj];
            if av == ZERO {
                continue;
            }
            for bi in 0..b.rows {
                let r = ai * b.rows + bi;
                for bj in 0..b.cols {
                    let c = aj * b.cols + bj;
                    data[r * cols + c] = av * b.data[bi * b.cols + bj];
                }
            }
        }
    }
    CMatrix { rows, cols, data }
}

/// Pauli matrices and other fixed single-qubit operators.
pub mod ops {
    use super::{CMatrix, C64};

    fn m2(a: C64, b: C64, c: C64, d: C64) -> CMatrix {
        CMatrix::new(2, 2, vec![a, b, c, d]).unwrap()
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    pub fn sigma_x() -> CMatrix {
        m2(re(0.0), re(1.0), re(1.0), re(0.0))
    }

    pub fn sigma_y() -> CMatrix {
        m2(re(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), re(0.0))
    }

    pub fn sigma_z() -> CMatrix {
        m2(re(1.0), re(0.0), re(0.0), re(-1.0))
    }

    pub fn hadamard() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        m2(re(s), re(s), re(s), re(-s))
    }

    /// `[I, σx, σy, σz]`
    pub fn paulis() -> [CMatrix; 4] {
        [CMatrix::identity(2), sigma_x(), sigma_y(), sigma_z()]
    }
}
