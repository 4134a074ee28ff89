//! Finite-dimensional C*-algebra substrate.
//!
//! Elements of `M_n(C)` with the operator norm, positivity tests and
//! Hermitian functional calculus, plus the Kronecker product and partial
//! trace used to move between an algebra and its tensor products.
//!
//! Kronecker products use row-major ordering with the left factor outermost:
//! `(a ⊗ b)[i*db + k, j*db + l] = a[i, j] * b[k, l]`.
//!
//! In a finite matrix algebra a co-isometry (`a a* = id`) is automatically a
//! unitary, so [`CStarMatrix::coisometry_defect`] doubles as a unitarity test.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default cap on any composite dimension (Kronecker products, carrier spaces).
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "MVCS_MAX_DIM";

/// The active dimension cap: `MVCS_MAX_DIM` if set to a positive integer,
/// otherwise [`DEFAULT_MAX_DIM`].
pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub(crate) fn check_dim(requested: usize) -> Result<()> {
    let cap = max_dim();
    if requested > cap {
        Err(Error::DimensionLimit { requested, cap })
    } else {
        Ok(())
    }
}

/// Tolerances for positivity and for operator identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTolerance {
    /// Eigenvalues above `-psd_floor` count as nonnegative.
    pub psd_floor: f64,
    /// Norm tolerance for equalities between operators.
    pub equality_tol: f64,
}

impl SpectralTolerance {
    pub fn new(psd_floor: f64, equality_tol: f64) -> Result<Self> {
        if !(psd_floor >= 0.0 && equality_tol > 0.0 && psd_floor <= equality_tol) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= psd_floor <= equality_tol, equality_tol > 0 (got {psd_floor:e}, {equality_tol:e})"
            )));
        }
        Ok(Self { psd_floor, equality_tol })
    }
}

impl Default for SpectralTolerance {
    fn default() -> Self {
        Self { psd_floor: 1e-10, equality_tol: 1e-8 }
    }
}

/// Outcome of [`CStarMatrix::psd_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    /// Smallest eigenvalue of the Hermitian part `(m + m*)/2`.
    pub min_eigenvalue: f64,
    /// `||m - m*||`.
    pub hermiticity_defect: f64,
}

/// Which tensor factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Largest singular value of an arbitrary (possibly rectangular) matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `max |λ|` over the eigenvalues of the Hermitian part; the spectral norm
/// for Hermitian input, at a fraction of the cost of an SVD.
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    hermitian_spectrum(m).iter().fold(0.0, |acc, l| acc.max(l.abs()))
}

/// Number of singular values above `rel_tol * largest`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Eigen-decomposition of the Hermitian part of a square matrix.
fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let h = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(h)
}

// Skips the eigenvectors, which dominate the cost for large matrices.
fn hermitian_spectrum(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// An element of `M_n(C)`: square, finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CStarMatrix(CMatrix);

impl CStarMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be square and finite.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn scalar(z: C64) -> Self {
        Self(CMatrix::from_element(1, 1, z))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { C64::new(0.0, 0.0) }))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Builds an `n x n` matrix from row-major entries.
    pub fn from_row_slice(n: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidMatrix(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        Self::new(CMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(self.0.map(|x| x * z))
    }

    /// The C*-norm: largest singular value.
    pub fn op_norm(&self) -> f64 {
        spectral_norm(&self.0)
    }

    /// `||self - other||`; panics on dimension mismatch.
    pub fn distance(&self, other: &Self) -> f64 {
        spectral_norm(&(&self.0 - &other.0))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        spectral_norm(&(&self.0 - self.0.adjoint()))
    }

    /// `||a a* - id||`.
    pub fn coisometry_defect(&self) -> f64 {
        let n = self.dim();
        spectral_norm(&(&self.0 * self.0.adjoint() - CMatrix::identity(n, n)))
    }

    /// `(m + m*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).scale(0.5))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev = hermitian_spectrum(&self.0);
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_spectrum(&self.0).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Positive semidefiniteness: Hermitian within `equality_tol` and every
    /// eigenvalue of the Hermitian part at least `-psd_floor`.
    pub fn psd_check(&self, tol: SpectralTolerance) -> PsdReport {
        let hermiticity_defect = self.hermiticity_defect();
        let min_eigenvalue = self.min_eigenvalue();
        PsdReport {
            is_psd: hermiticity_defect <= tol.equality_tol && min_eigenvalue >= -tol.psd_floor,
            min_eigenvalue,
            hermiticity_defect,
        }
    }

    /// Applies a real function to the spectrum of the Hermitian part.
    pub fn hermitian_function(&self, f: impl Fn(f64) -> f64) -> Self {
        let eig = hermitian_eigen(&self.0);
        let v = &eig.eigenvectors;
        let n = self.dim();
        let mut scaled = v.clone();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            let fl = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        Self(&scaled * v.adjoint())
    }

    /// `m^{-1/2}` for a strictly positive `m`.
    pub fn inv_sqrt_pos(&self, tol: SpectralTolerance) -> Result<Self> {
        let report = self.psd_check(tol);
        if !report.is_psd || report.min_eigenvalue <= tol.psd_floor {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: report.min_eigenvalue });
        }
        Ok(self.hermitian_function(|l| 1.0 / l.sqrt()))
    }

    pub fn sqrt_psd(&self) -> Self {
        self.hermitian_function(|l| l.max(0.0).sqrt())
    }

    /// Kronecker product, left factor outermost.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim() * other.dim())?;
        Ok(Self(kron_matrix(&self.0, &other.0)))
    }

    /// Traces out one factor of `C^{d1} ⊗ C^{d2}`.
    pub fn partial_trace(&self, dims: (usize, usize), over: Factor) -> Result<Self> {
        let (d1, d2) = dims;
        if d1 == 0 || d2 == 0 || d1 * d2 != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "partial trace dims ({d1}, {d2}) do not factor dimension {}",
                self.dim()
            )));
        }
        let m = &self.0;
        let out = match over {
            Factor::First => CMatrix::from_fn(d2, d2, |k, l| (0..d1).map(|i| m[(i * d2 + k, i * d2 + l)]).sum()),
            Factor::Second => CMatrix::from_fn(d1, d1, |i, j| (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()),
        };
        Ok(Self(out))
    }
}

/// Kronecker product of rectangular matrices (no dimension cap).
pub fn kron_matrix(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

impl Add for &CStarMatrix {
    type Output = CStarMatrix;
    fn add(self, rhs: &CStarMatrix) -> CStarMatrix {
        CStarMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CStarMatrix {
    type Output = CStarMatrix;
    fn sub(self, rhs: &CStarMatrix) -> CStarMatrix {
        CStarMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &CStarMatrix {
    type Output = CStarMatrix;
    fn mul(self, rhs: &CStarMatrix) -> CStarMatrix {
        CStarMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &CStarMatrix {
    type Output = CStarMatrix;
    fn neg(self) -> CStarMatrix {
        CStarMatrix(-&self.0)
    }
}

impl AsRef<CMatrix> for CStarMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}
