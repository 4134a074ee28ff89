//! Concrete coherent-state families.
//!
//! Every family uses `G = C^{K_max+1}` with its standard basis as the frame
//! `φ_k`, standing in for the orthonormal basis `Φ_k` of the abstract Hilbert
//! space, except the Cuntz family which lives in [`crate::cuntz`].

use std::sync::Arc;

use crate::cstar::{spectral_norm, CMatrix, C64};
use crate::engine::{verify_orthogonality, CSFamily};
use crate::error::{Error, Result};
use crate::quadrature::{upper_gamma_regularized_int, Node, QuadratureRule};

mod analytic;
mod canonical;
mod hermite;
mod landau;
mod quaternion;
mod vcs_matrix;

pub use analytic::{analytic_ck, analytic_ck_f64, analytic_family, analytic_tail, ginibre_entries};
pub use canonical::{canonical_family, CanonicalFamily};
pub use hermite::{complex_hermite, complex_hermite_table, hermite_gram_defect};
pub use landau::{landau_family, landau_state, LandauFamily};
pub use quaternion::{
    pauli_n, quaternion_encode, quaternion_encode_conjugated, quaternion_family, quaternion_power, QuaternionFamily,
    QuaternionVcsReport,
};
pub use vcs_matrix::{sun_relation_defect, vcs_matrix_family, VcsMatrixFamily};

pub use crate::quadrature::QuaternionParam;

/// Evaluates scalar basis functions `Φ_0(x), …, Φ_{K_max}(x)`.
pub type ScalarEvaluator = Arc<dyn Fn(&Node) -> Result<Vec<C64>> + Send + Sync>;

/// Evaluates vector basis functions `𝚽_0(x), …, 𝚽_{K_max}(x) ∈ C^N`.
pub type VectorEvaluator = Arc<dyn Fn(&Node) -> Result<Vec<Vec<C64>>> + Send + Sync>;

/// `z^k / √k!` for `k = 0..=k_max`, by the stable ratio recurrence.
pub fn monomials_over_sqrt_factorial(z: C64, k_max: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut t = C64::new(1.0, 0.0);
    out.push(t);
    for k in 1..=k_max {
        t = t * z / (k as f64).sqrt();
        out.push(t);
    }
    out
}

/// `Σ_{k > k_max} t^k/k!` relative to `e^t`: the Poisson mass above `k_max`.
pub fn poisson_tail(k_max: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t > k_max as f64 + 40.0 * t.sqrt() {
        return (1.0 - upper_gamma_regularized_int(k_max, t)).max(0.0);
    }
    let mut term = (-t).exp();
    for j in 1..=k_max + 1 {
        term *= t / j as f64;
    }
    let mut sum = 0.0;
    let mut k = k_max + 1;
    while term > 0.0 && term > 1e-18 * sum {
        sum += term;
        k += 1;
        term *= t / k as f64;
    }
    sum
}

/// Orthonormal scalar functions on a discretized measure space.
#[derive(Clone)]
pub struct ScalarKernelBasis {
    phi: ScalarEvaluator,
    measure: QuadratureRule,
    k_max: usize,
    truncation_tail: f64,
}

impl ScalarKernelBasis {
    /// Checks `||∫ Φ_k conj Φ_l dμ - δ_kl|| ≤ gram_tol + tail_bound`.
    pub fn new(
        phi: ScalarEvaluator,
        measure: QuadratureRule,
        k_max: usize,
        truncation_tail: f64,
        gram_tol: f64,
    ) -> Result<Self> {
        let basis = Self { phi, measure, k_max, truncation_tail };
        let n = k_max + 1;
        let mut gram = CMatrix::zeros(n, n);
        for (x, w) in basis.measure.iter() {
            let v = basis.eval(&x)?;
            let col = CMatrix::from_column_slice(n, 1, &v);
            gram.gerc(C64::new(w, 0.0), &col.column(0), &col.column(0), C64::new(1.0, 0.0));
        }
        let defect = spectral_norm(&(gram - CMatrix::identity(n, n)));
        let tolerance = gram_tol + basis.measure.tail_bound();
        if defect > tolerance {
            return Err(Error::GramDefect { defect, tolerance });
        }
        Ok(basis)
    }

    /// The Bargmann basis `z^k/√k!` under the complex Gaussian measure.
    ///
    /// The truncation tail is the relative mass `Σ_{k>K} ρ^{2k}/k! / e^{ρ²}`
    /// discarded at the reference radius `ρ`.
    pub fn bargmann(k_max: usize, measure: QuadratureRule, reference_radius: f64, gram_tol: f64) -> Result<Self> {
        let phi: ScalarEvaluator = Arc::new(move |x: &Node| Ok(monomials_over_sqrt_factorial(x.as_complex()?, k_max)));
        let tail = poisson_tail(k_max, reference_radius * reference_radius);
        Self::new(phi, measure, k_max, tail, gram_tol)
    }

    pub fn eval(&self, x: &Node) -> Result<Vec<C64>> {
        let v = (self.phi)(x)?;
        if v.len() != self.k_max + 1 {
            return Err(Error::InconsistentDimensions { expected: self.k_max + 1, found: v.len() });
        }
        Ok(v)
    }

    pub fn measure(&self) -> &QuadratureRule {
        &self.measure
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    pub(crate) fn evaluator(&self) -> ScalarEvaluator {
        self.phi.clone()
    }
}

/// Orthonormal `C^N`-valued functions on a discretized measure space.
#[derive(Clone)]
pub struct VectorBasis {
    phi: VectorEvaluator,
    measure: QuadratureRule,
    n: usize,
    k_max: usize,
}

impl VectorBasis {
    /// Checks `||∫ 𝚽_k† 𝚽_l dμ - δ_kl|| ≤ gram_tol + tail_bound`.
    pub fn new(phi: VectorEvaluator, measure: QuadratureRule, n: usize, k_max: usize, gram_tol: f64) -> Result<Self> {
        let basis = Self { phi, measure, n, k_max };
        let kk = k_max + 1;
        let mut gram = CMatrix::zeros(kk, kk);
        for (x, w) in basis.measure.iter() {
            let vs = basis.eval(&x)?;
            let m = CMatrix::from_fn(n, kk, |i, k| vs[k][i]);
            gram += (m.adjoint() * &m) * C64::new(w, 0.0);
        }
        let defect = spectral_norm(&(gram - CMatrix::identity(kk, kk)));
        let tolerance = gram_tol + basis.measure.tail_bound();
        if defect > tolerance {
            return Err(Error::GramDefect { defect, tolerance });
        }
        Ok(basis)
    }

    /// `𝚽_{Nm+i}(z) = (z^m/√m!) R χ^i` with `R` the unitary discrete Fourier
    /// matrix, under the complex Gaussian measure.
    pub fn gaussian_fourier(n: usize, k_max: usize, measure: QuadratureRule, gram_tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        let dft = fourier_matrix(n);
        let phi: VectorEvaluator = Arc::new(move |x: &Node| {
            let z = x.as_complex()?;
            let mono = monomials_over_sqrt_factorial(z, k_max / n);
            Ok((0..=k_max)
                .map(|k| {
                    let (m, i) = (k / n, k % n);
                    (0..n).map(|r| dft[(r, i)] * mono[m]).collect()
                })
                .collect())
        });
        Self::new(phi, measure, n, k_max, gram_tol)
    }

    pub fn eval(&self, x: &Node) -> Result<Vec<Vec<C64>>> {
        let v = (self.phi)(x)?;
        if v.len() != self.k_max + 1 || v.iter().any(|c| c.len() != self.n) {
            return Err(Error::InconsistentDimensions { expected: self.k_max + 1, found: v.len() });
        }
        Ok(v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn measure(&self) -> &QuadratureRule {
        &self.measure
    }

    /// `𝐊(x,y) = Σ_k 𝚽_k(x) 𝚽_k(y)†`.
    pub fn kernel(&self, x: &Node, y: &Node) -> Result<CMatrix> {
        let (fx, fy) = (self.eval(x)?, self.eval(y)?);
        let mut k = CMatrix::zeros(self.n, self.n);
        for (a, b) in fx.iter().zip(&fy) {
            for i in 0..self.n {
                for j in 0..self.n {
                    k[(i, j)] += a[i] * b[j].conj();
                }
            }
        }
        Ok(k)
    }
}

/// Unitary DFT matrix `R_{rs} = e^{2πi rs/n}/√n`.
pub fn fourier_matrix(n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |r, c| C64::from_polar(s, 2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64))
}

/// Fails with [`Error::GramDefect`] unless `∫ F_k F_l* dμ = δ_kl I` within
/// `tol` plus the rule's tail bound.
pub fn validate_gram(fam: &CSFamily, tol: f64) -> Result<()> {
    let rep = verify_orthogonality(fam, tol)?;
    if rep.pass {
        Ok(())
    } else {
        Err(Error::GramDefect { defect: rep.max_defect, tolerance: rep.bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gaussian_c_rule, GaussianConvention};

    #[test]
    fn monomials_match_direct_formula() {
        let z = C64::new(1.3, -0.4);
        let m = monomials_over_sqrt_factorial(z, 10);
        for (k, v) in m.iter().enumerate() {
            let f: f64 = (1..=k).map(|j| j as f64).product();
            assert!((v - z.powi(k as i32) / f.sqrt()).norm() < 1e-13 * v.norm().max(1.0));
        }
    }

    #[test]
    fn poisson_tail_examples() {
        assert!((poisson_tail(0, 1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!(poisson_tail(12, 1.0) < 2e-10);
        assert_eq!(poisson_tail(3, 0.0), 0.0);
    }

    #[test]
    fn bargmann_basis_is_orthonormal() {
        let rule = gaussian_c_rule(20, 24, GaussianConvention::Unit).unwrap();
        assert!(ScalarKernelBasis::bargmann(10, rule, 1.0, 1e-10).is_ok());
    }

    #[test]
    fn underresolved_basis_is_rejected() {
        let rule = gaussian_c_rule(2, 3, GaussianConvention::Unit).unwrap();
        assert!(matches!(ScalarKernelBasis::bargmann(6, rule, 1.0, 1e-10), Err(Error::GramDefect { .. })));
    }

    #[test]
    fn fourier_basis_kernel_is_hermitian() {
        let rule = gaussian_c_rule(6, 8, GaussianConvention::Unit).unwrap();
        let b = VectorBasis::gaussian_fourier(3, 8, rule, 1e-10).unwrap();
        let (x, y) = (Node::Complex(C64::new(0.2, 0.5)), Node::Complex(C64::new(-0.3, 0.1)));
        let kxy = b.kernel(&x, &y).unwrap();
        let kyx = b.kernel(&y, &x).unwrap();
        assert!(spectral_norm(&(kxy.adjoint() - kyx)) < 1e-14);
    }
}
