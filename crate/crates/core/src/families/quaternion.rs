use std::sync::Arc;

use crate::cstar::{spectral_norm, CMatrix, CStarMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::Result;
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{Node, QuadratureRule, QuaternionParam};

use super::poisson_tail;

/// `σ(n) = [[cos θ, e^{iφ} sin θ], [e^{-iφ} sin θ, -cos θ]]`.
pub fn pauli_n(theta: f64, phi: f64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), C64::from_polar(s, phi), C64::from_polar(s, -phi), C64::new(-c, 0.0)],
    )
}

/// `q^n = r^n (cos nξ I + i sin nξ σ(n))`.
pub fn quaternion_power(p: QuaternionParam, n: usize) -> CMatrix {
    let sigma = pauli_n(p.theta, p.phi);
    let rn = p.r.powi(n as i32);
    let (s, c) = (n as f64 * p.xi).sin_cos();
    CMatrix::identity(2, 2) * C64::new(rn * c, 0.0) + sigma * C64::new(0.0, rn * s)
}

/// `q = r e^{iξ σ(n)} = r (cos ξ I + i sin ξ σ(n))`.
pub fn quaternion_encode(p: QuaternionParam) -> CStarMatrix {
    CStarMatrix::from_trusted(quaternion_power(p, 1))
}

/// `u(θ,φ) diag(z, z̄) u(θ,φ)*` with `z = r e^{iξ}` and
/// `u = [[i e^{iφ/2} cos θ/2, -e^{iφ/2} sin θ/2], [e^{-iφ/2} sin θ/2, -i e^{-iφ/2} cos θ/2]]`.
///
/// This equals [`quaternion_encode`] with the azimuth advanced by `π/2`.
pub fn quaternion_encode_conjugated(p: QuaternionParam) -> CStarMatrix {
    let (s, c) = (p.theta / 2.0).sin_cos();
    let e = C64::from_polar(1.0, p.phi / 2.0);
    let i = C64::new(0.0, 1.0);
    let u = CMatrix::from_row_slice(2, 2, &[i * e * c, -e * s, e.conj() * s, -i * e.conj() * c]);
    let z = C64::from_polar(p.r, p.xi);
    let d = CMatrix::from_row_slice(2, 2, &[z, C64::new(0.0, 0.0), C64::new(0.0, 0.0), z.conj()]);
    CStarMatrix::from_trusted(&u * d * u.adjoint())
}

/// Quaternionic coherent states: the module form `|q> = Σ_n F_n(q) ⊗ Ψ_n`
/// with `F_n(q) = e^{-r²/2} q^n/√n!` and `E = M_2` over itself, and the
/// two-component vector form `|q,j> = |q> χ^j / √2`.
#[derive(Clone)]
pub struct QuaternionFamily {
    family: CSFamily,
}

/// Outcome of [`QuaternionFamily::vcs_resolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionVcsReport {
    /// `||Σ_j ∫ |q,j><q,j| dμ - I||`.
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
    pub nodes_used: usize,
}

fn coefficients(p: QuaternionParam, k_max: usize, out: &mut CMatrix) {
    let (st, ct) = p.theta.sin_cos();
    let e = C64::from_polar(st, p.phi);
    let i = C64::new(0.0, 1.0);
    // e^{-r²/2} r^n/√n! by ratio recurrence
    let mut amp = (-p.r * p.r / 2.0).exp();
    for n in 0..=k_max {
        if n > 0 {
            amp *= p.r / (n as f64).sqrt();
        }
        let (s, c) = (n as f64 * p.xi).sin_cos();
        let (re, is) = (C64::new(amp * c, 0.0), i * (amp * s));
        out[(2 * n, 0)] = re + is * ct;
        out[(2 * n, 1)] = is * e;
        out[(2 * n + 1, 0)] = is * e.conj();
        out[(2 * n + 1, 1)] = re - is * ct;
    }
}

/// The module-form family on `rule`, which should carry the `1/4π²` density.
pub fn quaternion_family(k_max: usize, rule: QuadratureRule) -> Result<QuaternionFamily> {
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        coefficients(x.as_quaternion()?, k_max, out);
        Ok(())
    });
    let family = CSFamily::new(
        "quaternion",
        ModuleSpace::algebra_over_itself(2)?,
        Frame::standard_basis(k_max + 1, k_max + 1)?,
        rule,
        k_max,
        poisson_tail(k_max, 1.0),
        eval,
    )?;
    Ok(QuaternionFamily { family })
}

impl QuaternionFamily {
    pub fn family(&self) -> &CSFamily {
        &self.family
    }

    /// Norm mass discarded by the truncation at radius `r`.
    pub fn tail_at(&self, r: f64) -> f64 {
        poisson_tail(self.family.k_max(), r * r)
    }

    /// `|q,j>` in `C² ⊗ C^{K+1}` (0-based `j`).
    pub fn vcs_state(&self, p: QuaternionParam, j: usize) -> Result<CMatrix> {
        let v = self.family.state_vector(&Node::Quaternion(p), &CStarMatrix::identity(2))?;
        if j >= 2 {
            return Err(crate::Error::InvalidParameter(format!("component {j} of C^2")));
        }
        Ok(v.columns(j, 1).into_owned() * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    /// `Σ_j || |q,j> ||²`.
    pub fn vcs_norm_sum(&self, p: QuaternionParam) -> Result<f64> {
        (0..2).map(|j| self.vcs_state(p, j).map(|v| v.norm_squared())).sum::<Result<f64>>()
    }

    /// `Σ_j ∫ |q,j><q,j| dμ` against `I_2 ⊗ I`, for a rule with any density.
    pub fn vcs_resolution(&self, rule: &QuadratureRule, tol: f64) -> Result<QuaternionVcsReport> {
        let d = 2 * (self.family.k_max() + 1);
        let mut acc = CMatrix::zeros(d, d);
        for (x, w) in rule.iter() {
            for j in 0..2 {
                let v = self.vcs_state(x.as_quaternion()?, j)?;
                acc.gerc(C64::new(w, 0.0), &v.column(0), &v.column(0), C64::new(1.0, 0.0));
            }
        }
        let defect = spectral_norm(&(acc - CMatrix::identity(d, d)));
        let bound = tol + rule.tail_bound();
        Ok(QuaternionVcsReport { defect, bound, pass: defect <= bound, nodes_used: rule.len() })
    }
}
