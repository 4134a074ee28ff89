use std::sync::Arc;

use crate::cstar::{CMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::{Error, Result};
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{gaussian_c_rule, GaussianConvention, Node, QuadratureRule, RuleKind};

use super::{monomials_over_sqrt_factorial, poisson_tail};

/// `|z, z̄'; ℓ> = e^{-(|z'|²+|z|²)/2} z̄'^ℓ Σ_{n ≤ K} z^n/√(n! ℓ!) Ψ_n` in `C^{K+1}`.
pub fn landau_state(z: C64, z_prime: C64, l: usize, k_max: usize) -> CMatrix {
    let pre = (-(z_prime.norm_sqr() + z.norm_sqr()) / 2.0).exp() * monomials_over_sqrt_factorial(z_prime.conj(), l)[l];
    let mono = monomials_over_sqrt_factorial(z, k_max);
    CMatrix::from_iterator(k_max + 1, 1, mono.into_iter().map(|m| m * pre))
}

/// Infinite-component vector coherent states, truncated to `ℓ ≤ L_max` and
/// `n ≤ K_max`, for a fixed `z'`.
///
/// The domain is `C × {0, …, L_max}`; the Gaussian factor `e^{-|z|²}` of
/// `|z,z̄';ℓ><z,z̄';ℓ|` is carried by the measure `e^{-|z|²} dx dy/π`, so
/// `F_n(z, ℓ) = e^{-|z'|²/2} z̄'^ℓ/√ℓ! · z^n/√n!`.
#[derive(Clone)]
pub struct LandauFamily {
    family: CSFamily,
    z_prime: C64,
    l_max: usize,
}

/// Builds the family on the Gaussian rule of the given orders; the counting
/// factor over `ℓ` records the Poisson tail `P(ℓ > L_max)` at `|z'|²`.
pub fn landau_family(k_max: usize, l_max: usize, z_prime: C64, radial_order: usize) -> Result<LandauFamily> {
    if !(z_prime.re.is_finite() && z_prime.im.is_finite()) {
        return Err(Error::InvalidParameter("z' must be finite".into()));
    }
    let gauss = gaussian_c_rule(radial_order, 2 * k_max + 1, GaussianConvention::Unit)?;
    let t = z_prime.norm_sqr();
    let levels = QuadratureRule::explicit(
        RuleKind::ExplicitList,
        (0..=l_max).map(Node::Index).collect(),
        vec![1.0; l_max + 1],
        poisson_tail(l_max, t),
    )?;
    let rule = QuadratureRule::product(vec![gauss, levels])?;
    let damp = (-t / 2.0).exp();
    let level_coeffs = monomials_over_sqrt_factorial(z_prime.conj(), l_max);
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        let (z, l) = match x.parts()? {
            [z, l] => (z.as_complex()?, l.as_index()?),
            other => return Err(Error::InvalidNode(format!("expected (z, ℓ), got {} parts", other.len()))),
        };
        let c = *level_coeffs
            .get(l)
            .ok_or(Error::TruncationExceeded { requested: l, available: level_coeffs.len() - 1 })?;
        for (o, m) in out.iter_mut().zip(monomials_over_sqrt_factorial(z, k_max)) {
            *o = m * c * damp;
        }
        Ok(())
    });
    let family = CSFamily::new(
        "landau",
        ModuleSpace::hilbert_space(1)?,
        Frame::standard_basis(k_max + 1, k_max + 1)?,
        rule,
        k_max,
        poisson_tail(l_max, t) + poisson_tail(k_max, 1.0),
        eval,
    )?;
    Ok(LandauFamily { family, z_prime, l_max })
}

impl LandauFamily {
    pub fn family(&self) -> &CSFamily {
        &self.family
    }

    pub fn z_prime(&self) -> C64 {
        self.z_prime
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `Σ_{ℓ ≤ L_max} <z,z̄';ℓ|z,z̄';ℓ>`.
    pub fn norm_sum(&self, z: C64) -> f64 {
        (0..=self.l_max).map(|l| landau_state(z, self.z_prime, l, self.family.k_max()).norm_squared()).sum()
    }

    /// The shortfall `1 - norm_sum(z)` is at most this.
    pub fn norm_tail(&self, z: C64) -> f64 {
        poisson_tail(self.l_max, self.z_prime.norm_sqr()) + poisson_tail(self.family.k_max(), z.norm_sqr())
    }
}
