use std::sync::Arc;

use crate::cstar::{CMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::{Error, Result};
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{gaussian_c_rule, GaussianConvention, Node};

use super::ScalarKernelBasis;

/// Scalar coherent states `|x> = Σ_k conj Φ_k(x) φ_k` over `A = B = C = C`.
#[derive(Clone)]
pub struct CanonicalFamily {
    family: CSFamily,
    basis: ScalarKernelBasis,
}

/// `F_k(x) = conj Φ_k(x)` with `E = C` and `G = C^{K+1}`.
pub fn canonical_family(basis: ScalarKernelBasis) -> Result<CanonicalFamily> {
    let k_max = basis.k_max();
    let phi = basis.evaluator();
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        let v = phi(x)?;
        if v.len() != out.nrows() {
            return Err(Error::InconsistentDimensions { expected: out.nrows(), found: v.len() });
        }
        for (o, p) in out.iter_mut().zip(v) {
            *o = p.conj();
        }
        Ok(())
    });
    let family = CSFamily::new(
        "canonical",
        ModuleSpace::hilbert_space(1)?,
        Frame::standard_basis(k_max + 1, k_max + 1)?,
        basis.measure().clone(),
        k_max,
        basis.truncation_tail(),
        eval,
    )?;
    Ok(CanonicalFamily { family, basis })
}

impl CanonicalFamily {
    /// Bargmann family on the complex Gaussian rule with `2K_max + 1` angles.
    pub fn bargmann(k_max: usize, radial_order: usize, reference_radius: f64) -> Result<Self> {
        let rule = gaussian_c_rule(radial_order, 2 * k_max + 1, GaussianConvention::Unit)?;
        canonical_family(ScalarKernelBasis::bargmann(k_max, rule, reference_radius, 1e-8)?)
    }

    pub fn family(&self) -> &CSFamily {
        &self.family
    }

    pub fn basis(&self) -> &ScalarKernelBasis {
        &self.basis
    }

    /// `K(x,y) = Σ_k Φ_k(x) conj Φ_k(y)`, which equals `<x|y>`.
    pub fn kernel(&self, x: &Node, y: &Node) -> Result<C64> {
        let (fx, fy) = (self.basis.eval(x)?, self.basis.eval(y)?);
        Ok(fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstar::CStarMatrix;
    use crate::engine::{coherent_state, normalization};

    fn bargmann() -> CanonicalFamily {
        CanonicalFamily::bargmann(12, 40, 1.0).unwrap()
    }

    #[test]
    fn kernel_is_partial_exponential() {
        let fam = bargmann();
        let (z, w) = (C64::new(0.6, -0.2), C64::new(-0.4, 0.9));
        let k = fam.kernel(&Node::Complex(z), &Node::Complex(w)).unwrap();
        let t = z * w.conj();
        let mut oracle = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for j in 0..=12 {
            if j > 0 {
                term = term * t / j as f64;
            }
            oracle += term;
        }
        assert!((k - oracle).norm() < 1e-14);
        assert!((oracle - t.exp()).norm() < 1e-9);
    }

    #[test]
    fn kernel_at_origin_and_diagonal() {
        let fam = bargmann();
        let o = Node::Complex(C64::new(0.0, 0.0));
        assert_eq!(fam.kernel(&o, &o).unwrap(), C64::new(1.0, 0.0));
        let x = Node::Complex(C64::new(1.1, 0.7));
        let kxx = fam.kernel(&x, &x).unwrap();
        let n = normalization(fam.family(), &x, &CStarMatrix::identity(1)).unwrap();
        assert!((kxx - n.value.matrix()[(0, 0)]).norm() < 1e-12);
        assert!(kxx.re >= 1.0);
    }

    #[test]
    fn overlap_equals_kernel() {
        let fam = bargmann();
        let (x, y) = (Node::Complex(C64::new(0.3, 0.4)), Node::Complex(C64::new(-0.8, 0.1)));
        let one = CStarMatrix::identity(1);
        let sx = coherent_state(fam.family(), &x, &one).unwrap();
        let sy = coherent_state(fam.family(), &y, &one).unwrap();
        let ov = sx.overlap(&sy).unwrap().matrix()[(0, 0)];
        assert!((ov - fam.kernel(&x, &y).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn tail_is_recorded() {
        let fam = bargmann();
        assert!(fam.family().truncation_tail() > 0.0 && fam.family().truncation_tail() < 2e-10);
    }
}
