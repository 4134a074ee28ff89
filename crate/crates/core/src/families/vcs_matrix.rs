use std::sync::Arc;

use crate::cstar::{spectral_norm, CMatrix, CStarMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::{Error, Result};
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{integrate_matrix_fn, Node, QuadratureRule};

use super::VectorBasis;

/// Matrix-valued coherent states on `X × SU(N)` built from a vector basis.
#[derive(Clone)]
pub struct VcsMatrixFamily {
    family: CSFamily,
    basis: VectorBasis,
}

fn split(x: &Node) -> Result<(&Node, &CStarMatrix)> {
    match x.parts()? {
        [point, u] => Ok((point, u.as_matrix()?)),
        other => Err(Error::InvalidNode(format!("expected (x, u), got {} parts", other.len()))),
    }
}

/// `F_k(x,u) = √N u diag(conj Φ^1_k(x), …, conj Φ^N_k(x)) u*` on the product
/// of the basis measure and `su_rule`, with `E = M_N` over itself.
pub fn vcs_matrix_family(basis: VectorBasis, su_rule: QuadratureRule) -> Result<VcsMatrixFamily> {
    let n = basis.n();
    let k_max = basis.k_max();
    let rule = QuadratureRule::product(vec![basis.measure().clone(), su_rule])?;
    let b = basis.clone();
    let sqrt_n = (n as f64).sqrt();
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        let (point, u) = split(x)?;
        if u.dim() != n {
            return Err(Error::InvalidNode(format!("SU({}) element in an SU({n}) family", u.dim())));
        }
        let u = u.matrix();
        let ustar = u.adjoint();
        for (k, phi) in b.eval(point)?.iter().enumerate() {
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, phi.iter().map(|p| p.conj() * sqrt_n)));
            out.rows_mut(k * n, n).copy_from(&(u * d * &ustar));
        }
        Ok(())
    });
    let family = CSFamily::new(
        "vcs_matrix",
        ModuleSpace::algebra_over_itself(n)?,
        Frame::standard_basis(k_max + 1, k_max + 1)?,
        rule,
        k_max,
        0.0,
        eval,
    )?;
    Ok(VcsMatrixFamily { family, basis })
}

impl VcsMatrixFamily {
    pub fn family(&self) -> &CSFamily {
        &self.family
    }

    pub fn basis(&self) -> &VectorBasis {
        &self.basis
    }

    /// The vector coherent state `|x,i> = Σ_k conj Φ^i_k(x) φ_k` (0-based `i`).
    pub fn vcs_state(&self, x: &Node, i: usize) -> Result<CMatrix> {
        self.check_index(i)?;
        let phis = self.basis.eval(x)?;
        Ok(CMatrix::from_iterator(phis.len(), 1, phis.iter().map(|p| p[i].conj())))
    }

    /// Recovers `|x,i>` from `|x,u,I>` by tracing against `P_i(u) = u χ^i χ^i† u*`
    /// over the matrix factor.
    ///
    /// The trace alone yields `√N |x,i>` because each `F_k` carries the factor
    /// `√N`; the result is divided by `√N`.
    pub fn recover_vcs(&self, x: &Node, u: &CStarMatrix, i: usize) -> Result<CMatrix> {
        self.check_index(i)?;
        let n = self.basis.n();
        let node = Node::Composite(vec![x.clone(), Node::Matrix(u.clone())]);
        let v = self.family.state_vector(&node, &CStarMatrix::identity(n))?;
        let col = u.matrix().column(i).into_owned();
        let p = &col * col.adjoint();
        let kk = self.basis.k_max() + 1;
        let scale = 1.0 / (n as f64).sqrt();
        Ok(CMatrix::from_fn(kk, 1, |k, _| {
            // Tr(P · B_k) with B_k[r, c] = v[r*kk + k, c]
            let mut t = C64::new(0.0, 0.0);
            for r in 0..n {
                for c in 0..n {
                    t += p[(c, r)] * v[(r * kk + k, c)];
                }
            }
            t * scale
        }))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.basis.n() {
            return Err(Error::InvalidParameter(format!("component {i} of C^{}", self.basis.n())));
        }
        Ok(())
    }
}

/// `||∫ u v v† u* dΩ(u) - I/N||` for a unit vector `v` and a Haar rule on
/// `SU(N)`, with the Monte Carlo standard error when the rule is random.
pub fn sun_relation_defect(rule: &QuadratureRule, v: &[C64]) -> Result<(f64, Option<f64>)> {
    let n = v.len();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n == 0 || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("need a unit vector, got norm {norm}")));
    }
    let col = CMatrix::from_column_slice(n, 1, v);
    let rep = integrate_matrix_fn(rule, |x| {
        let u = x.as_matrix()?;
        if u.dim() != n {
            return Err(Error::InvalidNode(format!("SU({}) element against C^{n}", u.dim())));
        }
        let uv = u.matrix() * &col;
        Ok(&uv * uv.adjoint())
    })?;
    let target = CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
    let err = rule.is_monte_carlo().then_some(rep.statistical_error);
    Ok((spectral_norm(&(rep.value.matrix() - target)), err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{verify_orthogonality, verify_resolution};
    use crate::quadrature::{gaussian_c_rule, haar_sun_rule, haar_sun_sample, GaussianConvention, HaarMode};
    use crate::SpectralTolerance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family(n: usize, k_max: usize) -> VcsMatrixFamily {
        let rule = gaussian_c_rule(6, 2 * k_max + 1, GaussianConvention::Unit).unwrap();
        let basis = VectorBasis::gaussian_fourier(n, k_max, rule, 1e-10).unwrap();
        vcs_matrix_family(basis, haar_sun_rule(2, HaarMode::ExactSu2, 2, 0).unwrap()).unwrap()
    }

    #[test]
    fn identity_rotation_gives_diagonal() {
        let fam = family(2, 5);
        let z = Node::Complex(C64::new(0.4, -0.3));
        let x = Node::Composite(vec![z.clone(), Node::Matrix(CStarMatrix::identity(2))]);
        let fs = fam.family().evaluate_raw(&x).unwrap();
        let phis = fam.basis().eval(&z).unwrap();
        for (f, phi) in fs.iter().zip(&phis) {
            assert_eq!(f[(0, 1)], C64::new(0.0, 0.0));
            assert_eq!(f[(1, 0)], C64::new(0.0, 0.0));
            for i in 0..2 {
                assert!((f[(i, i)] - phi[i].conj() * 2f64.sqrt()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn matrix_functions_are_orthonormal() {
        let fam = family(2, 8);
        let rep = verify_orthogonality(fam.family(), 1e-7).unwrap();
        assert!(rep.max_defect <= 1e-7, "{rep:?}");
    }

    #[test]
    fn resolution_with_unitary_parameter() {
        let fam = family(2, 6);
        let v = haar_sun_sample(&mut ChaCha8Rng::seed_from_u64(3), 2);
        let rep = verify_resolution(fam.family(), &v, SpectralTolerance::default()).unwrap();
        assert!(rep.defect <= 1e-8, "{}", rep.defect);
    }

    #[test]
    fn recovered_states_reproduce_the_matrix_kernel() {
        let fam = family(2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y) = (Node::Complex(C64::new(0.5, 0.2)), Node::Complex(C64::new(-0.1, 0.8)));
        let kernel = fam.basis().kernel(&x, &y).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let u = haar_sun_sample(&mut rng, 2);
                let w = haar_sun_sample(&mut rng, 2);
                let xi = fam.recover_vcs(&x, &u, i).unwrap();
                let yj = fam.recover_vcs(&y, &w, j).unwrap();
                assert!(spectral_norm(&(&xi - fam.vcs_state(&x, i).unwrap())) < 1e-12);
                let ov = (xi.adjoint() * yj)[(0, 0)];
                assert!((ov - kernel[(i, j)]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn sun_relation_exact_and_sampled() {
        use rand::Rng;
        let exact = haar_sun_rule(2, HaarMode::ExactSu2, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let raw: Vec<C64> =
                (0..2).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v: Vec<C64> = raw.iter().map(|z| z / norm).collect();
            let (d, err) = sun_relation_defect(&exact, &v).unwrap();
            assert!(d <= 1e-10 && err.is_none());
        }
        let m = 20_000;
        let mc = haar_sun_rule(3, HaarMode::MonteCarlo, m, 5).unwrap();
        let v = [C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let (d, err) = sun_relation_defect(&mc, &v).unwrap();
        assert!(d <= 5.0 / (m as f64).sqrt() && err.unwrap() > 0.0);
        assert!(sun_relation_defect(&exact, &[C64::new(2.0, 0.0), C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn rejects_bad_component() {
        let fam = family(2, 3);
        assert!(fam.vcs_state(&Node::Complex(C64::new(0.0, 0.0)), 2).is_err());
    }
}
