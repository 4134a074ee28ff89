//! Concrete finite Hilbert C*-modules.
//!
//! A module over `B = M_n(C)` is modelled as the space of `rows x n` complex
//! matrices, right `B`-action by matrix multiplication and inner product
//! `<e|f> = e* f`. `M_n` over itself is the square case; a Hilbert space over
//! `C` is the single-column case. The left action of `A = M_rows(C)` is left
//! matrix multiplication.
//!
//! Rank-one operators `|e><f|` act as `g ↦ e <f|g> = (e f*) g`, so every
//! finite sum of them is left multiplication by a `rows x rows` matrix. The
//! norm of that operator on the module equals the norm of the matrix, which is
//! how frame and resolution defects are measured.

use crate::cstar::{kron_matrix, spectral_norm, CMatrix, CStarMatrix, SpectralTolerance, C64};
use crate::error::{Error, Result};

/// Shape of a concrete module: `rows x algebra_dim` matrices over `M_{algebra_dim}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleSpace {
    rows: usize,
    algebra_dim: usize,
}

impl ModuleSpace {
    pub fn new(rows: usize, algebra_dim: usize) -> Result<Self> {
        if rows == 0 || algebra_dim == 0 {
            return Err(Error::InvalidParameter(format!("module shape must be positive, got {rows}x{algebra_dim}")));
        }
        Ok(Self { rows, algebra_dim })
    }

    /// `M_n` as a Hilbert module over itself.
    pub fn algebra_over_itself(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    /// `C^d` as a Hilbert module over `C`.
    pub fn hilbert_space(d: usize) -> Result<Self> {
        Self::new(d, 1)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Dimension `n` of the coefficient algebra `M_n`.
    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    /// Dimension of the algebra acting on the left.
    pub fn left_algebra_dim(&self) -> usize {
        self.rows
    }

    /// Complex dimension of the module as a vector space.
    pub fn vector_dim(&self) -> usize {
        self.rows * self.algebra_dim
    }

    /// The exterior tensor product space, a module over the tensor product algebra.
    pub fn tensor(&self, other: &ModuleSpace) -> ModuleSpace {
        ModuleSpace { rows: self.rows * other.rows, algebra_dim: self.algebra_dim * other.algebra_dim }
    }

    pub fn zero(&self) -> ModuleElement {
        ModuleElement { space: *self, value: CMatrix::zeros(self.rows, self.algebra_dim) }
    }

    pub fn element(&self, value: CMatrix) -> Result<ModuleElement> {
        if value.shape() != (self.rows, self.algebra_dim) {
            return Err(Error::SpaceMismatch(format!(
                "value is {}x{}, space expects {}x{}",
                value.nrows(),
                value.ncols(),
                self.rows,
                self.algebra_dim
            )));
        }
        if value.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite module element".into()));
        }
        Ok(ModuleElement { space: *self, value })
    }

    /// Matrix units `E_ij`, ordered row-major; a basis over `C`.
    pub fn standard_basis(&self) -> Vec<ModuleElement> {
        let mut out = Vec::with_capacity(self.vector_dim());
        for i in 0..self.rows {
            for j in 0..self.algebra_dim {
                let mut v = CMatrix::zeros(self.rows, self.algebra_dim);
                v[(i, j)] = C64::new(1.0, 0.0);
                out.push(ModuleElement { space: *self, value: v });
            }
        }
        out
    }
}

/// An element of a [`ModuleSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    space: ModuleSpace,
    value: CMatrix,
}

fn same_space(a: &ModuleElement, b: &ModuleElement) -> Result<()> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", a.space, b.space)));
    }
    Ok(())
}

impl ModuleElement {
    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn value(&self) -> &CMatrix {
        &self.value
    }

    pub fn into_value(self) -> CMatrix {
        self.value
    }

    /// The algebra-valued inner product `<self|other> = self* other`.
    pub fn inner(&self, other: &ModuleElement) -> Result<CStarMatrix> {
        same_space(self, other)?;
        Ok(CStarMatrix::from_trusted(self.value.adjoint() * &other.value))
    }

    /// `||<e|e>||^{1/2}`.
    pub fn norm(&self) -> f64 {
        spectral_norm(&(self.value.adjoint() * &self.value)).sqrt()
    }

    pub fn right_mul(&self, b: &CStarMatrix) -> Result<ModuleElement> {
        if b.dim() != self.space.algebra_dim {
            return Err(Error::DimensionMismatch(format!(
                "right action by M_{} on a module over M_{}",
                b.dim(),
                self.space.algebra_dim
            )));
        }
        Ok(ModuleElement { space: self.space, value: &self.value * b.matrix() })
    }

    pub fn add(&self, other: &ModuleElement) -> Result<ModuleElement> {
        same_space(self, other)?;
        Ok(ModuleElement { space: self.space, value: &self.value + &other.value })
    }

    pub fn sub(&self, other: &ModuleElement) -> Result<ModuleElement> {
        same_space(self, other)?;
        Ok(ModuleElement { space: self.space, value: &self.value - &other.value })
    }

    pub fn scale(&self, z: C64) -> ModuleElement {
        ModuleElement { space: self.space, value: self.value.map(|x| x * z) }
    }
}

/// `|e><f| (g) = e <f|g>`.
pub fn rank_one_apply(e: &ModuleElement, f: &ModuleElement, g: &ModuleElement) -> Result<ModuleElement> {
    same_space(e, f)?;
    same_space(f, g)?;
    Ok(ModuleElement { space: e.space, value: &e.value * (f.value.adjoint() * &g.value) })
}

/// Left action `a · e` of `a ∈ M_rows`.
pub fn left_act(a: &CStarMatrix, e: &ModuleElement) -> Result<ModuleElement> {
    if a.dim() != e.space.rows {
        return Err(Error::DimensionMismatch(format!("left action by M_{} on {}-row elements", a.dim(), e.space.rows)));
    }
    Ok(ModuleElement { space: e.space, value: a.matrix() * &e.value })
}

/// `e ⊗ g` in the exterior tensor product `E ⊗ G`.
///
/// With the Kronecker convention of [`crate::cstar`], the mixed-product rule
/// gives `<e1⊗g1|e2⊗g2> = <e1|e2> ⊗ <g1|g2>`.
pub fn exterior_tensor(e: &ModuleElement, g: &ModuleElement) -> ModuleElement {
    ModuleElement { space: e.space.tensor(&g.space), value: kron_matrix(&e.value, &g.value) }
}

/// The matrix of the operator `h ↦ x h` on a module with `cols`-column
/// elements, built from its action on the matrix units (row-major `vec`).
pub fn left_multiplication_operator(x: &CMatrix, cols: usize) -> CMatrix {
    let rows = x.ncols();
    let dim = rows * cols;
    let mut op = CMatrix::zeros(x.nrows() * cols, dim);
    for i in 0..rows {
        for j in 0..cols {
            // image of E_ij is x[:, i] placed in column j
            let col = i * cols + j;
            for r in 0..x.nrows() {
                op[(r * cols + j, col)] = x[(r, i)];
            }
        }
    }
    op
}

/// A finite family `{φ_k}` in a module, with its frame defects.
#[derive(Debug, Clone)]
pub struct Frame {
    space: ModuleSpace,
    elements: Vec<ModuleElement>,
    completeness_defect: f64,
    orthonormality_defect: f64,
}

/// Outcome of [`Frame::verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameReport {
    /// `||Σ_k |φ_k><φ_k| - I||`.
    pub completeness_defect: f64,
    /// `max_{k,l} ||<φ_k|φ_l> - δ_kl id||`.
    pub orthonormality_defect: f64,
    pub pass: bool,
}

impl Frame {
    pub fn new(space: ModuleSpace, elements: Vec<ModuleElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter("a frame needs at least one element".into()));
        }
        if let Some(bad) = elements.iter().find(|e| e.space != space) {
            return Err(Error::SpaceMismatch(format!("{:?} in a frame over {:?}", bad.space, space)));
        }
        let (completeness_defect, orthonormality_defect) = frame_defects(space, &elements);
        Ok(Self { space, elements, completeness_defect, orthonormality_defect })
    }

    /// The first `len` standard basis vectors of `C^d`.
    pub fn standard_basis(d: usize, len: usize) -> Result<Self> {
        if len > d {
            return Err(Error::InvalidParameter(format!("{len} basis vectors in C^{d}")));
        }
        let space = ModuleSpace::hilbert_space(d)?;
        let elements = (0..len)
            .map(|k| {
                let mut v = CMatrix::zeros(d, 1);
                v[(k, 0)] = C64::new(1.0, 0.0);
                ModuleElement { space, value: v }
            })
            .collect();
        Self::new(space, elements)
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn elements(&self) -> &[ModuleElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }

    pub fn orthonormality_defect(&self) -> f64 {
        self.orthonormality_defect
    }

    /// Recomputes both defects and compares them with `equality_tol`.
    pub fn verify(&self, tol: SpectralTolerance) -> FrameReport {
        let (completeness_defect, orthonormality_defect) = frame_defects(self.space, &self.elements);
        FrameReport {
            completeness_defect,
            orthonormality_defect,
            pass: completeness_defect <= tol.equality_tol && orthonormality_defect <= tol.equality_tol,
        }
    }
}

fn frame_defects(space: ModuleSpace, elements: &[ModuleElement]) -> (f64, f64) {
    let mut sum = CMatrix::zeros(space.rows, space.rows);
    for phi in elements {
        sum += &phi.value * phi.value.adjoint();
    }
    let completeness = spectral_norm(&(sum - CMatrix::identity(space.rows, space.rows)));

    let id = CMatrix::identity(space.algebra_dim, space.algebra_dim);
    let mut ortho: f64 = 0.0;
    for (k, pk) in elements.iter().enumerate() {
        for (l, pl) in elements.iter().enumerate() {
            let mut g = pk.value.adjoint() * &pl.value;
            if k == l {
                g -= &id;
            }
            ortho = ortho.max(spectral_norm(&g));
        }
    }
    (completeness, ortho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstar::SpectralTolerance;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_value(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
        DMatrix::from_fn(r, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        random_value(rng, d, d).qr().q()
    }

    #[test]
    fn inner_product_examples() {
        let m2 = ModuleSpace::algebra_over_itself(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = m2.element(random_value(&mut rng, 2, 2)).unwrap();
        let id = m2.element(CMatrix::identity(2, 2)).unwrap();
        assert_eq!(id.inner(&f).unwrap().matrix(), f.value());

        let e = m2.element(CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])).unwrap();
        let f = m2.element(CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)])).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        assert_eq!(e.inner(&f).unwrap().matrix(), &expected);

        let x = m2.element(random_value(&mut rng, 2, 2)).unwrap();
        assert!(x.inner(&x).unwrap().psd_check(SpectralTolerance::default()).is_psd);
    }

    #[test]
    fn inner_product_module_axioms() {
        let space = ModuleSpace::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = space.element(random_value(&mut rng, 3, 2)).unwrap();
        let f = space.element(random_value(&mut rng, 3, 2)).unwrap();
        let b = CStarMatrix::new(random_value(&mut rng, 2, 2)).unwrap();
        let lhs = e.inner(&f.right_mul(&b).unwrap()).unwrap();
        let rhs = &e.inner(&f).unwrap() * &b;
        assert!(lhs.distance(&rhs) < 1e-14);
        assert!(f.inner(&e).unwrap().distance(&e.inner(&f).unwrap().adjoint()) < 1e-15);
    }

    #[test]
    fn space_mismatch_is_reported() {
        let a = ModuleSpace::new(2, 2).unwrap().zero();
        let b = ModuleSpace::new(3, 2).unwrap().zero();
        assert!(matches!(a.inner(&b), Err(Error::SpaceMismatch(_))));
        assert!(matches!(rank_one_apply(&a, &a, &b), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn rank_one_examples() {
        let m2 = ModuleSpace::algebra_over_itself(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let id = m2.element(CMatrix::identity(2, 2)).unwrap();
        let g = m2.element(random_value(&mut rng, 2, 2)).unwrap();
        assert_eq!(rank_one_apply(&id, &id, &g).unwrap(), g);

        let h = ModuleSpace::hilbert_space(3).unwrap();
        let f = h.element(CMatrix::from_column_slice(3, 1, &[c(1., 0.), c(0., 0.), c(0., 0.)])).unwrap();
        let g = h.element(CMatrix::from_column_slice(3, 1, &[c(0., 0.), c(2., 1.), c(0., 0.)])).unwrap();
        let e = h.element(random_value(&mut rng, 3, 1)).unwrap();
        assert_eq!(rank_one_apply(&e, &f, &g).unwrap(), h.zero());
    }

    #[test]
    fn rank_one_adjoint_identity() {
        let space = ModuleSpace::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let [e, f, g, h] = std::array::from_fn(|_| space.element(random_value(&mut rng, 3, 2)).unwrap());
            let lhs = rank_one_apply(&e, &f, &g).unwrap().inner(&h).unwrap();
            let rhs = g.inner(&rank_one_apply(&f, &e, &h).unwrap()).unwrap();
            assert!(lhs.distance(&rhs) < 1e-10);
        }
    }

    #[test]
    fn rank_one_composition() {
        let space = ModuleSpace::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let [e1, e2, e3, e4, g] = std::array::from_fn(|_| space.element(random_value(&mut rng, 3, 2)).unwrap());
        let lhs = rank_one_apply(&e1, &e2, &rank_one_apply(&e3, &e4, &g).unwrap()).unwrap();
        let e1b = e1.right_mul(&e2.inner(&e3).unwrap()).unwrap();
        let rhs = rank_one_apply(&e1b, &e4, &g).unwrap();
        assert!(spectral_norm(&(lhs.value() - rhs.value())) < 1e-10);
    }

    #[test]
    fn left_act_examples() {
        let space = ModuleSpace::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = space.element(random_value(&mut rng, 2, 3)).unwrap();
        let f = space.element(random_value(&mut rng, 2, 3)).unwrap();
        assert_eq!(left_act(&CStarMatrix::identity(2), &e).unwrap(), e);
        assert_eq!(left_act(&CStarMatrix::zeros(2), &e).unwrap(), space.zero());
        let a = CStarMatrix::new(random_value(&mut rng, 2, 2)).unwrap();
        let lhs = left_act(&a, &e).unwrap().inner(&f).unwrap();
        let rhs = e.inner(&left_act(&a.adjoint(), &f).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-12);
        assert!(matches!(left_act(&CStarMatrix::identity(3), &e), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn frame_examples() {
        let tol = SpectralTolerance::default();
        let full = Frame::standard_basis(4, 4).unwrap().verify(tol);
        assert_eq!(full.completeness_defect, 0.0);
        assert_eq!(full.orthonormality_defect, 0.0);
        assert!(full.pass);

        let short = Frame::standard_basis(4, 3).unwrap().verify(tol);
        assert!((short.completeness_defect - 1.0).abs() < 1e-15);
        assert_eq!(short.orthonormality_defect, 0.0);
        assert!(!short.pass);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(&mut rng, 5);
        let space = ModuleSpace::hilbert_space(5).unwrap();
        let elements = (0..3).map(|k| space.element(u.columns(k, 1).into_owned()).unwrap()).collect();
        let report = Frame::new(space, elements).unwrap().verify(tol);
        assert!((report.completeness_defect - 1.0).abs() < 1e-12);
        assert!(report.orthonormality_defect <= 1e-12);
    }

    #[test]
    fn exterior_tensor_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let e_space = ModuleSpace::algebra_over_itself(2).unwrap();
        let g_space = ModuleSpace::hilbert_space(3).unwrap();
        let id = e_space.element(CMatrix::identity(2, 2)).unwrap();
        let g1 = g_space.element(random_value(&mut rng, 3, 1)).unwrap();
        let g2 = g_space.element(random_value(&mut rng, 3, 1)).unwrap();
        let ip = exterior_tensor(&id, &g1).inner(&exterior_tensor(&id, &g2)).unwrap();
        let scalar = g1.inner(&g2).unwrap().matrix()[(0, 0)];
        assert!(ip.distance(&CStarMatrix::identity(2).scale(scalar)) < 1e-14);

        let e = e_space.element(random_value(&mut rng, 2, 2)).unwrap();
        let h = exterior_tensor(&e, &g1);
        let lhs = h.inner(&h).unwrap();
        let rhs = e.inner(&e).unwrap().kron(&g1.inner(&g1).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-12);

        let zero = exterior_tensor(&e_space.zero(), &g1);
        assert_eq!(zero, e_space.tensor(&g_space).zero());
    }

    #[test]
    fn left_multiplication_operator_has_matching_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_value(&mut rng, 3, 3);
        let op = left_multiplication_operator(&x, 2);
        assert!((spectral_norm(&op) - spectral_norm(&x)).abs() < 1e-12);
        // agrees with direct multiplication on a random element
        let h = random_value(&mut rng, 3, 2);
        let vec_h = CMatrix::from_row_slice(6, 1, h.transpose().as_slice());
        let image = &op * vec_h;
        let direct = &x * &h;
        for r in 0..3 {
            for j in 0..2 {
                assert!((image[(r * 2 + j, 0)] - direct[(r, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cauchy_schwarz_and_norm_inequalities() {
        let tol = SpectralTolerance::new(1e-10, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let space = ModuleSpace::new(3, 2).unwrap();
        for _ in 0..1000 {
            let x = space.element(random_value(&mut rng, 3, 2)).unwrap();
            let y = space.element(random_value(&mut rng, 3, 2)).unwrap();
            let xx = x.inner(&x).unwrap();
            let yy = y.inner(&y).unwrap();
            let yx = y.inner(&x).unwrap();
            let xy = x.inner(&y).unwrap();
            let gap = &yy.scale(C64::from(xx.op_norm())) - &(&yx * &xy);
            assert!(gap.psd_check(tol).is_psd, "min eig {}", gap.min_eigenvalue());
            assert!(xy.op_norm() <= x.norm() * y.norm() * (1.0 + 1e-12));
            assert!(x.add(&y).unwrap().norm() <= (x.norm() + y.norm()) * (1.0 + 1e-12));
        }
    }
}
