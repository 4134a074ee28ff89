//! The completely positive kernel `K(x,y)[a*a'] = <x,a|y,a'>` of a family,
//! its reproducing property, and the Naimark dilation of the induced POV
//! measure on the discretized parameter space.
//!
//! Carrier vectors `h: nodes → B⊗C` are stored with the weights folded in,
//! as the stack of blocks `√w_i h(x_i)`; the carrier inner product is then
//! the plain `ĥ₁* ĥ₂`, and every carrier operator is a square matrix acting
//! on the left.

use std::collections::BTreeSet;

use crate::cstar::{
    check_dim, hermitian_norm, numerical_rank, spectral_norm, CMatrix, CStarMatrix, SpectralTolerance, C64,
};
use crate::engine::{resolution_operator, CSFamily};
use crate::error::{Error, Result};
use crate::quadrature::Node;

/// `K(x,y)[a*a'] = <x,a|y,a'>_H`, valued in `B⊗C`.
#[derive(Debug, Clone, Copy)]
pub struct CpKernel<'f> {
    family: &'f CSFamily,
}

pub fn cp_kernel(fam: &CSFamily) -> CpKernel<'_> {
    CpKernel { family: fam }
}

impl<'f> CpKernel<'f> {
    pub fn family(&self) -> &'f CSFamily {
        self.family
    }

    /// Dimension of `B⊗C`.
    pub fn block_dim(&self) -> usize {
        self.family.h_space().algebra_dim()
    }

    pub fn eval(&self, x: &Node, y: &Node, a: &CStarMatrix, a2: &CStarMatrix) -> Result<CStarMatrix> {
        let vx = self.family.state_vector(x, a)?;
        let vy = self.family.state_vector(y, a2)?;
        Ok(CStarMatrix::from_trusted(vx.adjoint() * vy))
    }

    /// `K(x,y) = <x,id|y,id>`.
    pub fn eval_id(&self, x: &Node, y: &Node) -> Result<CStarMatrix> {
        let id = CStarMatrix::identity(self.family.left_dim());
        self.eval(x, y, &id, &id)
    }
}

/// Outcome of [`cp_positivity_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpPositivityReport {
    /// Smaller of the two minima below.
    pub min_eigenvalue: f64,
    /// `Σ_{ij} b_i* K(x_i,x_j)[a_i*a_j] b_j`.
    pub form_min_eigenvalue: f64,
    /// The block Gram `[K(x_i,x_j)[a_i*a_j]]_{ij}`.
    pub gram_min_eigenvalue: f64,
    pub pass: bool,
}

/// Positivity of the kernel on the points `(x_i, a_i)` against the
/// coefficients `b_i ∈ B⊗C`.
pub fn cp_positivity_test(
    kern: &CpKernel<'_>,
    points: &[(Node, CStarMatrix)],
    b: &[CStarMatrix],
    tol: SpectralTolerance,
) -> Result<CpPositivityReport> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("positivity needs at least one point".into()));
    }
    if b.len() != points.len() {
        return Err(Error::InconsistentDimensions { expected: points.len(), found: b.len() });
    }
    let d = kern.block_dim();
    if let Some(bad) = b.iter().find(|bi| bi.dim() != d) {
        return Err(Error::DimensionMismatch(format!("b_i is {0}x{0}, B⊗C is M_{d}", bad.dim())));
    }
    let n = points.len();
    check_dim(n * d)?;
    let states = points.iter().map(|(x, a)| kern.family.state_vector(x, a)).collect::<Result<Vec<_>>>()?;
    let mut gram = CMatrix::zeros(n * d, n * d);
    let mut form = CMatrix::zeros(d, d);
    for i in 0..n {
        for j in 0..n {
            let kij = states[i].adjoint() * &states[j];
            form += b[i].matrix().adjoint() * &kij * b[j].matrix();
            gram.view_mut((i * d, j * d), (d, d)).copy_from(&kij);
        }
    }
    let form_min_eigenvalue = CStarMatrix::from_trusted(form).psd_check(tol).min_eigenvalue;
    let gram_min_eigenvalue = CStarMatrix::from_trusted(gram).psd_check(tol).min_eigenvalue;
    let min_eigenvalue = form_min_eigenvalue.min(gram_min_eigenvalue);
    Ok(CpPositivityReport {
        min_eigenvalue,
        form_min_eigenvalue,
        gram_min_eigenvalue,
        pass: min_eigenvalue >= -tol.psd_floor,
    })
}

/// Outcome of [`kernel_reproduce_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproduceReport {
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
    pub nodes_used: usize,
}

/// `K(x,z)[a*a'] = ∫ K(x,y)[a*b] K(y,z)[b*a'] dμ(y)` for a co-isometry `b`.
///
/// The node sum `Σ_i w_i <x,a|x_i,b><x_i,b|z,a'>` is evaluated as
/// `<x,a| (Σ_i w_i |x_i,b><x_i,b|) |z,a'>`, reusing the family's cached
/// second moment.
pub fn kernel_reproduce_check(
    kern: &CpKernel<'_>,
    x: &Node,
    z: &Node,
    a: &CStarMatrix,
    a2: &CStarMatrix,
    b: &CStarMatrix,
    tol: SpectralTolerance,
) -> Result<ReproduceReport> {
    let fam = kern.family;
    let defect = b.coisometry_defect();
    if defect > tol.equality_tol {
        return Err(Error::NotCoisometry { defect });
    }
    let vx = fam.state_vector(x, a)?;
    let vz = fam.state_vector(z, a2)?;
    let direct = vx.adjoint() * &vz;
    let m = resolution_operator(fam, b)?;
    let integrated = vx.adjoint() * m * vz;
    let defect = spectral_norm(&(direct - integrated));
    let bound = tol.equality_tol + fam.rule().tail_bound() + fam.truncation_tail();
    Ok(ReproduceReport { defect, bound, pass: defect <= bound, nodes_used: fam.rule().len() })
}

/// The carrier space, the isometry `W`, the projection `P_K` and the
/// coherent-state images `h_x` on the nodes of a family's rule.
#[derive(Debug, Clone)]
pub struct DilationScene {
    family: CSFamily,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    block_dim: usize,
    // √w_i v_i* stacked: (n·d) x rows(H)
    w: CMatrix,
    // built from the kernel blocks √(w_i w_j) K(x_i, x_j)
    p_k: CMatrix,
    // ĥ_{x_i} = W v_i in column block i, computed apart from P_K
    images: CMatrix,
    report: DilationReport,
}

/// Consistency of a freshly built [`DilationScene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationReport {
    /// `||W*W - I_H||`.
    pub isometry_defect: f64,
    /// `||P_K² - P_K||`.
    pub idempotence_defect: f64,
    /// `||P_K* - P_K||`.
    pub hermiticity_defect: f64,
    /// `max(||P_K W - W||, ||W W* P_K - P_K||)`.
    pub range_defect: f64,
    /// `||Σ_i w_i |h_{x_i}><h_{x_i}| - P_K||`.
    pub resolution_defect: f64,
    pub bound: f64,
    pub pass: bool,
    pub carrier_dim: usize,
}

/// Outcome of [`dilation_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaimarkReport {
    /// `||ν(Δ) - P_K P̃(Δ) P_K||`.
    pub defect_naimark: f64,
    /// `||P̃(Δ)² - P̃(Δ)||`.
    pub defect_pvm: f64,
    /// Smallest eigenvalue of `ν(Δ)`.
    pub nu_min_eigenvalue: f64,
}

/// Outcome of [`minimality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinimalityReport {
    pub span_dimension: usize,
    pub carrier_dim: usize,
    pub full: bool,
    /// Every node carries strictly positive weight.
    pub support_ok: bool,
}

/// Builds the dilation on the nodes of `fam.rule()`.
pub fn build_dilation(fam: &CSFamily, tol: SpectralTolerance) -> Result<DilationScene> {
    let h = fam.h_space();
    let d = h.algebra_dim();
    let rows = h.rows();
    let n = fam.rule().len();
    check_dim(n * d)?;
    check_dim(rows)?;
    let id = CStarMatrix::identity(fam.left_dim());
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    fam.rule().for_each(|x, w| {
        states.push(fam.state_vector(x, &id)?);
        nodes.push(x.clone());
        weights.push(w);
        Ok(())
    })?;
    let mut wmat = CMatrix::zeros(n * d, rows);
    for (i, (v, w)) in states.iter().zip(&weights).enumerate() {
        wmat.view_mut((i * d, 0), (d, rows)).copy_from(&(v.adjoint() * C64::new(w.sqrt(), 0.0)));
    }
    let mut p_k = CMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let k = states[i].adjoint() * &states[j];
            let s = (weights[i] * weights[j]).sqrt();
            p_k.view_mut((i * d, j * d), (d, d)).copy_from(&(k * C64::new(s, 0.0)));
        }
    }
    let isometry_defect = spectral_norm(&(wmat.adjoint() * &wmat - CMatrix::identity(rows, rows)));
    let idempotence_defect = spectral_norm(&(&p_k * &p_k - &p_k));
    let hermiticity_defect = spectral_norm(&(p_k.adjoint() - &p_k));
    let range_defect =
        spectral_norm(&(&p_k * &wmat - &wmat)).max(spectral_norm(&(&wmat * (wmat.adjoint() * &p_k) - &p_k)));
    // Σ_i w_i |h_i><h_i| with ĥ_i = W v_i
    let mut images = CMatrix::zeros(n * d, n * d);
    let mut sum = CMatrix::zeros(n * d, n * d);
    for (i, (v, w)) in states.iter().zip(&weights).enumerate() {
        let hv = &wmat * v;
        sum.gemm(C64::new(*w, 0.0), &hv, &hv.adjoint(), C64::new(1.0, 0.0));
        images.columns_mut(i * d, d).copy_from(&hv);
    }
    let resolution_defect = spectral_norm(&(sum - &p_k));
    let bound = tol.equality_tol + fam.rule().tail_bound();
    let worst =
        isometry_defect.max(idempotence_defect).max(hermiticity_defect).max(range_defect).max(resolution_defect);
    let report = DilationReport {
        isometry_defect,
        idempotence_defect,
        hermiticity_defect,
        range_defect,
        resolution_defect,
        bound,
        pass: worst <= bound,
        carrier_dim: n * d,
    };
    Ok(DilationScene { family: fam.clone(), nodes, weights, block_dim: d, w: wmat, p_k, images, report })
}

impl DilationScene {
    pub fn report(&self) -> DilationReport {
        self.report
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn carrier_dim(&self) -> usize {
        self.nodes.len() * self.block_dim
    }

    /// `W` as a `carrier_dim x rows(H)` matrix.
    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn p_k(&self) -> &CMatrix {
        &self.p_k
    }

    /// `Wf` for `f ∈ H`.
    pub fn apply_w(&self, f: &CMatrix) -> Result<CMatrix> {
        if f.shape() != (self.w.ncols(), self.block_dim) {
            return Err(Error::DimensionMismatch(format!("{:?} is not an element of H", f.shape())));
        }
        Ok(&self.w * f)
    }

    /// The unweighted value `h(x_i)` of a carrier vector.
    pub fn value_at(&self, h: &CMatrix, i: usize) -> Result<CMatrix> {
        let d = self.block_dim;
        if i >= self.nodes.len() || h.shape() != (self.carrier_dim(), d) {
            return Err(Error::InvalidSubset(format!("node {i} of {}", self.nodes.len())));
        }
        let w = self.weights[i];
        if w == 0.0 {
            return Err(Error::InvalidSubset(format!("node {i} has zero weight")));
        }
        Ok(h.rows(i * d, d) * C64::new(1.0 / w.sqrt(), 0.0))
    }

    /// `h_x = W|x,id>` for any point `x` of the parameter space.
    pub fn h(&self, x: &Node) -> Result<CMatrix> {
        let v = self.family.state_vector(x, &CStarMatrix::identity(self.family.left_dim()))?;
        Ok(&self.w * v)
    }

    /// `<h̃₁|h̃₂>` in the carrier space.
    pub fn inner(&self, h1: &CMatrix, h2: &CMatrix) -> CStarMatrix {
        CStarMatrix::from_trusted(h1.adjoint() * h2)
    }

    fn subset(&self, delta: &[usize]) -> Result<BTreeSet<usize>> {
        let set: BTreeSet<usize> = delta.iter().copied().collect();
        if set.len() != delta.len() {
            return Err(Error::InvalidSubset("repeated node".into()));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= self.nodes.len()) {
            return Err(Error::InvalidSubset(format!("node {bad} of {}", self.nodes.len())));
        }
        Ok(set)
    }

    /// `ν(Δ) = Σ_{i ∈ Δ} w_i |h_{x_i}><h_{x_i}|`.
    pub fn nu(&self, delta: &[usize]) -> Result<CMatrix> {
        let set = self.subset(delta)?;
        let d = self.block_dim;
        let m = self.carrier_dim();
        let mut out = CMatrix::zeros(m, m);
        for &i in &set {
            let col = self.images.columns(i * d, d);
            out.gemm(C64::new(self.weights[i], 0.0), &col, &col.adjoint(), C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// `P̃(Δ)`: multiplication by the indicator of `Δ`.
    pub fn pvm(&self, delta: &[usize]) -> Result<CMatrix> {
        let set = self.subset(delta)?;
        let d = self.block_dim;
        let mut p = CMatrix::zeros(self.carrier_dim(), self.carrier_dim());
        for &i in &set {
            for r in i * d..(i + 1) * d {
                p[(r, r)] = C64::new(1.0, 0.0);
            }
        }
        Ok(p)
    }

    /// `a · h̃ = W (a ⊗ I_G) W* h̃`, defined on `range(W)` only.
    pub fn left_action(&self, a: &CStarMatrix, h: &CMatrix, tol: SpectralTolerance) -> Result<CMatrix> {
        let r = self.family.left_dim();
        if a.dim() != r {
            return Err(Error::DimensionMismatch(format!("a is {0}x{0}, the left algebra is M_{r}", a.dim())));
        }
        if h.shape() != (self.carrier_dim(), self.block_dim) {
            return Err(Error::DimensionMismatch(format!("{:?} is not a carrier vector", h.shape())));
        }
        let off = spectral_norm(&(&self.p_k * h - h));
        if off > tol.equality_tol * spectral_norm(h).max(1.0) {
            return Err(Error::InvalidParameter(format!("vector lies outside range(W) (distance {off:e})")));
        }
        let g = self.family.g_space().rows();
        let ag = crate::cstar::kron_matrix(a.matrix(), &CMatrix::identity(g, g));
        Ok(&self.w * (ag * (self.w.adjoint() * h)))
    }
}

/// `ν(Δ)` against `P_K P̃(Δ) P_K`, and `P̃(Δ)` against its square.
pub fn dilation_check(scene: &DilationScene, delta: &[usize]) -> Result<NaimarkReport> {
    let nu = scene.nu(delta)?;
    let pvm = scene.pvm(delta)?;
    // P_K P̃(Δ) P_K, multiplying only the columns that P̃(Δ) keeps
    let d = scene.block_dim;
    let m = scene.carrier_dim();
    let mut compressed = CMatrix::zeros(m, m);
    for &i in delta {
        compressed.gemm(
            C64::new(1.0, 0.0),
            &scene.p_k.columns(i * d, d),
            &scene.p_k.rows(i * d, d),
            C64::new(1.0, 0.0),
        );
    }
    let defect_naimark = hermitian_norm(&(&nu - compressed));
    // P̃(Δ) is diagonal, so P̃² - P̃ is too
    let defect_pvm = pvm.diagonal().iter().fold(0.0f64, |acc, p| acc.max((p * p - p).norm()));
    let nu_min_eigenvalue = if delta.is_empty() { 0.0 } else { CStarMatrix::from_trusted(nu).min_eigenvalue() };
    Ok(NaimarkReport { defect_naimark, defect_pvm, nu_min_eigenvalue })
}

/// `||ν(Δ₁ ⊔ Δ₂) - ν(Δ₁) - ν(Δ₂)||` for disjoint node sets.
pub fn additivity_defect(scene: &DilationScene, d1: &[usize], d2: &[usize]) -> Result<f64> {
    let union: Vec<usize> = d1.iter().chain(d2).copied().collect();
    let whole = scene.nu(&union)?;
    Ok(hermitian_norm(&(whole - scene.nu(d1)? - scene.nu(d2)?)))
}

/// Dimension of the span of `{P̃({x_i}) h : h ∈ range(W)}`.
///
/// The pieces for different nodes have disjoint supports, so the span is the
/// sum of the ranks of the blocks `√w_i <x_i,id|`.
pub fn minimality_check(scene: &DilationScene) -> MinimalityReport {
    let d = scene.block_dim;
    let support_ok = scene.weights.iter().all(|&w| w > 0.0);
    let span_dimension =
        (0..scene.nodes.len()).map(|i| numerical_rank(&scene.w.rows(i * d, d).into_owned(), 1e-10)).sum();
    let carrier_dim = scene.carrier_dim();
    MinimalityReport { span_dimension, carrier_dim, full: support_ok && span_dimension == carrier_dim, support_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::CanonicalFamily;
    use crate::quadrature::{QuadratureRule, RuleKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small_canonical() -> CanonicalFamily {
        CanonicalFamily::bargmann(6, 8, 1.0).unwrap()
    }

    fn random_a(rng: &mut ChaCha8Rng) -> CStarMatrix {
        CStarMatrix::scalar(c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn kernel_is_hermitian_and_matches_normalization() {
        let fam = small_canonical();
        let kern = cp_kernel(fam.family());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = Node::Complex(c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)));
            let y = Node::Complex(c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)));
            let (a, a2) = (random_a(&mut rng), random_a(&mut rng));
            let k = kern.eval(&x, &y, &a, &a2).unwrap();
            assert!(k.adjoint().distance(&kern.eval(&y, &x, &a2, &a).unwrap()) < 1e-12);
            let n = crate::engine::normalization(fam.family(), &x, &CStarMatrix::identity(1)).unwrap();
            assert!(kern.eval_id(&x, &x).unwrap().distance(&n.value) < 1e-12);
        }
        let zero = kern
            .eval(
                &Node::Complex(c(0.3, 0.0)),
                &Node::Complex(c(0.1, 0.2)),
                &CStarMatrix::zeros(1),
                &CStarMatrix::identity(1),
            )
            .unwrap();
        assert_eq!(zero, CStarMatrix::zeros(1));
    }

    #[test]
    fn positivity_on_random_points() {
        let fam = small_canonical();
        let kern = cp_kernel(fam.family());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<_> = (0..8)
            .map(|_| (Node::Complex(c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))), random_a(&mut rng)))
            .collect();
        let b: Vec<_> = (0..8).map(|_| random_a(&mut rng)).collect();
        let rep = cp_positivity_test(&kern, &points, &b, SpectralTolerance::default()).unwrap();
        assert!(rep.min_eigenvalue >= -1e-10 && rep.pass);
    }

    #[test]
    fn opposite_coefficients_cancel() {
        let fam = small_canonical();
        let kern = cp_kernel(fam.family());
        let x = Node::Complex(c(0.4, -0.2));
        let id = CStarMatrix::identity(1);
        let points = vec![(x.clone(), id.clone()), (x, id.clone())];
        let b = vec![id.clone(), id.scale(c(-1.0, 0.0))];
        let rep = cp_positivity_test(&kern, &points, &b, SpectralTolerance::default()).unwrap();
        assert_eq!(rep.form_min_eigenvalue, 0.0);
    }

    #[test]
    fn reproducing_bargmann_kernel() {
        let fam = CanonicalFamily::bargmann(30, 40, 1.0).unwrap();
        let kern = cp_kernel(fam.family());
        let id = CStarMatrix::identity(1);
        let (x, z) = (Node::Complex(c(0.5, 0.3)), Node::Complex(c(-0.2, 0.7)));
        let rep = kernel_reproduce_check(&kern, &x, &z, &id, &id, &id, SpectralTolerance::default()).unwrap();
        assert!(rep.defect <= 1e-7, "{rep:?}");
        // the kernel itself is the truncated e^{x z̄}
        let (xv, zv) = (c(0.5, 0.3), c(-0.2, 0.7));
        let k = kern.eval_id(&x, &z).unwrap().matrix()[(0, 0)];
        assert!((k - (xv * zv.conj()).exp()).norm() < 1e-12);
        let u = CStarMatrix::scalar(C64::from_polar(1.0, 0.9));
        let rep = kernel_reproduce_check(&kern, &x, &x, &id, &id, &u, SpectralTolerance::default()).unwrap();
        assert!(rep.defect <= 1e-7);
        assert!(kernel_reproduce_check(&kern, &x, &z, &id, &id, &id.scale(c(2.0, 0.0)), SpectralTolerance::default())
            .is_err());
    }

    #[test]
    fn single_node_reproduction_is_exact() {
        let base = small_canonical();
        let x = Node::Complex(c(0.0, 0.0));
        let rule = QuadratureRule::explicit(RuleKind::ExplicitList, vec![x.clone()], vec![1.0], 0.0).unwrap();
        let fam = base.family().with_rule(rule);
        let kern = cp_kernel(&fam);
        let id = CStarMatrix::identity(1);
        let rep = kernel_reproduce_check(&kern, &x, &x, &id, &id, &id, SpectralTolerance::default()).unwrap();
        assert_eq!(rep.defect, 0.0);
    }

    #[test]
    fn dilation_identities() {
        let fam = small_canonical();
        let tol = SpectralTolerance::default();
        let scene = build_dilation(fam.family(), tol).unwrap();
        let rep = scene.report();
        assert!(rep.pass, "{rep:?}");
        // <h_x|h_y> = K(x,y), also off the nodes
        let kern = cp_kernel(fam.family());
        let (x, y) = (Node::Complex(c(0.3, 0.1)), Node::Complex(c(-0.6, 0.4)));
        let hh = scene.inner(&scene.h(&x).unwrap(), &scene.h(&y).unwrap());
        assert!(hh.distance(&kern.eval_id(&x, &y).unwrap()) < 1e-8);
        // ν(∅) = 0, ν(all) = P_K
        let empty = dilation_check(&scene, &[]).unwrap();
        assert_eq!(empty.defect_naimark, 0.0);
        assert!(scene.nu(&[]).unwrap().iter().all(|z| *z == c(0.0, 0.0)));
        let all: Vec<usize> = (0..scene.nodes().len()).collect();
        assert!(spectral_norm(&(scene.nu(&all).unwrap() - scene.p_k())) < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let delta: Vec<usize> = all.iter().copied().filter(|_| rng.random_bool(0.4)).collect();
            let r = dilation_check(&scene, &delta).unwrap();
            assert!(r.defect_naimark <= 1e-10 && r.defect_pvm == 0.0 && r.nu_min_eigenvalue >= -1e-10, "{r:?}");
        }
        assert!(matches!(dilation_check(&scene, &[0, 0]), Err(Error::InvalidSubset(_))));
        assert!(matches!(dilation_check(&scene, &[all.len()]), Err(Error::InvalidSubset(_))));
    }

    #[test]
    fn w_is_isometric_on_normalized_input() {
        let fam = small_canonical();
        let scene = build_dilation(fam.family(), SpectralTolerance::default()).unwrap();
        let mut f = CMatrix::zeros(7, 1);
        f[(2, 0)] = c(0.6, 0.0);
        f[(5, 0)] = c(0.0, 0.8);
        let wf = scene.apply_w(&f).unwrap();
        assert!(scene.inner(&wf, &wf).distance(&CStarMatrix::identity(1)) < 1e-8);
        let back = scene.value_at(&wf, 3).unwrap();
        let v = fam.family().state_vector(&scene.nodes()[3], &CStarMatrix::identity(1)).unwrap();
        assert!(spectral_norm(&(back - v.adjoint() * &f)) < 1e-12);
    }

    #[test]
    fn left_action_on_range() {
        let fam = small_canonical();
        let tol = SpectralTolerance::default();
        let scene = build_dilation(fam.family(), tol).unwrap();
        let h = scene.h(&Node::Complex(c(0.2, 0.2))).unwrap();
        let u = CStarMatrix::scalar(C64::from_polar(1.0, 0.4));
        let got = scene.left_action(&u, &h, tol).unwrap();
        assert!(spectral_norm(&(got - &h * C64::from_polar(1.0, 0.4))) < 1e-8);
        let mut off = CMatrix::zeros(scene.carrier_dim(), 1);
        off[(0, 0)] = c(1.0, 0.0);
        assert!(scene.left_action(&u, &off, tol).is_err());
    }

    #[test]
    fn minimality() {
        // one node per function: the node blocks are nonzero scalars
        let fam = small_canonical();
        let scene = build_dilation(fam.family(), SpectralTolerance::default()).unwrap();
        let m = minimality_check(&scene);
        assert!(m.full && m.span_dimension == m.carrier_dim);
        // a family that vanishes at one node
        let rule = QuadratureRule::explicit(
            RuleKind::ExplicitList,
            vec![Node::Complex(c(0.5, 0.0)), Node::Complex(c(0.0, 0.5))],
            vec![0.5, 0.5],
            0.0,
        )
        .unwrap();
        let zeroed = crate::engine::CSFamily::new(
            "zeroed",
            fam.family().e_space(),
            fam.family().frame().clone(),
            rule,
            6,
            0.0,
            std::sync::Arc::new(|x: &Node, out: &mut CMatrix| {
                if x.as_complex()?.re > 0.0 {
                    out[(1, 0)] = c(1.0, 0.0);
                }
                Ok(())
            }),
        )
        .unwrap();
        let scene = build_dilation(&zeroed, SpectralTolerance::default()).unwrap();
        let m = minimality_check(&scene);
        assert_eq!((m.span_dimension, m.full), (1, false));
    }

    #[test]
    fn additivity() {
        let fam = small_canonical();
        let scene = build_dilation(fam.family(), SpectralTolerance::default()).unwrap();
        let d = additivity_defect(&scene, &[0, 3, 7], &[1, 2, 40]).unwrap();
        assert!(d <= 1e-15);
    }
}
