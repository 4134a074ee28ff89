//! Module-valued coherent states `|x,a> = Σ_k a F_k(x) ⊗ φ_k` and the
//! numerical checks of orthogonality, normalization and resolution of the
//! identity.
//!
//! Every operator on `H = E ⊗ G` that arises here is a sum of rank-one
//! operators `|v><v|`, i.e. left multiplication by `Σ w v v*`. Identities on
//! `H` are therefore checked on that `rows(H) x rows(H)` matrix; its norm is
//! the operator norm on `H` (see [`crate::module`]).

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::cstar::{check_dim, kron_matrix, spectral_norm, CMatrix, CStarMatrix, SpectralTolerance, C64};
use crate::error::{Error, Result};
use crate::module::{Frame, ModuleElement, ModuleSpace};
use crate::quadrature::{Node, QuadratureRule};

/// Evaluates `F_0(x), …, F_{K_max}(x)` in one pass into `out`, a zeroed
/// `(K_max+1)·rows(E) x dim(E)` stack whose `k`-th block of rows is `F_k(x)`.
pub type Evaluator = Arc<dyn Fn(&Node, &mut CMatrix) -> Result<()> + Send + Sync>;

/// A truncated coherent-state family: functions `F_k` on a discretized
/// measure space and a frame `φ_k`, `k = 0..=K_max`.
#[derive(Clone)]
pub struct CSFamily {
    name: String,
    e_space: ModuleSpace,
    frame: Frame,
    rule: QuadratureRule,
    eval: Evaluator,
    k_max: usize,
    truncation_tail: f64,
    // position of the single unit entry of each φ_k when the frame is a set of
    // distinct standard basis vectors of C^d
    unit_positions: Option<Vec<usize>>,
    // ∫ F F* dμ of the stacked F, shared by clones that keep the rule
    moment: Arc<OnceLock<CMatrix>>,
    // ∫ |x,id><x,id| dμ, which depends on the frame as well
    resolution: Arc<OnceLock<CMatrix>>,
}

impl fmt::Debug for CSFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CSFamily")
            .field("name", &self.name)
            .field("e_space", &self.e_space)
            .field("g_space", &self.frame.space())
            .field("nodes", &self.rule.len())
            .field("k_max", &self.k_max)
            .field("truncation_tail", &self.truncation_tail)
            .finish()
    }
}

fn unit_positions(frame: &Frame) -> Option<Vec<usize>> {
    if frame.space().algebra_dim() != 1 {
        return None;
    }
    let mut seen = vec![false; frame.space().rows()];
    let mut out = Vec::with_capacity(frame.len());
    for phi in frame.elements() {
        let v = phi.value();
        let ones: Vec<usize> = (0..v.nrows()).filter(|&i| v[(i, 0)] != C64::new(0.0, 0.0)).collect();
        if ones.len() != 1 || v[(ones[0], 0)] != C64::new(1.0, 0.0) || seen[ones[0]] {
            return None;
        }
        seen[ones[0]] = true;
        out.push(ones[0]);
    }
    Some(out)
}

impl CSFamily {
    pub fn new(
        name: impl Into<String>,
        e_space: ModuleSpace,
        frame: Frame,
        rule: QuadratureRule,
        k_max: usize,
        truncation_tail: f64,
        eval: Evaluator,
    ) -> Result<Self> {
        if frame.len() != k_max + 1 {
            return Err(Error::InconsistentDimensions { expected: k_max + 1, found: frame.len() });
        }
        if !(truncation_tail.is_finite() && truncation_tail >= 0.0) {
            return Err(Error::InvalidParameter(format!("truncation tail {truncation_tail}")));
        }
        check_dim(e_space.rows() * frame.space().rows())?;
        let unit_positions = unit_positions(&frame);
        Ok(Self {
            name: name.into(),
            e_space,
            frame,
            rule,
            eval,
            k_max,
            truncation_tail,
            unit_positions,
            moment: Arc::default(),
            resolution: Arc::default(),
        })
    }

    /// The same family with another frame of the same length.
    pub fn with_frame(&self, frame: Frame) -> Result<Self> {
        let mut out = Self::new(
            self.name.clone(),
            self.e_space,
            frame,
            self.rule.clone(),
            self.k_max,
            self.truncation_tail,
            self.eval.clone(),
        )?;
        out.moment = self.moment.clone();
        Ok(out)
    }

    /// The same family integrated against another rule.
    pub fn with_rule(&self, rule: QuadratureRule) -> Self {
        Self { rule, moment: Arc::default(), resolution: Arc::default(), ..self.clone() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn e_space(&self) -> ModuleSpace {
        self.e_space
    }

    pub fn g_space(&self) -> ModuleSpace {
        self.frame.space()
    }

    pub fn h_space(&self) -> ModuleSpace {
        self.e_space.tensor(&self.frame.space())
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    /// Dimension of the left algebra `A = B`.
    pub fn left_dim(&self) -> usize {
        self.e_space.rows()
    }

    /// Shape of the stacked evaluation buffer.
    pub fn stacked_shape(&self) -> (usize, usize) {
        ((self.k_max + 1) * self.e_space.rows(), self.e_space.algebra_dim())
    }

    /// Writes the stack of `F_0(x), …, F_{K_max}(x)` into `out`, reshaping it
    /// if needed.
    pub fn evaluate_stacked(&self, x: &Node, out: &mut CMatrix) -> Result<()> {
        let (r, c) = self.stacked_shape();
        if out.shape() != (r, c) {
            *out = CMatrix::zeros(r, c);
        } else {
            out.fill(C64::new(0.0, 0.0));
        }
        (self.eval)(x, out)?;
        if out.shape() != (r, c) {
            return Err(Error::SpaceMismatch(format!("evaluator produced {:?}, expected {:?}", out.shape(), (r, c))));
        }
        Ok(())
    }

    /// Raw matrices `F_0(x), …, F_{K_max}(x)`.
    pub fn evaluate_raw(&self, x: &Node) -> Result<Vec<CMatrix>> {
        let mut st = CMatrix::zeros(0, 0);
        self.evaluate_stacked(x, &mut st)?;
        let r = self.e_space.rows();
        Ok((0..=self.k_max).map(|k| st.rows(k * r, r).into_owned()).collect())
    }

    pub fn evaluate(&self, x: &Node) -> Result<Vec<ModuleElement>> {
        self.evaluate_raw(x)?.into_iter().map(|f| self.e_space.element(f)).collect()
    }

    /// `F_k(x)`.
    pub fn f(&self, k: usize, x: &Node) -> Result<ModuleElement> {
        if k > self.k_max {
            return Err(Error::TruncationExceeded { requested: k, available: self.k_max });
        }
        let mut fs = self.evaluate_raw(x)?;
        self.e_space.element(fs.swap_remove(k))
    }

    fn check_a(&self, a: &CStarMatrix) -> Result<()> {
        if a.dim() != self.left_dim() {
            return Err(Error::DimensionMismatch(format!(
                "a is {0}x{0}, the left algebra is M_{1}",
                a.dim(),
                self.left_dim()
            )));
        }
        Ok(())
    }

    /// `Σ_{k ≤ upto} (a F_k) ⊗ φ_k` from the stacked `F_k`.
    fn assemble(&self, stacked: &CMatrix, a: &CStarMatrix, upto: usize) -> CMatrix {
        let h = self.h_space();
        let g = self.frame.space();
        let r = self.e_space.rows();
        let mut v = CMatrix::zeros(h.rows(), h.algebra_dim());
        for k in 0..=upto.min(self.k_max) {
            let af = a.matrix() * stacked.rows(k * r, r);
            match &self.unit_positions {
                Some(pos) => {
                    let p = pos[k];
                    for i in 0..af.nrows() {
                        for j in 0..af.ncols() {
                            v[(i * g.rows() + p, j)] += af[(i, j)];
                        }
                    }
                }
                None => v += kron_matrix(&af, self.frame.elements()[k].value()),
            }
        }
        v
    }

    /// The vector of `|x,a>` without the divergence test.
    pub fn state_vector(&self, x: &Node, a: &CStarMatrix) -> Result<CMatrix> {
        self.check_a(a)?;
        let mut st = CMatrix::zeros(0, 0);
        self.evaluate_stacked(x, &mut st)?;
        Ok(self.assemble(&st, a, self.k_max))
    }
}

/// `|x,a>`, possibly normalized.
#[derive(Debug, Clone)]
pub struct CoherentState<'f> {
    family: &'f CSFamily,
    x: Node,
    a: CStarMatrix,
    vector: ModuleElement,
    normalized: bool,
}

impl<'f> CoherentState<'f> {
    pub fn family(&self) -> &'f CSFamily {
        self.family
    }

    pub fn x(&self) -> &Node {
        &self.x
    }

    pub fn a(&self) -> &CStarMatrix {
        &self.a
    }

    pub fn vector(&self) -> &ModuleElement {
        &self.vector
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `<self|other>_H`.
    pub fn overlap(&self, other: &CoherentState<'_>) -> Result<CStarMatrix> {
        self.vector.inner(&other.vector)
    }
}

/// Partial-sum norms of `Σ_k a F_k ⊗ φ_k` must settle: the last increment may
/// not exceed ten times the geometric extrapolation of the two before it.
///
/// Norms are Frobenius: the operator norm of a partial sum can stall for a
/// step when a non-scalar `a` turns the new term away from the top singular
/// direction, which would read as divergence.
fn cauchy_test(fam: &CSFamily, fs: &CMatrix, a: &CStarMatrix) -> Result<()> {
    let k_max = fam.k_max;
    let norms: Vec<f64> = (0..=k_max).map(|k| fam.assemble(fs, a, k).norm()).collect();
    if norms.iter().any(|n| !n.is_finite()) {
        return Err(Error::DivergentSum { k_max });
    }
    if k_max < 3 {
        return Ok(());
    }
    let inc = |k: usize| (norms[k] - norms[k - 1]).abs();
    let (d2, d1, d0) = (inc(k_max - 2), inc(k_max - 1), inc(k_max));
    let negligible = |k: usize| 64.0 * f64::EPSILON * norms[k].max(f64::MIN_POSITIVE);
    if d0 <= negligible(k_max) || d2 <= negligible(k_max - 2) {
        return Ok(());
    }
    if d0 > 10.0 * d1 * d1 / d2 {
        return Err(Error::DivergentSum { k_max });
    }
    Ok(())
}

/// `|x,a> = Σ_{k ≤ K_max} a F_k(x) ⊗ φ_k`.
pub fn coherent_state<'f>(fam: &'f CSFamily, x: &Node, a: &CStarMatrix) -> Result<CoherentState<'f>> {
    fam.check_a(a)?;
    let mut st = CMatrix::zeros(0, 0);
    fam.evaluate_stacked(x, &mut st)?;
    cauchy_test(fam, &st, a)?;
    let vector = fam.h_space().element(fam.assemble(&st, a, fam.k_max))?;
    Ok(CoherentState { family: fam, x: x.clone(), a: a.clone(), vector, normalized: false })
}

/// The overlap `<x,a|y,a'>` evaluated termwise as
/// `Σ_{k,l} <a F_k(x)|a' F_l(y)> ⊗ <φ_k|φ_l>`.
pub fn factorized_overlap(
    fam: &CSFamily,
    x: &Node,
    a: &CStarMatrix,
    y: &Node,
    a2: &CStarMatrix,
) -> Result<CStarMatrix> {
    fam.check_a(a)?;
    fam.check_a(a2)?;
    let fx = fam.evaluate_raw(x)?;
    let fy = fam.evaluate_raw(y)?;
    let phis = fam.frame.elements();
    let h = fam.h_space();
    let mut acc = CMatrix::zeros(h.algebra_dim(), h.algebra_dim());
    for (k, fk) in fx.iter().enumerate() {
        let left = (a.matrix() * fk).adjoint();
        for (l, fl) in fy.iter().enumerate() {
            let g = phis[k].value().adjoint() * phis[l].value();
            if g.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            acc += kron_matrix(&(&left * a2.matrix() * fl), &g);
        }
    }
    CStarMatrix::new(acc)
}

/// `𝒩(x,a)` with its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct NormalizationElement {
    pub value: CStarMatrix,
    pub min_eigenvalue: f64,
}

/// `𝒩(x,a) = Σ_k <F_k(x)|a*a F_k(x)> ⊗ id_C`, symmetrized.
pub fn normalization(fam: &CSFamily, x: &Node, a: &CStarMatrix) -> Result<NormalizationElement> {
    fam.check_a(a)?;
    let fs = fam.evaluate_raw(x)?;
    let ata = a.matrix().adjoint() * a.matrix();
    let n = fam.e_space.algebra_dim();
    let mut acc = CMatrix::zeros(n, n);
    for f in &fs {
        acc += f.adjoint() * &ata * f;
    }
    let c = fam.frame.space().algebra_dim();
    let value = CStarMatrix::new(kron_matrix(&acc, &CMatrix::identity(c, c)))?.hermitian_part();
    let min_eigenvalue = value.min_eigenvalue();
    Ok(NormalizationElement { value, min_eigenvalue })
}

/// `|x,a> 𝒩(x,a)^{-1/2}`.
///
/// A state that is already normalized is renormalized by its own Gram
/// element `<v|v>`, so normalizing twice changes nothing.
pub fn normalize<'f>(cs: &CoherentState<'f>, tol: SpectralTolerance) -> Result<CoherentState<'f>> {
    let n = if cs.normalized {
        cs.vector.inner(&cs.vector)?.hermitian_part()
    } else {
        normalization(cs.family, &cs.x, &cs.a)?.value
    };
    let vector = cs.vector.right_mul(&n.inv_sqrt_pos(tol)?)?;
    Ok(CoherentState { vector, normalized: true, ..cs.clone() })
}

/// Outcome of [`verify_orthogonality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalityReport {
    /// `max_{k,l} ||∫ F_k F_l* dμ - δ_kl I||`.
    pub max_defect: f64,
    pub worst: (usize, usize),
    pub bound: f64,
    pub pass: bool,
    pub nodes_used: usize,
}

/// Adds `w v v*` to the upper triangle of `acc`.
fn accumulate_upper(acc: &mut CMatrix, v: &CMatrix, w: f64) {
    let n = acc.nrows();
    let dst = acc.as_mut_slice();
    for col in v.column_iter() {
        let x = col.as_slice();
        for (j, xj) in x.iter().enumerate() {
            let s = xj.conj() * w;
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            let out = &mut dst[j * n..j * n + j + 1];
            for (o, xi) in out.iter_mut().zip(x) {
                *o += xi * s;
            }
        }
    }
}

fn mirror_upper(acc: &mut CMatrix) {
    let n = acc.nrows();
    for j in 0..n {
        for i in j + 1..n {
            acc[(i, j)] = acc[(j, i)].conj();
        }
        acc[(j, j)].im = 0.0;
    }
}

/// `∫ F F* dμ` for the stack `F = [F_0; …; F_{K_max}]`: block `(k, l)` is
/// `∫ F_k F_l* dμ`. Computed once per family and rule, then cached.
pub fn second_moment(fam: &CSFamily) -> Result<CMatrix> {
    if let Some(m) = fam.moment.get() {
        return Ok(m.clone());
    }
    let (n, c) = fam.stacked_shape();
    check_dim(n)?;
    let mut acc = CMatrix::zeros(n, n);
    let mut st = CMatrix::zeros(n, c);
    fam.rule.for_each(|x, w| {
        fam.evaluate_stacked(x, &mut st)?;
        accumulate_upper(&mut acc, &st, w);
        Ok(())
    })?;
    mirror_upper(&mut acc);
    if acc.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::DivergentSum { k_max: fam.k_max });
    }
    let _ = fam.moment.set(acc.clone());
    Ok(acc)
}

/// Standard error of [`second_moment`] under a Monte Carlo rule: the
/// Frobenius sample standard deviation of `F F*` over `√M`. `None` for
/// deterministic rules.
pub fn second_moment_error(fam: &CSFamily) -> Result<Option<f64>> {
    if !fam.rule.is_monte_carlo() {
        return Ok(None);
    }
    let m = fam.rule.len();
    if m < 2 {
        return Ok(Some(f64::INFINITY));
    }
    let mean = second_moment(fam)?;
    let total: f64 = fam.rule.total_mass();
    let mut mean_sq = 0.0;
    let mut st = CMatrix::zeros(0, 0);
    fam.rule.for_each(|x, w| {
        fam.evaluate_stacked(x, &mut st)?;
        // ||F F*||_F = ||F* F||_F
        mean_sq += w * (st.adjoint() * &st).norm_squared();
        Ok(())
    })?;
    let var = (mean_sq / total - mean.norm_squared() / (total * total)).max(0.0);
    Ok(Some((var / (m - 1) as f64).sqrt()))
}

/// The operators `∫ |F_k><F_l| dμ` on `E`, each realized as left
/// multiplication by `∫ F_k F_l* dμ`.
pub fn verify_orthogonality(fam: &CSFamily, tol: f64) -> Result<OrthogonalityReport> {
    let r = fam.e_space.rows();
    let kk = fam.k_max + 1;
    let gram = second_moment(fam)?;
    let mut max_defect = 0.0;
    let mut worst = (0, 0);
    for k in 0..kk {
        for l in 0..kk {
            let mut block = gram.view((k * r, l * r), (r, r)).into_owned();
            if k == l {
                block -= CMatrix::identity(r, r);
            }
            let d = spectral_norm(&block);
            if d > max_defect {
                max_defect = d;
                worst = (k, l);
            }
        }
    }
    let bound = tol + fam.rule.tail_bound();
    Ok(OrthogonalityReport { max_defect, worst, bound, pass: max_defect <= bound, nodes_used: fam.rule.len() })
}

/// Outcome of [`verify_resolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    /// `||∫ |x,a><x,a| dμ - I_H||`.
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
    pub nodes_used: usize,
    /// `∫ |x,a><x,a| dμ` as a `rows(H)`-square matrix acting on the left.
    pub operator: CStarMatrix,
}

fn require_coisometry(a: &CStarMatrix, tol: SpectralTolerance) -> Result<()> {
    let defect = a.coisometry_defect();
    if defect > tol.equality_tol {
        return Err(Error::NotCoisometry { defect });
    }
    Ok(())
}

fn resolution_report(fam: &CSFamily, acc: CMatrix, tol: f64) -> Result<ResolutionReport> {
    let n = acc.nrows();
    let operator = CStarMatrix::new(acc)?;
    let defect = spectral_norm(&(operator.matrix() - CMatrix::identity(n, n)));
    let bound = tol + fam.rule.tail_bound();
    Ok(ResolutionReport { defect, bound, pass: defect <= bound, nodes_used: fam.rule.len(), operator })
}

/// `∫ |x,a><x,a| dμ` from the second moment: with `v = Σ (a F_k) ⊗ φ_k`,
/// `v v* = Σ_{k,l} (a F_k F_l* a*) ⊗ φ_k φ_l*`.
pub(crate) fn resolution_operator(fam: &CSFamily, a: &CStarMatrix) -> Result<CMatrix> {
    let r = fam.e_space.rows();
    let g = fam.frame.space().rows();
    let m = match fam.resolution.get() {
        Some(m) => m.clone(),
        None => {
            let m = identity_resolution(fam)?;
            fam.resolution.get_or_init(|| m).clone()
        }
    };
    if a.matrix() == &CMatrix::identity(r, r) {
        return Ok(m);
    }
    if r == 1 {
        return Ok(m * C64::new(a.matrix()[(0, 0)].norm_sqr(), 0.0));
    }
    let big = kron_matrix(a.matrix(), &CMatrix::identity(g, g));
    let mut out = &big * m * big.adjoint();
    mirror_upper(&mut out);
    Ok(out)
}

fn identity_resolution(fam: &CSFamily) -> Result<CMatrix> {
    let s = second_moment(fam)?;
    let r = fam.e_space.rows();
    let g = fam.frame.space().rows();
    let kk = fam.k_max + 1;
    let mut m = CMatrix::zeros(r * g, r * g);
    match &fam.unit_positions {
        Some(pos) => {
            for (k, &pk) in pos.iter().enumerate() {
                for (l, &pl) in pos.iter().enumerate() {
                    for i in 0..r {
                        for j in 0..r {
                            m[(i * g + pk, j * g + pl)] = s[(k * r + i, l * r + j)];
                        }
                    }
                }
            }
        }
        None => {
            let phis = fam.frame.elements();
            for k in 0..kk {
                for l in 0..kk {
                    let pp = phis[k].value() * phis[l].value().adjoint();
                    if pp.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                        continue;
                    }
                    m += kron_matrix(&s.view((k * r, l * r), (r, r)).into_owned(), &pp);
                }
            }
        }
    }
    Ok(m)
}

/// `∫ |x,a><x,a| dμ(x) = I_H` for a co-isometry `a`.
pub fn verify_resolution(fam: &CSFamily, a: &CStarMatrix, tol: SpectralTolerance) -> Result<ResolutionReport> {
    fam.check_a(a)?;
    require_coisometry(a, tol)?;
    check_dim(fam.h_space().vector_dim())?;
    let acc = resolution_operator(fam, a)?;
    resolution_report(fam, acc, tol.equality_tol)
}

/// The same operator summed node by node from the assembled states
/// `|x,a>`; slower, kept as a cross-check of [`verify_resolution`].
pub fn resolution_by_states(fam: &CSFamily, a: &CStarMatrix) -> Result<CStarMatrix> {
    fam.check_a(a)?;
    let h = fam.h_space();
    check_dim(h.vector_dim())?;
    let mut acc = CMatrix::zeros(h.rows(), h.rows());
    let mut st = CMatrix::zeros(0, 0);
    fam.rule.for_each(|x, w| {
        fam.evaluate_stacked(x, &mut st)?;
        accumulate_upper(&mut acc, &fam.assemble(&st, a, fam.k_max), w);
        Ok(())
    })?;
    mirror_upper(&mut acc);
    CStarMatrix::new(acc)
}

/// Outcome of [`verify_normalized_resolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedResolutionReport {
    pub plain: ResolutionReport,
    /// Resolution assembled as `∫ |x̂,a> 𝒩(x,a) <x̂,a| dμ`.
    pub normalized: ResolutionReport,
    /// Distance between the two assembled operators.
    pub agreement: f64,
}

/// Assembles the resolution from normalized states weighted by `𝒩(x,a)` and
/// compares it with the plain form.
///
/// Nodes where `|x,a> = 0` contribute nothing to either form and are skipped.
pub fn verify_normalized_resolution(
    fam: &CSFamily,
    a: &CStarMatrix,
    tol: SpectralTolerance,
) -> Result<NormalizedResolutionReport> {
    let plain = verify_resolution(fam, a, tol)?;
    let h = fam.h_space();
    let mut acc = CMatrix::zeros(h.rows(), h.rows());
    fam.rule.for_each(|x, w| {
        let cs = coherent_state(fam, x, a)?;
        if cs.vector.norm() <= tol.psd_floor {
            return Ok(());
        }
        let n = normalization(fam, x, a)?.value;
        let hat = normalize(&cs, tol)?;
        let v = hat.vector.value();
        acc.gemm(C64::new(w, 0.0), &(v * n.matrix()), &v.adjoint(), C64::new(1.0, 0.0));
        Ok(())
    })?;
    let normalized = resolution_report(fam, acc, tol.equality_tol)?;
    let agreement = normalized.operator.distance(&plain.operator);
    Ok(NormalizedResolutionReport { plain, normalized, agreement })
}
