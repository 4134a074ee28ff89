//! Discretized measure spaces and matrix-valued integration.
//!
//! Every rule is a finite list of weighted nodes. Deterministic rules are
//! built from Gauss–Laguerre, Gauss–Legendre and trapezoid factors; Monte
//! Carlo rules draw i.i.d. samples from a seeded ChaCha stream. Integration
//! always sums in ascending node order so results are bit-reproducible.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cstar::{CMatrix, CStarMatrix, C64};
use crate::error::{Error, Result};

/// Parameters `(r, ξ, θ, φ)` of a real quaternion `r e^{iξ σ(n)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionParam {
    pub r: f64,
    pub xi: f64,
    pub theta: f64,
    pub phi: f64,
}

impl QuaternionParam {
    /// Validates `r ≥ 0`, `ξ ∈ [0, 2π)`, `θ ∈ [0, π]`, `φ ∈ (0, 2π]`.
    pub fn new(r: f64, xi: f64, theta: f64, phi: f64) -> Result<Self> {
        let ok = r >= 0.0
            && r.is_finite()
            && (0.0..2.0 * PI).contains(&xi)
            && (0.0..=PI).contains(&theta)
            && phi > 0.0
            && phi <= 2.0 * PI;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "quaternion parameters out of range: r={r}, xi={xi}, theta={theta}, phi={phi}"
            )));
        }
        Ok(Self { r, xi, theta, phi })
    }
}

/// A point of a discretized measure space.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Complex(C64),
    /// A matrix point: an SU(N) element or a point of `M_N(C)`.
    Matrix(CStarMatrix),
    Quaternion(QuaternionParam),
    /// A point of a counting measure.
    Index(usize),
    /// A point of a product space, one entry per factor.
    Composite(Vec<Node>),
}

impl Node {
    pub fn as_complex(&self) -> Result<C64> {
        match self {
            Node::Complex(z) => Ok(*z),
            other => Err(Error::InvalidNode(format!("expected a complex point, got {other:?}"))),
        }
    }

    pub fn as_index(&self) -> Result<usize> {
        match self {
            Node::Index(i) => Ok(*i),
            other => Err(Error::InvalidNode(format!("expected an index, got {other:?}"))),
        }
    }

    pub fn as_quaternion(&self) -> Result<QuaternionParam> {
        match self {
            Node::Quaternion(p) => Ok(*p),
            other => Err(Error::InvalidNode(format!("expected a quaternion, got {other:?}"))),
        }
    }

    pub fn as_matrix(&self) -> Result<&CStarMatrix> {
        match self {
            Node::Matrix(m) => Ok(m),
            other => Err(Error::InvalidNode(format!("expected a matrix, got {other:?}"))),
        }
    }

    pub fn parts(&self) -> Result<&[Node]> {
        match self {
            Node::Composite(parts) => Ok(parts),
            other => Err(Error::InvalidNode(format!("expected a composite point, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    GaussianComplex,
    HaarSun,
    Quaternion,
    Product,
    ExplicitList,
    MonteCarlo,
}

/// Coordinate convention of the complex Gaussian probability measure.
///
/// Both describe the measure `e^{-|z|^2} d^2z / π` in the variable `z`, so
/// `∫ z^a z̄^b = a! δ_ab` either way; they differ in which Cartesian
/// coordinates a node is reported in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianConvention {
    /// `z = x + iy`, density `e^{-(x²+y²)} / π`.
    Unit,
    /// `z = (x + iy)/√2`, density `e^{-(x²+y²)/2} / 2π`.
    #[default]
    Half,
}

impl GaussianConvention {
    /// Cartesian coordinates `(x, y)` of the point `z`.
    pub fn cartesian(self, z: C64) -> (f64, f64) {
        match self {
            GaussianConvention::Unit => (z.re, z.im),
            GaussianConvention::Half => (z.re * 2f64.sqrt(), z.im * 2f64.sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaarMode {
    ExactSu2,
    MonteCarlo,
}

/// Prefactor of the quaternion measure `c · r dr dξ sinθ dθ dφ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuaternionDensity {
    /// `1/8π²`.
    EightPiSquared,
    /// `1/4π²`: `∫ e^{-r²} dν = 1`; the module-form states resolve the identity.
    FourPiSquared,
    /// `1/2π²`: the two-component vector states resolve the identity.
    TwoPiSquared,
}

impl QuaternionDensity {
    pub fn prefactor(self) -> f64 {
        match self {
            QuaternionDensity::EightPiSquared => 1.0 / (8.0 * PI * PI),
            QuaternionDensity::FourPiSquared => 1.0 / (4.0 * PI * PI),
            QuaternionDensity::TwoPiSquared => 1.0 / (2.0 * PI * PI),
        }
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Explicit { nodes: Vec<Node>, weights: Vec<f64> },
    Product(Vec<QuadratureRule>),
}

/// A weighted node set discretizing a measure space.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    kind: RuleKind,
    storage: Storage,
    len: usize,
    tail_bound: f64,
    convention: Option<GaussianConvention>,
}

impl QuadratureRule {
    /// A rule from explicit nodes and nonnegative weights.
    pub fn explicit(kind: RuleKind, nodes: Vec<Node>, weights: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidParameter(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        if !(tail_bound.is_finite() && tail_bound >= 0.0) {
            return Err(Error::InvalidParameter("tail bound must be nonnegative".into()));
        }
        let len = nodes.len();
        Ok(Self { kind, storage: Storage::Explicit { nodes, weights }, len, tail_bound, convention: None })
    }

    /// The counting measure on `{0, …, n-1}`.
    pub fn counting(n: usize) -> Self {
        let nodes = (0..n).map(Node::Index).collect();
        Self::explicit(RuleKind::ExplicitList, nodes, vec![1.0; n], 0.0).expect("valid counting rule")
    }

    /// Product measure; nodes are [`Node::Composite`] with the last factor
    /// varying fastest. Tail bounds add.
    pub fn product(factors: Vec<QuadratureRule>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("empty product rule".into()));
        }
        let len = factors.iter().map(|f| f.len).product();
        let tail_bound = factors.iter().map(|f| f.tail_bound).sum();
        Ok(Self { kind: RuleKind::Product, storage: Storage::Product(factors), len, tail_bound, convention: None })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Estimated mass or accuracy lost to truncating the measure space.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn convention(&self) -> Option<GaussianConvention> {
        self.convention
    }

    pub fn is_monte_carlo(&self) -> bool {
        match &self.storage {
            Storage::Explicit { .. } => self.kind == RuleKind::MonteCarlo,
            Storage::Product(f) => f.iter().any(|r| r.is_monte_carlo()),
        }
    }

    pub fn node(&self, i: usize) -> Node {
        match &self.storage {
            Storage::Explicit { nodes, .. } => nodes[i].clone(),
            Storage::Product(factors) => {
                let idx = self.split_index(factors, i);
                Node::Composite(factors.iter().zip(idx).map(|(f, j)| f.node(j)).collect())
            }
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.storage {
            Storage::Explicit { weights, .. } => weights[i],
            Storage::Product(factors) => {
                let idx = self.split_index(factors, i);
                factors.iter().zip(idx).map(|(f, j)| f.weight(j)).product()
            }
        }
    }

    fn split_index(&self, factors: &[QuadratureRule], mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; factors.len()];
        for (slot, f) in idx.iter_mut().zip(factors).rev() {
            *slot = i % f.len;
            i /= f.len;
        }
        idx
    }

    /// `(node, weight)` pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (Node, f64)> + '_ {
        (0..self.len).map(move |i| (self.node(i), self.weight(i)))
    }

    /// Calls `f(node, weight)` for every node in ascending order.
    ///
    /// Product rules are walked with an odometer, so only the factors that
    /// change are touched between consecutive nodes.
    pub fn for_each<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(&Node, f64) -> Result<()>,
    {
        let factors = match &self.storage {
            Storage::Explicit { nodes, weights } => {
                for (x, w) in nodes.iter().zip(weights) {
                    f(x, *w)?;
                }
                return Ok(());
            }
            Storage::Product(factors) => factors,
        };
        if self.len == 0 {
            return Ok(());
        }
        let tables: Vec<(Vec<Node>, Vec<f64>)> =
            factors.iter().map(|r| (r.iter().map(|(x, _)| x).collect(), r.weights())).collect();
        let m = tables.len();
        let mut idx = vec![0usize; m];
        let mut current = Node::Composite(tables.iter().map(|t| t.0[0].clone()).collect());
        // prefix[j] = product of the weights of factors 0..j
        let mut prefix = vec![1.0; m + 1];
        for j in 0..m {
            prefix[j + 1] = prefix[j] * tables[j].1[0];
        }
        loop {
            f(&current, prefix[m])?;
            let mut j = m;
            loop {
                if j == 0 {
                    return Ok(());
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < tables[j].0.len() {
                    break;
                }
                idx[j] = 0;
            }
            let Node::Composite(parts) = &mut current else { unreachable!() };
            for k in j..m {
                parts[k] = tables[k].0[idx[k]].clone();
                prefix[k + 1] = prefix[k] * tables[k].1[idx[k]];
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.weight(i)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.len).map(|i| self.weight(i)).sum()
    }

    /// Keeps only the listed nodes (ascending order is preserved).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len) {
            return Err(Error::InvalidSubset(format!("node {bad} of {}", self.len)));
        }
        let nodes = indices.iter().map(|&i| self.node(i)).collect();
        let weights = indices.iter().map(|&i| self.weight(i)).collect();
        let mut r = Self::explicit(RuleKind::ExplicitList, nodes, weights, self.tail_bound)?;
        r.convention = self.convention;
        Ok(r)
    }

    fn with_convention(mut self, c: GaussianConvention) -> Self {
        self.convention = Some(c);
        self
    }
}

/// Gauss–Laguerre nodes and weights for `∫_0^∞ e^{-t} f(t) dt`.
///
/// Golub–Welsch eigenvalues polished by Newton steps on `L_n`; weights from
/// `t_i / ((n+1)² L_{n+1}(t_i)²)`, which keeps tiny tail weights accurate.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i + 1 == j || j + 1 == i {
            (i.max(j)) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let laguerre = |m: usize, x: f64| -> (f64, f64) {
        // returns (L_m(x), L_{m-1}(x))
        let (mut prev, mut cur) = (1.0, 1.0 - x);
        if m == 0 {
            return (1.0, 0.0);
        }
        for k in 1..m {
            let next = ((2 * k + 1) as f64 - x) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
            prev = cur;
            cur = next;
        }
        (cur, prev)
    };
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (ln, lm1) = laguerre(n, *x);
            let deriv = n as f64 * (ln - lm1) / *x;
            if deriv == 0.0 {
                break;
            }
            *x -= ln / deriv;
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (ln1, _) = laguerre(n + 1, x);
            x / (((n + 1) * (n + 1)) as f64 * ln1 * ln1)
        })
        .collect();
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let legendre = |x: f64| -> (f64, f64) {
        let (mut prev, mut cur) = (1.0, x);
        if n == 0 {
            return (1.0, 0.0);
        }
        for k in 1..n {
            let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
            prev = cur;
            cur = next;
        }
        // P_n and P_n'
        let deriv = n as f64 * (x * cur - prev) / (x * x - 1.0);
        (cur, deriv)
    };
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = legendre(*x);
            *x -= p / dp;
        }
        let (_, dp) = legendre(*x);
        weights.push(2.0 / ((1.0 - *x * *x) * dp * dp));
    }
    (nodes, weights)
}

/// Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

/// Polar product rule for the complex Gaussian probability measure.
///
/// Gauss–Laguerre in `t = |z|²` and an `angular_order`-point trapezoid in
/// `arg z`. Exact for `z^a z̄^b` whenever `|a - b| < angular_order` and
/// `min(a, b) ≤ 2·radial_order - 1`.
pub fn gaussian_c_rule(
    radial_order: usize,
    angular_order: usize,
    convention: GaussianConvention,
) -> Result<QuadratureRule> {
    if radial_order == 0 || angular_order == 0 {
        return Err(Error::InvalidParameter("quadrature orders must be at least 1".into()));
    }
    let (t, wt) = gauss_laguerre(radial_order);
    let mut nodes = Vec::with_capacity(radial_order * angular_order);
    let mut weights = Vec::with_capacity(radial_order * angular_order);
    for (ti, wi) in t.iter().zip(&wt) {
        let r = ti.sqrt();
        for m in 0..angular_order {
            let angle = 2.0 * PI * m as f64 / angular_order as f64;
            nodes.push(Node::Complex(C64::from_polar(r, angle)));
            weights.push(wi / angular_order as f64);
        }
    }
    Ok(QuadratureRule::explicit(RuleKind::GaussianComplex, nodes, weights, 0.0)?.with_convention(convention))
}

/// Product of `n²` complex Gaussian rules: the measure `e^{-Tr Z*Z} / π^{n²}`
/// on `M_n(C)`. Nodes are composites of the `n²` entries in row-major order.
pub fn matrix_gaussian_rule(n: usize, radial_order: usize, angular_order: usize) -> Result<QuadratureRule> {
    let one = gaussian_c_rule(radial_order, angular_order, GaussianConvention::Unit)?;
    QuadratureRule::product(vec![one; n * n])
}

/// I.i.d. complex Ginibre samples: entries standard complex Gaussian with
/// `E|z_ij|² = 1`, the same measure as [`matrix_gaussian_rule`].
pub fn ginibre_monte_carlo(n: usize, samples: usize, seed: u64) -> Result<QuadratureRule> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidParameter("need n ≥ 1 and at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes =
        (0..samples).map(|_| Node::Matrix(CStarMatrix::from_trusted(ginibre(&mut rng, n, 0.5f64.sqrt())))).collect();
    QuadratureRule::explicit(RuleKind::MonteCarlo, nodes, vec![1.0 / samples as f64; samples], 0.0)
}

fn ginibre(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(sigma * re, sigma * im)
    })
}

/// One Haar-distributed SU(n) element: Ginibre, QR with the phases of
/// `diag R` moved into `Q`, then the determinant phase divided out.
pub fn haar_sun_sample(rng: &mut ChaCha8Rng, n: usize) -> CStarMatrix {
    let g = ginibre(rng, n, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    let det = q.determinant();
    let correction = C64::from_polar(1.0, -det.arg() / n as f64);
    CStarMatrix::from_trusted(q.map(|x| x * correction))
}

/// Haar measure on SU(n), normalized to one.
///
/// `ExactSu2` (n = 2 only): with `u = [[a, -b̄], [b, ā]]`, `|b|² = s` is
/// uniform on `[0, 1]` and the phases of `a` and `b` are independent and
/// uniform. Gauss–Legendre in `s` and trapezoids in both phases make the rule
/// exact for every polynomial of degree ≤ `order` in the entries of `u` and of
/// degree ≤ `order` in their conjugates.
///
/// `MonteCarlo`: `order` i.i.d. samples from [`haar_sun_sample`] with weight `1/M`.
pub fn haar_sun_rule(n: usize, mode: HaarMode, order: usize, seed: u64) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("SU({n}) needs n ≥ 2")));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("Haar rule order must be at least 1".into()));
    }
    match mode {
        HaarMode::ExactSu2 => {
            if n != 2 {
                return Err(Error::UnsupportedExact(n));
            }
            let (s, ws) = gauss_legendre_interval(order.div_ceil(2).max(1), 0.0, 1.0);
            let phases = order + 1;
            let mut nodes = Vec::with_capacity(s.len() * phases * phases);
            let mut weights = Vec::with_capacity(nodes.capacity());
            for (si, wi) in s.iter().zip(&ws) {
                for p in 0..phases {
                    let alpha = 2.0 * PI * p as f64 / phases as f64;
                    for q in 0..phases {
                        let beta = 2.0 * PI * q as f64 / phases as f64;
                        let a = C64::from_polar((1.0 - si).sqrt(), alpha);
                        let b = C64::from_polar(si.sqrt(), beta);
                        let u = CMatrix::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()]);
                        nodes.push(Node::Matrix(CStarMatrix::from_trusted(u)));
                        weights.push(wi / (phases * phases) as f64);
                    }
                }
            }
            QuadratureRule::explicit(RuleKind::HaarSun, nodes, weights, 0.0)
        }
        HaarMode::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nodes = (0..order).map(|_| Node::Matrix(haar_sun_sample(&mut rng, n))).collect();
            QuadratureRule::explicit(RuleKind::MonteCarlo, nodes, vec![1.0 / order as f64; order], 0.0)
        }
    }
}

/// `Γ(n+1, x)/n! = e^{-x} Σ_{j≤n} x^j/j!`.
pub fn upper_gamma_regularized_int(n: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=n {
        term *= x / j as f64;
        sum += term;
    }
    (-x).exp() * sum
}

/// Orders of [`quaternion_rule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuaternionOrders {
    pub r: usize,
    pub xi: usize,
    pub theta: usize,
    pub phi: usize,
}

/// Product rule for `c · r dr dξ sinθ dθ dφ` on `[0, r_max] × [0,2π) × [0,π] × (0,2π]`.
///
/// `tail_bound = Σ_{n ≤ tail_cutoff} Γ(n+1, r_max²)/n!`, the Gaussian radial
/// mass beyond `r_max` summed over the first `tail_cutoff + 1` moments.
pub fn quaternion_rule(
    r_max: f64,
    orders: QuaternionOrders,
    density: QuaternionDensity,
    tail_cutoff: usize,
) -> Result<QuadratureRule> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
    }
    if orders.r == 0 || orders.xi == 0 || orders.theta == 0 || orders.phi == 0 {
        return Err(Error::InvalidParameter("quadrature orders must be at least 1".into()));
    }
    let (r, wr) = gauss_legendre_interval(orders.r, 0.0, r_max);
    let (th, wth) = gauss_legendre_interval(orders.theta, 0.0, PI);
    let c = density.prefactor();
    let dxi = 2.0 * PI / orders.xi as f64;
    let dphi = 2.0 * PI / orders.phi as f64;
    let mut nodes = Vec::with_capacity(orders.r * orders.xi * orders.theta * orders.phi);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (ri, wri) in r.iter().zip(&wr) {
        for x in 0..orders.xi {
            let xi = dxi * x as f64;
            for (ti, wti) in th.iter().zip(&wth) {
                for p in 0..orders.phi {
                    let phi = dphi * (p + 1) as f64;
                    nodes.push(Node::Quaternion(QuaternionParam { r: *ri, xi, theta: *ti, phi }));
                    weights.push(c * wri * ri * dxi * wti * ti.sin() * dphi);
                }
            }
        }
    }
    let tail: f64 = (0..=tail_cutoff).map(|n| upper_gamma_regularized_int(n, r_max * r_max)).sum();
    QuadratureRule::explicit(RuleKind::Quaternion, nodes, weights, tail)
}

/// Result of [`integrate_matrix_fn`].
#[derive(Debug, Clone)]
pub struct IntegrationReport {
    pub value: CStarMatrix,
    /// Frobenius-norm sample standard deviation over `√M` for Monte Carlo
    /// rules, zero otherwise.
    pub statistical_error: f64,
    pub nodes_used: usize,
}

/// `Σ_i w_i f(x_i)` in ascending node order.
pub fn integrate_matrix_fn<F>(rule: &QuadratureRule, f: F) -> Result<IntegrationReport>
where
    F: Fn(&Node) -> Result<CMatrix>,
{
    let mut acc: Option<CMatrix> = None;
    let mc = rule.is_monte_carlo();
    let mut samples: Vec<CMatrix> = Vec::new();
    for (node, w) in rule.iter() {
        let v = f(&node)?;
        if v.nrows() != v.ncols() {
            return Err(Error::InconsistentDimensions { expected: v.nrows(), found: v.ncols() });
        }
        match &mut acc {
            None => acc = Some(v.map(|x| x * w)),
            Some(a) => {
                if a.nrows() != v.nrows() {
                    return Err(Error::InconsistentDimensions { expected: a.nrows(), found: v.nrows() });
                }
                a.zip_apply(&v, |s, x| *s += x * w);
            }
        }
        if mc {
            samples.push(v);
        }
    }
    let value = acc.ok_or_else(|| Error::InvalidParameter("empty quadrature rule".into()))?;
    let statistical_error = if mc && samples.len() > 1 {
        let m = samples.len() as f64;
        let total: f64 = rule.weights().iter().sum();
        let mean = value.map(|x| x / total);
        let var = samples.iter().map(|s| (s - &mean).norm_squared()).sum::<f64>() / (m - 1.0);
        var.sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(IntegrationReport { value: CStarMatrix::new(value)?, statistical_error, nodes_used: rule.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_laguerre_moments() {
        let (t, w) = gauss_laguerre(10);
        for p in 0..20 {
            let q: f64 = t.iter().zip(&w).map(|(x, wi)| wi * x.powi(p as i32)).sum();
            assert!((q / factorial(p) - 1.0).abs() < 1e-12, "p={p}: {q}");
        }
    }

    #[test]
    fn gauss_legendre_moments() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(p)).sum();
            let exact = if p % 2 == 0 { 2.0 / (p + 1) as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn gaussian_rule_examples() {
        for conv in [GaussianConvention::Unit, GaussianConvention::Half] {
            let rule = gaussian_c_rule(8, 12, conv).unwrap();
            assert!((rule.total_mass() - 1.0).abs() < 1e-12);
            let m = |a: i32, b: i32| -> C64 {
                rule.iter()
                    .map(|(n, w)| {
                        let z = n.as_complex().unwrap();
                        z.powi(a) * z.conj().powi(b) * w
                    })
                    .sum()
            };
            assert!((m(1, 1) - 1.0).norm() < 1e-12);
            assert!(m(2, 0).norm() < 1e-14);
        }
    }

    #[test]
    fn gaussian_conventions_differ_only_in_coordinates() {
        let z = C64::new(0.3, -1.2);
        assert_eq!(GaussianConvention::Unit.cartesian(z), (0.3, -1.2));
        let (x, y) = GaussianConvention::Half.cartesian(z);
        assert!((C64::new(x, y) / 2f64.sqrt() - z).norm() < 1e-15);
    }

    #[test]
    fn gaussian_moment_table() {
        // polar moment oracle: ∫ z^a z̄^b dμ = a! δ_ab
        let rule = gaussian_c_rule(6, 12, GaussianConvention::Half).unwrap();
        for a in 0..=5usize {
            for b in 0..=5usize {
                let report = integrate_matrix_fn(&rule, |n| {
                    let z = n.as_complex()?;
                    Ok(CMatrix::from_element(1, 1, z.powi(a as i32) * z.conj().powi(b as i32)))
                })
                .unwrap();
                let expected = if a == b { factorial(a) } else { 0.0 };
                let got = report.value.matrix()[(0, 0)];
                assert!((got - expected).norm() < 1e-10 * expected.max(1.0), "a={a} b={b}: {got}");
                assert_eq!(report.statistical_error, 0.0);
            }
        }
    }

    #[test]
    fn integrate_trivial_integrands() {
        let rule = gaussian_c_rule(3, 4, GaussianConvention::Half).unwrap();
        let id = integrate_matrix_fn(&rule, |_| Ok(CMatrix::identity(3, 3))).unwrap();
        assert!(id.value.distance(&CStarMatrix::identity(3)) < 1e-14);
        let zero = integrate_matrix_fn(&rule, |_| Ok(CMatrix::zeros(2, 2))).unwrap();
        assert_eq!(zero.value, CStarMatrix::zeros(2));
        assert_eq!(zero.statistical_error, 0.0);
        assert_eq!(zero.nodes_used, 12);
    }

    #[test]
    fn integrate_rejects_varying_dimension() {
        let rule = gaussian_c_rule(2, 2, GaussianConvention::Half).unwrap();
        let err = integrate_matrix_fn(&rule, |n| {
            let d = if n.as_complex()?.arg() == 0.0 { 1 } else { 2 };
            Ok(CMatrix::identity(d, d))
        })
        .unwrap_err();
        assert!(matches!(err, Error::InconsistentDimensions { .. }));
    }

    #[test]
    fn integration_is_linear_and_reproducible() {
        let rule = gaussian_c_rule(5, 7, GaussianConvention::Half).unwrap();
        let f = |n: &Node| -> Result<CMatrix> {
            let z = n.as_complex()?;
            Ok(CMatrix::from_row_slice(2, 2, &[z, z * z, z.conj(), C64::new(1.0, 0.0)]))
        };
        let a = integrate_matrix_fn(&rule, f).unwrap();
        let b = integrate_matrix_fn(&rule, f).unwrap();
        assert_eq!(a.value, b.value);
        let two = integrate_matrix_fn(&rule, |n| Ok(f(n)? * C64::new(2.0, 0.0))).unwrap();
        assert!(two.value.distance(&a.value.scale(C64::new(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn haar_su2_exact_examples() {
        let rule = haar_sun_rule(2, HaarMode::ExactSu2, 4, 0).unwrap();
        assert!((rule.total_mass() - 1.0).abs() < 1e-14);
        let mean = integrate_matrix_fn(&rule, |n| Ok(n.as_matrix()?.matrix().clone())).unwrap();
        assert!(mean.value.op_norm() < 1e-8);
        let v = CMatrix::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let twirl = integrate_matrix_fn(&rule, |n| {
            let u = n.as_matrix()?.matrix();
            Ok(u * &v * v.adjoint() * u.adjoint())
        })
        .unwrap();
        assert!(twirl.value.distance(&CStarMatrix::identity(2).scale(C64::new(0.5, 0.0))) < 1e-12);
    }

    #[test]
    fn haar_samples_are_special_unitary() {
        let rule = haar_sun_rule(3, HaarMode::MonteCarlo, 50, 9).unwrap();
        for (n, _) in rule.iter() {
            let u = n.as_matrix().unwrap();
            assert!(u.coisometry_defect() < 1e-12);
            assert!((u.matrix().determinant() - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let again = haar_sun_rule(3, HaarMode::MonteCarlo, 50, 9).unwrap();
        assert_eq!(rule.node(17), again.node(17));
    }

    #[test]
    fn haar_exact_rejects_large_n() {
        assert!(matches!(haar_sun_rule(3, HaarMode::ExactSu2, 4, 0), Err(Error::UnsupportedExact(3))));
    }

    #[test]
    fn haar_monte_carlo_twirl_and_invariance() {
        let m = 20_000;
        let rule = haar_sun_rule(3, HaarMode::MonteCarlo, m, 1234).unwrap();
        let mut v = CMatrix::zeros(3, 1);
        v[(0, 0)] = C64::new(1.0, 0.0);
        let fixed = haar_sun_sample(&mut ChaCha8Rng::seed_from_u64(77), 3);
        let target = CStarMatrix::identity(3).scale(C64::new(1.0 / 3.0, 0.0));
        for left in [CStarMatrix::identity(3), fixed] {
            let r = integrate_matrix_fn(&rule, |n| {
                let u = left.matrix() * n.as_matrix()?.matrix();
                Ok(&u * &v * v.adjoint() * u.adjoint())
            })
            .unwrap();
            assert!(r.value.distance(&target) <= 5.0 / (m as f64).sqrt());
            assert!(r.statistical_error > 0.0);
        }
    }

    #[test]
    fn quaternion_rule_examples() {
        let orders = QuaternionOrders { r: 40, xi: 2, theta: 8, phi: 2 };
        let rule = quaternion_rule(1.0, orders, QuaternionDensity::FourPiSquared, 0).unwrap();
        assert!((rule.total_mass() - 1.0).abs() < 1e-12);

        let rule = quaternion_rule(9.0, orders, QuaternionDensity::FourPiSquared, 0).unwrap();
        let gauss: f64 = rule.iter().map(|(n, w)| w * (-n.as_quaternion().unwrap().r.powi(2)).exp()).sum();
        assert!((gauss - 1.0).abs() < 1e-10);
        assert!(rule.tail_bound() < 1e-30);

        let (th, w) = gauss_legendre_interval(8, 0.0, PI);
        let s: f64 = th.iter().zip(&w).map(|(t, wi)| wi * t.sin()).sum();
        assert!((s - 2.0).abs() < 1e-10);

        let half = quaternion_rule(1.0, orders, QuaternionDensity::EightPiSquared, 0).unwrap();
        assert!((half.total_mass() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_rule_indexing() {
        let a = QuadratureRule::counting(3);
        let b = QuadratureRule::explicit(
            RuleKind::ExplicitList,
            vec![Node::Index(10), Node::Index(20)],
            vec![0.25, 0.75],
            0.0,
        )
        .unwrap();
        let p = QuadratureRule::product(vec![a, b]).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.node(3), Node::Composite(vec![Node::Index(1), Node::Index(20)]));
        assert_eq!(p.weight(3), 0.75);
        assert!((p.total_mass() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn odometer_walk_matches_indexing() {
        let a = gaussian_c_rule(2, 3, GaussianConvention::Unit).unwrap();
        let b = QuadratureRule::explicit(
            RuleKind::ExplicitList,
            vec![Node::Index(10), Node::Index(20)],
            vec![0.25, 0.75],
            0.0,
        )
        .unwrap();
        let inner = QuadratureRule::product(vec![b.clone(), QuadratureRule::counting(2)]).unwrap();
        let p = QuadratureRule::product(vec![a, inner, b]).unwrap();
        let mut seen = Vec::new();
        p.for_each(|x, w| {
            seen.push((x.clone(), w));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, p.iter().collect::<Vec<_>>());
    }

    #[test]
    fn explicit_rule_validation() {
        assert!(QuadratureRule::explicit(RuleKind::ExplicitList, vec![Node::Index(0)], vec![-1.0], 0.0).is_err());
        assert!(QuadratureRule::explicit(RuleKind::ExplicitList, vec![Node::Index(0)], vec![], 0.0).is_err());
    }

    #[test]
    fn upper_gamma_small_cases() {
        assert!((upper_gamma_regularized_int(0, 2.0) - (-2f64).exp()).abs() < 1e-16);
        assert!((upper_gamma_regularized_int(1, 2.0) - 3.0 * (-2f64).exp()).abs() < 1e-16);
    }
}
