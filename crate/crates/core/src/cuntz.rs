//! Truncated Cuntz isometries built from a pairing bijection `N → N × N`, and
//! the coherent states `|z> = Σ_k z^{k-1}/√(k-1)! S_k`.
//!
//! Indices start at 1 in this module. The isometries are stored as index
//! maps; dense matrices are only materialized on request.

use std::sync::Arc;

use crate::cstar::{CMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::{Error, Result};
use crate::families::monomials_over_sqrt_factorial;
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{gaussian_c_rule, GaussianConvention, Node};

/// `n_k`: the unique `n` with `n(n+1)/2 < k ≤ (n+1)(n+2)/2`.
pub fn diagonal_index(k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::OutOfDomain(0));
    }
    let mut n = ((8 * k as u128 - 7).isqrt() as u64 - 1) / 2;
    // guard the integer square root at the bracket ends
    while n * (n + 1) / 2 >= k {
        n -= 1;
    }
    while (n + 1) * (n + 2) / 2 < k {
        n += 1;
    }
    Ok(n)
}

/// `t(k) = (n(n+3)/2 + 2 - k, k - n(n+1)/2)` with `n = n_k`.
pub fn pairing(k: u64) -> Result<(u64, u64)> {
    let n = diagonal_index(k)?;
    Ok((n * (n + 3) / 2 + 2 - k, k - n * (n + 1) / 2))
}

/// `t^{-1}(p, q) = n(n+1)/2 + q` with `n = p + q - 2`.
pub fn unpairing(p: u64, q: u64) -> Result<u64> {
    if p == 0 || q == 0 {
        return Err(Error::OutOfDomain(0));
    }
    let n = p + q - 2;
    Ok(n * (n + 1) / 2 + q)
}

/// Outcome of [`bijection_roundtrip`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BijectionReport {
    pub checked: u64,
    /// `k` with `t^{-1}(t(k)) ≠ k`, or whose image disagrees with the
    /// diagonal-by-diagonal enumeration, or whose `n_k` leaves its bracket.
    pub failures: u64,
    /// Steps where `n_k` decreases or jumps by more than one.
    pub monotonicity_failures: u64,
}

/// Round trip on `{1, …, limit}`, compared against an enumeration that walks
/// the anti-diagonals `p + q = n + 2` from `(n+1, 1)` up to `(1, n+1)`.
pub fn bijection_roundtrip(limit: u64) -> BijectionReport {
    let mut failures = 0;
    let mut monotonicity_failures = 0;
    let (mut diag, mut q) = (0u64, 1u64);
    let mut prev_n = 0u64;
    for k in 1..=limit {
        let expected = (diag + 2 - q, q);
        let ok = match (pairing(k), diagonal_index(k)) {
            (Ok((p, qq)), Ok(n)) => {
                if n < prev_n || n > prev_n + 1 {
                    monotonicity_failures += 1;
                }
                prev_n = n;
                (p, qq) == expected && unpairing(p, qq) == Ok(k) && n * (n + 1) / 2 < k && k <= (n + 1) * (n + 2) / 2
            }
            _ => false,
        };
        if !ok {
            failures += 1;
        }
        q += 1;
        if q > diag + 1 {
            diag += 1;
            q = 1;
        }
    }
    BijectionReport { checked: limit, failures, monotonicity_failures }
}

/// `S_1, …, S_{K_active}` on `C^D` with `S_k φ_n = φ_{t^{-1}(k, n)}`; a column
/// whose image lies beyond `D` is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuntzRep {
    dim: usize,
    // images[k-1][n-1] = t^{-1}(k, n) for the columns that land inside D;
    // the list is increasing, so the domain of S_k is {1, …, images[k-1].len()}
    images: Vec<Vec<usize>>,
}

/// Outcome of [`verify_cuntz`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuntzReport {
    /// `max_k ||S_k* S_k - P_k^dom||`.
    pub isometry_defect: f64,
    /// `max_{k≠l} ||S_k* S_l||`.
    pub range_overlap_defect: f64,
    /// `tr(Σ_k S_k S_k*) / D`.
    pub completeness_trace_fraction: f64,
}

/// Materializes `S_1, …, S_{K_active}` on `C^D`.
pub fn build_cuntz(dim: usize, k_active: usize) -> Result<CuntzRep> {
    if k_active == 0 || dim < k_active {
        return Err(Error::InvalidParameter(format!("need D ≥ K_active ≥ 1, got D = {dim}, K_active = {k_active}")));
    }
    let images = (1..=k_active as u64)
        .map(|k| {
            (1..).map(|n| unpairing(k, n).expect("indices start at 1") as usize).take_while(|&m| m <= dim).collect()
        })
        .collect();
    Ok(CuntzRep { dim, images })
}

impl CuntzRep {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_active(&self) -> usize {
        self.images.len()
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::OutOfDomain(0));
        }
        if k > self.k_active() {
            return Err(Error::TruncationExceeded { requested: k, available: self.k_active() });
        }
        Ok(())
    }

    /// `S_k φ_n` as a basis index, or `None` when it leaves `C^D`.
    pub fn image(&self, k: usize, n: usize) -> Result<Option<usize>> {
        self.check_k(k)?;
        if n == 0 || n > self.dim {
            return Err(Error::OutOfDomain(n as u64));
        }
        Ok(self.images[k - 1].get(n - 1).copied())
    }

    /// Number of columns of `S_k` that stay inside `C^D`.
    pub fn domain_len(&self, k: usize) -> Result<usize> {
        self.check_k(k)?;
        Ok(self.images[k - 1].len())
    }

    /// `S_k` as a dense 0/1 matrix.
    pub fn matrix(&self, k: usize) -> Result<CMatrix> {
        self.check_k(k)?;
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for (col, &row) in self.images[k - 1].iter().enumerate() {
            s[(row - 1, col)] = C64::new(1.0, 0.0);
        }
        Ok(s)
    }

    /// `S_k v`.
    pub fn apply(&self, k: usize, v: &[C64]) -> Result<Vec<C64>> {
        self.check_k(k)?;
        self.check_len(v)?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (col, &row) in self.images[k - 1].iter().enumerate() {
            out[row - 1] = v[col];
        }
        Ok(out)
    }

    /// `S_k* v`.
    pub fn apply_adjoint(&self, k: usize, v: &[C64]) -> Result<Vec<C64>> {
        self.check_k(k)?;
        self.check_len(v)?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (col, &row) in self.images[k - 1].iter().enumerate() {
            out[col] = v[row - 1];
        }
        Ok(out)
    }

    fn check_len(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("vector of length {} on C^{}", v.len(), self.dim)));
        }
        Ok(())
    }
}

/// Defects of the Cuntz relations, computed from the index maps.
///
/// Columns of one `S_k` that share an image form an all-ones Gram block, so
/// the isometry defect is the largest such group size minus one. Columns of
/// `S_k` and `S_l` meeting in one row contribute an all-ones `a x b` block of
/// norm `√(ab)`. Both are exact.
pub fn verify_cuntz(rep: &CuntzRep) -> CuntzReport {
    let d = rep.dim;
    // hits[row] = (k, multiplicity) for each isometry reaching that row
    let mut hits: Vec<Vec<(usize, usize)>> = vec![Vec::new(); d];
    let mut trace = 0usize;
    for (k, imgs) in rep.images.iter().enumerate() {
        for &row in imgs {
            trace += 1;
            let h = &mut hits[row - 1];
            match h.iter_mut().find(|(kk, _)| *kk == k) {
                Some((_, m)) => *m += 1,
                None => h.push((k, 1)),
            }
        }
    }
    let mut isometry: usize = 0;
    let mut overlap: f64 = 0.0;
    for h in &hits {
        for (i, &(_, a)) in h.iter().enumerate() {
            isometry = isometry.max(a - 1);
            for &(_, b) in &h[i + 1..] {
                overlap = overlap.max(((a * b) as f64).sqrt());
            }
        }
    }
    CuntzReport {
        isometry_defect: isometry as f64,
        range_overlap_defect: overlap,
        completeness_trace_fraction: trace as f64 / d as f64,
    }
}

/// `F_k(z) = z^{k-1}/√(k-1)!` for `k = 1..=k_max`.
fn landau_weights(z: C64, k_max: usize) -> Vec<C64> {
    monomials_over_sqrt_factorial(z, k_max.saturating_sub(1))
}

/// `|z> = Σ_{k ≤ K_max} z^{k-1}/√(k-1)! S_k` as a dense `D x D` matrix.
pub fn cuntz_coherent_state(rep: &CuntzRep, z: C64, k_max: usize) -> Result<CMatrix> {
    if k_max > rep.k_active() {
        return Err(Error::TruncationExceeded { requested: k_max, available: rep.k_active() });
    }
    let mut op = CMatrix::zeros(rep.dim, rep.dim);
    for (k, f) in landau_weights(z, k_max).into_iter().enumerate().take(k_max) {
        for (col, &row) in rep.images[k].iter().enumerate() {
            op[(row - 1, col)] += f;
        }
    }
    Ok(op)
}

/// `|z> ξ` with `ξ = z̄'^{n-1}/√(n-1)! φ_n`, summed over all materialized
/// isometries. The coefficient on `ψ_{kn} = φ_{t^{-1}(k,n)}` is
/// `z̄'^{n-1} z^{k-1} / √((k-1)!(n-1)!)`.
pub fn landau_recovery(rep: &CuntzRep, z: C64, z_prime: C64, n: usize) -> Result<Vec<C64>> {
    if n == 0 || n > rep.dim {
        return Err(Error::TruncationExceeded { requested: n, available: rep.dim });
    }
    let xi = monomials_over_sqrt_factorial(z_prime.conj(), n - 1)[n - 1];
    let mut out = vec![C64::new(0.0, 0.0); rep.dim];
    for (f, imgs) in landau_weights(z, rep.k_active()).into_iter().zip(&rep.images) {
        if let Some(&row) = imgs.get(n - 1) {
            out[row - 1] = f * xi;
        }
    }
    Ok(out)
}

/// The Cuntz coherent states as a module family: `E = C`, `G = M_D` over
/// itself with frame `φ_k = S_{k+1}` and `F_k(z) = z^k/√k!` under
/// `e^{-|z|²} dx dy/2π`, `z = (x + iy)/√2`.
///
/// `G` has dimension `D²`, so the dimension cap limits `D` here; the
/// relations themselves are checked on index maps at any `D`.
pub fn cuntz_family(rep: &CuntzRep, k_max: usize, radial_order: usize) -> Result<CSFamily> {
    if k_max + 1 > rep.k_active() {
        return Err(Error::TruncationExceeded { requested: k_max + 1, available: rep.k_active() });
    }
    let g = ModuleSpace::algebra_over_itself(rep.dim)?;
    crate::cstar::check_dim(g.vector_dim())?;
    let elements = (1..=k_max + 1).map(|k| g.element(rep.matrix(k)?)).collect::<Result<Vec<_>>>()?;
    let frame = Frame::new(g, elements)?;
    let rule = gaussian_c_rule(radial_order, 2 * k_max + 1, GaussianConvention::Half)?;
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        for (o, m) in out.iter_mut().zip(monomials_over_sqrt_factorial(x.as_complex()?, k_max)) {
            *o = m;
        }
        Ok(())
    });
    CSFamily::new("cuntz", ModuleSpace::hilbert_space(1)?, frame, rule, k_max, 0.0, eval)
}
