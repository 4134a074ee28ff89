use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::cstar::{CMatrix, C64};
use crate::engine::{CSFamily, Evaluator};
use crate::error::{Error, Result};
use crate::module::{Frame, ModuleSpace};
use crate::quadrature::{Node, QuadratureRule};

/// `c_k = [Π_{j=1}^{k+1}(N+j) - Π_{j=1}^{k+1}(N-j)] / ((k+1)(k+2))`, exactly.
pub fn analytic_ck(n: u32, k: u32) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let n = BigInt::from(n);
    let mut plus = BigInt::from(1);
    let mut minus = BigInt::from(1);
    for j in 1..=k + 1 {
        plus *= &n + BigInt::from(j);
        minus *= &n - BigInt::from(j);
    }
    let denom = BigInt::from(k + 1) * BigInt::from(k + 2);
    Ok(BigRational::new(plus - minus, denom))
}

/// `c_k` rounded to `f64`.
pub fn analytic_ck_f64(n: u32, k: u32) -> Result<f64> {
    analytic_ck(n, k)?.to_f64().ok_or_else(|| Error::InvalidParameter(format!("c_{k} for N = {n} does not fit in f64")))
}

/// The matrix `Z` of a node: either a matrix node or a composite of its
/// `n²` entries in row-major order.
pub fn ginibre_entries(x: &Node, n: usize) -> Result<CMatrix> {
    match x {
        Node::Matrix(m) if m.dim() == n => Ok(m.matrix().clone()),
        Node::Composite(parts) if parts.len() == n * n => {
            let mut z = CMatrix::zeros(n, n);
            for (idx, p) in parts.iter().enumerate() {
                z[(idx / n, idx % n)] = p.as_complex()?;
            }
            Ok(z)
        }
        other => Err(Error::InvalidNode(format!("expected an {n}x{n} matrix point, got {other:?}"))),
    }
}

/// `Σ_{k > K} ρ^{2k} / c_k`: bound on the discarded `Σ ||F_k(Z)||²` for `||Z|| ≤ ρ`.
pub fn analytic_tail(n: u32, k_max: u32, rho: f64) -> Result<f64> {
    let mut sum = 0.0;
    for k in k_max + 1..k_max + 200 {
        let term = rho.powi(2 * k as i32) / analytic_ck_f64(n, k)?;
        sum += term;
        if term < 1e-18 * sum.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(sum)
}

/// `F_k(Z) = Z^k / √c_k` on `M_N(C)`, with `E = M_N` over itself.
///
/// The measure is that of `rule`; it should be the Gaussian
/// `e^{-Tr Z*Z}/π^{N²}` (standard complex entries, `E|z_ij|² = 1`).
pub fn analytic_family(n: usize, k_max: usize, rule: QuadratureRule) -> Result<CSFamily> {
    let scale: Vec<f64> =
        (0..=k_max).map(|k| analytic_ck_f64(n as u32, k as u32).map(|c| 1.0 / c.sqrt())).collect::<Result<_>>()?;
    let eval: Evaluator = Arc::new(move |x: &Node, out: &mut CMatrix| {
        let z = ginibre_entries(x, n)?;
        for i in 0..n {
            out[(i, i)] = C64::new(scale[0], 0.0);
        }
        // block k = block (k-1) · Z · s_k/s_{k-1}
        for k in 1..=k_max {
            let ratio = scale[k] / scale[k - 1];
            for i in 0..n {
                for j in 0..n {
                    let mut t = C64::new(0.0, 0.0);
                    for m in 0..n {
                        t += out[((k - 1) * n + i, m)] * z[(m, j)];
                    }
                    out[(k * n + i, j)] = t * ratio;
                }
            }
        }
        Ok(())
    });
    let tail = analytic_tail(n as u32, k_max as u32, 1.0)?;
    CSFamily::new(
        "analytic",
        ModuleSpace::algebra_over_itself(n)?,
        Frame::standard_basis(k_max + 1, k_max + 1)?,
        rule,
        k_max,
        tail,
        eval,
    )
}
