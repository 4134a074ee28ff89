use crate::cstar::{spectral_norm, CMatrix, C64};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// `ψ_{k+1, l+1}(z̄, z)` for `0 ≤ k ≤ k_max`, `0 ≤ l ≤ l_max`, as a table
/// indexed `[(k, l)]`.
///
/// Built by the ladder recurrence
/// `ψ_{p+1,q} = (z̄ ψ_{p,q} - √q ψ_{p,q-1}) / √(p+1)` from
/// `ψ_{0,q} = z^q/√q!` (indices shifted to start at zero), which avoids the
/// cancellation of the derivative formula.
pub fn complex_hermite_table(k_max: usize, l_max: usize, z: C64) -> CMatrix {
    let mut t = CMatrix::zeros(k_max + 1, l_max + 1);
    let mut mono = C64::new(1.0, 0.0);
    for q in 0..=l_max {
        if q > 0 {
            mono = mono * z / (q as f64).sqrt();
        }
        t[(0, q)] = mono;
    }
    let zb = z.conj();
    for p in 0..k_max {
        let s = 1.0 / ((p + 1) as f64).sqrt();
        for q in 0..=l_max {
            let lower = if q > 0 { t[(p, q - 1)] * (q as f64).sqrt() } else { C64::new(0.0, 0.0) };
            t[(p + 1, q)] = (zb * t[(p, q)] - lower) * s;
        }
    }
    t
}

/// The complex Hermite polynomial
/// `ψ_{kl}(z̄, z) = (-1)^{k+l-2} / √((l-1)!(k-1)!) · e^{|z|²} ∂_z̄^{l-1} ∂_z^{k-1} e^{-|z|²}`
/// for `k, l ≥ 1`; `ψ_{21} = z̄`, `ψ_{12} = z`.
pub fn complex_hermite(k: usize, l: usize, z: C64) -> Result<C64> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter(format!("complex Hermite indices start at 1, got ({k}, {l})")));
    }
    Ok(complex_hermite_table(k - 1, l - 1, z)[(k - 1, l - 1)])
}

/// `||Gram - I||` for `ψ_{kl}`, `1 ≤ k, l ≤ max_index`, under `rule`, which
/// should carry `e^{-|z|²}` in the half convention.
pub fn hermite_gram_defect(max_index: usize, rule: &QuadratureRule) -> Result<f64> {
    if max_index == 0 {
        return Err(Error::InvalidParameter("need at least one index".into()));
    }
    let m = max_index;
    let d = m * m;
    let mut gram = CMatrix::zeros(d, d);
    rule.for_each(|x, w| {
        let t = complex_hermite_table(m - 1, m - 1, x.as_complex()?);
        let v = CMatrix::from_iterator(d, 1, t.transpose().iter().copied());
        gram.gerc(C64::new(w, 0.0), &v.column(0), &v.column(0), C64::new(1.0, 0.0));
        Ok(())
    })?;
    Ok(spectral_norm(&(gram - CMatrix::identity(d, d))))
}
