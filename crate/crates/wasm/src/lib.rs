//! Browser bindings for the demo page in `www/`.

use mvcs_core::cuntz::{pairing, unpairing};
use mvcs_core::families::{landau_family, CanonicalFamily};
use mvcs_core::{Node, C64};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `|<z0|z>|² / (<z0|z0><z|z>)` for the truncated Bargmann states on an
/// `n × n` grid over `[-extent, extent]²`, row-major with `Im z` decreasing
/// down the rows.
#[wasm_bindgen]
pub fn bargmann_overlap_grid(k_max: usize, z0_re: f64, z0_im: f64, extent: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if !(2..=400).contains(&n) || !extent.is_finite() || extent <= 0.0 || k_max > 170 {
        return Err(JsError::new("need 2 ≤ n ≤ 400, extent > 0, K_max ≤ 170"));
    }
    let fam = CanonicalFamily::bargmann(k_max, k_max / 2 + 2, 1.0).map_err(js_err)?;
    let x0 = Node::Complex(C64::new(z0_re, z0_im));
    let k00 = fam.kernel(&x0, &x0).map_err(js_err)?.re;
    let step = 2.0 * extent / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = Node::Complex(C64::new(-extent + j as f64 * step, extent - i as f64 * step));
            let k = fam.kernel(&x0, &x).map_err(js_err)?;
            let kk = fam.kernel(&x, &x).map_err(js_err)?.re;
            out.push(k.norm_sqr() / (k00 * kk));
        }
    }
    Ok(out)
}

/// `t^{-1}(p, q)` for `1 ≤ p, q ≤ m`, row `p - 1`, column `q - 1`.
#[wasm_bindgen]
pub fn pairing_grid(m: u32) -> Result<Vec<f64>, JsError> {
    if m == 0 || m > 64 {
        return Err(JsError::new("need 1 ≤ m ≤ 64"));
    }
    let mut out = Vec::with_capacity((m * m) as usize);
    for p in 1..=m as u64 {
        for q in 1..=m as u64 {
            out.push(unpairing(p, q).map_err(js_err)? as f64);
        }
    }
    Ok(out)
}

/// `[p, q] = t(k)`.
#[wasm_bindgen]
pub fn pair_of(k: f64) -> Result<Vec<f64>, JsError> {
    if !(1.0..=9.0e15).contains(&k) || k.fract() != 0.0 {
        return Err(JsError::new("k must be a positive integer below 9e15"));
    }
    let (p, q) = pairing(k as u64).map_err(js_err)?;
    Ok(vec![p as f64, q as f64])
}

/// Along `z = r` for `n` radii in `[0, r_max]`: interleaved
/// `[r, Σ_ℓ norms, 1 - tail bound]` triples.
#[wasm_bindgen]
pub fn landau_norm_curve(
    k_max: usize,
    l_max: usize,
    zp_re: f64,
    zp_im: f64,
    r_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    if !(2..=2000).contains(&n) || !r_max.is_finite() || r_max <= 0.0 || k_max > 170 || l_max > 170 {
        return Err(JsError::new("need 2 ≤ n ≤ 2000, r_max > 0, K_max, L_max ≤ 170"));
    }
    let fam = landau_family(k_max, l_max, C64::new(zp_re, zp_im), 2).map_err(js_err)?;
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let r = r_max * i as f64 / (n - 1) as f64;
        let z = C64::new(r, 0.0);
        out.extend([r, fam.norm_sum(z), 1.0 - fam.norm_tail(z)]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_peaks_at_the_reference_point() {
        let g = bargmann_overlap_grid(30, 0.0, 0.0, 1.0, 3).unwrap();
        assert!((g[4] - 1.0).abs() < 1e-12);
        // |<0|z>|² = e^{-|z|²} for the untruncated states
        assert!((g[5] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn grid_inverts_pairing() {
        let g = pairing_grid(5).unwrap();
        for p in 1..=5u64 {
            for q in 1..=5u64 {
                let k = g[((p - 1) * 5 + q - 1) as usize];
                assert_eq!(pair_of(k).unwrap(), vec![p as f64, q as f64]);
            }
        }
    }

    #[test]
    fn norm_curve_stays_within_its_tail() {
        let c = landau_norm_curve(20, 20, 0.5, 0.0, 3.0, 7).unwrap();
        for t in c.chunks(3) {
            assert!(t[1] <= 1.0 + 1e-12 && t[1] >= t[2] - 1e-12, "{t:?}");
        }
    }
}
