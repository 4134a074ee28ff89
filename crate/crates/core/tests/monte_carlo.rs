use mvcs_core::engine::{second_moment_error, verify_orthogonality};
use mvcs_core::families::analytic_family;
use mvcs_core::quadrature::ginibre_monte_carlo;

// N = 2, k, l ≤ 4 on a million Ginibre samples. The standard error of the
// k = l = 4 block is of order 1e-2 here, so the defect is held to five
// standard errors rather than to an absolute 1e-5.
#[test]
fn matrix_orthogonality_on_a_million_samples() {
    let fam = analytic_family(2, 4, ginibre_monte_carlo(2, 1_000_000, 7).unwrap()).unwrap();
    let err = second_moment_error(&fam).unwrap().unwrap();
    let rep = verify_orthogonality(&fam, 0.0).unwrap();
    println!("defect {:.3e}, standard error {err:.3e}", rep.max_defect);
    assert!(rep.max_defect <= 5.0 * err);
    assert!(err > 1e-5, "an absolute 1e-5 would be within reach: {err:.3e}");
}
