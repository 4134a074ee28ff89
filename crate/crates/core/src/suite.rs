//! Batch verification: a JSON config names a family, its parameters and a
//! list of checks; [`run_suite`] runs them and [`emit_report`] writes the
//! result as JSON or CSV.
//!
//! Every check yields one record with `pass ⇔ defect ≤ bound`. Monte Carlo
//! rules widen the bound by five standard errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::cstar::{CMatrix, CStarMatrix, SpectralTolerance, C64};
use crate::cuntz::{
    bijection_roundtrip, build_cuntz, cuntz_family, landau_recovery, unpairing, verify_cuntz, CuntzRep,
};
use crate::dilation::{
    additivity_defect, build_dilation, cp_kernel, cp_positivity_test, dilation_check, kernel_reproduce_check,
    minimality_check, DilationScene,
};
use crate::engine::{
    coherent_state, normalization, normalize, second_moment_error, verify_orthogonality, verify_resolution, CSFamily,
};
use crate::error::Error;
use crate::families::{
    analytic_family, complex_hermite, hermite_gram_defect, landau_family, poisson_tail, quaternion_family,
    sun_relation_defect, vcs_matrix_family, CanonicalFamily, LandauFamily, QuaternionFamily, VcsMatrixFamily,
    VectorBasis,
};
use crate::module::Frame;
use crate::quadrature::{
    gaussian_c_rule, ginibre_monte_carlo, haar_sun_rule, haar_sun_sample, matrix_gaussian_rule, quaternion_rule,
    GaussianConvention, HaarMode, Node, QuaternionDensity, QuaternionOrders, QuaternionParam,
};

/// Family keys with a one-line description.
pub const FAMILIES: &[(&str, &str)] = &[
    ("canonical", "Bargmann states z^k/√k! on C under the complex Gaussian measure"),
    ("vcs_matrix", "matrix-valued states on C × SU(N) from the Gaussian-Fourier vector basis"),
    ("analytic", "F_k(Z) = Z^k/√c_k on M_N(C) under the Ginibre measure"),
    ("quaternion", "quaternionic states in the 2x2 complex representation"),
    ("landau", "Landau-level vector states at a fixed z', truncated in n and ℓ"),
    ("cuntz", "states built from the Cuntz isometries S_k on C^D"),
];

/// Check keys with a one-line description.
pub const CHECKS: &[(&str, &str)] = &[
    ("orthogonality", "||∫ F_k F_l* dμ - δ_kl I|| over all k, l"),
    ("resolution", "||∫ |x,a><x,a| dμ - I|| for a = id and a random unitary"),
    ("normalization", "<x,a|x,a> invertible, normalized states have unit norm, family norm identities"),
    ("frame", "completeness and orthonormality of the frame φ_k"),
    ("cp_positivity", "block Gram and quadratic form of the kernel are PSD on random configurations"),
    ("reproduce", "K(x,z) = ∫ K(x,y) K(y,z) dμ(y) for b = id and a random unitary"),
    ("dilation", "ν(Δ) = P_K P̃(Δ) P_K on random node subsets, P̃ projective, ν additive"),
    ("minimality", "the dilated vectors span the carrier"),
    ("cuntz", "Cuntz relations, trace fraction and Landau-level coefficients"),
    ("bijection", "exhaustive round trip of the diagonal pairing"),
    ("hermite_gram", "Gram matrix and spot values of the complex Hermite polynomials"),
    ("sun_reln", "∫ u v v† u* dΩ(u) = I/N over SU(N)"),
];

/// Errors of [`parse_config`], [`run_suite`] and [`emit_report`].
#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SuiteError {
    /// 2 for configuration problems (including dimension limits), 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SuiteError::Config(_) => 2,
            SuiteError::Core(
                Error::DimensionLimit { .. }
                | Error::InvalidParameter(_)
                | Error::TruncationExceeded { .. }
                | Error::UnsupportedExact(_),
            ) => 2,
            _ => 3,
        }
    }
}

type SResult<T> = std::result::Result<T, SuiteError>;

#[derive(Debug, Clone, PartialEq)]
enum FamilySpec {
    Canonical {
        k_max: usize,
        radial_order: usize,
        reference_radius: f64,
    },
    VcsMatrix {
        n: usize,
        k_max: usize,
        radial_order: usize,
        haar: HaarMode,
        haar_order: usize,
        sun_samples: usize,
        sun_vectors: usize,
    },
    Analytic {
        n: usize,
        k_max: usize,
        monte_carlo: bool,
        radial_order: usize,
        angular_order: usize,
        samples: usize,
    },
    Quaternion {
        k_max: usize,
        r_max: f64,
        orders: QuaternionOrders,
    },
    Landau {
        k_max: usize,
        l_max: usize,
        z_prime: C64,
        radial_order: usize,
    },
    Cuntz {
        d: usize,
        k_active: usize,
        k_max: usize,
        radial_order: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CheckParams {
    cp_configs: usize,
    cp_points: usize,
    naimark_subsets: usize,
    dilation_max_carrier: usize,
    sample_points: usize,
    bijection_limit: u64,
    hermite_max_index: usize,
    hermite_radial_order: usize,
}

/// A validated suite configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    family: String,
    spec: FamilySpec,
    params: CheckParams,
    checks: Vec<String>,
    tolerance: f64,
    seed: u64,
    output_path: Option<String>,
    // every family parameter after defaults, for the report
    resolved: Map<String, Value>,
}

impl SuiteConfig {
    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn checks(&self) -> &[String] {
        &self.checks
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn output_path(&self) -> Option<&str> {
        self.output_path.as_deref()
    }

    fn echo(&self) -> Value {
        let mut m = Map::new();
        m.insert("family".into(), Value::from(self.family.clone()));
        m.insert("family_params".into(), Value::Object(self.resolved.clone()));
        m.insert("checks".into(), Value::from(self.checks.clone()));
        m.insert("tolerance".into(), Value::from(self.tolerance));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("output_path".into(), self.output_path.clone().map_or(Value::Null, Value::from));
        Value::Object(m)
    }
}

const TOP_KEYS: &[&str] = &["family", "family_params", "checks", "tolerance", "seed", "output_path"];

// " (line L, column C)" for the first occurrence of `"key"` in the source.
fn locate(text: &str, key: &str) -> String {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(pos) => {
            let before = &text[..pos];
            let line = before.matches('\n').count() + 1;
            let col = pos - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!(" (line {line}, column {col})")
        }
        None => String::new(),
    }
}

struct Params<'t> {
    text: &'t str,
    map: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Params<'_> {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> SuiteError {
        SuiteError::Config(format!("family_params.{key}{}: {msg}", locate(self.text, key)))
    }

    fn int(&mut self, key: &str, default: u64, min: u64, max: u64) -> SResult<u64> {
        let v = match self.map.remove(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) => n,
                None => return Err(self.err(key, format!("expected a nonnegative integer, got {v}"))),
            },
        };
        if v < min || v > max {
            return Err(self.err(key, format!("{v} is outside [{min}, {max}]")));
        }
        self.resolved.insert(key.into(), Value::from(v));
        Ok(v)
    }

    fn size(&mut self, key: &str, default: usize, min: usize, max: usize) -> SResult<usize> {
        Ok(self.int(key, default as u64, min as u64, max as u64)? as usize)
    }

    fn positive(&mut self, key: &str, default: f64) -> SResult<f64> {
        let v = match self.map.remove(key) {
            None => default,
            Some(v) => v.as_f64().ok_or_else(|| self.err(key, format!("expected a number, got {v}")))?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.err(key, format!("expected a positive finite number, got {v}")));
        }
        self.resolved.insert(key.into(), Value::from(v));
        Ok(v)
    }

    // a number or a [re, im] pair
    fn complex(&mut self, key: &str, default: C64) -> SResult<C64> {
        let z = match self.map.remove(key) {
            None => default,
            Some(Value::Number(n)) => C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0),
            Some(Value::Array(a)) if a.len() == 2 && a.iter().all(Value::is_number) => {
                C64::new(a[0].as_f64().unwrap_or(f64::NAN), a[1].as_f64().unwrap_or(f64::NAN))
            }
            Some(v) => return Err(self.err(key, format!("expected a number or [re, im], got {v}"))),
        };
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(self.err(key, "must be finite"));
        }
        self.resolved.insert(key.into(), Value::from(vec![z.re, z.im]));
        Ok(z)
    }

    fn choice(&mut self, key: &str, default: &str, options: &[&str]) -> SResult<String> {
        let v = match self.map.remove(key) {
            None => default.to_string(),
            Some(Value::String(s)) if options.contains(&s.as_str()) => s,
            Some(v) => return Err(self.err(key, format!("expected one of {options:?}, got {v}"))),
        };
        self.resolved.insert(key.into(), Value::from(v.clone()));
        Ok(v)
    }

    fn finish(self, family: &str) -> SResult<Map<String, Value>> {
        if let Some(key) = self.map.keys().next() {
            return Err(SuiteError::Config(format!(
                "unknown key `{key}`{} for family `{family}`",
                locate(self.text, key)
            )));
        }
        Ok(self.resolved)
    }
}

const BIG: u64 = 1 << 40;

fn family_spec(family: &str, p: &mut Params<'_>) -> SResult<FamilySpec> {
    Ok(match family {
        "canonical" => {
            let k_max = p.size("K_max", 12, 0, 170)?;
            FamilySpec::Canonical {
                k_max,
                radial_order: p.size("radial_order", 40, 1, 400)?,
                reference_radius: p.positive("reference_radius", 1.0)?,
            }
        }
        "vcs_matrix" => {
            let n = p.size("N", 2, 2, 64)?;
            let k_max = p.size("K_max", 12, 0, 170)?;
            let radial_order = p.size("radial_order", 40, 1, 400)?;
            let haar_default = if n == 2 { "exact_su2" } else { "monte_carlo" };
            let haar = match p.choice("haar", haar_default, &["exact_su2", "monte_carlo"])?.as_str() {
                "exact_su2" => HaarMode::ExactSu2,
                _ => HaarMode::MonteCarlo,
            };
            let order_default = if haar == HaarMode::ExactSu2 { 4 } else { 500 };
            FamilySpec::VcsMatrix {
                n,
                k_max,
                radial_order,
                haar,
                haar_order: p.size("haar_order", order_default, 1, 10_000_000)?,
                sun_samples: p.size("sun_samples", 100_000, 2, 100_000_000)?,
                sun_vectors: p.size("sun_vectors", 20, 1, 100_000)?,
            }
        }
        "analytic" => {
            let n = p.size("N", 2, 1, 64)?;
            let k_max = p.size("K_max", 8, 0, 170)?;
            let monte_carlo = p.choice("quadrature", "product", &["product", "monte_carlo"])? == "monte_carlo";
            let radial_order = p.size("radial_order", k_max / 2 + 1, 1, 400)?;
            let angular_order = p.size("angular_order", k_max + 1, 1, 4000)?;
            let samples = p.size("samples", 1_000_000, 2, 100_000_000)?;
            if !monte_carlo {
                let nodes = ((radial_order * angular_order) as f64).powi((n * n) as i32);
                if nodes > 5e7 {
                    return Err(p.err(
                        "quadrature",
                        format!("the product rule would have {nodes:.3e} nodes; use \"monte_carlo\" or lower orders"),
                    ));
                }
            }
            FamilySpec::Analytic { n, k_max, monte_carlo, radial_order, angular_order, samples }
        }
        "quaternion" => {
            let k_max = p.size("K_max", 12, 0, 170)?;
            let r_max = p.positive("r_max", 9.0)?;
            let orders = QuaternionOrders {
                r: p.size("radial_order", 80, 1, 4000)?,
                xi: p.size("xi_order", 2 * k_max + 1, 1, 4000)?,
                theta: p.size("theta_order", 10, 1, 4000)?,
                phi: p.size("phi_order", 4, 1, 4000)?,
            };
            FamilySpec::Quaternion { k_max, r_max, orders }
        }
        "landau" => FamilySpec::Landau {
            k_max: p.size("K_max", 12, 0, 170)?,
            l_max: p.size("L_max", 12, 0, 170)?,
            z_prime: p.complex("z_prime", C64::new(0.5, 0.0))?,
            radial_order: p.size("radial_order", 40, 1, 400)?,
        },
        "cuntz" => {
            let d = p.size("D", 64, 1, BIG as usize)?;
            let k_active = p.size("K_active", d, 1, d)?;
            FamilySpec::Cuntz {
                d,
                k_active,
                k_max: p.size("K_max", 12.min(k_active - 1), 0, 170)?,
                radial_order: p.size("radial_order", 40, 1, 400)?,
            }
        }
        other => {
            let known: Vec<_> = FAMILIES.iter().map(|f| f.0).collect();
            return Err(SuiteError::Config(format!(
                "unknown family `{other}`{}; expected one of {known:?}",
                locate(p.text, "family")
            )));
        }
    })
}

fn check_params(p: &mut Params<'_>) -> SResult<CheckParams> {
    Ok(CheckParams {
        cp_configs: p.size("cp_configs", 100, 1, 1_000_000)?,
        cp_points: p.size("cp_points", 4, 1, 1000)?,
        naimark_subsets: p.size("naimark_subsets", 50, 1, 1_000_000)?,
        dilation_max_carrier: p.size("dilation_max_carrier", 128, 1, 4096)?,
        sample_points: p.size("sample_points", 20, 1, 1_000_000)?,
        bijection_limit: p.int("bijection_limit", 1_000_000, 1, BIG)?,
        hermite_max_index: p.size("hermite_max_index", 6, 1, 40)?,
        hermite_radial_order: p.size("hermite_radial_order", 20, 1, 400)?,
    })
}

/// Parses and validates a JSON config.
///
/// Family parameters go under `family_params` or, flat, at the top level;
/// `seed` may appear in either place. Unknown keys are errors.
pub fn parse_config(text: &str) -> SResult<SuiteConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| SuiteError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut root) = root else {
        return Err(SuiteError::Config("the config must be a JSON object".into()));
    };
    let family = match root.remove("family") {
        Some(Value::String(s)) => s,
        Some(v) => {
            return Err(SuiteError::Config(format!("family{}: expected a string, got {v}", locate(text, "family"))))
        }
        None => return Err(SuiteError::Config("missing required key `family`".into())),
    };
    let mut params = match root.remove("family_params") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m,
        Some(v) => {
            return Err(SuiteError::Config(format!(
                "family_params{}: expected an object, got {v}",
                locate(text, "family_params")
            )))
        }
    };
    let checks = match root.remove("checks") {
        None => Vec::new(),
        Some(Value::Array(a)) => a
            .into_iter()
            .map(|v| match v {
                Value::String(s) if CHECKS.iter().any(|c| c.0 == s) => Ok(s),
                other => {
                    let known: Vec<_> = CHECKS.iter().map(|c| c.0).collect();
                    Err(SuiteError::Config(format!(
                        "checks{}: unknown check {other}; expected one of {known:?}",
                        locate(text, "checks")
                    )))
                }
            })
            .collect::<SResult<Vec<_>>>()?,
        Some(v) => {
            return Err(SuiteError::Config(format!("checks{}: expected a list, got {v}", locate(text, "checks"))))
        }
    };
    let tolerance = match root.remove("tolerance") {
        None => 1e-6,
        Some(v) => match v.as_f64() {
            Some(t) if t > 0.0 && t.is_finite() => t,
            _ => {
                return Err(SuiteError::Config(format!(
                    "tolerance{}: expected a positive number, got {v}",
                    locate(text, "tolerance")
                )))
            }
        },
    };
    let output_path = match root.remove("output_path") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(v) => {
            return Err(SuiteError::Config(format!(
                "output_path{}: expected a string, got {v}",
                locate(text, "output_path")
            )))
        }
    };
    let mut seed_values = Vec::new();
    for v in [root.remove("seed"), params.remove("seed")].into_iter().flatten() {
        match v.as_u64() {
            Some(s) => seed_values.push(s),
            None => {
                return Err(SuiteError::Config(format!(
                    "seed{}: expected a nonnegative integer, got {v}",
                    locate(text, "seed")
                )))
            }
        }
    }
    if seed_values.len() == 2 && seed_values[0] != seed_values[1] {
        return Err(SuiteError::Config("seed is given twice with different values".into()));
    }
    let seed = seed_values.first().copied().unwrap_or(42);
    // whatever is left at the top level is a flat family parameter
    for (k, v) in root {
        if TOP_KEYS.contains(&k.as_str()) {
            continue;
        }
        if params.contains_key(&k) {
            return Err(SuiteError::Config(format!(
                "`{k}`{} appears both at the top level and in family_params",
                locate(text, &k)
            )));
        }
        params.insert(k, v);
    }
    let mut p = Params { text, map: params, resolved: Map::new() };
    let spec = family_spec(&family, &mut p)?;
    let cp = check_params(&mut p)?;
    let resolved = p.finish(&family)?;
    for check in &checks {
        let ok = match check.as_str() {
            "cuntz" => family == "cuntz",
            "sun_reln" => family == "vcs_matrix",
            _ => true,
        };
        if !ok {
            return Err(SuiteError::Config(format!("check `{check}` does not apply to family `{family}`")));
        }
    }
    Ok(SuiteConfig { family, spec, params: cp, checks, tolerance, seed, output_path, resolved })
}

/// One check's outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
    pub nodes_used: u64,
    pub wall_time_ms: f64,
    pub statistical_error: Option<f64>,
    /// Secondary quantities; keys are check-specific.
    pub details: BTreeMap<String, f64>,
}

/// Outcome of [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub version: String,
    pub seed: u64,
    pub config: Value,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Outcome {
    defect: f64,
    bound: f64,
    nodes_used: u64,
    statistical_error: Option<f64>,
    details: BTreeMap<String, f64>,
}

impl Outcome {
    fn new(defect: f64, bound: f64, nodes_used: usize) -> Self {
        Self { defect, bound, nodes_used: nodes_used as u64, statistical_error: None, details: BTreeMap::new() }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }
}

enum Handle {
    Canonical(CanonicalFamily),
    VcsMatrix(VcsMatrixFamily),
    Analytic(CSFamily),
    Quaternion(QuaternionFamily),
    Landau(LandauFamily),
    Cuntz(CuntzRep, Option<CSFamily>),
}

struct Runner<'c> {
    cfg: &'c SuiteConfig,
    handle: Option<Handle>,
    scene: Option<DilationScene>,
    tol: SpectralTolerance,
}

fn check_seed(seed: u64, name: &str) -> ChaCha8Rng {
    let idx = CHECKS.iter().position(|c| c.0 == name).unwrap_or(CHECKS.len()) as u64;
    ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(idx + 1))
}

fn unit_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CStarMatrix {
    let phase = unit_complex(rng);
    if n == 1 {
        return CStarMatrix::scalar(phase);
    }
    haar_sun_sample(rng, n).scale(phase)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_disc(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    C64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI))
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn domain_projection(rep: &CuntzRep, k: usize) -> crate::Result<CMatrix> {
    let len = rep.domain_len(k)?;
    Ok(CMatrix::from_fn(
        rep.dim(),
        rep.dim(),
        |i, j| if i == j && i < len { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
    ))
}

impl Runner<'_> {
    fn handle(&mut self) -> SResult<&mut Handle> {
        if self.handle.is_none() {
            self.handle = Some(self.build()?);
        }
        Ok(self.handle.as_mut().expect("built above"))
    }

    fn build(&self) -> SResult<Handle> {
        let seed = self.cfg.seed;
        Ok(match self.cfg.spec {
            FamilySpec::Canonical { k_max, radial_order, reference_radius } => {
                Handle::Canonical(CanonicalFamily::bargmann(k_max, radial_order, reference_radius)?)
            }
            FamilySpec::VcsMatrix { n, k_max, radial_order, haar, haar_order, .. } => {
                let measure = gaussian_c_rule(radial_order, 2 * k_max + 1, GaussianConvention::Unit)?;
                let basis = VectorBasis::gaussian_fourier(n, k_max, measure, 1e-8)?;
                Handle::VcsMatrix(vcs_matrix_family(basis, haar_sun_rule(n, haar, haar_order, seed)?)?)
            }
            FamilySpec::Analytic { n, k_max, monte_carlo, radial_order, angular_order, samples } => {
                let rule = if monte_carlo {
                    ginibre_monte_carlo(n, samples, seed)?
                } else {
                    matrix_gaussian_rule(n, radial_order, angular_order)?
                };
                Handle::Analytic(analytic_family(n, k_max, rule)?)
            }
            FamilySpec::Quaternion { k_max, r_max, orders } => {
                let rule = quaternion_rule(r_max, orders, QuaternionDensity::FourPiSquared, k_max)?;
                Handle::Quaternion(quaternion_family(k_max, rule)?)
            }
            FamilySpec::Landau { k_max, l_max, z_prime, radial_order } => {
                Handle::Landau(landau_family(k_max, l_max, z_prime, radial_order)?)
            }
            FamilySpec::Cuntz { d, k_active, .. } => Handle::Cuntz(build_cuntz(d, k_active)?, None),
        })
    }

    fn family(&mut self) -> SResult<CSFamily> {
        let spec = self.cfg.spec.clone();
        Ok(match self.handle()? {
            Handle::Canonical(f) => f.family().clone(),
            Handle::VcsMatrix(f) => f.family().clone(),
            Handle::Analytic(f) => f.clone(),
            Handle::Quaternion(f) => f.family().clone(),
            Handle::Landau(f) => f.family().clone(),
            Handle::Cuntz(rep, fam) => {
                if fam.is_none() {
                    let FamilySpec::Cuntz { k_max, radial_order, .. } = spec else { unreachable!() };
                    *fam = Some(cuntz_family(rep, k_max, radial_order)?);
                }
                fam.clone().expect("built above")
            }
        })
    }

    // A random parameter point of moderate size, away from the far tails.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Node {
        match self.cfg.spec {
            FamilySpec::Canonical { .. } | FamilySpec::Cuntz { .. } => Node::Complex(random_disc(rng, 1.5)),
            FamilySpec::VcsMatrix { n, .. } => {
                Node::Composite(vec![Node::Complex(random_disc(rng, 1.5)), Node::Matrix(haar_sun_sample(rng, n))])
            }
            FamilySpec::Analytic { n, .. } => {
                Node::Matrix(CStarMatrix::from_trusted(random_matrix(rng, n) * C64::new(0.6, 0.0)))
            }
            FamilySpec::Quaternion { .. } => Node::Quaternion(QuaternionParam {
                r: rng.random_range(0.0..2.0),
                xi: rng.random_range(0.0..2.0 * PI),
                theta: rng.random_range(0.0..=PI),
                phi: 2.0 * PI - rng.random_range(0.0..2.0 * PI),
            }),
            FamilySpec::Landau { l_max, .. } => {
                Node::Composite(vec![Node::Complex(random_disc(rng, 1.5)), Node::Index(rng.random_range(0..=l_max))])
            }
        }
    }

    fn statistical(&self, fam: &CSFamily) -> SResult<Option<f64>> {
        Ok(second_moment_error(fam)?)
    }

    fn run(&mut self, name: &str) -> SResult<Outcome> {
        let mut rng = check_seed(self.cfg.seed, name);
        match name {
            "orthogonality" => self.orthogonality(),
            "resolution" => self.resolution(&mut rng),
            "normalization" => self.normalization(&mut rng),
            "frame" => self.frame(),
            "cp_positivity" => self.cp_positivity(&mut rng),
            "reproduce" => self.reproduce(&mut rng),
            "dilation" => self.dilation(&mut rng),
            "minimality" => self.minimality(&mut rng),
            "cuntz" => self.cuntz(&mut rng),
            "bijection" => self.bijection(),
            "hermite_gram" => self.hermite_gram(&mut rng),
            "sun_reln" => self.sun_reln(&mut rng),
            other => Err(SuiteError::Config(format!("unknown check `{other}`"))),
        }
    }

    fn orthogonality(&mut self) -> SResult<Outcome> {
        let fam = self.family()?;
        let rep = verify_orthogonality(&fam, self.cfg.tolerance)?;
        let stat = self.statistical(&fam)?;
        let bound = rep.bound + 5.0 * stat.unwrap_or(0.0);
        let mut out = Outcome::new(rep.max_defect, bound, rep.nodes_used)
            .detail("worst_k", rep.worst.0 as f64)
            .detail("worst_l", rep.worst.1 as f64);
        out.statistical_error = stat;
        Ok(out)
    }

    fn resolution(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let fam = self.family()?;
        let m = fam.left_dim();
        let stat = self.statistical(&fam)?;
        let plain = verify_resolution(&fam, &CStarMatrix::identity(m), self.tol)?;
        let rotated = verify_resolution(&fam, &random_unitary(rng, m), self.tol)?;
        let mut defect = plain.defect.max(rotated.defect);
        let mut out = Outcome::new(0.0, plain.bound + 5.0 * stat.unwrap_or(0.0), plain.nodes_used)
            .detail("defect_identity", plain.defect)
            .detail("defect_unitary", rotated.defect);
        if let (FamilySpec::Quaternion { k_max, r_max, orders }, Some(Handle::Quaternion(q))) =
            (&self.cfg.spec, &self.handle)
        {
            // the two-component states need twice the module-form density
            let vcs = q.vcs_resolution(
                &quaternion_rule(*r_max, *orders, QuaternionDensity::TwoPiSquared, *k_max)?,
                self.cfg.tolerance,
            )?;
            let printed = q.vcs_resolution(
                &quaternion_rule(*r_max, *orders, QuaternionDensity::EightPiSquared, *k_max)?,
                self.cfg.tolerance,
            )?;
            defect = defect.max(vcs.defect);
            out = out.detail("vcs_defect", vcs.defect).detail("vcs_defect_eight_pi_squared", printed.defect);
        }
        out.defect = defect;
        out.statistical_error = stat;
        Ok(out)
    }

    fn normalization(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let fam = self.family()?;
        let m = fam.left_dim();
        let mut generic: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        let mut excess: f64 = 0.0;
        let mut raw: f64 = 0.0;
        let mut tail: f64 = 0.0;
        for _ in 0..self.cfg.params.sample_points {
            let x = self.sample_point(rng);
            let a = random_unitary(rng, m);
            min_eig = min_eig.min(normalization(&fam, &x, &a)?.min_eigenvalue);
            // tiny but positive norms are legitimate (Landau levels at large ℓ)
            let cs = normalize(&coherent_state(&fam, &x, &a)?, SpectralTolerance { psd_floor: 0.0, ..self.tol })?;
            let n = cs.vector().inner(cs.vector())?;
            let target = match self.handle.as_ref().expect("built by family()") {
                // <φ_k|φ_k> is the domain projection of S_{k+1}, not the identity
                Handle::Cuntz(rep, _) => {
                    let f = fam.evaluate_raw(&x)?;
                    let total: f64 = f.iter().map(|fk| fk[(0, 0)].norm_sqr()).sum();
                    let mut t = CMatrix::zeros(n.dim(), n.dim());
                    for (k, fk) in f.iter().enumerate() {
                        t += domain_projection(rep, k + 1)? * C64::new(fk[(0, 0)].norm_sqr() / total, 0.0);
                    }
                    CStarMatrix::from_trusted(t)
                }
                _ => CStarMatrix::identity(n.dim()),
            };
            generic = generic.max(n.distance(&target));
            let family_identity = match self.handle.as_ref().expect("built by family()") {
                Handle::Canonical(c) => {
                    let z = x.as_complex()?;
                    let v = normalization(c.family(), &x, &CStarMatrix::identity(1))?.value.matrix()[(0, 0)].re;
                    Some((v * (-z.norm_sqr()).exp(), poisson_tail(c.family().k_max(), z.norm_sqr())))
                }
                Handle::Quaternion(q) => {
                    let p = x.as_quaternion()?;
                    Some((q.vcs_norm_sum(p)?, q.tail_at(p.r)))
                }
                Handle::Landau(l) => {
                    let z = x.parts()?[0].as_complex()?;
                    Some((l.norm_sum(z), l.norm_tail(z)))
                }
                _ => None,
            };
            if let Some((s, t)) = family_identity {
                let r = (s - 1.0).abs();
                raw = raw.max(r);
                tail = tail.max(t);
                excess = excess.max(r - t);
            }
        }
        // an invertible normalization element is part of the claim
        let invertible = if min_eig > 0.0 { 0.0 } else { f64::INFINITY };
        Ok(Outcome::new(generic.max(excess).max(invertible), self.cfg.tolerance, self.cfg.params.sample_points)
            .detail("normalized_defect", generic)
            .detail("min_eigenvalue", min_eig)
            .detail("norm_identity_defect", raw)
            .detail("norm_identity_tail", tail))
    }

    fn frame(&mut self) -> SResult<Outcome> {
        let fam = self.family()?;
        let len = fam.frame().len();
        if let Some(Handle::Cuntz(rep, _)) = &self.handle {
            // Truncated to C^D the S_k are partial isometries: S_k* S_l is
            // δ_kl times the projection onto the domain of S_k, and the frame
            // completes only in the limit, so its completeness defect has to
            // shrink monotonically instead.
            let g = fam.frame().space();
            let mats = (1..=len).map(|k| rep.matrix(k)).collect::<crate::Result<Vec<_>>>()?;
            let mut orth: f64 = 0.0;
            for (k, sk) in mats.iter().enumerate() {
                for (l, sl) in mats.iter().enumerate() {
                    let mut gram = sk.adjoint() * sl;
                    if k == l {
                        gram -= domain_projection(rep, k + 1)?;
                    }
                    orth = orth.max(crate::cstar::spectral_norm(&gram));
                }
            }
            let mut last = f64::INFINITY;
            let mut increases = 0usize;
            for k in 1..=len {
                let elems = mats[..k].iter().map(|m| g.element(m.clone())).collect::<crate::Result<Vec<_>>>()?;
                let c = Frame::new(g, elems)?.completeness_defect();
                if c > last + self.cfg.tolerance {
                    increases += 1;
                }
                last = c;
            }
            return Ok(Outcome::new(orth.max(increases as f64), self.cfg.tolerance, len)
                .detail("orthonormality_defect_on_domains", orth)
                .detail("completeness_defect", last)
                .detail("monotonicity_violations", increases as f64));
        }
        let rep = fam.frame().verify(self.tol);
        Ok(Outcome::new(rep.completeness_defect.max(rep.orthonormality_defect), self.cfg.tolerance, len)
            .detail("completeness_defect", rep.completeness_defect)
            .detail("orthonormality_defect", rep.orthonormality_defect))
    }

    fn cp_positivity(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let fam = self.family()?;
        let kern = cp_kernel(&fam);
        let (m, d) = (fam.left_dim(), kern.block_dim());
        let cp = self.cfg.params;
        let mut min_eig = f64::INFINITY;
        for _ in 0..cp.cp_configs {
            let points: Vec<(Node, CStarMatrix)> = (0..cp.cp_points)
                .map(|_| (self.sample_point(rng), CStarMatrix::from_trusted(random_matrix(rng, m))))
                .collect();
            let b: Vec<CStarMatrix> =
                (0..cp.cp_points).map(|_| CStarMatrix::from_trusted(random_matrix(rng, d))).collect();
            min_eig = min_eig.min(cp_positivity_test(&kern, &points, &b, self.tol)?.min_eigenvalue);
        }
        Ok(Outcome::new((-min_eig).max(0.0), self.tol.psd_floor, cp.cp_configs * cp.cp_points)
            .detail("min_eigenvalue", min_eig))
    }

    fn reproduce(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let fam = self.family()?;
        let kern = cp_kernel(&fam);
        let m = fam.left_dim();
        let stat = self.statistical(&fam)?;
        let bs = [CStarMatrix::identity(m), random_unitary(rng, m)];
        let mut defect: f64 = 0.0;
        let mut bound = f64::INFINITY;
        let mut excess = f64::NEG_INFINITY;
        for _ in 0..self.cfg.params.sample_points {
            let (x, z) = (self.sample_point(rng), self.sample_point(rng));
            let (a, a2) = (random_unitary(rng, m), random_unitary(rng, m));
            let scale = fam.state_vector(&x, &a)?.norm() * fam.state_vector(&z, &a2)?.norm();
            for b in &bs {
                let rep = kernel_reproduce_check(&kern, &x, &z, &a, &a2, b, self.tol)?;
                let bnd = rep.bound + 5.0 * stat.unwrap_or(0.0) * scale;
                if rep.defect - bnd > excess {
                    excess = rep.defect - bnd;
                    defect = rep.defect;
                    bound = bnd;
                }
            }
        }
        let mut out = Outcome::new(defect, bound, fam.rule().len());
        out.statistical_error = stat;
        Ok(out)
    }

    fn scene(&mut self, rng: &mut ChaCha8Rng) -> SResult<(DilationScene, bool)> {
        let fam = self.family()?;
        let d = fam.h_space().algebra_dim();
        let n = fam.rule().len();
        let cap = (self.cfg.params.dilation_max_carrier / d).max(1);
        let restricted = n > cap;
        if self.scene.is_none() {
            let fam = if restricted {
                let mut idx = sample(rng, n, cap).into_vec();
                idx.sort_unstable();
                fam.with_rule(fam.rule().restrict(&idx)?)
            } else {
                fam
            };
            self.scene = Some(build_dilation(&fam, self.tol)?);
        }
        Ok((self.scene.clone().expect("built above"), restricted))
    }

    fn dilation(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let (scene, restricted) = self.scene(rng)?;
        let n = scene.nodes().len();
        let mut naimark: f64 = 0.0;
        let mut pvm: f64 = 0.0;
        let mut additivity: f64 = 0.0;
        let mut additivity_bound: f64 = 0.0;
        for _ in 0..self.cfg.params.naimark_subsets {
            let size = rng.random_range(1..=n);
            let mut delta = sample(rng, n, size).into_vec();
            delta.sort_unstable();
            let rep = dilation_check(&scene, &delta)?;
            naimark = naimark.max(rep.defect_naimark);
            pvm = pvm.max(rep.defect_pvm);
            if size >= 2 {
                let (d1, d2) = delta.split_at(size / 2);
                additivity = additivity.max(additivity_defect(&scene, d1, d2)?);
                // summation order is the only difference between the sides
                // ν(Δ) ≥ 0, so its trace bounds its norm
                let scale = scene.nu(&delta)?.trace().re.max(1.0);
                additivity_bound = additivity_bound.max(4.0 * f64::EPSILON * size as f64 * scale);
            }
        }
        let r = scene.report();
        Ok(Outcome::new(naimark.max(pvm).max(additivity), self.tol.psd_floor.min(1e-10), n)
            .detail("naimark_defect", naimark)
            .detail("pvm_defect", pvm)
            .detail("additivity_defect", additivity)
            .detail("additivity_rounding_bound", additivity_bound)
            .detail("carrier_dim", r.carrier_dim as f64)
            .detail("restricted", if restricted { 1.0 } else { 0.0 })
            .detail("scene_isometry_defect", r.isometry_defect)
            .detail("scene_idempotence_defect", r.idempotence_defect)
            .detail("scene_resolution_defect", r.resolution_defect))
    }

    fn minimality(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let (scene, restricted) = self.scene(rng)?;
        let rep = minimality_check(&scene);
        let gap = (rep.carrier_dim - rep.span_dimension) as f64 + if rep.support_ok { 0.0 } else { 1.0 };
        Ok(Outcome::new(gap, 0.0, scene.nodes().len())
            .detail("span_dimension", rep.span_dimension as f64)
            .detail("carrier_dim", rep.carrier_dim as f64)
            .detail("restricted", if restricted { 1.0 } else { 0.0 }))
    }

    fn cuntz(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let tol = self.cfg.tolerance;
        let Handle::Cuntz(rep, _) = self.handle()? else {
            return Err(SuiteError::Config("check `cuntz` needs the cuntz family".into()));
        };
        let r = verify_cuntz(rep);
        let full = rep.k_active() == rep.dim();
        let trace_gap = if full { (1.0 - r.completeness_trace_fraction).abs() } else { 0.0 };
        // Landau-level coefficients against z̄'^{n-1} z^{k-1} / √((k-1)!(n-1)!)
        let (z, zp) = (random_disc(rng, 1.0), random_disc(rng, 1.0));
        let fact = |m: usize| (1..=m).map(|j| j as f64).product::<f64>();
        let mut landau: f64 = 0.0;
        for n in 1..=12.min(rep.dim()) {
            let v = landau_recovery(rep, z, zp, n)?;
            for k in 1..=12.min(rep.k_active()) {
                let row = unpairing(k as u64, n as u64)? as usize;
                if row > rep.dim() || n > rep.domain_len(k)? {
                    continue;
                }
                let want = zp.conj().powi(n as i32 - 1) * z.powi(k as i32 - 1) / (fact(k - 1) * fact(n - 1)).sqrt();
                landau = landau.max((v[row - 1] - want).norm() / want.norm().max(f64::MIN_POSITIVE));
            }
        }
        let defect = r.isometry_defect.max(r.range_overlap_defect).max(trace_gap).max(landau);
        Ok(Outcome::new(defect, tol, rep.dim())
            .detail("isometry_defect", r.isometry_defect)
            .detail("range_overlap_defect", r.range_overlap_defect)
            .detail("completeness_trace_fraction", r.completeness_trace_fraction)
            .detail("landau_relative_error", landau))
    }

    fn bijection(&mut self) -> SResult<Outcome> {
        let limit = self.cfg.params.bijection_limit;
        let r = bijection_roundtrip(limit);
        Ok(Outcome {
            defect: (r.failures + r.monotonicity_failures) as f64,
            bound: 0.0,
            nodes_used: r.checked,
            statistical_error: None,
            details: BTreeMap::new(),
        }
        .detail("failures", r.failures as f64)
        .detail("monotonicity_failures", r.monotonicity_failures as f64))
    }

    fn hermite_gram(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let p = self.cfg.params;
        let rule = gaussian_c_rule(p.hermite_radial_order, 2 * p.hermite_max_index + 3, GaussianConvention::Half)?;
        let gram = hermite_gram_defect(p.hermite_max_index, &rule)?;
        let mut spot: f64 = 0.0;
        for _ in 0..10 {
            let z = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            spot = spot
                .max((complex_hermite(1, 1, z)? - 1.0).norm())
                .max((complex_hermite(2, 1, z)? - z.conj()).norm())
                .max((complex_hermite(2, 2, z)? - (z.norm_sqr() - 1.0)).norm());
        }
        Ok(Outcome::new(gram.max(spot), self.cfg.tolerance, rule.len())
            .detail("gram_defect", gram)
            .detail("spot_defect", spot))
    }

    fn sun_reln(&mut self, rng: &mut ChaCha8Rng) -> SResult<Outcome> {
        let FamilySpec::VcsMatrix { n, sun_samples, sun_vectors, .. } = self.cfg.spec else {
            return Err(SuiteError::Config("check `sun_reln` needs the vcs_matrix family".into()));
        };
        let rule = if n == 2 {
            haar_sun_rule(2, HaarMode::ExactSu2, 4, self.cfg.seed)?
        } else {
            haar_sun_rule(n, HaarMode::MonteCarlo, sun_samples, self.cfg.seed)?
        };
        let mut defect: f64 = 0.0;
        let mut stat: Option<f64> = None;
        for _ in 0..sun_vectors {
            let (d, s) = sun_relation_defect(&rule, &unit_vector(rng, n))?;
            defect = defect.max(d);
            stat = s.map(|s| stat.map_or(s, |t: f64| t.max(s)));
        }
        // a fixed 5/√M criterion for the random rule
        let bound =
            if rule.is_monte_carlo() { 5.0 / (rule.len() as f64).sqrt() } else { self.cfg.tolerance.min(1e-10) };
        let mut out = Outcome::new(defect, bound, rule.len());
        out.statistical_error = stat;
        Ok(out)
    }
}

/// Runs every requested check in order. Check failures are recorded in the
/// report; errors abort the suite.
pub fn run_suite(cfg: &SuiteConfig) -> SResult<SuiteReport> {
    let tol = SpectralTolerance::new(cfg.tolerance.min(1e-10), cfg.tolerance)?;
    let mut runner = Runner { cfg, handle: None, scene: None, tol };
    let mut checks = Vec::with_capacity(cfg.checks.len());
    for name in &cfg.checks {
        let start = Instant::now();
        let o = runner.run(name)?;
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        checks.push(CheckRecord {
            name: name.clone(),
            pass: o.defect <= o.bound,
            defect: o.defect,
            bound: o.bound,
            nodes_used: o.nodes_used,
            wall_time_ms,
            statistical_error: o.statistical_error,
            details: o.details,
        });
    }
    Ok(SuiteReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: cfg.echo(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "Infinity".into()
    } else {
        "-Infinity".into()
    }
}

// JSON with sorted keys, two-space indent and every float at 17 significant
// digits; non-finite floats become null.
fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => write!(out, "{u}").expect("string write"),
            (_, Some(i), _) => write!(out, "{i}").expect("string write"),
            (_, _, Some(f)) if f.is_finite() => out.push_str(&float(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad);
                write_json(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<_> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push_str(": ");
                write_json(&m[k.as_str()], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// The report as JSON text.
pub fn report_json(rep: &SuiteReport) -> String {
    let v = serde_json::to_value(rep).expect("report serializes");
    let mut out = String::new();
    write_json(&v, 0, &mut out);
    out.push('\n');
    out
}

/// The report as CSV with one row per check.
pub fn report_csv(rep: &SuiteReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "defect", "bound", "pass", "nodes_used", "wall_time_ms", "statistical_error"])
        .expect("in-memory write");
    for c in &rep.checks {
        w.write_record([
            c.name.clone(),
            float(c.defect),
            float(c.bound),
            c.pass.to_string(),
            c.nodes_used.to_string(),
            format!("{:.3}", c.wall_time_ms),
            c.statistical_error.map(float).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Writes the report to `out`.
pub fn emit_report(rep: &SuiteReport, format: Format, out: &mut dyn Write) -> SResult<()> {
    let text = match format {
        Format::Json => report_json(rep),
        Format::Csv => report_csv(rep),
    };
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> SuiteReport {
        run_suite(&parse_config(text).unwrap()).unwrap()
    }

    #[test]
    fn flat_and_nested_params_agree() {
        let a = parse_config(r#"{"family": "canonical", "K_max": 6, "checks": ["resolution"]}"#).unwrap();
        let b = parse_config(r#"{"family": "canonical", "family_params": {"K_max": 6}, "checks": ["resolution"]}"#)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = parse_config("{\n  \"family\": \"canonical\",\n  \"K_mx\": 3\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("K_mx") && msg.contains("line 3"), "{msg}");
        assert_eq!(e.exit_code(), 2);
        assert!(parse_config(r#"{"family": "canonical", "checks": ["resolve"]}"#).is_err());
        assert!(parse_config(r#"{"family": "nope"}"#).is_err());
        assert!(parse_config(r#"{"family": "canonical", "tolerance": 0}"#).is_err());
        assert!(parse_config(r#"{"family": "canonical", "checks": ["cuntz"]}"#).is_err());
        assert!(parse_config(r#"{"family": "canonical", "K_max": -1}"#).is_err());
        assert!(parse_config(r#"{"family": "canonical", "K_max": 3, "family_params": {"K_max": 3}}"#).is_err());
    }

    #[test]
    fn empty_check_list() {
        let rep = run(r#"{"family": "canonical"}"#);
        assert!(rep.pass && rep.checks.is_empty());
        assert_eq!(report_csv(&rep).lines().count(), 1);
    }

    #[test]
    fn defaults_are_echoed() {
        let rep = run(r#"{"family": "landau", "checks": []}"#);
        let p = &rep.config["family_params"];
        assert_eq!(p["K_max"], 12);
        assert_eq!(p["radial_order"], 40);
        assert_eq!(rep.config["tolerance"], 1e-6);
        assert_eq!(rep.seed, 42);
    }

    #[test]
    fn canonical_suite_passes() {
        let rep =
            run(r#"{"family": "canonical", "K_max": 8, "radial_order": 20, "cp_configs": 10, "naimark_subsets": 5,
                "dilation_max_carrier": 40,
                "checks": ["orthogonality", "resolution", "normalization", "frame", "cp_positivity",
                           "reproduce", "dilation", "minimality"]}"#);
        for c in &rep.checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(rep.check("dilation").unwrap().details["restricted"], 1.0);
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let rep = run(r#"{"family": "cuntz", "D": 30, "checks": ["bijection"], "bijection_limit": 100}"#);
        let text = report_json(&rep);
        // 17 significant digits: 1e-6 is not a binary fraction
        assert!(text.contains("\"tolerance\": 9.9999999999999995e-7"), "{text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["checks"][0]["nodes_used"], 100);
    }

    #[test]
    fn csv_quotes_and_counts() {
        let rep = run(r#"{"family": "cuntz", "D": 30, "checks": ["bijection", "cuntz"], "bijection_limit": 100}"#);
        let text = report_csv(&rep);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("check,defect,bound,pass,nodes_used,wall_time_ms,statistical_error\n"));
    }

    #[test]
    fn dimension_cap_maps_to_config_exit() {
        let cfg = parse_config(r#"{"family": "cuntz", "D": 1000, "checks": ["resolution"]}"#).unwrap();
        let e = run_suite(&cfg).unwrap_err();
        assert!(matches!(e, SuiteError::Core(Error::DimensionLimit { .. })));
        assert_eq!(e.exit_code(), 2);
    }
}
