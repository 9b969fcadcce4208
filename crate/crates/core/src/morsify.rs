//! Generic linear perturbations `f_t = f - Σ t_i x_i`.
//!
//! A perturbation passes when every critical point of `f_t` on the sphere is
//! nondegenerate, the critical values are pairwise distinct, and there is
//! room for `epsilon` between the ambient critical values of `f_t` in the ball
//! and the positive sphere critical values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fibre::{self, AmbientPoint, EpsilonBracket, FibreError};
use crate::poly::{PolyError, Polynomial};
use crate::sphcrit::{self, CriticalPoint, CriticalSearch, SolverConfig, SphCritError};

/// Bound on `|det B|` below which a critical point counts as degenerate.
pub const NONDEGENERACY_TOL: f64 = 1e-8;
/// Relative gap below which two critical values count as equal.
pub const VALUE_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MorsifyError {
    #[error("max_attempts must be at least 1")]
    NoAttempts,
    #[error("magnitude must be finite and non-negative, got {0}")]
    BadMagnitude(f64),
    #[error("no perturbation passed validation after {attempts} attempts")]
    Exhausted {
        attempts: usize,
        last: Box<MorseValidationReport>,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Solver(#[from] SphCritError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub t: Vec<f64>,
    pub magnitude: f64,
    pub seed: u64,
    /// True when `t` was supplied by the user rather than sampled.
    pub explicit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseValidationReport {
    pub nondegenerate: bool,
    /// `None` for an empty point list.
    pub min_abs_restricted_hessian_det: Option<f64>,
    pub distinct_values: bool,
    /// `None` with fewer than two points.
    pub min_value_gap: Option<f64>,
    pub values_in_band: bool,
    /// Points whose tangent spectrum had an eigenvalue too close to zero to classify.
    pub unclassified_points: usize,
    pub epsilon: Option<f64>,
    pub nondegeneracy_tol: f64,
    pub value_gap_tol: f64,
    pub seed: u64,
    pub attempt: usize,
}

impl MorseValidationReport {
    pub fn passed(&self) -> bool {
        self.nondegenerate
            && self.distinct_values
            && self.values_in_band
            && self.unclassified_points == 0
    }
}

/// Result of a successful (or explicit) perturbation.
#[derive(Debug, Clone)]
pub struct Morsification {
    pub params: PerturbationParams,
    pub report: MorseValidationReport,
    pub f_t: Polynomial,
    pub search: CriticalSearch,
    pub ambient: Vec<AmbientPoint>,
    /// `Err` when no epsilon could be chosen (empty fibre or empty band).
    pub epsilon: Result<(f64, EpsilonBracket), FibreError>,
    pub attempts: usize,
}

/// `t` uniform in the ball of radius `magnitude` in `R^dim`.
pub fn sample_parameters(seed: u64, magnitude: f64, dim: usize) -> PerturbationParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: f64 = rng.random();
    let r = magnitude * u.powf(1.0 / dim.max(1) as f64);
    let t = if n == 0.0 || magnitude == 0.0 {
        vec![0.0; dim]
    } else {
        dir.iter().map(|x| x / n * r).collect()
    };
    PerturbationParams {
        t,
        magnitude,
        seed,
        explicit: false,
    }
}

/// Magnitude used on 1-based attempt `k`: halves whenever `k` doubles.
pub fn attempt_magnitude(initial: f64, k: usize) -> f64 {
    let halvings = usize::BITS - 1 - k.max(1).leading_zeros();
    initial / 2f64.powi(halvings as i32)
}

/// Sub-seed for attempt `k` (splitmix64 finalizer).
pub fn attempt_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Default starting magnitude: 5% of the size of `f` near the sphere, so that
/// `|t . x|` stays small against `f` there.
pub fn default_magnitude(f: &Polynomial, delta: f64) -> f64 {
    let sphere_abs = fibre::sampled_sphere_max(f, delta, 2000, 1).max(fibre::sampled_sphere_max(
        &f.neg(),
        delta,
        2000,
        1,
    ));
    let by_coeff = delta * f.coefficient_scale();
    0.05 * by_coeff.min(sphere_abs / delta)
}

pub fn validate_morse(
    points: &[CriticalPoint],
    ambient_values: &[f64],
    epsilon: Option<f64>,
) -> MorseValidationReport {
    let min_det = points
        .iter()
        .map(|p| p.restricted_det().abs())
        .min_by(f64::total_cmp);
    let mut values: Vec<f64> = points.iter().map(|p| p.value).collect();
    values.sort_by(f64::total_cmp);
    let min_gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .min_by(f64::total_cmp);
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap_tol = VALUE_GAP_TOL * (1.0 + max_abs);
    let values_in_band = match epsilon {
        Some(eps) => ambient_values.iter().all(|v| v.abs() < eps),
        None => true,
    };
    MorseValidationReport {
        nondegenerate: min_det.is_none_or(|d| d > NONDEGENERACY_TOL),
        min_abs_restricted_hessian_det: min_det,
        distinct_values: min_gap.is_none_or(|g| g > gap_tol),
        min_value_gap: min_gap,
        values_in_band,
        unclassified_points: points.iter().filter(|p| p.morse_index.is_none()).count(),
        epsilon,
        nondegeneracy_tol: NONDEGENERACY_TOL,
        value_gap_tol: gap_tol,
        seed: 0,
        attempt: 0,
    }
}

/// Solves and validates a single perturbation.
pub fn evaluate_perturbation(
    f: &Polynomial,
    params: PerturbationParams,
    delta: f64,
    cfg: &SolverConfig,
    attempt: usize,
) -> Result<Morsification, MorsifyError> {
    let f_t = f.perturb_f64(&params.t)?;
    let mut cfg = cfg.clone();
    cfg.seed = params.seed;
    let search = sphcrit::find_critical_points(&f_t, delta, &cfg)?;
    let ambient = fibre::ambient_critical_points(&f_t, delta, &cfg);
    let ambient_values: Vec<f64> = ambient.iter().map(|a| a.value).collect();
    let sphere_max = fibre::sampled_sphere_max(&f_t, delta, 4000, params.seed);
    let epsilon = fibre::select_epsilon(&search.points, &ambient_values, Some(sphere_max));
    let eps_value = match &epsilon {
        Ok((e, _)) => Some(*e),
        Err(_) => None,
    };
    let mut report = validate_morse(&search.points, &ambient_values, eps_value);
    if matches!(epsilon, Err(FibreError::BandEmpty { .. })) {
        report.values_in_band = false;
    }
    report.seed = params.seed;
    report.attempt = attempt;
    Ok(Morsification {
        params,
        report,
        f_t,
        search,
        ambient,
        epsilon,
        attempts: attempt,
    })
}

/// Samples perturbations until one passes validation.
///
/// Attempt `k` uses sub-seed [`attempt_seed`]`(seed, k)` and magnitude
/// [`attempt_magnitude`]`(magnitude, k)`.
pub fn morsify(
    f: &Polynomial,
    delta: f64,
    seed: u64,
    max_attempts: usize,
    magnitude: f64,
    cfg: &SolverConfig,
) -> Result<Morsification, MorsifyError> {
    if max_attempts == 0 {
        return Err(MorsifyError::NoAttempts);
    }
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(MorsifyError::BadMagnitude(magnitude));
    }
    let mut last = None;
    for k in 1..=max_attempts {
        let params = sample_parameters(
            attempt_seed(seed, k),
            attempt_magnitude(magnitude, k),
            f.nvars(),
        );
        let m = evaluate_perturbation(f, params, delta, cfg, k)?;
        if m.report.passed() {
            return Ok(m);
        }
        last = Some(m.report);
    }
    Err(MorsifyError::Exhausted {
        attempts: max_attempts,
        last: Box::new(last.expect("at least one attempt")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sampling_is_reproducible_and_bounded() {
        let a = sample_parameters(42, 0.1, 2);
        let b = sample_parameters(42, 0.1, 2);
        assert_eq!(a, b);
        assert!(a.t.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.1);
        let z = sample_parameters(42, 0.0, 3);
        assert_eq!(z.t, vec![0.0; 3]);
        assert_ne!(
            sample_parameters(1, 0.1, 2).t,
            sample_parameters(2, 0.1, 2).t
        );
    }

    #[test]
    fn halving_schedule() {
        for k in 1..100 {
            assert_eq!(
                attempt_magnitude(1.0, 2 * k),
                attempt_magnitude(1.0, k) / 2.0
            );
        }
        assert_eq!(attempt_magnitude(0.8, 1), 0.8);
        assert_eq!(attempt_magnitude(0.8, 3), 0.4);
    }

    #[test]
    fn validation_of_perturbed_cusp() {
        let f1 = Polynomial::parse("x^3 - y^2 + 3*x", &vars(&["x", "y"])).unwrap();
        let cfg = SolverConfig::for_problem(2, 1.0);
        let pts = sphcrit::find_critical_points(&f1, 1.0, &cfg)
            .unwrap()
            .points;
        let r = validate_morse(&pts, &[], Some(0.01));
        assert!(r.passed());
        assert!((r.min_value_gap.unwrap() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn validation_detects_tied_values() {
        let f = Polynomial::parse("x^2 - y^2", &vars(&["x", "y"])).unwrap();
        let cfg = SolverConfig::for_problem(2, 1.0);
        let pts = sphcrit::find_critical_points(&f, 1.0, &cfg).unwrap().points;
        assert_eq!(pts.len(), 4);
        let r = validate_morse(&pts, &[0.0], Some(0.01));
        assert!(!r.distinct_values);
        assert!(r.nondegenerate);
        assert!(!r.passed());
    }

    #[test]
    fn empty_list_passes_vacuously() {
        let r = validate_morse(&[], &[], None);
        assert!(r.passed());
        assert_eq!(r.min_abs_restricted_hessian_det, None);
    }

    #[test]
    fn band_check() {
        let r = validate_morse(&[], &[0.2], Some(0.1));
        assert!(!r.values_in_band);
    }

    #[test]
    fn morsify_cusp_and_saddle() {
        let xy = vars(&["x", "y"]);
        let cfg = SolverConfig::for_problem(2, 1.0);
        let cusp = Polynomial::parse("x^3 - y^2", &xy).unwrap();
        let m = morsify(&cusp, 1.0, 42, 8, 0.1, &cfg).unwrap();
        assert!(m.report.passed());
        assert!(m.attempts <= 3);

        let saddle = Polynomial::parse("x^2 - y^2", &xy).unwrap();
        let m = morsify(&saddle, 1.0, 7, 8, 0.05, &cfg).unwrap();
        let mut values: Vec<f64> = m.search.points.iter().map(|p| p.value).collect();
        values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(values.len(), 4);
    }

    #[test]
    fn morsify_rejects_zero_attempts() {
        let f = Polynomial::parse("x^3 - y^2", &vars(&["x", "y"])).unwrap();
        let cfg = SolverConfig::for_problem(2, 1.0);
        assert!(matches!(
            morsify(&f, 1.0, 0, 0, 0.1, &cfg),
            Err(MorsifyError::NoAttempts)
        ));
    }

    #[test]
    fn morsify_reports_exhaustion() {
        // the round circle stays degenerate under t = 0
        let f = Polynomial::parse("x^2 + y^2", &vars(&["x", "y"])).unwrap();
        let mut cfg = SolverConfig::for_problem(2, 1.0);
        cfg.num_starts = 16;
        cfg.sweep_points = 256;
        match morsify(&f, 1.0, 0, 2, 0.0, &cfg) {
            Err(MorsifyError::Exhausted { attempts, last }) => {
                assert_eq!(attempts, 2);
                assert!(!last.passed());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
