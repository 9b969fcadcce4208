//! Milnor data selection and the sampling-based hypothesis checks.
//!
//! The fibre region on the sphere is taken to be `{f_t >= epsilon} ∩ S_delta`.
//! `epsilon` is chosen after morsification: it has to sit above every ambient
//! critical value of `f_t` in the ball and below every positive critical
//! value of `f_t` on the sphere.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morsify::PerturbationParams;
use crate::newton::{self, NewtonOptions};
use crate::poly::{PolyFn, Polynomial};
use crate::sampling::{ball_points, dot, norm, unit_sphere_points};
use crate::sphcrit::{CriticalPoint, SolverConfig};

/// Lower floor for the ambient bracket end when `f_t` has no critical value.
pub const AMBIENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FibreError {
    #[error("no positive critical value on the sphere: the positive fibre is empty")]
    EmptyPositiveFibre,
    #[error("no room for epsilon: ambient critical values reach {lower:e}, sphere values start at {upper:e}")]
    BandEmpty { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint {
    pub location: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RadiusVerdict {
    /// No point of `{f = 0}` tangent to a sphere of radius `<= delta` was found.
    Pass {
        starts: usize,
    },
    Fail {
        witness: Vec<f64>,
        starts: usize,
    },
}

impl RadiusVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RadiusVerdict::Pass { .. })
    }
}

/// The interval `epsilon` was chosen from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBracket {
    /// `max(|ambient critical values|, AMBIENT_FLOOR)`.
    pub lower: f64,
    /// Smallest positive sphere critical value.
    pub upper: f64,
    pub ambient_values: Vec<f64>,
    /// `geometric_mean` or `half_sphere_max`.
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilnorData {
    pub delta: f64,
    pub epsilon: f64,
    pub t: PerturbationParams,
    pub delta_check: RadiusVerdict,
    pub epsilon_rationale: EpsilonBracket,
    /// Epsilon was picked after the perturbation rather than before it.
    pub epsilon_selected_after_perturbation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CircleStatus {
    NoViolationFound,
    Violation {
        point: Vec<f64>,
        direction: Vec<f64>,
        min_value_on_circle: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreatCircleVerdict {
    pub status: CircleStatus,
    pub samples_used: usize,
    /// The hypothesis is claimed to hold automatically for one or two sphere dimensions.
    pub automatic: bool,
}

impl GreatCircleVerdict {
    pub fn violated(&self) -> bool {
        matches!(self.status, CircleStatus::Violation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleConfig {
    pub circles: usize,
    pub grid: usize,
    pub refine_grid: usize,
    pub seed: u64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        CircleConfig {
            circles: 512,
            grid: 720,
            refine_grid: 10_000,
            seed: 0,
        }
    }
}

/// Critical points of `f_t` in the closed ball of radius `delta`.
pub fn ambient_critical_points(
    f_t: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Vec<AmbientPoint> {
    let pf = PolyFn::new(f_t);
    let tol = 1e-10 * (1.0 + f_t.coefficient_scale());
    let opts = NewtonOptions {
        max_iter: cfg.newton_max_iter.max(100),
        tol,
    };
    let starts = ball_points(f_t.nvars(), cfg.num_starts, delta, cfg.seed ^ 0xa5a5);
    let found: Vec<Option<AmbientPoint>> = starts
        .par_iter()
        .map(|s| {
            let res = newton::solve(DVector::from_row_slice(s), opts, |z| {
                let x = z.as_slice();
                (pf.gradient(x), pf.hessian(x))
            })?;
            let x: Vec<f64> = res.z.iter().copied().collect();
            (norm(&x) <= delta * (1.0 + 1e-9)).then(|| AmbientPoint {
                value: pf.value(&x),
                location: x,
            })
        })
        .collect();
    let mut kept: Vec<AmbientPoint> = Vec::new();
    for p in found.into_iter().flatten() {
        let dup = kept.iter().any(|q| {
            let d: Vec<f64> = p
                .location
                .iter()
                .zip(&q.location)
                .map(|(a, b)| a - b)
                .collect();
            norm(&d) < cfg.dedup_radius.max(1e-6 * delta)
        });
        if !dup {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.value.total_cmp(&b.value));
    kept
}

/// Falsification search for points of `{f = 0}` in the punctured ball where
/// `grad f` is parallel to `x`.
pub fn check_milnor_radius(f: &Polynomial, delta: f64, cfg: &SolverConfig) -> RadiusVerdict {
    let pf = PolyFn::new(f);
    let d = f.nvars();
    let tol = 1e-12 * (1.0 + f.coefficient_scale());
    let r_min = 1e-3 * delta;
    let opts = NewtonOptions {
        max_iter: cfg.newton_max_iter.max(100),
        tol,
    };
    let starts = ball_points(d, cfg.num_starts, delta, cfg.seed ^ 0x5eed);
    let witnesses: Vec<Option<Vec<f64>>> = starts
        .par_iter()
        .map(|s| {
            let g = pf.gradient(s);
            let mu0 = dot(s, g.as_slice()) / dot(s, s).max(f64::MIN_POSITIVE);
            let mut z0 = DVector::zeros(d + 1);
            z0.rows_mut(0, d).copy_from_slice(s);
            z0[d] = mu0;
            let res = newton::solve(z0, opts, |z| {
                let x = &z.as_slice()[..d];
                let mu = z[d];
                let g = pf.gradient(x);
                let h = pf.hessian(x);
                let mut r = DVector::zeros(d + 1);
                let mut j = nalgebra::DMatrix::zeros(d + 1, d + 1);
                for i in 0..d {
                    r[i] = g[i] - mu * x[i];
                    for k in 0..d {
                        j[(i, k)] = h[(i, k)];
                    }
                    j[(i, i)] -= mu;
                    j[(i, d)] = -x[i];
                    j[(d, i)] = g[i];
                }
                r[d] = pf.value(x);
                (r, j)
            })?;
            let x: Vec<f64> = res.z.iter().take(d).copied().collect();
            let r = norm(&x);
            (r > r_min && r <= delta * (1.0 + 1e-9)).then_some(x)
        })
        .collect();
    match witnesses.into_iter().flatten().next() {
        Some(witness) => RadiusVerdict::Fail {
            witness,
            starts: starts.len(),
        },
        None => RadiusVerdict::Pass {
            starts: starts.len(),
        },
    }
}

/// Picks `epsilon = sqrt(a * b)` strictly inside `(a, b)`.
///
/// `sphere_max` is the sampled maximum of `f_t` on the sphere; it is only
/// consulted when no sphere critical point has a positive value.
pub fn select_epsilon(
    sphere_points: &[CriticalPoint],
    ambient_values: &[f64],
    sphere_max: Option<f64>,
) -> Result<(f64, EpsilonBracket), FibreError> {
    let lower = ambient_values
        .iter()
        .map(|v| v.abs())
        .fold(AMBIENT_FLOOR, f64::max);
    let min_positive = sphere_points
        .iter()
        .map(|p| p.value)
        .filter(|&v| v > 0.0)
        .min_by(f64::total_cmp);
    let (upper, eps, rule) = match (min_positive, sphere_max) {
        (Some(b), _) => (b, (lower * b).sqrt(), "geometric_mean"),
        (None, Some(m)) if m > 0.0 => (m, 0.5 * m, "half_sphere_max"),
        _ => return Err(FibreError::EmptyPositiveFibre),
    };
    if !(lower < upper && eps > lower && eps < upper) {
        return Err(FibreError::BandEmpty { lower, upper });
    }
    Ok((
        eps,
        EpsilonBracket {
            lower,
            upper,
            ambient_values: ambient_values.to_vec(),
            rule: rule.into(),
        },
    ))
}

/// Points above `epsilon` (positive) or below `-epsilon` (negative).
pub fn filter_fibre(points: &[CriticalPoint], epsilon: f64, sign: Sign) -> Vec<CriticalPoint> {
    points
        .iter()
        .filter(|p| match sign {
            Sign::Positive => p.value > epsilon,
            Sign::Negative => p.value < -epsilon,
        })
        .cloned()
        .collect()
}

fn circle_point(p: &[f64], v: &[f64], delta: f64, theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    p.iter()
        .zip(v)
        .map(|(a, b)| delta * (a * c + b * s))
        .collect()
}

/// Minimum of `f` over `m` equally spaced points of the great circle through
/// unit vectors `p_hat` and `v_hat` (orthonormal).
pub fn circle_minimum(pf: &PolyFn, p_hat: &[f64], v_hat: &[f64], delta: f64, m: usize) -> f64 {
    (0..m)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / m as f64;
            pf.value(&circle_point(p_hat, v_hat, delta, th))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Searches for a great circle lying entirely in `{f_t >= epsilon} ∩ S_delta`.
pub fn great_circle_check(
    f_t: &Polynomial,
    delta: f64,
    epsilon: f64,
    cfg: &CircleConfig,
) -> GreatCircleVerdict {
    let pf = PolyFn::new(f_t);
    let d = f_t.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gauss =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(rng)).collect() };
    let mut pairs = Vec::with_capacity(cfg.circles);
    let max_draws = cfg.circles * 200;
    let mut draws = 0;
    while pairs.len() < cfg.circles && draws < max_draws {
        draws += 1;
        let p = crate::sampling::normalize(gauss(&mut rng));
        let at: Vec<f64> = p.iter().map(|x| x * delta).collect();
        if pf.value(&at) < epsilon {
            continue;
        }
        let mut v = gauss(&mut rng);
        let along = dot(&v, &p);
        for (vi, pi) in v.iter_mut().zip(&p) {
            *vi -= along * pi;
        }
        if norm(&v) < 1e-12 {
            continue;
        }
        pairs.push((p, crate::sampling::normalize(v)));
    }
    let hits: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(p, v)| {
            let coarse = circle_minimum(&pf, p, v, delta, cfg.grid);
            let slack = 1e-3 * (1.0 + epsilon.abs());
            if coarse <= epsilon - slack {
                return None;
            }
            let fine = circle_minimum(&pf, p, v, delta, cfg.refine_grid);
            (fine > epsilon).then_some(fine)
        })
        .collect();
    let status = hits
        .iter()
        .zip(&pairs)
        .find_map(|(h, (p, v))| {
            h.map(|min| CircleStatus::Violation {
                point: p.iter().map(|x| x * delta).collect(),
                direction: v.clone(),
                min_value_on_circle: min,
            })
        })
        .unwrap_or(CircleStatus::NoViolationFound);
    GreatCircleVerdict {
        status,
        samples_used: pairs.len(),
        automatic: d <= 3,
    }
}

/// Largest sampled value of `f` on the sphere.
pub fn sampled_sphere_max(f: &Polynomial, delta: f64, samples: usize, seed: u64) -> f64 {
    let pf = PolyFn::new(f);
    unit_sphere_points(f.nvars(), samples, seed)
        .iter()
        .map(|u| {
            let x: Vec<f64> = u.iter().map(|c| c * delta).collect();
            pf.value(&x)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Looks for zeros of `f` on spheres of radius `delta`, `delta/2`, `delta/4`.
/// Returns a witness point on a sign change (or a near-zero sample).
pub fn find_zero_locus_point(f: &Polynomial, delta: f64, seed: u64) -> Option<Vec<f64>> {
    let pf = PolyFn::new(f);
    let d = f.nvars();
    let dirs = unit_sphere_points(d, 4000usize.max(200 * d), seed);
    for r in [delta, 0.5 * delta, 0.25 * delta] {
        let pts: Vec<Vec<f64>> = dirs
            .iter()
            .map(|u| u.iter().map(|c| c * r).collect())
            .collect();
        let vals: Vec<f64> = pts.iter().map(|x| pf.value(x)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(k) = vals.iter().position(|v| v.abs() <= 1e-9 * scale) {
            return Some(pts[k].clone());
        }
        let pos = vals.iter().position(|&v| v > 0.0);
        let neg = vals.iter().position(|&v| v < 0.0);
        if let (Some(a), Some(b)) = (pos, neg) {
            // bisect along the great-circle arc between the two samples
            let (mut lo, mut hi) = (pts[b].clone(), pts[a].clone());
            for _ in 0..60 {
                let mid: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| 0.5 * (x + y)).collect();
                let n = norm(&mid);
                if n == 0.0 {
                    break;
                }
                let mid: Vec<f64> = mid.iter().map(|x| x * r / n).collect();
                if pf.value(&mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
    }
    None
}

/// Singular points of `{f = 0}` away from the origin inside the ball.
pub fn find_off_origin_singular_point(
    f: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Option<Vec<f64>> {
    let tol = 1e-9 * (1.0 + f.coefficient_scale());
    ambient_critical_points(f, delta, cfg)
        .into_iter()
        .find(|p| norm(&p.location) > 1e-3 * delta && p.value.abs() < tol)
        .map(|p| p.location)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn cp(value: f64) -> CriticalPoint {
        CriticalPoint {
            location: vec![1.0, 0.0],
            value,
            multiplier: 0.0,
            tangent_spectrum: vec![-1.0],
            morse_index: Some(1),
            degenerate: false,
            residual: 0.0,
        }
    }

    fn small_cfg(dim: usize) -> SolverConfig {
        let mut c = SolverConfig::for_problem(dim, 1.0);
        c.num_starts = 300;
        c
    }

    #[test]
    fn milnor_radius_passes_for_cusp_and_cone() {
        let cusp = Polynomial::parse("x^3 - y^2", &vars(&["x", "y"])).unwrap();
        assert!(check_milnor_radius(&cusp, 1.0, &small_cfg(2)).passed());
        let cone = Polynomial::parse("x^2 + y^2 - z^2", &vars(&["x", "y", "z"])).unwrap();
        assert!(check_milnor_radius(&cone, 1.0, &small_cfg(3)).passed());
    }

    #[test]
    fn milnor_radius_detects_planted_tangency() {
        // circle of radius 0.4 centred at (0.6, 0) touches the unit circle at (1, 0)
        let xy = vars(&["x", "y"]);
        let f = Polynomial::parse("(x^3 - y^2)*((x - 0.6)^2 + y^2 - 0.16)", &xy).unwrap();
        match check_milnor_radius(&f, 1.0, &small_cfg(2)) {
            RadiusVerdict::Fail { witness, .. } => {
                assert!(f.evaluate(&witness).unwrap().abs() < 1e-9);
                let g = f.gradient();
                let gx = g.entries[0].evaluate(&witness).unwrap();
                let gy = g.entries[1].evaluate(&witness).unwrap();
                assert!((gx * witness[1] - gy * witness[0]).abs() < 1e-9);
                assert!(norm(&witness) > 1e-3 && norm(&witness) <= 1.0 + 1e-9);
            }
            v => panic!("expected a witness, got {v:?}"),
        }
    }

    #[test]
    fn epsilon_for_perturbed_cusp() {
        let f1 = Polynomial::parse("x^3 - y^2 + 3*x", &vars(&["x", "y"])).unwrap();
        let ambient = ambient_critical_points(&f1, 1.0, &small_cfg(2));
        assert!(ambient.is_empty());
        let (eps, bracket) = select_epsilon(&[cp(-4.0), cp(4.0)], &[], None).unwrap();
        assert!((eps - (1e-12f64 * 4.0).sqrt()).abs() < 1e-18);
        assert_eq!((bracket.lower, bracket.upper), (1e-12, 4.0));
        assert!(bracket.lower < eps && eps < bracket.upper);
    }

    #[test]
    fn epsilon_for_tilted_cone() {
        let f = Polynomial::parse("x^2 + y^2 - z^2 - 1/10*x", &vars(&["x", "y", "z"])).unwrap();
        let ambient = ambient_critical_points(&f, 1.0, &small_cfg(3));
        assert_eq!(ambient.len(), 1);
        assert!((ambient[0].location[0] - 0.05).abs() < 1e-12);
        assert!((ambient[0].value + 1.0 / 400.0).abs() < 1e-14);
        let values: Vec<f64> = ambient.iter().map(|a| a.value).collect();
        let (eps, bracket) = select_epsilon(&[cp(0.9), cp(1.1), cp(-1.0)], &values, None).unwrap();
        assert!((bracket.lower - 0.0025).abs() < 1e-14);
        assert_eq!(bracket.upper, 0.9);
        assert!((eps - (0.0025f64 * 0.9).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn epsilon_errors() {
        assert_eq!(
            select_epsilon(&[cp(-1.0), cp(-0.5)], &[], None),
            Err(FibreError::EmptyPositiveFibre)
        );
        assert_eq!(
            select_epsilon(&[cp(-1.0)], &[], Some(-0.2)),
            Err(FibreError::EmptyPositiveFibre)
        );
        assert!(matches!(
            select_epsilon(&[cp(0.01)], &[0.5], None),
            Err(FibreError::BandEmpty { .. })
        ));
        let (eps, b) = select_epsilon(&[cp(-1.0)], &[], Some(0.6)).unwrap();
        assert_eq!((eps, b.rule.as_str()), (0.3, "half_sphere_max"));
    }

    #[test]
    fn fibre_filtering_partitions() {
        let pts = vec![cp(-4.0), cp(-0.001), cp(0.0), cp(0.005), cp(4.0)];
        let pos = filter_fibre(&pts, 0.01, Sign::Positive);
        let neg = filter_fibre(&pts, 0.01, Sign::Negative);
        assert_eq!(pos.iter().map(|p| p.value).collect::<Vec<_>>(), vec![4.0]);
        assert_eq!(neg.iter().map(|p| p.value).collect::<Vec<_>>(), vec![-4.0]);
        let mid = pts.iter().filter(|p| p.value.abs() <= 0.01).count();
        assert_eq!(pos.len() + neg.len() + mid, pts.len());
        assert!(filter_fibre(&[], 0.01, Sign::Positive).is_empty());
    }

    #[test]
    fn great_circles_on_the_circle_are_never_violated() {
        let xy = vars(&["x", "y"]);
        let f1 = Polynomial::parse("x^3 - y^2 + 3*x", &xy).unwrap();
        let v = great_circle_check(&f1, 1.0, 0.01, &CircleConfig::default());
        assert!(!v.violated());
        assert!(v.automatic);
        assert!(v.samples_used > 0);
        let saddle = Polynomial::parse("x^2 - y^2", &xy).unwrap();
        assert!(!great_circle_check(&saddle, 1.0, 0.01, &CircleConfig::default()).violated());
    }

    #[test]
    fn cone_equator_violates() {
        let cone = Polynomial::parse("x^2 + y^2 - z^2", &vars(&["x", "y", "z"])).unwrap();
        let v = great_circle_check(&cone, 1.0, 0.01, &CircleConfig::default());
        assert!(v.automatic);
        let CircleStatus::Violation {
            point,
            direction,
            min_value_on_circle,
        } = v.status
        else {
            panic!("expected a violation");
        };
        assert!(min_value_on_circle > 0.01);
        let pf = PolyFn::new(&cone);
        let p_hat: Vec<f64> = point.iter().map(|x| x / norm(&point)).collect();
        assert!(circle_minimum(&pf, &p_hat, &direction, 1.0, 10_000) > 0.01);
        // the equator itself
        let m = circle_minimum(&pf, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1.0, 720);
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_locus_and_singular_points() {
        let xy = vars(&["x", "y"]);
        let cusp = Polynomial::parse("x^3 - y^2", &xy).unwrap();
        let w = find_zero_locus_point(&cusp, 1.0, 0).unwrap();
        assert!(cusp.evaluate(&w).unwrap().abs() < 1e-12);
        let definite = Polynomial::parse("x^2 + y^2", &xy).unwrap();
        assert!(find_zero_locus_point(&definite, 1.0, 0).is_none());
        assert!(find_off_origin_singular_point(&cusp, 1.0, &small_cfg(2)).is_none());
        let lines = Polynomial::parse("(x^2 - y^2)^2", &xy).unwrap();
        assert!(find_off_origin_singular_point(&lines, 1.0, &small_cfg(2)).is_some());
    }
}
