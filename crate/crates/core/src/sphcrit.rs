//! Critical points of a polynomial restricted to the sphere of radius `delta`.
//!
//! Points are found by Newton's method on the Lagrange system
//! `grad f(x) = lambda x`, `(|x|^2 - delta^2) / 2 = 0` started from a
//! low-discrepancy cover of the sphere. For two variables an angle sweep of
//! the circle with sign-change bisection is run as well, which makes the
//! search exhaustive there. Each point is classified by the spectrum of the
//! Lagrangian Hessian `Q^T (H - lambda I) Q` on the tangent space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::newton::{self, NewtonOptions};
use crate::poly::{PolyFn, Polynomial};
use crate::sampling::{dot, norm, unit_sphere_points};

/// Absolute bound on `||p| - delta|` for stored points.
pub const SPHERE_RESIDUAL_TOL: f64 = 1e-10;
/// Bound on `|grad f(p) - lambda p|_inf`, scaled by `1 + coefficient scale`.
pub const GRADIENT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SphCritError {
    #[error("sphere radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("polynomial is constant; every sphere point is critical")]
    ConstantPolynomial,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "degenerate critical point: tangent eigenvalue {eigenvalue:e} is within {tol:e} of zero"
    )]
    Degenerate { eigenvalue: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub num_starts: usize,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    pub dedup_radius: f64,
    pub seed: u64,
    /// Grid size of the angle sweep used for two variables.
    pub sweep_points: usize,
    /// Tangent eigenvalues with magnitude below this (times `1 + |B|`) are degenerate.
    pub degeneracy_tol: f64,
}

impl SolverConfig {
    /// Defaults for `dim` ambient variables on a sphere of radius `delta`.
    pub fn for_problem(dim: usize, delta: f64) -> Self {
        let n = dim.saturating_sub(1) as u32;
        SolverConfig {
            num_starts: 200 * 2usize.pow(n.min(12)),
            newton_max_iter: 60,
            newton_tol: 1e-12,
            dedup_radius: 1e-6 * delta,
            seed: 0,
            sweep_points: 1 << 14,
            degeneracy_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), SphCritError> {
        let bad = |m: &str| Err(SphCritError::InvalidConfig(m.into()));
        if self.num_starts == 0 || self.newton_max_iter == 0 || self.sweep_points == 0 {
            return bad("counts must be positive");
        }
        if !(self.newton_tol > 0.0 && self.dedup_radius > 0.0 && self.degeneracy_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.dedup_radius <= self.newton_tol {
            return bad("dedup_radius must exceed newton_tol");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub multiplier: f64,
    /// Eigenvalues of the restricted Hessian, ascending.
    pub tangent_spectrum: Vec<f64>,
    /// `None` when the point is degenerate.
    pub morse_index: Option<usize>,
    pub degenerate: bool,
    pub residual: f64,
}

impl CriticalPoint {
    /// Determinant of the restricted Hessian.
    pub fn restricted_det(&self) -> f64 {
        self.tangent_spectrum.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSearch {
    /// Sorted by value, ascending.
    pub points: Vec<CriticalPoint>,
    /// True when an exhaustive method (the circle sweep) contributed.
    pub exhaustive: bool,
    pub warnings: Vec<String>,
}

pub fn lagrange_multiplier(p: &[f64], g: &[f64], delta: f64) -> f64 {
    dot(p, g) / (delta * delta)
}

/// Orthonormal basis of the hyperplane orthogonal to `p`, as columns.
///
/// Uses the Householder reflection that swaps `p / |p|` with a coordinate axis.
pub fn tangent_basis(p: &[f64]) -> DMatrix<f64> {
    let d = p.len();
    let pn = norm(p);
    let u_hat: Vec<f64> = p.iter().map(|x| x / pn).collect();
    // reflect onto -e_0 or +e_0, whichever keeps u away from zero
    let sign = if u_hat[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = DVector::from_vec(u_hat);
    u[0] += sign;
    let uu = u.dot(&u);
    let reflector = DMatrix::<f64>::identity(d, d) - (&u * u.transpose()) * (2.0 / uu);
    reflector.columns(1, d - 1).into_owned()
}

/// `Q^T (H - lambda I) Q` for a given tangent basis `Q`.
pub fn project_hessian(hess: &DMatrix<f64>, multiplier: f64, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = hess.nrows();
    let shifted = hess - DMatrix::<f64>::identity(d, d) * multiplier;
    let b = basis.transpose() * shifted * basis;
    (&b + b.transpose()) * 0.5
}

/// Lagrangian Hessian of `f_t` restricted to the sphere through `p`.
pub fn restricted_hessian(f_t: &Polynomial, p: &[f64], multiplier: f64) -> DMatrix<f64> {
    let pf = PolyFn::new(f_t);
    project_hessian(&pf.hessian(p), multiplier, &tangent_basis(p))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_spectrum(b: &DMatrix<f64>) -> Vec<f64> {
    if b.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(b.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of negative eigenvalues; fails if any lies within `tol` of zero.
pub fn morse_index(spectrum: &[f64], tol: f64) -> Result<usize, SphCritError> {
    if let Some(&e) = spectrum.iter().find(|e| e.abs() <= tol) {
        return Err(SphCritError::Degenerate { eigenvalue: e, tol });
    }
    Ok(spectrum.iter().filter(|&&e| e < 0.0).count())
}

struct Problem<'a> {
    pf: &'a PolyFn,
    delta: f64,
    grad_tol: f64,
    cfg: &'a SolverConfig,
}

impl Problem<'_> {
    fn lagrange_system(&self, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.pf.dim();
        let x: Vec<f64> = z.iter().take(d).copied().collect();
        let lam = z[d];
        let g = self.pf.gradient(&x);
        let h = self.pf.hessian(&x);
        let mut r = DVector::zeros(d + 1);
        let mut j = DMatrix::zeros(d + 1, d + 1);
        for i in 0..d {
            r[i] = g[i] - lam * x[i];
            for k in 0..d {
                j[(i, k)] = h[(i, k)];
            }
            j[(i, i)] -= lam;
            j[(i, d)] = -x[i];
            j[(d, i)] = x[i];
        }
        r[d] = 0.5 * (dot(&x, &x) - self.delta * self.delta);
        (r, j)
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let n = norm(x);
        x.iter().map(|v| v * self.delta / n).collect()
    }

    fn residuals(&self, p: &[f64]) -> (f64, f64, f64) {
        let g = self.pf.gradient(p);
        let lam = lagrange_multiplier(p, g.as_slice(), self.delta);
        let tangential = p
            .iter()
            .zip(g.iter())
            .map(|(pi, gi)| (gi - lam * pi).abs())
            .fold(0.0, f64::max);
        (lam, tangential, (norm(p) - self.delta).abs())
    }

    /// Newton from a sphere point, followed by projection and polishing.
    fn solve_from(&self, start: &[f64]) -> Option<CriticalPoint> {
        let d = self.pf.dim();
        let g0 = self.pf.gradient(start);
        let lam0 = lagrange_multiplier(start, g0.as_slice(), self.delta);
        let mut z0 = DVector::zeros(d + 1);
        for i in 0..d {
            z0[i] = start[i];
        }
        z0[d] = lam0;
        let opts = NewtonOptions {
            max_iter: self.cfg.newton_max_iter,
            tol: self.grad_tol * 1e-4,
        };
        let sol = newton::solve(z0, opts, |z| self.lagrange_system(z)).or_else(|| {
            // accept a looser convergence and let polishing finish the job
            let loose = NewtonOptions {
                max_iter: self.cfg.newton_max_iter,
                tol: self.grad_tol * 0.1,
            };
            let mut z1 = DVector::zeros(d + 1);
            for i in 0..d {
                z1[i] = start[i];
            }
            z1[d] = lam0;
            newton::solve(z1, loose, |z| self.lagrange_system(z))
        })?;
        let x: Vec<f64> = sol.z.iter().take(d).copied().collect();
        if norm(&x) == 0.0 {
            return None;
        }
        let mut p = self.project(&x);
        let (mut lam, mut tang, mut sph) = self.residuals(&p);
        for _ in 0..4 {
            if tang < self.grad_tol * 1e-3 {
                break;
            }
            let mut z = DVector::zeros(d + 1);
            for i in 0..d {
                z[i] = p[i];
            }
            z[d] = lam;
            let (r, j) = self.lagrange_system(&z);
            let Some(step) = j.lu().solve(&(-r)) else {
                break;
            };
            let cand: Vec<f64> = (0..d).map(|i| z[i] + step[i]).collect();
            let cand = self.project(&cand);
            let (l2, t2, s2) = self.residuals(&cand);
            if t2 < tang {
                p = cand;
                lam = l2;
                tang = t2;
                sph = s2;
            } else {
                break;
            }
        }
        if !(tang < self.grad_tol && sph < SPHERE_RESIDUAL_TOL) {
            return None;
        }
        Some(self.classify(p, lam, tang + sph))
    }

    fn classify(&self, p: Vec<f64>, lam: f64, residual: f64) -> CriticalPoint {
        let b = project_hessian(&self.pf.hessian(&p), lam, &tangent_basis(&p));
        let spectrum = symmetric_spectrum(&b);
        let tol = self.cfg.degeneracy_tol * (1.0 + b.amax());
        let index = morse_index(&spectrum, tol).ok();
        CriticalPoint {
            value: self.pf.value(&p),
            location: p,
            multiplier: lam,
            tangent_spectrum: spectrum,
            morse_index: index,
            degenerate: index.is_none(),
            residual,
        }
    }

    fn sweep(&self) -> Vec<CriticalPoint> {
        let m = self.cfg.sweep_points;
        let delta = self.delta;
        let dtheta = |th: f64| {
            let (s, c) = th.sin_cos();
            let g = self.pf.gradient(&[delta * c, delta * s]);
            delta * (-s * g[0] + c * g[1])
        };
        let step = std::f64::consts::TAU / m as f64;
        let samples: Vec<f64> = (0..=m).map(|k| dtheta(k as f64 * step)).collect();
        let mut roots = Vec::new();
        for k in 0..m {
            let (a, b) = (samples[k], samples[k + 1]);
            if a == 0.0 {
                roots.push(k as f64 * step);
                continue;
            }
            if a.signum() == b.signum() || b == 0.0 {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (k as f64 * step, (k + 1) as f64 * step, a);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = dtheta(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
            .into_iter()
            .filter_map(|th| {
                let start = [delta * th.cos(), delta * th.sin()];
                self.solve_from(&start).or_else(|| {
                    // bisection already pins the angle; keep it if the residual is fine
                    let p = start.to_vec();
                    let (lam, tang, sph) = self.residuals(&p);
                    (tang < self.grad_tol && sph < SPHERE_RESIDUAL_TOL)
                        .then(|| self.classify(p, lam, tang + sph))
                })
            })
            .collect()
    }
}

/// Keeps one representative (smallest residual) per cluster of radius `radius`.
fn dedup(mut pts: Vec<CriticalPoint>, radius: f64) -> Vec<CriticalPoint> {
    pts.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    let mut kept: Vec<CriticalPoint> = Vec::new();
    for p in pts {
        let close = kept.iter().any(|q| {
            let d: f64 = p
                .location
                .iter()
                .zip(&q.location)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d < radius
        });
        if !close {
            kept.push(p);
        }
    }
    kept
}

fn sort_by_value(pts: &mut [CriticalPoint]) {
    pts.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| {
            a.location
                .iter()
                .zip(&b.location)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

fn check_inputs(f_t: &Polynomial, delta: f64, cfg: &SolverConfig) -> Result<(), SphCritError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(SphCritError::InvalidRadius(delta));
    }
    if f_t.is_constant() {
        return Err(SphCritError::ConstantPolynomial);
    }
    cfg.validate()
}

fn grad_tol(f_t: &Polynomial) -> f64 {
    GRADIENT_RESIDUAL_TOL * (1.0 + f_t.coefficient_scale())
}

/// Multi-start Newton only, without the circle sweep.
pub fn newton_critical_points(
    f_t: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Vec<CriticalPoint>, SphCritError> {
    check_inputs(f_t, delta, cfg)?;
    let pf = PolyFn::new(f_t);
    let problem = Problem {
        pf: &pf,
        delta,
        grad_tol: grad_tol(f_t),
        cfg,
    };
    let starts = unit_sphere_points(f_t.nvars(), cfg.num_starts, cfg.seed);
    let found: Vec<Option<CriticalPoint>> = starts
        .par_iter()
        .map(|u| {
            let s: Vec<f64> = u.iter().map(|x| x * delta).collect();
            problem.solve_from(&s)
        })
        .collect();
    let mut pts = dedup(found.into_iter().flatten().collect(), cfg.dedup_radius);
    sort_by_value(&mut pts);
    Ok(pts)
}

/// Circle sweep for two variables; empty for other dimensions.
pub fn angle_sweep(
    f_t: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Vec<CriticalPoint>, SphCritError> {
    check_inputs(f_t, delta, cfg)?;
    if f_t.nvars() != 2 {
        return Ok(Vec::new());
    }
    let pf = PolyFn::new(f_t);
    let problem = Problem {
        pf: &pf,
        delta,
        grad_tol: grad_tol(f_t),
        cfg,
    };
    let mut pts = dedup(problem.sweep(), cfg.dedup_radius);
    sort_by_value(&mut pts);
    Ok(pts)
}

pub fn find_critical_points(
    f_t: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<CriticalSearch, SphCritError> {
    let mut all = newton_critical_points(f_t, delta, cfg)?;
    let exhaustive = f_t.nvars() == 2;
    let mut warnings = Vec::new();
    if exhaustive {
        all.extend(angle_sweep(f_t, delta, cfg)?);
        if all.is_empty() {
            warnings.push(
                "no critical points found on the circle for a non-constant polynomial; \
                 search may be incomplete"
                    .to_string(),
            );
        }
    } else if f_t.nvars() > 2 {
        warnings.push("critical-point search is heuristic in three or more variables".into());
    }
    let mut points = dedup(all, cfg.dedup_radius);
    sort_by_value(&mut points);
    Ok(CriticalSearch {
        points,
        exhaustive,
        warnings,
    })
}
