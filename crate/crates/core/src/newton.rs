//! Damped Newton iteration for square nonlinear systems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once the infinity norm of the residual drops below this.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub z: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Runs Newton from `z0` on `system`, which returns the residual and its
/// Jacobian at a point. Steps are halved until the residual norm decreases.
/// A singular Jacobian falls back to the minimum-norm least-squares step.
/// Returns `None` when the iteration stalls or diverges before reaching `opts.tol`.
pub fn solve<F>(z0: DVector<f64>, opts: NewtonOptions, system: F) -> Option<NewtonResult>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut z = z0;
    let (mut r, mut jac) = system(&z);
    let mut norm = r.amax();
    for it in 0..opts.max_iter {
        if !norm.is_finite() {
            return None;
        }
        if norm < opts.tol {
            return Some(NewtonResult {
                z,
                residual: norm,
                iterations: it,
            });
        }
        let step = match jac.clone().lu().solve(&(-&r)) {
            Some(s) => s,
            // singular Jacobian: minimum-norm least-squares step
            None => jac
                .clone()
                .svd(true, true)
                .solve(&(-&r), 1e-12 * jac.amax())
                .ok()?,
        };
        if !step.iter().all(|s| s.is_finite()) {
            return None;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &z + &step * alpha;
            let (rt, jt) = system(&trial);
            let nt = rt.amax();
            if nt.is_finite() && nt < norm {
                z = trial;
                r = rt;
                jac = jt;
                norm = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm < opts.tol).then_some(NewtonResult {
        z,
        residual: norm,
        iterations: opts.max_iter,
    })
}
