//! Deterministic point sets on spheres and balls used as solver starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut k: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % b) as f64 * f;
        k /= b;
        f *= inv;
    }
    r
}

/// `count` unit vectors in `R^dim`.
///
/// Uniform angles on the circle, a golden-angle spiral on the 2-sphere, and
/// a randomly shifted Halton sequence pushed through Box-Muller above that.
/// The seed only rotates or shifts the pattern.
pub fn unit_sphere_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match dim {
        0 => Vec::new(),
        1 => (0..count)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => {
            let offset: f64 = rng.random::<f64>() * 2.0 * PI / count.max(1) as f64;
            (0..count)
                .map(|k| {
                    let th = offset + 2.0 * PI * k as f64 / count as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect()
        }
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let offset: f64 = rng.random::<f64>() * 2.0 * PI;
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = offset + golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let npairs = dim.div_ceil(2);
            let shift: Vec<f64> = (0..2 * npairs).map(|_| rng.random::<f64>()).collect();
            (0..count)
                .map(|k| {
                    let mut v = Vec::with_capacity(2 * npairs);
                    for j in 0..npairs {
                        let base_a = PRIMES[(2 * j) % PRIMES.len()];
                        let base_b = PRIMES[(2 * j + 1) % PRIMES.len()];
                        let u1 = (radical_inverse(k as u64 + 1, base_a) + shift[2 * j]).fract();
                        let u2 = (radical_inverse(k as u64 + 1, base_b) + shift[2 * j + 1]).fract();
                        let rad = (-2.0 * u1.max(1e-300).ln()).sqrt();
                        v.push(rad * (2.0 * PI * u2).cos());
                        v.push(rad * (2.0 * PI * u2).sin());
                    }
                    v.truncate(dim);
                    normalize(v)
                })
                .collect()
        }
    }
}

/// Points inside the ball of radius `radius`: sphere directions at radii
/// spread so that the count per shell grows with volume.
pub fn ball_points(dim: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let dirs = unit_sphere_points(dim, count, seed);
    dirs.into_iter()
        .enumerate()
        .map(|(k, d)| {
            let u = radical_inverse(k as u64 + 1, 2);
            let r = radius * u.powf(1.0 / dim as f64);
            d.into_iter().map(|x| x * r).collect()
        })
        .collect()
}

pub fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        let mut e = vec![0.0; v.len()];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        return e;
    }
    v.into_iter().map(|x| x / n).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
