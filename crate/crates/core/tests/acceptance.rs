//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use milnor_core::homology::{
    chain_homology, close_under_faces, relative_simplicial_complex, report_from_chain_homology,
    smith_normal_form, ChainComplex, HomologyReport, IntMatrix, SparseIntMatrix,
};
use milnor_core::pipeline::{analyze, Analysis, AnalysisConfig, FibreReport};
use milnor_core::poly::PolyFn;
use milnor_core::sphcrit::{
    self, find_critical_points, project_hessian, tangent_basis, SolverConfig,
    GRADIENT_RESIDUAL_TOL, SPHERE_RESIDUAL_TOL,
};
use milnor_core::Polynomial;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn run(
    poly: &str,
    vars: &[&str],
    seed: u64,
    t: Option<Vec<f64>>,
    oracle: bool,
) -> Result<Analysis, String> {
    let mut c = AnalysisConfig::new(poly, vars);
    c.seed = seed;
    c.t = t;
    c.oracle = oracle;
    analyze(&c).map_err(|e| format!("{poly}: {e}"))
}

fn ranks(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
    pairs.iter().copied().collect()
}

fn check_euler(h: &HomologyReport, what: &str) -> Result<(), String> {
    ensure!(
        h.euler_rel == h.alternating_rank_sum(),
        "{what}: euler_rel {} != alternating rank sum {}",
        h.euler_rel,
        h.alternating_rank_sum()
    );
    Ok(())
}

/// Shared checks for the line and cone singularities.
fn suite_case(
    poly: &str,
    vars: &[&str],
    seed: u64,
    indices: &[usize],
    expected: &[(usize, usize)],
) -> Result<Analysis, String> {
    let a = run(poly, vars, seed, None, true)?;
    let r = &a.envelope.fibres[0];
    let h = r.handles.as_ref().ok_or("no handle decomposition")?;
    ensure!(
        h.m == indices.len(),
        "{poly}: m = {} expected {}",
        h.m,
        indices.len()
    );
    ensure!(
        h.indices == indices,
        "{poly}: indices {:?} expected {indices:?}",
        h.indices
    );
    ensure!(
        r.homology.ranks == ranks(expected),
        "{poly}: ranks {:?}",
        r.homology.ranks
    );
    let o = r.oracle.as_ref().ok_or("oracle did not run")?;
    ensure!(
        o.verdict.agree,
        "{poly}: oracle disagrees, mesh ranks {:?}",
        o.homology.ranks
    );
    check_euler(&r.homology, poly)?;
    check_euler(&o.homology, poly)?;
    Ok(a)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let a = run("x^3 - y^2", &["x", "y"], 0, Some(vec![-3.0, 0.0]), true)?;
    let elapsed = start.elapsed().as_secs_f64();
    let r = &a.envelope.fibres[0];
    ensure!(
        r.fibre_points.len() == 1,
        "{} fibre points",
        r.fibre_points.len()
    );
    let p = &r.fibre_points[0];
    let dist = ((p.location[0] - 1.0).powi(2) + p.location[1].powi(2)).sqrt();
    ensure!(dist < 1e-6, "critical point at {:?}", p.location);
    ensure!(
        p.tangent_spectrum.len() == 1 && p.tangent_spectrum[0] < 0.0,
        "restricted Hessian spectrum {:?}",
        p.tangent_spectrum
    );
    ensure!(p.morse_index == Some(1), "index {:?}", p.morse_index);
    let h = r.handles.as_ref().ok_or("no handles")?;
    ensure!(h.describe() == "∂Φ ∪ D^1", "handles {}", h.describe());
    ensure!(
        r.homology.ranks == ranks(&[(1, 1)]),
        "ranks {:?}",
        r.homology.ranks
    );
    let o = r.oracle.as_ref().ok_or("oracle did not run")?;
    ensure!(o.verdict.agree, "oracle disagrees: {:?}", o.homology.ranks);
    ensure!(elapsed < 10.0, "runtime {elapsed:.2}s");
    check_euler(&r.homology, "cusp")?;
    Ok(format!(
        "cusp: one point at (1,0), eigenvalue {:.3}, index 1, H_1 = Z, oracle agrees, {elapsed:.2}s",
        p.tangent_spectrum[0]
    ))
}

fn criterion_2() -> Outcome {
    suite_case("x^2 - y^2", &["x", "y"], 0, &[1, 1], &[(1, 2)])?;
    Ok("x^2 - y^2: m = 2, indices {1,1}, H_1 = Z^2, oracle agrees".into())
}

fn criterion_3() -> Outcome {
    suite_case("x^3 - 3*x*y^2", &["x", "y"], 0, &[1, 1, 1], &[(1, 3)])?;
    Ok("x^3 - 3xy^2: m = 3, indices {1,1,1}, H_1 = Z^3, oracle agrees".into())
}

fn criterion_4() -> Outcome {
    let a = suite_case(
        "x^2 + y^2 - z^2",
        &["x", "y", "z"],
        7,
        &[1, 2],
        &[(1, 1), (2, 1)],
    )?;
    let r = &a.envelope.fibres[0];
    let gc = r
        .great_circle
        .as_ref()
        .ok_or("great circle check did not run")?;
    ensure!(gc.violated(), "no great-circle violation reported");
    ensure!(
        a.envelope.exit_code == 2,
        "exit code {}",
        a.envelope.exit_code
    );
    Ok("cone: indices {1,2}, H_1 = H_2 = Z, oracle agrees, great-circle violation, exit 2".into())
}

const SUITE: &[(&str, &[&str])] = &[
    ("x^3 - y^2", &["x", "y"]),
    ("x^2 - y^2", &["x", "y"]),
    ("x^3 - 3*x*y^2", &["x", "y"]),
    ("x^2 + y^2 - z^2", &["x", "y", "z"]),
];

fn criterion_5() -> Outcome {
    for (poly, vars) in SUITE {
        let a = run(poly, vars, 101, None, false)?;
        let b = run(poly, vars, 202, None, false)?;
        let (ra, rb) = (&a.envelope.fibres[0], &b.envelope.fibres[0]);
        ensure!(
            perturbation(ra) != perturbation(rb),
            "{poly}: seeds produced the same perturbation"
        );
        let ia = ra.handles.as_ref().map(|h| h.indices.clone());
        let ib = rb.handles.as_ref().map(|h| h.indices.clone());
        ensure!(ia == ib, "{poly}: indices {ia:?} vs {ib:?}");
        ensure!(
            ra.homology.ranks == rb.homology.ranks,
            "{poly}: rank tables differ"
        );
    }
    Ok("two seeds give identical index multisets and rank tables on all four polynomials".into())
}

fn perturbation(r: &FibreReport) -> Option<Vec<f64>> {
    r.milnor.as_ref().map(|m| m.t.t.clone())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_grad: f64 = 0.0;
    let mut worst_geo: f64 = 0.0;
    let mut points = 0;
    for (poly, vars) in SUITE {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let t: Vec<f64> = (0..vars.len())
            .map(|_| rng.random_range(-0.05..0.05))
            .collect();
        let f = Polynomial::parse(poly, &names).map_err(|e| e.to_string())?;
        let f_t = f.perturb_f64(&t).map_err(|e| e.to_string())?;
        let pf = PolyFn::new(&f_t);
        let n = vars.len();
        for _ in 0..200 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = pf.gradient(&x);
            let hess = pf.hessian(&x);
            for i in 0..n {
                let h = 1e-5 * (1.0 + x[i].abs());
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                let fd = (pf.value(&xp) - pf.value(&xm)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
                let fdh = (pf.gradient(&xp) - pf.gradient(&xm)) / (2.0 * h);
                for k in 0..n {
                    worst_grad =
                        worst_grad.max((fdh[k] - hess[(k, i)]).abs() / (1.0 + hess[(k, i)].abs()));
                }
            }
        }
        let cfg = SolverConfig::for_problem(n, 1.0);
        let grad_tol = GRADIENT_RESIDUAL_TOL * (1.0 + f_t.coefficient_scale());
        for p in find_critical_points(&f_t, 1.0, &cfg)
            .map_err(|e| e.to_string())?
            .points
        {
            points += 1;
            let r: f64 = p.location.iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure!(
                (r - 1.0).abs() < SPHERE_RESIDUAL_TOL,
                "{poly}: sphere residual {}",
                (r - 1.0).abs()
            );
            let g = pf.gradient(&p.location);
            let lam = sphcrit::lagrange_multiplier(&p.location, g.as_slice(), 1.0);
            let tang = p
                .location
                .iter()
                .zip(g.iter())
                .map(|(x, gi)| (gi - lam * x).abs())
                .fold(0.0, f64::max);
            ensure!(tang < grad_tol, "{poly}: gradient residual {tang}");
            let q = tangent_basis(&p.location);
            let eig = project_hessian(&pf.hessian(&p.location), lam, &q).symmetric_eigen();
            let h = 1e-4;
            for k in 0..eig.eigenvalues.len() {
                let mu = eig.eigenvalues[k];
                let v = &q * eig.eigenvectors.column(k);
                let curve = |s: f64| -> Vec<f64> {
                    p.location
                        .iter()
                        .zip(v.iter())
                        .map(|(a, b)| a * s.cos() + b * s.sin())
                        .collect()
                };
                let fd = (pf.value(&curve(h)) - 2.0 * pf.value(&p.location) + pf.value(&curve(-h)))
                    / (h * h);
                worst_geo = worst_geo.max((fd - mu).abs() / mu.abs().max(1.0));
            }
        }
    }
    ensure!(
        worst_grad < 1e-6,
        "finite-difference relative error {worst_grad:e}"
    );
    ensure!(
        worst_geo < 1e-4,
        "geodesic second-difference relative error {worst_geo:e}"
    );
    Ok(format!(
        "derivatives rel err {worst_grad:.1e}, geodesic rel err {worst_geo:.1e}, {points} critical points within residual bounds"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let (r, c) = (rng.random_range(1..7), rng.random_range(1..7));
        let rows: Vec<Vec<i64>> = (0..r)
            .map(|_| (0..c).map(|_| rng.random_range(-9..=9)).collect())
            .collect();
        let a = IntMatrix::from_rows(&rows);
        let s = smith_normal_form(&a);
        ensure!(s.u.mul(&a).mul(&s.v) == s.d, "trial {trial}: U A V != D");
        ensure!(
            s.u.mul(&s.u_inv) == IntMatrix::identity(r),
            "trial {trial}: U not unimodular"
        );
        ensure!(
            s.v.mul(&s.v_inv) == IntMatrix::identity(c),
            "trial {trial}: V not unimodular"
        );
        ensure!(s.d.is_diagonal(), "trial {trial}: D not diagonal");
        let f = s.invariant_factors();
        ensure!(
            f.iter().all(|x| x.is_positive()),
            "trial {trial}: negative factor"
        );
        ensure!(
            f.windows(2).all(|w| (&w[1] % &w[0]).is_zero()),
            "trial {trial}: divisibility chain broken"
        );
    }

    // circle: two vertices, two parallel edges
    let mut d1 = SparseIntMatrix::new(2, 2);
    for j in 0..2 {
        d1.push(0, j, -1);
        d1.push(1, j, 1);
    }
    let circle = ChainComplex {
        dims: vec![2, 2],
        boundaries: vec![d1],
    };
    let h = report_from_chain_homology(&chain_homology(&circle).map_err(|e| e.to_string())?);
    ensure!(
        h.ranks == ranks(&[(0, 1), (1, 1)]) && h.torsion.is_empty(),
        "circle: {:?}",
        h.ranks
    );
    check_euler(&h, "circle")?;

    // disc relative to its boundary
    let tops = vec![vec![0, 1, 2], vec![0, 2, 3], vec![0, 3, 1]];
    let rim: BTreeSet<Vec<usize>> = close_under_faces(&[vec![1, 2], vec![2, 3], vec![1, 3]])
        .into_iter()
        .collect();
    let disc = relative_simplicial_complex(&close_under_faces(&tops), &rim);
    let h = report_from_chain_homology(&chain_homology(&disc).map_err(|e| e.to_string())?);
    ensure!(
        h.ranks == ranks(&[(2, 1)]),
        "disc rel boundary: {:?}",
        h.ranks
    );
    check_euler(&h, "disc")?;

    // Klein bottle: one vertex, edges a and b, one face glued along a b a^-1 b
    let d1 = SparseIntMatrix::new(1, 2);
    let mut d2 = SparseIntMatrix::new(2, 1);
    d2.push(1, 0, 2);
    let klein = ChainComplex {
        dims: vec![1, 2, 1],
        boundaries: vec![d1, d2],
    };
    let h = report_from_chain_homology(&chain_homology(&klein).map_err(|e| e.to_string())?);
    ensure!(
        h.ranks == ranks(&[(0, 1), (1, 1)]),
        "Klein bottle ranks {:?}",
        h.ranks
    );
    ensure!(
        h.torsion.len() == 1 && h.torsion[0].degree == 1 && h.torsion[0].order == "2",
        "Klein bottle torsion {:?}",
        h.torsion
    );
    check_euler(&h, "Klein bottle")?;

    // Euler identity on every pipeline report, both sides
    for (poly, vars) in SUITE {
        let a = run(poly, vars, 3, None, true)?;
        for r in &a.envelope.fibres {
            check_euler(&r.homology, poly)?;
            if let Some(o) = &r.oracle {
                check_euler(&o.homology, poly)?;
            }
        }
    }
    Ok("SNF exact on 200 random matrices; circle Z, disc rel boundary Z in degree 2, Klein bottle Z + Z/2; Euler identity holds".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("1 cusp golden test", criterion_1),
        ("2 two-line singularity", criterion_2),
        ("3 three-line singularity", criterion_3),
        ("4 cone", criterion_4),
        ("5 perturbation stability", criterion_5),
        ("6 numerical property suite", criterion_6),
        ("7 homology engine suite", criterion_7),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 7 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
