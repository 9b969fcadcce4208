//! Mesh oracle invariants on the reference polynomials.

use std::collections::BTreeMap;

use milnor_core::homology::HomologyReport;
use milnor_core::oracle::{compare, extract_fibre, relative_homology_mesh, MeshComplex};
use milnor_core::poly::PolyFn;
use milnor_core::Polynomial;

struct Case {
    poly: &'static str,
    vars: &'static [&'static str],
    level: f64,
    resolution: f64,
    ranks: &'static [(usize, usize)],
}

const SUITE: &[Case] = &[
    Case {
        poly: "x^3 - y^2",
        vars: &["x", "y"],
        level: 0.01,
        resolution: 1.0 / 128.0,
        ranks: &[(1, 1)],
    },
    Case {
        poly: "x^2 - y^2",
        vars: &["x", "y"],
        level: 0.1,
        resolution: 1.0 / 128.0,
        ranks: &[(1, 2)],
    },
    Case {
        poly: "x^3 - 3*x*y^2",
        vars: &["x", "y"],
        level: 0.05,
        resolution: 1.0 / 128.0,
        ranks: &[(1, 3)],
    },
    Case {
        poly: "x^2 + y^2 - z^2",
        vars: &["x", "y", "z"],
        level: 0.1,
        resolution: 1.0 / 48.0,
        ranks: &[(1, 1), (2, 1)],
    },
];

fn poly(c: &Case) -> Polynomial {
    let vars: Vec<String> = c.vars.iter().map(|s| s.to_string()).collect();
    Polynomial::parse(c.poly, &vars).unwrap()
}

fn mesh(c: &Case, resolution: f64) -> (MeshComplex, HomologyReport) {
    let m = extract_fibre(&poly(c), c.level, 1.0, resolution).unwrap();
    let h = relative_homology_mesh(&m).unwrap();
    (m, h)
}

#[test]
fn ranks_match_expected_and_are_resolution_stable() {
    for c in SUITE {
        let expected: BTreeMap<usize, usize> = c.ranks.iter().copied().collect();
        let (_, coarse) = mesh(c, c.resolution);
        let (_, fine) = mesh(c, c.resolution / 2.0);
        assert_eq!(coarse.ranks, expected, "{}", c.poly);
        assert_eq!(fine.ranks, expected, "{} at half resolution", c.poly);
        assert!(coarse.torsion.is_empty() && fine.torsion.is_empty());
    }
}

#[test]
fn euler_characteristic_is_consistent() {
    for c in SUITE {
        let (m, h) = mesh(c, c.resolution);
        assert_eq!(m.relative_euler(), h.euler_rel, "{}", c.poly);
        assert_eq!(h.euler_rel, h.alternating_rank_sum(), "{}", c.poly);
    }
}

#[test]
fn vertices_sit_on_the_level_set_and_boundary_on_the_sphere() {
    for c in SUITE {
        let (m, _) = mesh(c, c.resolution);
        let pf = PolyFn::new(&poly(c));
        for (i, v) in m.vertices.iter().enumerate().step_by(7) {
            let grad_bound = pf.gradient(v).amax().max(1.0);
            let err = (pf.value(v) - c.level).abs();
            assert!(
                err < 10.0 * m.resolution * grad_bound,
                "{} vertex {i}: {err}",
                c.poly
            );
        }
        for &b in &m.boundary_vertices {
            let r: f64 = m.vertices[b].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 2.0 * m.resolution);
        }
        m.check_manifold().unwrap();
    }
}

#[test]
fn corrupted_indices_are_caught() {
    let c = &SUITE[1];
    let (_, mesh_h) = mesh(c, c.resolution);
    let wrong = HomologyReport {
        ranks: BTreeMap::from([(1, 1)]),
        torsion: vec![],
        euler_rel: -1,
        caveats: vec![],
        extrapolated_degrees: vec![],
    };
    let v = compare(&wrong, &mesh_h);
    assert!(!v.agree);
    assert_eq!(v.first_differing_degree, Some(1));
}
