//! Mesh-based homology oracle for two and three variables.
//!
//! The level set `{f_t = level}` is extracted on a uniform grid covering the
//! ball, clipped against the sphere of radius `delta`, and turned into a
//! simplicial complex whose boundary subcomplex is the part lying on the
//! sphere. `H_*(Φ, ∂Φ; Z)` is then computed from the relative chain complex.
//!
//! Curves use marching squares with the cell-centre value deciding saddle
//! cells. Surfaces use marching tetrahedra on the six-tetrahedron (Kuhn)
//! split of every cube, which keeps neighbouring cells consistent and the
//! output a manifold.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homology::{self, HomologyError, HomologyReport};
use crate::poly::{PolyFn, Polynomial};
use crate::sampling::norm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("mesh oracle supports two or three variables, got {0}")]
    UnsupportedDimension(usize),
    #[error("resolution {resolution} must be positive and at most delta/{max_ratio}")]
    BadResolution { resolution: f64, max_ratio: f64 },
    #[error("mesh is not a manifold with boundary: {0}")]
    NonManifold(String),
    #[error("mesh stayed non-manifold down to resolution {0}")]
    ResolutionFloor(f64),
    #[error("malformed OFF input: {0}")]
    Off(String),
    #[error(transparent)]
    Homology(#[from] HomologyError),
}

/// Resolution must be at most `delta / MAX_RESOLUTION_RATIO`.
pub const MAX_RESOLUTION_RATIO: f64 = 48.0;

pub fn default_resolution(nvars: usize, delta: f64) -> f64 {
    if nvars == 2 {
        delta / 128.0
    } else {
        delta / 48.0
    }
}

/// Smallest resolution tried by [`extract_fibre_adaptive`].
pub fn resolution_floor(nvars: usize, delta: f64) -> f64 {
    if nvars == 2 {
        delta / 1024.0
    } else {
        delta / 192.0
    }
}

/// A level inside `(lower, upper)` that leaves room on both sides for a
/// grid-resolved mesh: `sqrt(max(lower, upper / 64) * upper)`.
pub fn choose_mesh_level(lower: f64, upper: f64) -> f64 {
    (lower.max(upper / 64.0) * upper).sqrt()
}

/// Simplicial approximation of `f^{-1}(level) ∩ B_delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshComplex {
    /// Dimension of the fibre: 1 for curves, 2 for surfaces.
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    /// Top cells: segments (`dim = 1`) or triangles (`dim = 2`).
    pub cells: Vec<Vec<usize>>,
    pub boundary_vertices: Vec<usize>,
    /// Boundary segments (only for `dim = 2`).
    pub boundary_edges: Vec<[usize; 2]>,
    pub resolution: f64,
    pub level: f64,
    pub delta: f64,
}

impl MeshComplex {
    /// All edges of a surface mesh, each sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut set = BTreeSet::new();
        for c in &self.cells {
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    let (a, b) = (c[i].min(c[j]), c[i].max(c[j]));
                    set.insert([a, b]);
                }
            }
        }
        set.into_iter().collect()
    }

    /// Simplices of the complex and of its boundary subcomplex.
    pub fn simplices(&self) -> (Vec<Vec<usize>>, BTreeSet<Vec<usize>>) {
        let all = homology::close_under_faces(&self.cells);
        let mut sub: BTreeSet<Vec<usize>> =
            self.boundary_vertices.iter().map(|&v| vec![v]).collect();
        for e in &self.boundary_edges {
            sub.insert(vec![e[0].min(e[1]), e[0].max(e[1])]);
        }
        (all, sub)
    }

    /// Alternating count of cells not on the boundary.
    pub fn relative_euler(&self) -> i64 {
        let nv = self.vertices.len() as i64 - self.boundary_vertices.len() as i64;
        match self.dim {
            1 => nv - self.cells.len() as i64,
            _ => {
                let ne = self.edges().len() as i64 - self.boundary_edges.len() as i64;
                nv - ne + self.cells.len() as i64
            }
        }
    }

    /// Checks the manifold-with-boundary conditions.
    pub fn check_manifold(&self) -> Result<(), OracleError> {
        let boundary: BTreeSet<usize> = self.boundary_vertices.iter().copied().collect();
        for &v in &boundary {
            let r = norm(&self.vertices[v]);
            if (r - self.delta).abs() >= 2.0 * self.resolution {
                return Err(OracleError::NonManifold(format!(
                    "boundary vertex {v} is {r} from the centre"
                )));
            }
        }
        match self.dim {
            1 => {
                let mut degree = vec![0usize; self.vertices.len()];
                for c in &self.cells {
                    if c.len() != 2 || c[0] == c[1] {
                        return Err(OracleError::NonManifold("malformed segment".into()));
                    }
                    degree[c[0]] += 1;
                    degree[c[1]] += 1;
                }
                for (v, &d) in degree.iter().enumerate() {
                    let want = if boundary.contains(&v) { 1 } else { 2 };
                    if d != want {
                        return Err(OracleError::NonManifold(format!(
                            "vertex {v} has degree {d}, expected {want}"
                        )));
                    }
                }
            }
            _ => {
                let mut count: HashMap<[usize; 2], usize> = HashMap::new();
                for c in &self.cells {
                    if c.len() != 3 || c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                        return Err(OracleError::NonManifold("malformed triangle".into()));
                    }
                    for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[0], c[2])] {
                        *count.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
                    }
                }
                let bset: BTreeSet<[usize; 2]> = self
                    .boundary_edges
                    .iter()
                    .map(|e| [e[0].min(e[1]), e[0].max(e[1])])
                    .collect();
                for (e, &n) in &count {
                    let want = if bset.contains(e) { 1 } else { 2 };
                    if n != want {
                        return Err(OracleError::NonManifold(format!(
                            "edge {e:?} has {n} triangles, expected {want}"
                        )));
                    }
                }
                if let Some(e) = bset.iter().find(|e| !count.contains_key(*e)) {
                    return Err(OracleError::NonManifold(format!(
                        "boundary edge {e:?} is not in the mesh"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Root of `g` on the segment `a -> b` where `g(a)` and `g(b)` differ in sign.
fn edge_root(pf: &PolyFn, level: f64, a: &[f64], ga: f64, b: &[f64], gb: f64) -> Vec<f64> {
    let point = |s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut glo, mut ghi) = (ga, gb);
    let mut s = ga / (ga - gb);
    for _ in 0..40 {
        let gs = pf.value(&point(s)) - level;
        if gs == 0.0 {
            break;
        }
        if (gs < 0.0) == (glo < 0.0) {
            lo = s;
            glo = gs;
        } else {
            hi = s;
            ghi = gs;
        }
        if hi - lo < 1e-13 {
            break;
        }
        // regula falsi step, falling back to bisection when it stalls
        let rf = lo + glo / (glo - ghi) * (hi - lo);
        s = if rf > lo + 0.01 * (hi - lo) && rf < hi - 0.01 * (hi - lo) {
            rf
        } else {
            0.5 * (lo + hi)
        };
    }
    point(s.clamp(0.0, 1.0))
}

/// Parameter in `[0, 1]` where `a + s (b - a)` meets the sphere, for `a` inside and `b` outside.
fn sphere_crossing(a: &[f64], b: &[f64], delta: f64) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let aa: f64 = d.iter().map(|x| x * x).sum();
    let bb: f64 = 2.0 * a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
    let cc: f64 = a.iter().map(|x| x * x).sum::<f64>() - delta * delta;
    let disc = (bb * bb - 4.0 * aa * cc).max(0.0);
    let s = ((-bb + disc.sqrt()) / (2.0 * aa)).clamp(0.0, 1.0);
    let mut p: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + s * y).collect();
    // land exactly on the sphere
    let n = norm(&p);
    if n > 0.0 {
        p.iter_mut().for_each(|x| *x *= delta / n);
    }
    p
}

struct Grid {
    n: usize,
    lo: f64,
    h: f64,
    dim: usize,
    values: Vec<f64>,
}

impl Grid {
    fn new(pf: &PolyFn, level: f64, delta: f64, resolution: f64, dim: usize) -> Self {
        let lo = -(delta + 2.0 * resolution);
        let n = ((2.0 * -lo) / resolution).ceil() as usize;
        let h = (2.0 * -lo) / n as f64;
        let nodes = (n + 1).pow(dim as u32);
        let values = (0..nodes)
            .into_par_iter()
            .map(|id| pf.value(&Self::coords_of(id, n, lo, h, dim)) - level)
            .collect();
        Grid {
            n,
            lo,
            h,
            dim,
            values,
        }
    }

    fn coords_of(id: usize, n: usize, lo: f64, h: f64, dim: usize) -> Vec<f64> {
        let mut rest = id;
        (0..dim)
            .map(|_| {
                let i = rest % (n + 1);
                rest /= n + 1;
                lo + i as f64 * h
            })
            .collect()
    }

    fn coords(&self, id: usize) -> Vec<f64> {
        Self::coords_of(id, self.n, self.lo, self.h, self.dim)
    }

    fn id(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * (self.n + 1) + i)
    }
}

/// Collects level-set vertices keyed by the grid edge they lie on.
struct VertexPool<'a> {
    pf: &'a PolyFn,
    level: f64,
    grid: &'a Grid,
    by_edge: HashMap<(usize, usize), usize>,
    vertices: Vec<Vec<f64>>,
}

impl VertexPool<'_> {
    fn on_edge(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = self.by_edge.get(&key) {
            return v;
        }
        let (pa, pb) = (self.grid.coords(key.0), self.grid.coords(key.1));
        let (ga, gb) = (self.grid.values[key.0], self.grid.values[key.1]);
        let p = edge_root(self.pf, self.level, &pa, ga, &pb, gb);
        let id = self.vertices.len();
        self.vertices.push(p);
        self.by_edge.insert(key, id);
        id
    }
}

fn positive(g: f64) -> bool {
    g >= 0.0
}

fn march_squares(pf: &PolyFn, level: f64, grid: &Grid) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut pool = VertexPool {
        pf,
        level,
        grid,
        by_edge: HashMap::new(),
        vertices: Vec::new(),
    };
    let mut segs = Vec::new();
    let n = grid.n;
    for j in 0..n {
        for i in 0..n {
            let c = [
                grid.id(&[i, j]),
                grid.id(&[i + 1, j]),
                grid.id(&[i + 1, j + 1]),
                grid.id(&[i, j + 1]),
            ];
            let s: Vec<bool> = c.iter().map(|&k| positive(grid.values[k])).collect();
            // edges: 0 = c0-c1, 1 = c1-c2, 2 = c3-c2, 3 = c0-c3
            let edges = [(c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3])];
            let crossing: Vec<usize> = (0..4)
                .filter(|&e| {
                    let (a, b) = edges[e];
                    positive(grid.values[a]) != positive(grid.values[b])
                })
                .collect();
            let mut emit = |pool: &mut VertexPool, e1: usize, e2: usize| {
                let a = pool.on_edge(edges[e1].0, edges[e1].1);
                let b = pool.on_edge(edges[e2].0, edges[e2].1);
                segs.push(vec![a, b]);
            };
            match crossing.len() {
                2 => emit(&mut pool, crossing[0], crossing[1]),
                4 => {
                    let centre = [
                        grid.lo + (i as f64 + 0.5) * grid.h,
                        grid.lo + (j as f64 + 0.5) * grid.h,
                    ];
                    let centre_pos = positive(pf.value(&centre) - level);
                    if centre_pos == s[0] {
                        // corners 0 and 2 joined through the centre: cut off 1 and 3
                        emit(&mut pool, 0, 1);
                        emit(&mut pool, 2, 3);
                    } else {
                        emit(&mut pool, 3, 0);
                        emit(&mut pool, 1, 2);
                    }
                }
                _ => {}
            }
        }
    }
    (pool.vertices, segs)
}

/// Kuhn split of the unit cube: corner bit 0 is x, bit 1 is y, bit 2 is z.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn march_tetrahedra(
    pf: &PolyFn,
    level: f64,
    grid: &Grid,
    delta: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut pool = VertexPool {
        pf,
        level,
        grid,
        by_edge: HashMap::new(),
        vertices: Vec::new(),
    };
    let mut tris = Vec::new();
    let n = grid.n;
    let half_diag = grid.h * 3f64.sqrt() / 2.0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let corner: Vec<usize> = (0..8)
                    .map(|b| grid.id(&[i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)]))
                    .collect();
                let signs: Vec<bool> = corner.iter().map(|&c| positive(grid.values[c])).collect();
                if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
                    continue;
                }
                let centre = [
                    grid.lo + (i as f64 + 0.5) * grid.h,
                    grid.lo + (j as f64 + 0.5) * grid.h,
                    grid.lo + (k as f64 + 0.5) * grid.h,
                ];
                if norm(&centre) > delta + half_diag {
                    continue;
                }
                for tet in KUHN_TETS {
                    let v: Vec<usize> = tet.iter().map(|&t| corner[t]).collect();
                    let pos: Vec<usize> = (0..4).filter(|&q| signs[tet[q]]).collect();
                    let neg: Vec<usize> = (0..4).filter(|&q| !signs[tet[q]]).collect();
                    match pos.len() {
                        1 | 3 => {
                            let (lone, others) = if pos.len() == 1 {
                                (pos[0], &neg)
                            } else {
                                (neg[0], &pos)
                            };
                            let t: Vec<usize> = others
                                .iter()
                                .map(|&o| pool.on_edge(v[lone], v[o]))
                                .collect();
                            tris.push(t);
                        }
                        2 => {
                            let (a, b, c, d) = (v[pos[0]], v[pos[1]], v[neg[0]], v[neg[1]]);
                            let ac = pool.on_edge(a, c);
                            let ad = pool.on_edge(a, d);
                            let bd = pool.on_edge(b, d);
                            let bc = pool.on_edge(b, c);
                            tris.push(vec![ac, ad, bd]);
                            tris.push(vec![ac, bd, bc]);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    (pool.vertices, tris)
}

/// Vertices, cells, boundary vertices and boundary edges of a mesh under construction.
type MeshParts = (Vec<Vec<f64>>, Vec<Vec<usize>>, Vec<usize>, Vec<[usize; 2]>);

/// Clips segments or triangles to the open ball `|x| < delta`, adding
/// boundary vertices (and edges) where cells cross the sphere.
fn clip_to_ball(vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>, delta: f64) -> MeshParts {
    let inside: Vec<bool> = vertices.iter().map(|v| norm(v) < delta).collect();
    let mut out_vertices = vertices;
    let mut crossings: HashMap<(usize, usize), usize> = HashMap::new();
    let mut boundary_vertices = Vec::new();
    let mut cross = |a: usize, b: usize, verts: &mut Vec<Vec<f64>>, bv: &mut Vec<usize>| -> usize {
        // a inside, b outside
        *crossings.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let p = sphere_crossing(&verts[a], &verts[b], delta);
            verts.push(p);
            bv.push(verts.len() - 1);
            verts.len() - 1
        })
    };
    let mut out_cells = Vec::new();
    let mut boundary_edges = Vec::new();
    for c in cells {
        let ins: Vec<usize> = c.iter().copied().filter(|&v| inside[v]).collect();
        let outs: Vec<usize> = c.iter().copied().filter(|&v| !inside[v]).collect();
        match (c.len(), ins.len()) {
            (_, 0) => {}
            (2, 2) | (3, 3) => out_cells.push(c),
            (2, 1) => {
                let p = cross(ins[0], outs[0], &mut out_vertices, &mut boundary_vertices);
                out_cells.push(vec![ins[0], p]);
            }
            (3, 1) => {
                let a = ins[0];
                let pb = cross(a, outs[0], &mut out_vertices, &mut boundary_vertices);
                let pc = cross(a, outs[1], &mut out_vertices, &mut boundary_vertices);
                out_cells.push(vec![a, pb, pc]);
                boundary_edges.push([pb, pc]);
            }
            (3, 2) => {
                let (a, b, c_out) = (ins[0], ins[1], outs[0]);
                let pbc = cross(b, c_out, &mut out_vertices, &mut boundary_vertices);
                let pac = cross(a, c_out, &mut out_vertices, &mut boundary_vertices);
                out_cells.push(vec![a, b, pbc]);
                out_cells.push(vec![a, pbc, pac]);
                boundary_edges.push([pbc, pac]);
            }
            _ => unreachable!("cells are segments or triangles"),
        }
    }
    (out_vertices, out_cells, boundary_vertices, boundary_edges)
}

/// Drops unused vertices and renumbers.
fn compact(
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary_vertices: Vec<usize>,
    boundary_edges: Vec<[usize; 2]>,
) -> MeshParts {
    let mut map = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for c in &cells {
        for &v in c {
            if map[v] == usize::MAX {
                map[v] = kept.len();
                kept.push(vertices[v].clone());
            }
        }
    }
    let cells = cells
        .into_iter()
        .map(|c| c.into_iter().map(|v| map[v]).collect())
        .collect();
    let mut bv: Vec<usize> = boundary_vertices
        .into_iter()
        .filter(|&v| map[v] != usize::MAX)
        .map(|v| map[v])
        .collect();
    bv.sort_unstable();
    let be = boundary_edges
        .into_iter()
        .map(|[a, b]| [map[a], map[b]])
        .collect();
    (kept, cells, bv, be)
}

/// Meshes `f^{-1}(level) ∩ B_delta` at the given grid spacing.
pub fn extract_fibre(
    f: &Polynomial,
    level: f64,
    delta: f64,
    resolution: f64,
) -> Result<MeshComplex, OracleError> {
    let nvars = f.nvars();
    if !(2..=3).contains(&nvars) {
        return Err(OracleError::UnsupportedDimension(nvars));
    }
    if !(resolution > 0.0 && resolution <= delta / MAX_RESOLUTION_RATIO * (1.0 + 1e-12)) {
        return Err(OracleError::BadResolution {
            resolution,
            max_ratio: MAX_RESOLUTION_RATIO,
        });
    }
    let pf = PolyFn::new(f);
    let grid = Grid::new(&pf, level, delta, resolution, nvars);
    let (vertices, cells) = if nvars == 2 {
        march_squares(&pf, level, &grid)
    } else {
        march_tetrahedra(&pf, level, &grid, delta)
    };
    let (vertices, cells, bv, be) = clip_to_ball(vertices, cells, delta);
    let (vertices, cells, boundary_vertices, boundary_edges) = compact(vertices, cells, bv, be);
    let mesh = MeshComplex {
        dim: nvars - 1,
        vertices,
        cells,
        boundary_vertices,
        boundary_edges,
        resolution,
        level,
        delta,
    };
    mesh.check_manifold()?;
    Ok(mesh)
}

/// [`extract_fibre`], halving the resolution on non-manifold output.
pub fn extract_fibre_adaptive(
    f: &Polynomial,
    level: f64,
    delta: f64,
    resolution: f64,
) -> Result<MeshComplex, OracleError> {
    let floor = resolution_floor(f.nvars(), delta);
    let mut res = resolution;
    loop {
        match extract_fibre(f, level, delta, res) {
            Err(OracleError::NonManifold(_)) if res / 2.0 >= floor => res /= 2.0,
            Err(OracleError::NonManifold(_)) => return Err(OracleError::ResolutionFloor(res)),
            other => return other,
        }
    }
}

/// `H_*(M, ∂M; Z)` from the relative simplicial chain complex.
pub fn relative_homology_mesh(mesh: &MeshComplex) -> Result<HomologyReport, OracleError> {
    let (all, sub) = mesh.simplices();
    let complex = homology::relative_simplicial_complex(&all, &sub);
    let groups = homology::chain_homology(&complex)?;
    let mut report = homology::report_from_chain_homology(&groups);
    report.euler_rel = complex.euler_characteristic();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareVerdict {
    pub agree: bool,
    pub ranks_equal: bool,
    pub mesh_torsion_free: bool,
    pub euler_equal: bool,
    pub first_differing_degree: Option<usize>,
}

pub fn compare(morse: &HomologyReport, mesh: &HomologyReport) -> CompareVerdict {
    let degrees: BTreeSet<usize> = morse
        .ranks
        .keys()
        .chain(mesh.ranks.keys())
        .chain(mesh.torsion.iter().map(|t| &t.degree))
        .copied()
        .collect();
    let first = degrees
        .into_iter()
        .find(|&k| morse.rank(k) != mesh.rank(k) || mesh.torsion.iter().any(|t| t.degree == k));
    let ranks_equal = morse.ranks == mesh.ranks;
    let mesh_torsion_free = mesh.torsion.is_empty();
    let euler_equal = morse.euler_rel == mesh.euler_rel;
    CompareVerdict {
        agree: ranks_equal && mesh_torsion_free && euler_equal,
        ranks_equal,
        mesh_torsion_free,
        euler_equal,
        first_differing_degree: first,
    }
}

/// Serializes a mesh as OFF text with a trailing boundary comment block.
pub fn write_off(mesh: &MeshComplex) -> String {
    let mut s = String::new();
    s.push_str("OFF\n");
    let _ = writeln!(
        s,
        "# milnor fibre mesh: dim={} level={:e} delta={:e} resolution={:e}",
        mesh.dim, mesh.level, mesh.delta, mesh.resolution
    );
    let _ = writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.cells.len());
    for v in &mesh.vertices {
        let z = v.get(2).copied().unwrap_or(0.0);
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v[0], v[1], z);
    }
    for c in &mesh.cells {
        let ids: Vec<String> = c.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{} {}", c.len(), ids.join(" "));
    }
    s.push_str("# boundary\n");
    for v in &mesh.boundary_vertices {
        let _ = writeln!(s, "# v {v}");
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "# e {} {}", e[0], e[1]);
    }
    s
}

/// Parses the output of [`write_off`].
pub fn read_off(text: &str) -> Result<MeshComplex, OracleError> {
    let bad = |m: &str| OracleError::Off(m.to_string());
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut dim = None;
    let (mut level, mut delta, mut resolution) = (0.0, 0.0, 0.0);
    let mut body = Vec::new();
    let mut boundary_vertices = Vec::new();
    let mut boundary_edges = Vec::new();
    for line in lines {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# milnor fibre mesh:") {
            for kv in rest.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("bad header field"))?;
                let parse = |v: &str| v.parse::<f64>().map_err(|_| bad("bad header number"));
                match k {
                    "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad("bad dim"))?),
                    "level" => level = parse(v)?,
                    "delta" => delta = parse(v)?,
                    "resolution" => resolution = parse(v)?,
                    _ => {}
                }
            }
        } else if let Some(rest) = line.strip_prefix("# v ") {
            boundary_vertices.push(
                rest.trim()
                    .parse()
                    .map_err(|_| bad("bad boundary vertex"))?,
            );
        } else if let Some(rest) = line.strip_prefix("# e ") {
            let ids: Vec<usize> = rest
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad boundary edge")))
                .collect::<Result<_, _>>()?;
            if ids.len() != 2 {
                return Err(bad("boundary edge needs two ids"));
            }
            boundary_edges.push([ids[0], ids[1]]);
        } else if !line.is_empty() && !line.starts_with('#') {
            body.push(line);
        }
    }
    let dim = dim.ok_or_else(|| bad("missing dim"))?;
    let counts: Vec<usize> = body
        .first()
        .ok_or_else(|| bad("missing counts"))?
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| bad("bad counts")))
        .collect::<Result<_, _>>()?;
    let (nv, nc) = (counts[0], counts[1]);
    if body.len() != 1 + nv + nc {
        return Err(bad("line count does not match header"));
    }
    let vertices = body[1..=nv]
        .iter()
        .map(|l| {
            let mut v: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_, _>>()?;
            v.truncate(dim + 1);
            Ok(v)
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    let cells = body[nv + 1..]
        .iter()
        .map(|l| {
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad cell")))
                .collect::<Result<_, _>>()?;
            if ids.is_empty() || ids[0] + 1 != ids.len() {
                return Err(bad("cell length mismatch"));
            }
            Ok(ids[1..].to_vec())
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    for c in &cells {
        if c.len() != dim + 1 || c.iter().any(|&i| i >= nv) {
            return Err(bad("cell has wrong arity or out-of-range index"));
        }
        if (1..c.len()).any(|k| c[..k].contains(&c[k])) {
            return Err(bad("degenerate cell"));
        }
    }
    if boundary_vertices.iter().any(|&i| i >= nv)
        || boundary_edges.iter().flatten().any(|&i| i >= nv)
    {
        return Err(bad("boundary id out of range"));
    }
    Ok(MeshComplex {
        dim,
        vertices,
        cells,
        boundary_vertices,
        boundary_edges,
        resolution,
        level,
        delta,
    })
}
