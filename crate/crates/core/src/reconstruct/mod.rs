//! Convex embedding of cone metrics.
//!
//! Flat vertices are first removed from the intrinsic triangulation (they are
//! carried along as barycentric points), the remaining cone vertices are
//! realized by the variational solver, and the final mesh re-inserts every
//! removed vertex inside the planar faces of the realized polytope.

mod assemble;
mod embed;
mod variational;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolverFailure};
use crate::hull::{kabsch, ConvexHull, RigidMotion, Vec3};
use crate::intrinsic::{FlipRecord, IntrinsicMesh};
use crate::metric::{validate, ConeMetric};

/// Vertices whose defect is at most this are removed before solving.
const REMOVABLE_DEFECT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Newton continuation on apex distances with edge flips.
    Variational,
    /// Least squares on positions from a spectral start.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructOptions {
    pub method: Method,
    /// Largest admissible relative edge-length error.
    pub eps_len: f64,
    pub max_iters: usize,
    /// Bodies thinner than this fraction of their diameter are flagged degenerate.
    pub thickness_tol: f64,
    /// Fall back to least squares when the variational solver fails.
    pub fallback: bool,
    pub seed: u64,
    /// Random spread of the initial apex distances, as a fraction of half the
    /// shortest edge (at most 1; reduced further if the start is invalid).
    pub init_jitter: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            method: Method::Variational,
            eps_len: 1e-6,
            max_iters: 2000,
            thickness_tol: 1e-4,
            fallback: true,
            seed: 0,
            init_jitter: 0.0,
        }
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub flips: usize,
    pub cone_vertices: usize,
    pub max_residual: f64,
    pub initial_radius: Option<f64>,
    /// Why the variational solver was abandoned, when the fallback ran.
    pub variational_failure: Option<String>,
}

/// A convex polyhedral surface realizing a cone metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddedPolyhedron {
    /// One position per metric vertex, centered at the vertex centroid.
    pub positions: Vec<Vec3>,
    /// Outward-oriented triangles of the final mesh.
    pub triangles: Vec<[usize; 3]>,
    /// `neighbors[t][i]`: triangle across side `i` (corner `i` to `i + 1`) of `t`.
    pub neighbors: Vec<[usize; 3]>,
    /// Undirected edges of the final mesh with their intrinsic lengths.
    pub edges: Vec<[usize; 2]>,
    pub intrinsic_lengths: Vec<f64>,
    /// Relative length error per edge.
    pub residuals: Vec<f64>,
    pub flip_log: Vec<FlipRecord>,
    /// Metric vertex of each final vertex.
    pub provenance: Vec<usize>,
    /// Faces spanned by cone vertices only (the realized polytope's triangulation).
    pub coarse_triangles: Vec<[usize; 3]>,
    pub diameter: f64,
    pub min_width: f64,
    pub degenerate: bool,
    pub report: SolveReport,
}

/// Outcome of [`certify_convex`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub ok: bool,
    /// Largest distance of a vertex from the hull boundary.
    pub max_violation: f64,
    pub surface_area: f64,
    pub hull_area: f64,
    pub degenerate: bool,
}

/// Relative edge-length errors recomputed from positions.
pub fn edge_residuals(positions: &[Vec3], edges: &[[usize; 2]], lengths: &[f64]) -> Vec<f64> {
    edges.iter().zip(lengths).map(|(&[a, b], &l)| ((positions[a] - positions[b]).norm() - l).abs() / l).collect()
}

impl EmbeddedPolyhedron {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Total area of the final triangles.
    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| crate::hull::triangle_area(&self.positions[t[0]], &self.positions[t[1]], &self.positions[t[2]]))
            .sum()
    }

    /// Wavefront OBJ text: vertex lines then triangle lines (1-based).
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            s.push_str(&format!("v {:.12} {:.12} {:.12}\n", p.x, p.y, p.z));
        }
        for t in &self.triangles {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }
}

/// Realize a valid cone metric as a convex polyhedral surface.
pub fn reconstruct(m: &ConeMetric, opts: &ReconstructOptions) -> Result<EmbeddedPolyhedron> {
    let report = validate(m);
    if !report.ok {
        return Err(Error::Precondition(report.failures.join("; ")));
    }
    let nv = m.num_vertices();
    let mut mesh = IntrinsicMesh::new(nv, &m.triangles, &m.lengths, &m.neighbors)?;
    let defects = m.defects();
    let mut live = mesh.vertex_alive.iter().filter(|&&a| a).count();
    for _pass in 0..3 {
        let mut progress = false;
        for v in 0..nv {
            if live <= 4 {
                break;
            }
            if mesh.vertex_alive[v] && defects[v].abs() <= REMOVABLE_DEFECT && mesh.remove_flat_vertex(v) {
                live -= 1;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    mesh.make_delaunay();
    mesh.compact();

    let mut variational_failure = None;
    if opts.method == Method::Variational {
        let err = match solve_variational(mesh.clone(), opts).and_then(|e| finish(e, nv, opts)) {
            Ok(e) => return Ok(e),
            Err(err) => err,
        };
        if !opts.fallback {
            return Err(match err {
                Error::Solver(_) => err,
                other => Error::Solver(Box::new(SolverFailure {
                    reason: other.to_string(),
                    best_iterate: vec![],
                    residual_history: vec![],
                })),
            });
        }
        variational_failure = Some(err.to_string());
    }
    // Spectral start in 3D first; a planar start realizes doubly covered
    // (flat) bodies, which isometric flexes of a 3D start can fold.
    let mut last_err = None;
    for planar in [false, true] {
        let mut e = solve_least_squares(mesh.clone(), opts, planar)?;
        e.report.variational_failure = variational_failure.clone();
        match finish(e, nv, opts) {
            Ok(e) => return Ok(e),
            Err(err) => last_err = Some(err),
        }
    }
    Err(last_err.unwrap())
}

/// Intermediate result: cone positions on the final coarse mesh.
struct Partial {
    mesh: IntrinsicMesh,
    cone: Vec<Option<Vec3>>,
    report: SolveReport,
}

fn solve_variational(mesh: IntrinsicMesh, opts: &ReconstructOptions) -> Result<Partial> {
    let params =
        variational::VariationalParams { max_iters: opts.max_iters, tol: 1e-12, seed: opts.seed, init_jitter: opts.init_jitter };
    let sol = variational::solve(mesh, &params)?;
    let geom = variational::all_geometry(&sol.mesh, &sol.radii)
        .ok_or_else(|| Error::Precondition("degenerate pyramid at the variational solution".into()))?;
    let theta: Vec<Option<[f64; 3]>> = geom.iter().map(|g| g.map(|g| g.theta)).collect();
    let raw = embed::layout_from_dihedrals(&sol.mesh, &theta);
    let (verts, mut pos) = compact_positions(&sol.mesh, &raw)?;
    let edges = local_edges(&sol.mesh, &verts);
    let res = embed::polish(&mut pos, &edges, 30);
    let cone = expand(&verts, &pos, sol.mesh.vertex_alive.len());
    Ok(Partial {
        report: SolveReport {
            method: Method::Variational,
            iterations: sol.iterations,
            residual_history: sol.history,
            flips: sol.mesh.flip_log.len(),
            cone_vertices: verts.len(),
            max_residual: res,
            initial_radius: Some(sol.initial_radius),
            variational_failure: None,
        },
        mesh: sol.mesh,
        cone,
    })
}

fn solve_least_squares(mesh: IntrinsicMesh, opts: &ReconstructOptions, planar: bool) -> Result<Partial> {
    let verts: Vec<usize> = (0..mesh.vertex_alive.len()).filter(|&v| mesh.vertex_alive[v]).collect();
    let edges = local_edges(&mesh, &verts);
    let mut pos = embed::spectral_init(verts.len(), &edges);
    if planar {
        pos.iter_mut().for_each(|p| p.z = 0.0);
    }
    let res = embed::polish(&mut pos, &edges, opts.max_iters.min(500));
    // Orient faces outward: positive signed volume.
    let cone = expand(&verts, &pos, mesh.vertex_alive.len());
    let vol: f64 = mesh
        .live_faces()
        .map(|f| {
            let c = mesh.face(f);
            let (a, b, d) = (cone[c[0]].unwrap(), cone[c[1]].unwrap(), cone[c[2]].unwrap());
            a.dot(&b.cross(&d))
        })
        .sum();
    if vol < 0.0 {
        pos.iter_mut().for_each(|p| p.x = -p.x);
    }
    let cone = expand(&verts, &pos, mesh.vertex_alive.len());
    Ok(Partial {
        report: SolveReport {
            method: Method::LeastSquares,
            iterations: 0,
            residual_history: vec![res],
            flips: mesh.flip_log.len(),
            cone_vertices: verts.len(),
            max_residual: res,
            initial_radius: None,
            variational_failure: None,
        },
        mesh,
        cone,
    })
}

fn compact_positions(mesh: &IntrinsicMesh, raw: &[Option<Vec3>]) -> Result<(Vec<usize>, Vec<Vec3>)> {
    let verts: Vec<usize> = (0..mesh.vertex_alive.len()).filter(|&v| mesh.vertex_alive[v]).collect();
    let pos = verts
        .iter()
        .map(|&v| raw[v].ok_or_else(|| Error::Precondition(format!("cone vertex {v} unreachable in layout"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((verts, pos))
}

fn local_edges(mesh: &IntrinsicMesh, verts: &[usize]) -> Vec<(usize, usize, f64)> {
    let mut index = vec![usize::MAX; mesh.vertex_alive.len()];
    for (k, &v) in verts.iter().enumerate() {
        index[v] = k;
    }
    embed::mesh_edges(mesh).into_iter().map(|(a, b, l)| (index[a], index[b], l)).collect()
}

fn expand(verts: &[usize], pos: &[Vec3], nv: usize) -> Vec<Option<Vec3>> {
    let mut out = vec![None; nv];
    for (k, &v) in verts.iter().enumerate() {
        out[v] = Some(pos[k]);
    }
    out
}

fn finish(p: Partial, nv: usize, opts: &ReconstructOptions) -> Result<EmbeddedPolyhedron> {
    let failure = |reason: String, report: &SolveReport| {
        Error::Solver(Box::new(SolverFailure { reason, best_iterate: vec![], residual_history: report.residual_history.clone() }))
    };
    if !(p.report.max_residual <= opts.eps_len) {
        return Err(failure(
            format!("edge-length residual {:.3e} exceeds {:.1e}", p.report.max_residual, opts.eps_len),
            &p.report,
        ));
    }
    let asm = assemble::assemble(&p.mesh, &p.cone)?;
    let n = asm.positions.len() as f64;
    let centroid = asm.positions.iter().sum::<Vec3>() / n;
    let positions: Vec<Vec3> = asm.positions.iter().map(|x| x - centroid).collect();
    let residuals = edge_residuals(&positions, &asm.edges, &asm.lengths);
    let coarse_triangles = p.mesh.live_faces().map(|f| p.mesh.face(f)).collect();
    let mut report = p.report;
    report.max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let mut e = EmbeddedPolyhedron {
        positions,
        triangles: asm.triangles,
        neighbors: asm.neighbors,
        edges: asm.edges,
        intrinsic_lengths: asm.lengths,
        residuals,
        flip_log: p.mesh.flip_log.clone(),
        provenance: (0..nv).collect(),
        coarse_triangles,
        diameter: 0.0,
        min_width: 0.0,
        degenerate: false,
        report,
    };
    if !(e.report.max_residual <= opts.eps_len) {
        return Err(failure(
            format!("final mesh residual {:.3e} exceeds {:.1e}", e.report.max_residual, opts.eps_len),
            &e.report,
        ));
    }
    let hull = ConvexHull::new(&e.positions, 1e-12)?;
    e.diameter = hull.diameter;
    e.min_width = hull.min_width();
    e.degenerate = e.min_width < opts.thickness_tol * e.diameter;
    let cert = certify_with(&e, &hull);
    if !cert.ok {
        return Err(failure(
            format!(
                "convexity certificate failed (violation {:.3e}, area {:.9} vs hull {:.9})",
                cert.max_violation, cert.surface_area, cert.hull_area
            ),
            &e.report,
        ));
    }
    Ok(e)
}

fn certify_with(e: &EmbeddedPolyhedron, hull: &ConvexHull) -> Certificate {
    let max_violation = e.positions.iter().map(|p| hull.boundary_distance(p)).fold(0.0, f64::max);
    let surface_area = e.surface_area();
    let hull_area = hull.area();
    let ok = max_violation <= 1e-8 * hull.diameter && (surface_area - hull_area).abs() <= 1e-6 * hull_area;
    Certificate { ok, max_violation, surface_area, hull_area, degenerate: hull.flat || e.degenerate }
}

/// Check that the embedding is a convex surface: every vertex on the boundary
/// of the convex hull and surface area equal to the hull's.
pub fn certify_convex(e: &EmbeddedPolyhedron) -> Certificate {
    match ConvexHull::new(&e.positions, 1e-12) {
        Ok(h) => certify_with(e, &h),
        Err(_) => Certificate {
            ok: false,
            max_violation: f64::INFINITY,
            surface_area: e.surface_area(),
            hull_area: 0.0,
            degenerate: true,
        },
    }
}

/// Optimal rigid motion (reflections allowed) taking `a` onto `b`.
pub fn align(a: &EmbeddedPolyhedron, b: &EmbeddedPolyhedron) -> Result<RigidMotion> {
    kabsch(&a.positions, &b.positions)
}
