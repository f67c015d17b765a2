//! Variational solver on generalized convex polytopes.
//!
//! Every intrinsic face spans a tetrahedron with a common apex; the unknowns are
//! the apex distances `r_i` of the cone vertices. The curvature `κ_i = 2π − Σ ω`
//! collects the dihedral angles of all tetrahedra at the radial edge to `i`;
//! a convex polytope is reached when every `κ_i` vanishes and every base edge is
//! locally convex. The target curvatures are deformed linearly from their
//! initial values to zero and tracked with damped Newton steps, flipping
//! base edges whenever they turn concave.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, SolverFailure};
use crate::intrinsic::{angle_opposite, area_from_sides, next, IntrinsicMesh};

/// Angles of a spherical triangle opposite its sides `a`, `b`, `c`, by the
/// half-angle formulas; `None` unless the sides span a proper spherical triangle.
pub(crate) fn spherical_angles(a: f64, b: f64, c: f64) -> Option<[f64; 3]> {
    let s = 0.5 * (a + b + c);
    if !(s < PI) {
        return None;
    }
    let (ss, sa, sb, sc) = (s.sin(), (s - a).sin(), (s - b).sin(), (s - c).sin());
    if !(ss > 0.0 && sa > 0.0 && sb > 0.0 && sc > 0.0) {
        return None;
    }
    let half = |x: f64, y: f64, z: f64| 2.0 * (y * z).sqrt().atan2((ss * x).sqrt());
    Some([half(sa, sb, sc), half(sb, sa, sc), half(sc, sa, sb)])
}

/// Geometry of the tetrahedron over one face with corners `0, 1, 2`, side `k`
/// joining corners `k` and `k + 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FaceGeom {
    /// Dihedral angle at the radial edge of each corner.
    pub omega: [f64; 3],
    /// `d_omega[i][m] = ∂ω_i / ∂r_m`.
    pub d_omega: [[f64; 3]; 3],
    /// Dihedral angle at each base side.
    pub theta: [f64; 3],
}

pub(crate) fn face_geometry(l: [f64; 3], r: [f64; 3]) -> Option<FaceGeom> {
    let mut rho = [0.0; 3];
    let mut phi_a = [0.0; 3];
    let mut phi_b = [0.0; 3];
    for k in 0..3 {
        let k1 = (k + 1) % 3;
        // Triangle (apex, k, k+1): apex angle, angle at k, angle at k+1.
        rho[k] = angle_opposite(r[k], r[k1], l[k]);
        phi_a[k] = angle_opposite(r[k], l[k], r[k1]);
        phi_b[k] = angle_opposite(r[k1], l[k], r[k]);
        if !(rho[k] > 0.0 && phi_a[k] > 0.0 && phi_b[k] > 0.0) {
            return None;
        }
    }
    // Spherical triangle around the apex: side rho[k] lies between the radial
    // edges k and k+1, so omega[i] is opposite rho[i+1].
    let omega = spherical_angles(rho[1], rho[2], rho[0])?;
    let mut theta = [0.0; 3];
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let alpha = angle_opposite(l[i], l[i2], l[i1]);
        if !(alpha > 0.0) {
            return None;
        }
        // Trihedral at corner i: faces (apex,i,i+1), base, (apex,i+2,i).
        theta[i] = spherical_angles(phi_b[i2], phi_a[i], alpha)?[0];
    }
    let mut d_rho = [[0.0; 3]; 3];
    for k in 0..3 {
        let k1 = (k + 1) % 3;
        d_rho[k][k] += -1.0 / (phi_a[k].tan() * r[k]);
        d_rho[k][k1] += -1.0 / (phi_b[k].tan() * r[k1]);
    }
    let mut d_omega = [[0.0; 3]; 3];
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let d = rho[i1].sin() / (omega[i].sin() * rho[i].sin() * rho[i2].sin());
        let mut by_rho = [0.0; 3];
        by_rho[i1] = d;
        by_rho[i] = -omega[i1].cos() * d;
        by_rho[i2] = -omega[i2].cos() * d;
        for m in 0..3 {
            d_omega[i][m] = (0..3).map(|k| by_rho[k] * d_rho[k][m]).sum();
        }
    }
    Some(FaceGeom { omega, d_omega, theta })
}

fn face_radii(mesh: &IntrinsicMesh, f: usize, r: &[f64]) -> [f64; 3] {
    let c = mesh.face(f);
    [r[c[0]], r[c[1]], r[c[2]]]
}

/// Geometry of every live face, or `None` if some tetrahedron is degenerate.
pub(crate) fn all_geometry(mesh: &IntrinsicMesh, r: &[f64]) -> Option<Vec<Option<FaceGeom>>> {
    let mut out = vec![None; mesh.num_faces()];
    for f in mesh.live_faces() {
        out[f] = Some(face_geometry(mesh.face_lengths(f), face_radii(mesh, f, r))?);
    }
    Some(out)
}

pub(crate) fn curvatures(mesh: &IntrinsicMesh, geom: &[Option<FaceGeom>]) -> Vec<f64> {
    let nv = mesh.vertex_alive.len();
    let mut k = vec![0.0; nv];
    for v in 0..nv {
        if mesh.vertex_alive[v] {
            k[v] = TAU;
        }
    }
    for f in mesh.live_faces() {
        let g = geom[f].as_ref().unwrap();
        let c = mesh.face(f);
        for i in 0..3 {
            k[c[i]] -= g.omega[i];
        }
    }
    k
}

/// `∂κ/∂r` restricted to the unknowns (`index[v]` is the unknown of vertex `v`).
pub(crate) fn jacobian(mesh: &IntrinsicMesh, geom: &[Option<FaceGeom>], index: &[usize], n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for f in mesh.live_faces() {
        let g = geom[f].as_ref().unwrap();
        let c = mesh.face(f);
        for i in 0..3 {
            for m in 0..3 {
                j[(index[c[i]], index[c[m]])] -= g.d_omega[i][m];
            }
        }
    }
    j
}

/// Concavity of the base edge of halfedge `h`: total dihedral minus π.
fn edge_excess(mesh: &IntrinsicMesh, geom: &[Option<FaceGeom>], h: usize) -> f64 {
    let g = mesh.twin[h];
    let tf = geom[h / 3].as_ref().unwrap().theta[h % 3];
    let tg = geom[g / 3].as_ref().unwrap().theta[g % 3];
    tf + tg - PI
}

const CONVEX_EDGE_TOL: f64 = 1e-11;

/// Flip concave base edges (largest excess first, ties by vertex pair) until
/// every edge is convex. Returns the geometry of the final state, or `None`
/// when some tetrahedron degenerates or a concave edge cannot be flipped.
pub(crate) fn flip_to_convex(mesh: &mut IntrinsicMesh, r: &[f64], max_flips: usize) -> Option<Vec<Option<FaceGeom>>> {
    let mut geom = all_geometry(mesh, r)?;
    for _ in 0..max_flips {
        let mut worst: Option<(f64, (usize, usize), usize)> = None;
        for h in mesh.edges() {
            let ex = edge_excess(mesh, &geom, h);
            if ex > CONVEX_EDGE_TOL {
                let (a, b) = (mesh.corner[h], mesh.corner[next(h)]);
                let key = (a.min(b), a.max(b));
                let better = match worst {
                    None => true,
                    Some((w, k, _)) => ex > w || (ex == w && key < k),
                };
                if better {
                    worst = Some((ex, key, h));
                }
            }
        }
        let Some((_, _, h)) = worst else { return Some(geom) };
        let (f, g) = (h / 3, mesh.twin[h] / 3);
        if !mesh.flip(h) {
            return None;
        }
        geom[f] = Some(face_geometry(mesh.face_lengths(f), face_radii(mesh, f, r))?);
        geom[g] = Some(face_geometry(mesh.face_lengths(g), face_radii(mesh, g, r))?);
    }
    None
}

/// Result of the variational solve: the final intrinsic triangulation (all
/// edges convex, all curvatures zero) and the apex distances.
pub(crate) struct VariationalSolution {
    pub mesh: IntrinsicMesh,
    pub radii: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub initial_radius: f64,
}

/// Options consumed by the variational solver.
pub(crate) struct VariationalParams {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub init_jitter: f64,
}

fn max_abs_diff(a: &[f64], b: &[f64], verts: &[usize]) -> f64 {
    verts.iter().map(|&v| (a[v] - b[v]).abs()).fold(0.0, f64::max)
}

fn circumradius(l: [f64; 3]) -> f64 {
    let area = area_from_sides(l[0], l[1], l[2]);
    l[0] * l[1] * l[2] / (4.0 * area)
}

pub(crate) fn solve(mut mesh: IntrinsicMesh, p: &VariationalParams) -> Result<VariationalSolution> {
    let nv = mesh.vertex_alive.len();
    let verts: Vec<usize> = (0..nv).filter(|&v| mesh.vertex_alive[v]).collect();
    let n = verts.len();
    let mut index = vec![usize::MAX; nv];
    for (k, &v) in verts.iter().enumerate() {
        index[v] = k;
    }
    let max_flips = 20 * mesh.corner.len() + 100;
    let fail = |reason: String, r: &[f64], history: &[f64]| {
        Error::Solver(Box::new(SolverFailure {
            reason,
            best_iterate: verts.iter().map(|&v| r[v]).collect(),
            residual_history: history.to_vec(),
        }))
    };

    // Start: equal radii large enough that every cone vertex keeps positive
    // curvature, then optionally an additive random spread below half the
    // shortest edge (so neighboring apex distances obey the triangle
    // inequality). The spread is halved until the start is valid again.
    let defects: Vec<f64> = (0..nv).map(|v| if mesh.vertex_alive[v] { mesh.defect(v) } else { 0.0 }).collect();
    let valid_start = |mesh: &IntrinsicMesh, r: &[f64]| {
        let mut trial = mesh.clone();
        let g = flip_to_convex(&mut trial, r, max_flips)?;
        let k = curvatures(&trial, &g);
        verts.iter().all(|&v| k[v] > 0.0 || defects[v] <= 1e-9).then_some((trial, g))
    };
    let mut base = mesh.live_faces().map(|f| circumradius(mesh.face_lengths(f))).fold(0.0, f64::max);
    base = 2.0 * base.max(mesh.len.iter().copied().fold(0.0, f64::max));
    let mut r = vec![0.0; nv];
    let mut start = None;
    for _ in 0..60 {
        verts.iter().for_each(|&v| r[v] = base);
        start = valid_start(&mesh, &r);
        if start.is_some() {
            break;
        }
        base *= 2.0;
    }
    if start.is_some() && p.init_jitter > 0.0 {
        let lmin = mesh.len.iter().copied().filter(|l| *l > 0.0).fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut spread: Vec<f64> = (0..nv).map(|_| 0.5 * lmin * p.init_jitter.min(1.0) * rng.random::<f64>()).collect();
        for _ in 0..60 {
            let rt: Vec<f64> = (0..nv).map(|v| r[v] + spread[v]).collect();
            if let Some(s) = valid_start(&mesh, &rt) {
                start = Some(s);
                r = rt;
                break;
            }
            spread.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    let Some((start_mesh, mut geom)) = start else {
        return Err(fail("no valid starting radii".into(), &r, &[]));
    };
    mesh = start_mesh;
    let initial_radius = base;
    let kappa0 = curvatures(&mesh, &geom);

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut t = 0.0;
    let mut dt: f64 = 0.25;
    let step_tol = 1e-8;
    while t < 1.0 {
        let t_new = (t + dt).min(1.0);
        let target: Vec<f64> = kappa0.iter().map(|k| (1.0 - t_new) * k).collect();
        let tol = if t_new >= 1.0 { p.tol } else { step_tol };
        let saved = (mesh.clone(), r.clone(), geom.clone());
        let mut kappa = curvatures(&mesh, &geom);
        let mut res = max_abs_diff(&kappa, &target, &verts);
        let mut converged = res <= tol;
        let mut inner = 0;
        while !converged && inner < 25 {
            inner += 1;
            iterations += 1;
            if iterations > p.max_iters {
                return Err(fail(format!("iteration limit {} reached at t = {t:.6}", p.max_iters), &r, &history));
            }
            let jac = jacobian(&mesh, &geom, &index, n);
            let rhs = DVector::from_iterator(n, verts.iter().map(|&v| target[v] - kappa[v]));
            let Some(step) = jac.lu().solve(&rhs) else { break };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut rt = r.clone();
                let mut ok = true;
                for (k, &v) in verts.iter().enumerate() {
                    rt[v] = r[v] + alpha * step[k];
                    if !(rt[v] > 0.0) {
                        ok = false;
                    }
                }
                if ok {
                    let mut mt = mesh.clone();
                    if let Some(gt) = flip_to_convex(&mut mt, &rt, max_flips) {
                        let kt = curvatures(&mt, &gt);
                        let rt_res = max_abs_diff(&kt, &target, &verts);
                        if rt_res < res || rt_res <= tol {
                            mesh = mt;
                            r = rt;
                            geom = gt;
                            kappa = kt;
                            res = rt_res;
                            accepted = true;
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            history.push(res);
            if !accepted {
                break;
            }
            converged = res <= tol;
        }
        // Near the target, round-off can stall Newton just above the tolerance;
        // such iterates are still checked against the edge lengths later.
        if !converged && t_new >= 1.0 && res <= 1e3 * tol {
            converged = true;
        }
        if converged {
            t = t_new;
            dt = (dt * 1.5).min(1.0);
        } else {
            (mesh, r, geom) = saved;
            dt *= 0.5;
            if dt < 1e-7 {
                return Err(fail(format!("continuation stalled at t = {t:.6}"), &r, &history));
            }
        }
    }
    Ok(VariationalSolution { mesh, radii: r, iterations, history, initial_radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_angles_of_octant() {
        let a = spherical_angles(PI / 2.0, PI / 2.0, PI / 2.0).unwrap();
        for x in a {
            assert!((x - PI / 2.0).abs() < 1e-14);
        }
        assert!(spherical_angles(1.0, 1.0, 2.5).is_none());
    }

    #[test]
    fn dihedral_derivatives_match_finite_differences() {
        let l = [1.0, 1.2, 0.9];
        let r = [1.7, 1.5, 1.9];
        let g = face_geometry(l, r).unwrap();
        for m in 0..3 {
            let h = 1e-6;
            let mut rp = r;
            let mut rm = r;
            rp[m] += h;
            rm[m] -= h;
            let gp = face_geometry(l, rp).unwrap();
            let gm = face_geometry(l, rm).unwrap();
            for i in 0..3 {
                let fd = (gp.omega[i] - gm.omega[i]) / (2.0 * h);
                assert!((fd - g.d_omega[i][m]).abs() < 1e-7, "i={i} m={m}: fd {fd} vs {}", g.d_omega[i][m]);
            }
        }
    }

    #[test]
    fn regular_tetrahedron_radii_close_the_apex() {
        // Circumradius of the unit regular tetrahedron: sqrt(3/8).
        let r = (3.0f64 / 8.0).sqrt();
        let g = face_geometry([1.0; 3], [r; 3]).unwrap();
        // Three faces meet at each radial edge: total 2π.
        for w in g.omega {
            assert!((3.0 * w - TAU).abs() < 1e-12);
        }
        // Base dihedral with centroid apex is half the tetrahedral dihedral.
        for th in g.theta {
            assert!((2.0 * th - (1.0f64 / 3.0).acos()).abs() < 1e-12);
        }
    }
}
