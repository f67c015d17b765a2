//! Convex hulls in 3-space, point–triangle distances and rigid alignment.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Convex hull of a point set. Faces index the input points and are oriented
/// outward. A (near-)planar input yields a flat hull: the planar convex polygon
/// triangulated twice, once per side, so its area is twice the polygon area.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub points: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub flat: bool,
    pub diameter: f64,
}

/// Largest pairwise distance (exact, quadratic).
pub fn diameter(points: &[Vec3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max((points[i] - points[j]).norm_squared());
        }
    }
    d.sqrt()
}

fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn plane(points: &[Vec3], f: [usize; 3]) -> (Vec3, f64) {
    let n = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
    let n = n / n.norm();
    (n, n.dot(&points[f[0]]))
}

impl ConvexHull {
    /// Incremental hull with conflict lists. Points within `1e-10 ×` the
    /// bounding-box diagonal of a face plane count as on it. A point set whose
    /// thickness is below `flat_tol ×` that diagonal yields a flat hull.
    pub fn new(points: &[Vec3], flat_tol: f64) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Domain(format!("hull needs at least 3 points, got {}", points.len())));
        }
        let pts = points.to_vec();
        let scale = bbox_diagonal(&pts);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain("hull of coincident or non-finite points".into()));
        }
        let eps = 1e-10 * scale;
        let diam = diameter(&pts);

        // Initial simplex: extreme pair, farthest from their line, farthest from that plane.
        let (mut i0, mut i1) = (0, 0);
        for axis in 0..3 {
            let lo = (0..pts.len()).min_by(|&a, &b| pts[a][axis].total_cmp(&pts[b][axis])).unwrap();
            let hi = (0..pts.len()).max_by(|&a, &b| pts[a][axis].total_cmp(&pts[b][axis])).unwrap();
            if (pts[hi] - pts[lo]).norm() > (pts[i1] - pts[i0]).norm() {
                i0 = lo;
                i1 = hi;
            }
        }
        let dir = (pts[i1] - pts[i0]).normalize();
        let i2 = (0..pts.len())
            .max_by(|&a, &b| {
                let da = (pts[a] - pts[i0]).cross(&dir).norm();
                let db = (pts[b] - pts[i0]).cross(&dir).norm();
                da.total_cmp(&db)
            })
            .unwrap();
        if (pts[i2] - pts[i0]).cross(&dir).norm() <= eps {
            return Err(Error::Domain("hull of collinear points".into()));
        }
        let (n0, d0) = plane(&pts, [i0, i1, i2]);
        let i3 = (0..pts.len()).max_by(|&a, &b| (n0.dot(&pts[a]) - d0).abs().total_cmp(&(n0.dot(&pts[b]) - d0).abs())).unwrap();
        // Thickness along the best-fit plane normal decides flatness.
        let thickness = Self::plane_thickness(&pts);
        if thickness <= flat_tol * scale || (n0.dot(&pts[i3]) - d0).abs() <= eps {
            return Ok(Self::flat_hull(pts, diam));
        }

        let mut faces: Vec<[usize; 3]> = Vec::new();
        let mut alive: Vec<bool> = Vec::new();
        let mut planes: Vec<(Vec3, f64)> = Vec::new();
        let mut conflicts: Vec<Vec<usize>> = Vec::new();
        let centroid = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
        let add_face = |f: [usize; 3],
                        faces: &mut Vec<[usize; 3]>,
                        alive: &mut Vec<bool>,
                        planes: &mut Vec<(Vec3, f64)>,
                        conflicts: &mut Vec<Vec<usize>>| {
            let mut f = f;
            let (n, d) = plane(&pts, f);
            if n.dot(&centroid) - d > 0.0 {
                f.swap(1, 2);
            }
            faces.push(f);
            alive.push(true);
            planes.push(plane(&pts, f));
            conflicts.push(Vec::new());
            faces.len() - 1
        };
        for f in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
            add_face(f, &mut faces, &mut alive, &mut planes, &mut conflicts);
        }
        let seeds = [i0, i1, i2, i3];
        for p in 0..pts.len() {
            if seeds.contains(&p) {
                continue;
            }
            if let Some(f) = (0..4).find(|&f| planes[f].0.dot(&pts[p]) - planes[f].1 > eps) {
                conflicts[f].push(p);
            }
        }

        while let Some(f) = (0..faces.len()).find(|&f| alive[f] && !conflicts[f].is_empty()) {
            let (n, d) = planes[f];
            let apex = *conflicts[f].iter().max_by(|&&a, &&b| (n.dot(&pts[a]) - d).total_cmp(&(n.dot(&pts[b]) - d))).unwrap();
            let visible: Vec<usize> =
                (0..faces.len()).filter(|&g| alive[g] && planes[g].0.dot(&pts[apex]) - planes[g].1 > eps).collect();
            let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
            for &g in &visible {
                let t = faces[g];
                for i in 0..3 {
                    directed.insert((t[i], t[(i + 1) % 3]), g);
                }
            }
            let mut horizon = Vec::new();
            for &g in &visible {
                let t = faces[g];
                for i in 0..3 {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    if !directed.contains_key(&(b, a)) {
                        horizon.push((a, b));
                    }
                }
            }
            let mut orphans: Vec<usize> = Vec::new();
            for &g in &visible {
                alive[g] = false;
                orphans.append(&mut conflicts[g]);
            }
            let mut created = Vec::with_capacity(horizon.len());
            for (a, b) in horizon {
                faces.push([a, b, apex]);
                alive.push(true);
                planes.push(plane(&pts, [a, b, apex]));
                conflicts.push(Vec::new());
                created.push(faces.len() - 1);
            }
            for p in orphans {
                if p == apex {
                    continue;
                }
                if let Some(&g) = created.iter().find(|&&g| planes[g].0.dot(&pts[p]) - planes[g].1 > eps) {
                    conflicts[g].push(p);
                }
            }
        }
        let faces = faces.into_iter().zip(alive).filter(|(_, a)| *a).map(|(f, _)| f).collect();
        Ok(ConvexHull { points: pts, faces, flat: false, diameter: diam })
    }

    /// Smallest eigen-extent: range of projections onto the least-variance direction.
    fn plane_thickness(pts: &[Vec3]) -> f64 {
        let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in pts {
            let d = p - c;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let k = eig.eigenvalues.imin();
        let n: Vec3 = eig.eigenvectors.column(k).into();
        let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let x = n.dot(p);
            (lo.min(x), hi.max(x))
        });
        hi - lo
    }

    fn flat_hull(pts: Vec<Vec3>, diam: f64) -> Self {
        let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - c;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let k = eig.eigenvalues.imin();
        let n: Vec3 = eig.eigenvectors.column(k).into();
        let u = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = (u - n * n.dot(&u)).normalize();
        let v = n.cross(&u);
        let xy: Vec<[f64; 2]> = pts.iter().map(|p| [u.dot(&(p - c)), v.dot(&(p - c))]).collect();
        let poly = hull_2d(&xy);
        let mut faces = Vec::new();
        for k in 1..poly.len().saturating_sub(1) {
            faces.push([poly[0], poly[k], poly[k + 1]]);
            faces.push([poly[0], poly[k + 1], poly[k]]);
        }
        ConvexHull { points: pts, faces, flat: true, diameter: diam }
    }

    /// Total surface area (twice the polygon area for a flat hull).
    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| triangle_area(&self.points[f[0]], &self.points[f[1]], &self.points[f[2]])).sum()
    }

    /// Distance from `p` to the hull's boundary surface.
    pub fn boundary_distance(&self, p: &Vec3) -> f64 {
        self.faces
            .iter()
            .map(|f| point_triangle_distance(p, &self.points[f[0]], &self.points[f[1]], &self.points[f[2]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the solid hull (zero inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        if !self.flat {
            let inside = self.faces.iter().all(|&f| {
                let (n, d) = plane(&self.points, f);
                n.dot(p) - d <= 0.0
            });
            if inside {
                return 0.0;
            }
        }
        self.boundary_distance(p)
    }

    /// Indices of points that are hull vertices.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Width along facet normals: the smallest facet-supported slab thickness.
    /// Zero for flat hulls.
    pub fn min_width(&self) -> f64 {
        if self.flat {
            return 0.0;
        }
        let verts = self.vertex_indices();
        self.faces
            .iter()
            .map(|&f| {
                let (n, d) = plane(&self.points, f);
                verts.iter().map(|&v| d - n.dot(&self.points[v])).fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Symmetric Hausdorff distance between two convex hulls.
pub fn hull_hausdorff(a: &ConvexHull, b: &ConvexHull) -> f64 {
    let ab = a.vertex_indices().iter().map(|&i| b.distance(&a.points[i])).fold(0.0, f64::max);
    let ba = b.vertex_indices().iter().map(|&i| a.distance(&b.points[i])).fold(0.0, f64::max);
    ab.max(ba)
}

/// Andrew's monotone chain; returns indices in counterclockwise order.
fn hull_2d(p: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a][0].total_cmp(&p[b][0]).then(p[a][1].total_cmp(&p[b][1])));
    let cross =
        |o: usize, a: usize, b: usize| (p[a][0] - p[o][0]) * (p[b][1] - p[o][1]) - (p[a][1] - p[o][1]) * (p[b][0] - p[o][0]);
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Euclidean distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (p - closest_on_triangle(p, a, b, c)).norm()
}

/// Closest point of triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Distance from `p` to segment `ab`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Rigid motion `x ↦ R x + t` (R orthogonal, possibly a reflection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub reflection: bool,
    /// RMS distance between mapped source points and targets.
    pub rms: f64,
}

impl RigidMotion {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

/// Optimal rigid motion (reflections allowed) mapping `from[i]` onto `to[i]`
/// in the least-squares sense (Kabsch).
pub fn kabsch(from: &[Vec3], to: &[Vec3]) -> Result<RigidMotion> {
    if from.len() != to.len() || from.is_empty() {
        return Err(Error::Domain(format!("cannot align {} points with {} points", from.len(), to.len())));
    }
    let n = from.len() as f64;
    let ca = from.iter().sum::<Vec3>() / n;
    let cb = to.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (b - cb) * (a - ca).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut best: Option<RigidMotion> = None;
    for reflect in [false, true] {
        let mut d = Matrix3::identity();
        let det = (u * vt).determinant();
        // Proper rotation needs det +1; the reflected candidate det −1.
        if (det < 0.0) != reflect {
            d[(2, 2)] = -1.0;
        }
        let r = u * d * vt;
        let t = cb - r * ca;
        let rms = (from.iter().zip(to).map(|(a, b)| (r * a + t - b).norm_squared()).sum::<f64>() / n).sqrt();
        if best.as_ref().is_none_or(|m| rms < m.rms) {
            best = Some(RigidMotion { rotation: r, translation: t, reflection: reflect, rms });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube() -> Vec<Vec3> {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        v
    }

    #[test]
    fn cube_hull_area_and_width() {
        let mut pts = cube();
        pts.push(Vec3::new(0.5, 0.5, 0.5));
        pts.push(Vec3::new(0.5, 0.5, 1.0));
        let h = ConvexHull::new(&pts, 1e-9).unwrap();
        assert!(!h.flat);
        assert_relative_eq!(h.area(), 6.0, epsilon = 1e-12);
        assert_relative_eq!(h.min_width(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(h.boundary_distance(&pts[8]), 0.5, epsilon = 1e-12);
        assert!(h.boundary_distance(&pts[9]) < 1e-12);
        assert_eq!(h.distance(&pts[8]), 0.0);
        assert_relative_eq!(h.distance(&Vec3::new(2.0, 0.5, 0.5)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_square_hull_is_two_sided() {
        let pts: Vec<Vec3> = cube().into_iter().filter(|p| p.z == 0.0).collect();
        let h = ConvexHull::new(&pts, 1e-9).unwrap();
        assert!(h.flat);
        assert_relative_eq!(h.area(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(h.distance(&Vec3::new(0.5, 0.5, 0.25)), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn kabsch_recovers_rotation_and_reflection() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.2, 0.0), Vec3::new(0.3, 1.0, 0.1), Vec3::new(0.1, 0.4, 1.3)];
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let moved: Vec<Vec3> = pts.iter().map(|p| rot * p + Vec3::new(1.0, 2.0, 3.0)).collect();
        let m = kabsch(&pts, &moved).unwrap();
        assert!(m.rms < 1e-12 && !m.reflection);
        assert_relative_eq!(m.rotation, rot, epsilon = 1e-12);
        let mirror: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        let m = kabsch(&pts, &mirror).unwrap();
        assert!(m.rms < 1e-12 && m.reflection);
        assert!(kabsch(&pts, &mirror[..3]).is_err());
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert_relative_eq!(point_triangle_distance(&Vec3::new(0.2, 0.2, 1.0), &a, &b, &c), 1.0);
        assert_relative_eq!(point_triangle_distance(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), 2f64.sqrt());
        assert_relative_eq!(point_triangle_distance(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c), 0.5f64.sqrt(), epsilon = 1e-15);
    }
}
