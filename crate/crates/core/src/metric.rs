//! Triangulated cone metrics of glued surfaces.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2 as SPoint, Triangulation};

use crate::curves::{dist, Point2};
use crate::error::{Error, Result};
use crate::gluing::GluedBoundary;
use crate::intrinsic::angle_opposite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexTag {
    Seam,
    FoldEndpoint,
    Interior,
}

/// Where a metric vertex sits on a flat piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub piece: usize,
    pub xy: Point2,
    /// Boundary arclength, for seam vertices.
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVertex {
    pub tag: VertexTag,
    /// One source per piece location the vertex was glued from.
    pub sources: Vec<Source>,
    /// Position along the seam (seam sample index), for seam vertices.
    pub seam_index: Option<usize>,
}

/// Discretization facts needed by classification thresholds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricInfo {
    /// Arclength spacing of seam samples.
    pub spacing: Option<f64>,
    /// Largest predicted seam defect `max (κ₁ + κ₂)·Δs` over matched pairs.
    pub predicted_seam_defect: Option<f64>,
    /// Largest boundary |κ| over all pieces.
    pub max_boundary_curvature: Option<f64>,
    /// Target interior edge length used when meshing.
    pub density: Option<f64>,
    /// Scale factor applied to the input curves.
    pub scale: f64,
}

/// Triangulated intrinsic metric: triangles with side lengths and explicit
/// side adjacency (`neighbors[t][i] = [u, j]` glues side `i` of `t`, running from
/// corner `i` to corner `i+1`, to side `j` of `u`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMetric {
    pub vertices: Vec<MetricVertex>,
    pub triangles: Vec<[usize; 3]>,
    pub lengths: Vec<[f64; 3]>,
    pub neighbors: Vec<[[usize; 2]; 3]>,
    pub seam_sides: Vec<[bool; 3]>,
    pub info: MetricInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexClass {
    Strict,
    Flat,
    Intermediate,
}

/// Result of checking the metric invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub failures: Vec<String>,
    pub euler_characteristic: i64,
    pub min_triangle_slack: f64,
    pub total_defect: f64,
    pub min_defect: f64,
    pub strictness_threshold: f64,
    pub strict_vertices: Vec<usize>,
    pub flat_vertices: Vec<usize>,
    pub degenerate_risk: bool,
}

/// Meshing controls for [`triangulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Target interior edge length; `None` meshes the pieces with boundary vertices only.
    pub density: Option<f64>,
    pub seed: u64,
    /// Relative jitter of the Steiner grid, in units of the spacing.
    pub jitter: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { density: None, seed: 7, jitter: 0.3 }
    }
}

impl MeshOptions {
    pub fn with_density(density: f64) -> Self {
        MeshOptions { density: Some(density), ..Default::default() }
    }
}

/// Flat interior vertices have exactly planar stars; anything this far from zero
/// defect is treated as a cone point.
pub const FLAT_DEFECT_TOL: f64 = 1e-10;

impl ConeMetric {
    /// Metric from triangles and side lengths, with adjacency derived from
    /// vertex pairs. Every undirected edge must occur in exactly two triangles
    /// with opposite orientations.
    pub fn from_triangles(num_vertices: usize, triangles: Vec<[usize; 3]>, lengths: Vec<[f64; 3]>) -> Result<Self> {
        let mut sides: HashMap<(usize, usize), Vec<[usize; 2]>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                sides.entry((tri[i], tri[(i + 1) % 3])).or_default().push([t, i]);
            }
        }
        let mut neighbors = vec![[[usize::MAX; 2]; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                match sides.get(&(b, a)).map(|v| v.as_slice()) {
                    Some([u]) if sides[&(a, b)].len() == 1 => neighbors[t][i] = *u,
                    _ => {
                        return Err(Error::Precondition(format!(
                            "edge ({a}, {b}) is not shared by exactly two consistently oriented triangles"
                        )))
                    }
                }
            }
        }
        let vertices =
            (0..num_vertices).map(|_| MetricVertex { tag: VertexTag::Interior, sources: vec![], seam_index: None }).collect();
        Ok(ConeMetric {
            vertices,
            seam_sides: vec![[false; 3]; triangles.len()],
            triangles,
            lengths,
            neighbors,
            info: MetricInfo { scale: 1.0, ..Default::default() },
        })
    }

    /// Mark every edge as a seam edge and every vertex as a seam vertex (fixture polyhedra).
    pub fn with_all_seams(mut self) -> Self {
        self.seam_sides.iter_mut().for_each(|s| *s = [true; 3]);
        self.vertices.iter_mut().for_each(|v| v.tag = VertexTag::Seam);
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Interior angle at corner `i` of triangle `t`.
    pub fn corner_angle(&self, t: usize, i: usize) -> f64 {
        let l = self.lengths[t];
        // Sides adjacent to corner i: side i (i→i+1) and side i+2 (i+2→i); opposite: side i+1.
        angle_opposite(l[i], l[(i + 2) % 3], l[(i + 1) % 3])
    }

    /// Angle defect of every vertex.
    pub fn defects(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                sum[tri[i]] += self.corner_angle(t, i);
            }
        }
        sum.into_iter().map(|s| TAU - s).collect()
    }

    /// Number of undirected edges (each side pair counted once).
    pub fn num_edges(&self) -> usize {
        3 * self.triangles.len() / 2
    }

    /// Mean length over undirected edges.
    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self.lengths.iter().flatten().sum();
        total / (3 * self.triangles.len()) as f64
    }

    /// Undirected seam edges as vertex pairs.
    pub fn seam_edges(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                if self.seam_sides[t][i] && a < b {
                    out.push([a, b]);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Threshold above which a defect marks a strict vertex:
    /// `min(10 · predicted seam defect, π/4)`; `1e-6` when no prediction exists.
    pub fn strictness_threshold(&self) -> f64 {
        match self.info.predicted_seam_defect {
            Some(p) if p > 0.0 => (10.0 * p).min(PI / 4.0),
            _ => 1e-6,
        }
    }

    /// Copy with every length multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.lengths.iter_mut().flatten().for_each(|l| *l *= lambda);
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Angle defect `2π − Σ` incident angles at `v`.
pub fn angle_defect(m: &ConeMetric, v: usize) -> f64 {
    let mut sum = 0.0;
    for (t, tri) in m.triangles.iter().enumerate() {
        for i in 0..3 {
            if tri[i] == v {
                sum += m.corner_angle(t, i);
            }
        }
    }
    TAU - sum
}

/// Check every metric invariant and classify vertices. Never fails; problems
/// are listed in the report.
pub fn validate(m: &ConeMetric) -> ValidationReport {
    let mut failures = Vec::new();
    let nt = m.triangles.len();
    let nv = m.num_vertices();
    let mut adjacency_ok = m.lengths.len() == nt && m.neighbors.len() == nt;
    if adjacency_ok {
        'outer: for t in 0..nt {
            for i in 0..3 {
                let [u, j] = m.neighbors[t][i];
                if u >= nt || j >= 3 || m.neighbors[u][j] != [t, i] {
                    failures.push(format!("side {i} of triangle {t} is not matched by its neighbor"));
                    adjacency_ok = false;
                    break 'outer;
                }
                let (a, b) = (m.triangles[t][i], m.triangles[t][(i + 1) % 3]);
                let (c, d) = (m.triangles[u][j], m.triangles[u][(j + 1) % 3]);
                if (a, b) != (d, c) {
                    failures.push(format!("side {i} of triangle {t} is glued with mismatched endpoints"));
                    adjacency_ok = false;
                    break 'outer;
                }
                if (m.lengths[t][i] - m.lengths[u][j]).abs() > 1e-12 * m.lengths[t][i].max(1.0) {
                    failures.push(format!("glued sides of triangles {t} and {u} have different lengths"));
                    adjacency_ok = false;
                    break 'outer;
                }
            }
        }
    } else {
        failures.push("lengths/adjacency arrays do not match the triangle count".into());
    }
    let used: std::collections::HashSet<usize> = m.triangles.iter().flatten().copied().collect();
    if m.triangles.iter().flatten().any(|&v| v >= nv) {
        failures.push("triangle references a vertex out of range".into());
    }
    let edges = (3 * nt / 2) as i64;
    let euler = used.len() as i64 - edges + nt as i64;
    if euler != 2 || !(3 * nt).is_multiple_of(2) {
        failures.push(format!("Euler characteristic V − E + F = {euler}, expected 2"));
    }
    let mut min_slack = f64::INFINITY;
    for (t, l) in m.lengths.iter().enumerate() {
        let per = l[0] + l[1] + l[2];
        let slack = (0..3).map(|i| (l[i] + l[(i + 1) % 3] - l[(i + 2) % 3]) / per).fold(f64::INFINITY, f64::min);
        if slack < min_slack {
            min_slack = slack;
        }
        if !(slack > 1e-12) && failures.iter().all(|f| !f.starts_with("triangle inequality")) {
            failures.push(format!("triangle inequality fails in triangle {t} (relative slack {slack:.3e})"));
        }
    }
    let defects = m.defects();
    let total: f64 = defects.iter().sum();
    let min_defect = defects.iter().copied().fold(f64::INFINITY, f64::min);
    if min_defect < -1e-9 {
        let v = defects.iter().position(|&d| d == min_defect).unwrap();
        failures.push(format!("negative angle defect {min_defect:.3e} at vertex {v}"));
    }
    if !((total - 2.0 * TAU).abs() <= 1e-9) {
        failures.push(format!("total defect {total:.12} differs from 4π"));
    }
    let threshold = m.strictness_threshold();
    let strict: Vec<usize> = (0..nv).filter(|&v| defects[v] > threshold).collect();
    let flat: Vec<usize> = (0..nv).filter(|&v| defects[v].abs() <= threshold).collect();
    ValidationReport {
        ok: failures.is_empty() && adjacency_ok,
        failures,
        euler_characteristic: euler,
        min_triangle_slack: min_slack,
        total_defect: total,
        min_defect,
        strictness_threshold: threshold,
        strict_vertices: strict,
        flat_vertices: flat,
        degenerate_risk: degenerate_risk(m),
    }
}

/// A gluing whose matched boundary points are related by one planar rigid
/// motion (reflections allowed) realizes a doubly covered flat region.
fn degenerate_risk(m: &ConeMetric) -> bool {
    let pairs: Vec<(Point2, Point2)> =
        m.vertices.iter().filter(|v| v.sources.len() == 2).map(|v| (v.sources[0].xy, v.sources[1].xy)).collect();
    if pairs.len() < 3 {
        return false;
    }
    let diam = pairs.iter().flat_map(|p| pairs.iter().map(move |q| dist(p.0, q.0))).fold(0.0, f64::max);
    let rms = rigid_fit_2d(&pairs);
    rms < 1e-9 * diam.max(1e-300)
}

/// RMS residual of the best 2D rigid motion (reflection allowed) mapping
/// first points onto second points.
fn rigid_fit_2d(pairs: &[(Point2, Point2)]) -> f64 {
    let n = pairs.len() as f64;
    let ca = pairs.iter().fold([0.0, 0.0], |s, p| [s[0] + p.0[0] / n, s[1] + p.0[1] / n]);
    let cb = pairs.iter().fold([0.0, 0.0], |s, p| [s[0] + p.1[0] / n, s[1] + p.1[1] / n]);
    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (a, b) in pairs {
            let a = [a[0] - ca[0], if reflect { -(a[1] - ca[1]) } else { a[1] - ca[1] }];
            let b = [b[0] - cb[0], b[1] - cb[1]];
            sxx += a[0] * b[0] + a[1] * b[1];
            sxy += a[0] * b[1] - a[1] * b[0];
        }
        let th = sxy.atan2(sxx);
        let (s, c) = th.sin_cos();
        let mut err = 0.0;
        for (a, b) in pairs {
            let a = [a[0] - ca[0], if reflect { -(a[1] - ca[1]) } else { a[1] - ca[1] }];
            let r = [c * a[0] - s * a[1], s * a[0] + c * a[1]];
            err += (r[0] - (b[0] - cb[0])).powi(2) + (r[1] - (b[1] - cb[1])).powi(2);
        }
        best = best.min((err / n).sqrt());
    }
    best
}

/// Triangulate each flat piece of a gluing and identify the seam sides.
///
/// Seam samples become shared vertices; the boundary polygon of each piece is
/// nudged by a minimal-norm correction so that both sides of every seam edge
/// have exactly the same length, which keeps every interior vertex exactly flat.
pub fn triangulate(g: &GluedBoundary, opts: &MeshOptions) -> Result<ConeMetric> {
    if let Some(h) = opts.density {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("density must be positive, got {h}")));
        }
    }
    let num_seam = g.seam_samples.len();
    let pita = g.is_pita();
    let mut vertices: Vec<MetricVertex> = (0..num_seam)
        .map(|k| MetricVertex {
            tag: if pita && (k == 0 || k == num_seam - 1) { VertexTag::FoldEndpoint } else { VertexTag::Seam },
            sources: vec![],
            seam_index: Some(k),
        })
        .collect();

    // Boundary polygons and seam-edge chord targets.
    let polys: Vec<Vec<(Point2, usize, f64)>> = (0..g.pieces.len())
        .map(|i| g.boundary_samples(i).into_iter().map(|(s, k)| (g.pieces[i].point_periodic(s), k, s)).collect())
        .collect();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut chord_sum: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    for poly in &polys {
        let n = poly.len();
        for j in 0..n {
            let (p, a, _) = poly[j];
            let (q, b, _) = poly[(j + 1) % n];
            let e = chord_sum.entry(key(a, b)).or_insert((0.0, 0));
            e.0 += dist(p, q);
            e.1 += 1;
        }
    }
    if chord_sum.values().any(|&(_, c)| c != 2) {
        return Err(Error::Gluing("seam edges are not matched in pairs".into()));
    }
    let target: HashMap<(usize, usize), f64> = chord_sum.iter().map(|(k, &(s, c))| (*k, s / c as f64)).collect();

    let mut triangles = Vec::new();
    let mut lengths = Vec::new();
    let mut seam_sides = Vec::new();
    let mut tri_piece = Vec::new();
    let mut tri_local: Vec<[usize; 3]> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for (pi, poly) in polys.iter().enumerate() {
        let n = poly.len();
        let targets: Vec<f64> = (0..n).map(|j| target[&key(poly[j].1, poly[(j + 1) % n].1)]).collect();
        let pts: Vec<Point2> = poly.iter().map(|x| x.0).collect();
        let pts = project_chords(&pts, &targets).map_err(|reason| Error::Meshing { piece: pi, reason })?;
        for (j, &(_, k, s)) in poly.iter().enumerate() {
            let src = Source { piece: pi, xy: pts[j], s: Some(s) };
            if !vertices[k].sources.iter().any(|x| x.piece == pi && x.s == Some(s)) {
                vertices[k].sources.push(src);
            }
        }
        let steiner = match opts.density {
            Some(h) => steiner_points(&pts, h, opts.jitter, &mut rng),
            None => vec![],
        };
        let first_interior = vertices.len();
        for &p in &steiner {
            vertices.push(MetricVertex {
                tag: VertexTag::Interior,
                sources: vec![Source { piece: pi, xy: p, s: None }],
                seam_index: None,
            });
        }
        let local_to_global = |l: usize| if l < n { poly[l].1 } else { first_interior + l - n };
        let mut all: Vec<Point2> = pts.clone();
        all.extend(steiner.iter().copied());
        let tris = cdt_inside(&all, n).map_err(|reason| Error::Meshing { piece: pi, reason })?;
        for t in tris {
            let tri = [local_to_global(t[0]), local_to_global(t[1]), local_to_global(t[2])];
            let mut l = [0.0; 3];
            let mut seam = [false; 3];
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let boundary = a < n && b < n && ((a + 1) % n == b || (b + 1) % n == a);
                if boundary {
                    seam[i] = true;
                    l[i] = target[&key(poly[a].1, poly[b].1)];
                } else {
                    l[i] = dist(all[a], all[b]);
                }
            }
            triangles.push(tri);
            lengths.push(l);
            seam_sides.push(seam);
            tri_piece.push(pi);
            tri_local.push(t);
        }
    }

    // Adjacency: interior sides by local vertex pair within a piece (seam vertices
    // glued to themselves can repeat global pairs), seam sides by global pair.
    let side_key = |t: usize, i: usize, rev: bool| {
        let (src, piece) = if seam_sides[t][i] { (&triangles[t], usize::MAX) } else { (&tri_local[t], tri_piece[t]) };
        let (a, b) = (src[i], src[(i + 1) % 3]);
        if rev {
            (piece, b, a)
        } else {
            (piece, a, b)
        }
    };
    let mut by_pair: HashMap<(usize, usize, usize), Vec<[usize; 2]>> = HashMap::new();
    for t in 0..triangles.len() {
        for i in 0..3 {
            by_pair.entry(side_key(t, i, false)).or_default().push([t, i]);
        }
    }
    let mut neighbors = vec![[[usize::MAX; 2]; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            match by_pair.get(&side_key(t, i, true)).map(|v| v.as_slice()) {
                Some([c]) => neighbors[t][i] = *c,
                _ => {
                    return Err(Error::Meshing {
                        piece: tri_piece[t],
                        reason: format!("side ({a}, {b}) is not matched by exactly one opposite side"),
                    })
                }
            }
        }
    }

    let spacing = g.spacing();
    let (predicted, max_k) = seam_curvature_stats(g);
    let m = ConeMetric {
        vertices,
        triangles,
        lengths,
        neighbors,
        seam_sides,
        info: MetricInfo {
            spacing: Some(spacing),
            predicted_seam_defect: Some(predicted),
            max_boundary_curvature: Some(max_k),
            density: opts.density,
            scale: g.scale,
        },
    };
    Ok(m)
}

/// Largest predicted seam defect and largest boundary |κ|.
fn seam_curvature_stats(g: &GluedBoundary) -> (f64, f64) {
    let ds = g.spacing();
    if g.pieces.iter().any(|c| c.is_polyline()) {
        let pred = g.corner_turning_sums().iter().map(|x| x.1).fold(0.0, f64::max);
        // Corner turning per unit length stands in for |κ|; cusps (turning
        // beyond a right angle) carry no meaningful curvature and are skipped.
        let mut max_k: f64 = 0.0;
        for c in &g.pieces {
            let (Ok(t), Some(pos)) = (c.turning_angles(), c.vertex_arclengths()) else { continue };
            let p = c.perimeter();
            let m = pos.len();
            for i in 0..m {
                if t[i].abs() >= FRAC_PI_2 {
                    continue;
                }
                let prev = (pos[i] - pos[(i + m - 1) % m]).rem_euclid(p);
                let next = (pos[(i + 1) % m] - pos[i]).rem_euclid(p);
                max_k = max_k.max(2.0 * t[i].abs() / (prev + next));
            }
        }
        return (pred, max_k);
    }
    let max_k = g.pieces.iter().map(|c| c.max_abs_curvature()).fold(0.0, f64::max);
    let mut pred: f64 = 0.0;
    let inner = if g.is_pita() { 1..g.seam_samples.len() - 1 } else { 0..g.seam_samples.len() };
    for k in inner {
        let smp = g.seam_samples[k];
        let ka = g.pieces[smp.a.piece].curvature_at(smp.a.s).unwrap_or(0.0);
        let kb = g.pieces[smp.b.piece].curvature_at(smp.b.s).unwrap_or(0.0);
        pred = pred.max((ka + kb) * ds);
    }
    (pred, max_k)
}

/// Minimal-norm Gauss–Newton correction of a closed polygon so that side `j`
/// (from vertex `j` to `j+1`) has length `targets[j]`.
fn project_chords(pts: &[Point2], targets: &[f64]) -> std::result::Result<Vec<Point2>, String> {
    let n = pts.len();
    let mut x: Vec<Point2> = pts.to_vec();
    let scale = targets.iter().copied().fold(0.0, f64::max);
    for _ in 0..20 {
        let mut u = vec![[0.0; 2]; n];
        let mut r = DVector::zeros(n);
        for j in 0..n {
            let (a, b) = (x[j], x[(j + 1) % n]);
            let d = dist(a, b);
            u[j] = [(b[0] - a[0]) / d, (b[1] - a[1]) / d];
            r[j] = targets[j] - d;
        }
        if r.amax() <= 1e-15 * scale {
            return Ok(x);
        }
        // J J^T is cyclic tridiagonal: 2 on the diagonal, −u_j·u_{j+1} off it.
        let mut jjt = DMatrix::zeros(n, n);
        for j in 0..n {
            jjt[(j, j)] = 2.0;
            let k = (j + 1) % n;
            let c = -(u[j][0] * u[k][0] + u[j][1] * u[k][1]);
            jjt[(j, k)] += c;
            jjt[(k, j)] += c;
        }
        let lam = jjt.lu().solve(&r).ok_or("singular chord system")?;
        // δx = J^T λ: vertex j+1 gains λ_j u_j, vertex j loses it.
        for j in 0..n {
            let k = (j + 1) % n;
            x[k][0] += lam[j] * u[j][0];
            x[k][1] += lam[j] * u[j][1];
            x[j][0] -= lam[j] * u[j][0];
            x[j][1] -= lam[j] * u[j][1];
        }
    }
    let worst = (0..n).map(|j| (targets[j] - dist(x[j], x[(j + 1) % n])).abs()).fold(0.0, f64::max);
    if worst <= 1e-13 * scale {
        Ok(x)
    } else {
        Err(format!("seam chord projection did not converge (residual {worst:.3e})"))
    }
}

fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Jittered square grid of spacing `h`, clipped to the polygon and kept at
/// least `h/2` away from its boundary.
fn steiner_points(poly: &[Point2], h: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    // Rows offset by half a spacing give a near-equilateral pattern.
    let dy = h * 3f64.sqrt() / 2.0;
    let ny = ((hi[1] - lo[1]) / dy).ceil() as i64 + 1;
    let nx = ((hi[0] - lo[0]) / h).ceil() as i64 + 2;
    // Bucket boundary segments by row band for fast distance queries.
    let mut out = Vec::new();
    for iy in 0..ny {
        for ix in -1..nx {
            let jx: f64 = rng.random::<f64>() - 0.5;
            let jy: f64 = rng.random::<f64>() - 0.5;
            let p = [
                lo[0] + (ix as f64 + if iy % 2 == 1 { 0.5 } else { 0.0 } + jitter * jx) * h,
                lo[1] + (iy as f64 + jitter * jy) * dy,
            ];
            if !point_in_polygon(p, poly) {
                continue;
            }
            let n = poly.len();
            let near = (0..n).any(|j| dist_to_segment(p, poly[j], poly[(j + 1) % n]) < 0.5 * h);
            if !near {
                out.push(p);
            }
        }
    }
    out
}

/// Constrained Delaunay triangulation of a polygon (first `n` points, in
/// counterclockwise order) with interior points; returns counterclockwise
/// triangles inside the polygon, as local indices.
pub(crate) fn cdt_inside(points: &[Point2], n: usize) -> std::result::Result<Vec<[usize; 3]>, String> {
    let verts: Vec<SPoint<f64>> = points.iter().map(|p| SPoint::new(p[0], p[1])).collect();
    let edges: Vec<[usize; 2]> = (0..n).map(|j| [j, (j + 1) % n]).collect();
    let mut conflict = false;
    let cdt = ConstrainedDelaunayTriangulation::<SPoint<f64>>::try_bulk_load_cdt(verts, edges, |_| conflict = true)
        .map_err(|e| format!("triangulation failed: {e:?}"))?;
    if conflict {
        return Err("boundary polygon self-intersects".into());
    }
    if cdt.num_vertices() != points.len() {
        return Err("duplicate points in piece".into());
    }
    // Faces reachable from the outside without crossing a constraint are outside.
    let mut outside = std::collections::HashSet::new();
    let mut stack = Vec::new();
    for f in cdt.inner_faces() {
        for e in f.adjacent_edges() {
            if e.rev().face().is_outer() && !cdt.is_constraint_edge(e.as_undirected().fix()) && outside.insert(f.fix()) {
                stack.push(f);
            }
        }
    }
    while let Some(f) = stack.pop() {
        for e in f.adjacent_edges() {
            if cdt.is_constraint_edge(e.as_undirected().fix()) {
                continue;
            }
            if let Some(g) = e.rev().face().as_inner() {
                if outside.insert(g.fix()) {
                    stack.push(g);
                }
            }
        }
    }
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        if outside.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices();
        let mut t = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
        let orient = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if orient < 0.0 {
            t.swap(1, 2);
        }
        tris.push(t);
    }
    if tris.len() != points.len() - n + points.len() - 2 {
        return Err(format!(
            "triangle count {} inconsistent with {} boundary and {} interior points",
            tris.len(),
            n,
            points.len() - n
        ));
    }
    Ok(tris)
}
