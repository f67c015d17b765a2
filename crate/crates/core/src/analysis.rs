//! Structural checks on realized bodies: bend loci and their persistence
//! across refinement, straightness, endpoint classification, hull-of-seam gap
//! and the discrete Gauss equality.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{hull_hausdorff, kabsch, point_segment_distance, ConvexHull, Vec3};
use crate::metric::{ConeMetric, VertexTag};
use crate::reconstruct::EmbeddedPolyhedron;

/// Outward unit normal of triangle `t`.
fn normal(e: &EmbeddedPolyhedron, t: usize) -> Vec3 {
    let [a, b, c] = e.triangles[t];
    let n = (e.positions[b] - e.positions[a]).cross(&(e.positions[c] - e.positions[a]));
    n / n.norm()
}

/// Angle between the normals across side `i` of triangle `t` (π minus the
/// interior dihedral angle).
pub fn side_deviation(e: &EmbeddedPolyhedron, t: usize, i: usize) -> f64 {
    let u = e.neighbors[t][i];
    let (n1, n2) = (normal(e, t), normal(e, u));
    n1.cross(&n2).norm().atan2(n1.dot(&n2))
}

/// Dihedral deviation across the edge `{a, b}`: 0 for a flat pair of
/// triangles, π for a fold.
pub fn dihedral_deviation(e: &EmbeddedPolyhedron, edge: [usize; 2]) -> Result<f64> {
    let [a, b] = edge;
    for (t, tri) in e.triangles.iter().enumerate() {
        for i in 0..3 {
            if tri[i] == a && tri[(i + 1) % 3] == b {
                if e.neighbors[t][i] == usize::MAX {
                    return Err(Error::Domain(format!("edge ({a}, {b}) has only one incident triangle")));
                }
                return Ok(side_deviation(e, t, i));
            }
        }
    }
    Err(Error::Domain(format!("({a}, {b}) is not an edge of the embedding")))
}

/// Undirected edge instances as `(triangle, side)` with the triangle on the
/// side's left; each is listed once.
fn edge_instances(e: &EmbeddedPolyhedron) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, tri) in e.triangles.iter().enumerate() {
        for i in 0..3 {
            let u = e.neighbors[t][i];
            if u == usize::MAX {
                continue;
            }
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            if t < u || (t == u && a < b) {
                out.push((t, i));
            }
        }
    }
    out
}

/// Seam edges of the metric as a set of sorted vertex pairs.
fn seam_pairs(m: &ConeMetric) -> HashSet<[usize; 2]> {
    m.seam_edges().into_iter().collect()
}

fn is_seam_vertex(m: &ConeMetric, v: usize) -> bool {
    matches!(m.vertices[v].tag, VertexTag::Seam | VertexTag::FoldEndpoint)
}

/// Deviations of every edge that is not a seam edge.
pub fn interior_deviations(e: &EmbeddedPolyhedron, m: &ConeMetric) -> Vec<f64> {
    let seams = seam_pairs(m);
    edge_instances(e)
        .into_iter()
        .filter(|&(t, i)| {
            let tri = e.triangles[t];
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            !seams.contains(&[a.min(b), a.max(b)])
        })
        .map(|(t, i)| side_deviation(e, t, i))
        .collect()
}

/// Floor of the bend threshold, above solver noise.
pub const BEND_FLOOR: f64 = 1e-6;

/// Deviations at or below this are exact flatness up to round-off.
const FLAT_NOISE: f64 = 1e-8;

/// Default bend threshold: three times the median deviation of the non-seam
/// edges that bend at all, but at least [`BEND_FLOOR`]. Edges inside a flat
/// coarse face are exactly flat and would pin the median at zero.
pub fn default_bend_threshold(e: &EmbeddedPolyhedron, m: &ConeMetric) -> f64 {
    let mut d: Vec<f64> = interior_deviations(e, m).into_iter().filter(|&x| x > FLAT_NOISE).collect();
    if d.is_empty() {
        return BEND_FLOOR;
    }
    d.sort_by(f64::total_cmp);
    let median = if d.len() % 2 == 1 { d[d.len() / 2] } else { 0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2]) };
    (3.0 * median).max(BEND_FLOOR)
}

/// A maximal path of bent non-seam edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub vertices: Vec<usize>,
    pub deviations: Vec<f64>,
    pub positions: Vec<Vec3>,
}

impl Chain {
    pub fn endpoints(&self) -> [usize; 2] {
        [self.vertices[0], *self.vertices.last().unwrap()]
    }

    pub fn segment(&self) -> [Vec3; 2] {
        [self.positions[0], *self.positions.last().unwrap()]
    }

    pub fn mean_deviation(&self) -> f64 {
        self.deviations.iter().sum::<f64>() / self.deviations.len() as f64
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }

    /// Length of the segment between the endpoints.
    pub fn span(&self) -> f64 {
        let [a, b] = self.segment();
        (b - a).norm()
    }
}

/// Non-seam edges bending by more than `tau`, joined into maximal chains.
/// Chains pass through interior vertices with exactly two bent edges and stop
/// anywhere else; chains are started from the lowest vertex pair first.
pub fn extract_bend_loci(e: &EmbeddedPolyhedron, m: &ConeMetric, tau: f64) -> Vec<Chain> {
    let seams = seam_pairs(m);
    let mut bent: BTreeMap<[usize; 2], f64> = BTreeMap::new();
    for (t, i) in edge_instances(e) {
        let tri = e.triangles[t];
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let key = [a.min(b), a.max(b)];
        if seams.contains(&key) {
            continue;
        }
        let d = side_deviation(e, t, i);
        if d > tau {
            let slot = bent.entry(key).or_insert(0.0);
            *slot = slot.max(d);
        }
    }
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &[a, b] in bent.keys() {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    for v in adj.values_mut() {
        v.sort_unstable();
    }
    let passes = |v: usize| m.vertices[v].tag == VertexTag::Interior && adj[&v].len() == 2;
    let mut used: HashSet<[usize; 2]> = HashSet::new();
    let mut chains = Vec::new();
    for &[a, b] in bent.keys() {
        if used.contains(&[a, b]) {
            continue;
        }
        used.insert([a, b]);
        let mut verts = vec![a, b];
        // Extend forward from b, then backward from a.
        for _dir in 0..2 {
            loop {
                let end = *verts.last().unwrap();
                if !passes(end) {
                    break;
                }
                let prev = verts[verts.len() - 2];
                let nxt = adj[&end].iter().copied().find(|&w| w != prev);
                let Some(w) = nxt else { break };
                let key = [end.min(w), end.max(w)];
                if used.contains(&key) || verts.contains(&w) {
                    break;
                }
                used.insert(key);
                verts.push(w);
            }
            verts.reverse();
        }
        if verts[0] > *verts.last().unwrap() {
            verts.reverse();
        }
        let deviations = verts.windows(2).map(|w| bent[&[w[0].min(w[1]), w[0].max(w[1])]]).collect();
        let positions = verts.iter().map(|&v| e.positions[v]).collect();
        chains.push(Chain { vertices: verts, deviations, positions });
    }
    chains
}

/// Largest distance of chain vertices from the segment through its endpoints,
/// over the segment length; zero for single-edge chains.
pub fn straightness(chain: &Chain) -> f64 {
    if chain.positions.len() <= 2 {
        return 0.0;
    }
    let [a, b] = chain.segment();
    let len = (b - a).norm();
    if len == 0.0 {
        return f64::INFINITY;
    }
    chain.positions.iter().map(|p| point_segment_distance(p, &a, &b)).fold(0.0, f64::max) / len
}

/// Hausdorff distance between two segments (attained at endpoints).
pub fn segment_hausdorff(s: [Vec3; 2], t: [Vec3; 2]) -> f64 {
    let d1 = point_segment_distance(&s[0], &t[0], &t[1]).max(point_segment_distance(&s[1], &t[0], &t[1]));
    let d2 = point_segment_distance(&t[0], &s[0], &s[1]).max(point_segment_distance(&t[1], &s[0], &s[1]));
    d1.max(d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointClass {
    StrictVertex,
    SeamTangent,
    Unresolved,
}

/// Classification of one chain endpoint with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub vertex: usize,
    pub class: EndpointClass,
    pub defect: f64,
    pub strictness_threshold: f64,
    /// Angle between the chain and the seam tangent, for seam vertices.
    pub tangent_angle: Option<f64>,
    pub angular_tolerance: f64,
    pub diagnostics: Option<String>,
}

/// Default angular tolerance for tangency: `5 · Δs · max|κ|`.
pub fn tangency_tolerance(m: &ConeMetric) -> f64 {
    match (m.info.spacing, m.info.max_boundary_curvature) {
        (Some(ds), Some(k)) if k > 0.0 => 5.0 * ds * k,
        _ => 0.0,
    }
}

/// Two seam neighbors of a seam vertex (fold endpoints have one; `None` then).
fn seam_neighbors(m: &ConeMetric, v: usize) -> Option<[usize; 2]> {
    let mut nb: Vec<usize> = m
        .seam_edges()
        .into_iter()
        .filter_map(|[a, b]| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
        .collect();
    nb.sort_unstable();
    nb.dedup();
    (nb.len() == 2).then(|| [nb[0], nb[1]])
}

/// Classify the endpoint `v` of `chain`: strict vertex, point of tangency to
/// a seam, or unresolved.
pub fn classify_endpoint(m: &ConeMetric, e: &EmbeddedPolyhedron, chain: &Chain, v: usize, angular_tol: f64) -> EndpointReport {
    let defect = crate::metric::angle_defect(m, v);
    let threshold = m.strictness_threshold();
    let mut report = EndpointReport {
        vertex: v,
        class: EndpointClass::Unresolved,
        defect,
        strictness_threshold: threshold,
        tangent_angle: None,
        angular_tolerance: angular_tol,
        diagnostics: None,
    };
    if defect > threshold {
        report.class = EndpointClass::StrictVertex;
        return report;
    }
    if !is_seam_vertex(m, v) {
        report.diagnostics = Some(format!("vertex {v} is neither strict (defect {defect:.3e}) nor on a seam"));
        return report;
    }
    let Some([p, q]) = seam_neighbors(m, v) else {
        report.diagnostics = Some(format!("seam vertex {v} lacks two seam neighbors"));
        return report;
    };
    // Tangent line through the two seam neighbours, taken as unoriented lines
    // so that a seam doubling back on itself (a cusp) keeps its tangent.
    let (back, ahead) = ((e.positions[v] - e.positions[p]).normalize(), (e.positions[q] - e.positions[v]).normalize());
    let tangent = if back.dot(&ahead) >= 0.0 { back + ahead } else { back - ahead };
    let [a, b] = chain.segment();
    let dir = b - a;
    let cos = (tangent.dot(&dir) / (tangent.norm() * dir.norm())).abs().min(1.0);
    let angle = cos.acos();
    report.tangent_angle = Some(angle);
    if angle < angular_tol {
        report.class = EndpointClass::SeamTangent;
    } else {
        report.diagnostics = Some(format!(
            "seam vertex {v}: chain meets the seam at {angle:.4} rad (tolerance {angular_tol:.4}) with defect {defect:.3e}"
        ));
    }
    report
}

/// Bend loci of one refinement level, with what is needed to compare levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLoci {
    pub chains: Vec<Chain>,
    /// Mean metric edge length of the level.
    pub mean_edge_length: f64,
    /// Positions used to bring this level into the finest level's frame:
    /// seam landmarks keyed by their boundary location.
    pub landmarks: Vec<((usize, f64), Vec3)>,
    /// All vertex positions (for the fallback frame).
    pub cloud: Vec<Vec3>,
}

impl LevelLoci {
    pub fn new(e: &EmbeddedPolyhedron, m: &ConeMetric, tau: f64) -> Self {
        let mut landmarks = Vec::new();
        for (v, mv) in m.vertices.iter().enumerate() {
            if mv.tag == VertexTag::Interior {
                continue;
            }
            for s in &mv.sources {
                if let Some(arc) = s.s {
                    landmarks.push(((s.piece, arc), e.positions[v]));
                }
            }
        }
        LevelLoci {
            chains: extract_bend_loci(e, m, tau),
            mean_edge_length: m.mean_edge_length(),
            landmarks,
            cloud: e.positions.clone(),
        }
    }
}

/// A chain of the finest level and its matches at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistentChain {
    pub chain: Chain,
    pub straightness: f64,
    /// Per level (coarsest first): Hausdorff distance of the matched chain.
    pub match_distance: Vec<f64>,
    /// Per level: mean deviation of the matched chain.
    pub mean_deviation: Vec<f64>,
    /// Per level: straightness of the matched chain.
    pub level_straightness: Vec<f64>,
    /// Per level: endpoint distance of the matched chain.
    pub level_span: Vec<f64>,
    pub endpoints: Vec<EndpointReport>,
}

/// Chains present at every refinement level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CreaseReport {
    pub chains: Vec<PersistentChain>,
    pub match_tol: f64,
    pub candidates: usize,
    /// How each level was aligned to the finest one.
    pub alignment: Vec<String>,
    pub alignment_rms: Vec<f64>,
}

type PointMap = Box<dyn Fn(&Vec3) -> Vec3>;

/// Rigid map of `level` into the frame of `finest`: Kabsch on shared seam
/// landmarks, else principal axes of the vertex clouds.
fn level_frame(level: &LevelLoci, finest: &LevelLoci) -> (PointMap, String, f64) {
    let mut from = Vec::new();
    let mut to = Vec::new();
    for &((piece, s), p) in &level.landmarks {
        if let Some(&(_, q)) =
            finest.landmarks.iter().find(|((pc, t), _)| *pc == piece && (t - s).abs() <= 1e-9 * s.abs().max(1.0))
        {
            from.push(p);
            to.push(q);
        }
    }
    if from.len() >= 4 {
        if let Ok(m) = kabsch(&from, &to) {
            let rms = m.rms;
            return (Box::new(move |p| m.apply(p)), "seam-landmarks".into(), rms);
        }
    }
    let frame = |c: &[Vec3]| {
        let n = c.len() as f64;
        let mean = c.iter().sum::<Vec3>() / n;
        let mut cov = nalgebra::Matrix3::zeros();
        for p in c {
            cov += (p - mean) * (p - mean).transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axes = nalgebra::Matrix3::from_columns(&[
            eig.eigenvectors.column(idx[0]).into_owned(),
            eig.eigenvectors.column(idx[1]).into_owned(),
            eig.eigenvectors.column(idx[2]).into_owned(),
        ]);
        (mean, axes)
    };
    let (ma, ra) = frame(&level.cloud);
    let (mb, rb) = frame(&finest.cloud);
    let rot = rb * ra.transpose();
    (Box::new(move |p| rot * (p - ma) + mb), "principal-axes".into(), f64::NAN)
}

/// Smallest finest-to-coarsest ratio of deviation and of length for a bend to
/// count as a crease: discretization bends fade or shrink with the spacing,
/// creases keep both.
pub const STABILITY_RATIO: f64 = 0.5;

/// Keep the finest-level chains that have a match (segment Hausdorff within
/// `match_tol`) at every level and whose bending and length do not fade
/// under refinement. Levels are ordered coarsest first.
pub fn persistent_creases(levels: &[LevelLoci], match_tol: f64) -> Result<CreaseReport> {
    if levels.len() < 3 {
        return Err(Error::Domain(format!("persistence needs at least 3 refinement levels, got {}", levels.len())));
    }
    let finest = levels.last().unwrap();
    let mut maps = Vec::new();
    let mut alignment = Vec::new();
    let mut alignment_rms = Vec::new();
    for lvl in levels {
        let (f, how, rms) = level_frame(lvl, finest);
        maps.push(f);
        alignment.push(how);
        alignment_rms.push(rms);
    }
    let mut out = Vec::new();
    for c in &finest.chains {
        let seg = c.segment();
        let mut dist = Vec::new();
        let mut dev = Vec::new();
        let mut st = Vec::new();
        let mut span = Vec::new();
        let mut ok = true;
        for (k, lvl) in levels.iter().enumerate() {
            let best = lvl
                .chains
                .iter()
                .map(|d| {
                    let s = d.segment();
                    (segment_hausdorff(seg, [maps[k](&s[0]), maps[k](&s[1])]), d)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((h, d)) if h <= match_tol => {
                    dist.push(h);
                    dev.push(d.mean_deviation());
                    st.push(straightness(d));
                    span.push(d.span());
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        let last = levels.len() - 1;
        if !ok || dev[last] < STABILITY_RATIO * dev[0] || span[last] < STABILITY_RATIO * span[0] {
            continue;
        }
        out.push(PersistentChain {
            straightness: straightness(c),
            chain: c.clone(),
            match_distance: dist,
            mean_deviation: dev,
            level_straightness: st,
            level_span: span,
            endpoints: Vec::new(),
        });
    }
    Ok(CreaseReport { chains: out, match_tol, candidates: finest.chains.len(), alignment, alignment_rms })
}

/// Classify the endpoints of every persistent chain at the finest level.
pub fn classify_report(report: &mut CreaseReport, m: &ConeMetric, e: &EmbeddedPolyhedron, angular_tol: f64) {
    for pc in &mut report.chains {
        pc.endpoints = pc.chain.endpoints().iter().map(|&v| classify_endpoint(m, e, &pc.chain, v, angular_tol)).collect();
    }
}

/// Hausdorff distance between the hull of all vertices and the hull of the
/// seam and strict vertices, relative to the diameter.
pub fn hull_of_seam_gap(e: &EmbeddedPolyhedron, m: &ConeMetric) -> Result<f64> {
    let defects = m.defects();
    let threshold = m.strictness_threshold();
    let keep: Vec<Vec3> =
        (0..m.num_vertices()).filter(|&v| is_seam_vertex(m, v) || defects[v] > threshold).map(|v| e.positions[v]).collect();
    let all = ConvexHull::new(&e.positions, 1e-12)?;
    let seam = ConvexHull::new(&keep, 1e-12)?;
    Ok(hull_hausdorff(&all, &seam) / all.diameter)
}

/// Triangles around `v` in cyclic order, starting from `start`.
fn star(e: &EmbeddedPolyhedron, v: usize, start: usize) -> Vec<usize> {
    let mut out = vec![start];
    let mut t = start;
    loop {
        let i = e.triangles[t].iter().position(|&x| x == v).unwrap();
        // Side entering v is (i+2); cross it to the next triangle around v.
        let u = e.neighbors[t][(i + 2) % 3];
        if u == start || u == usize::MAX || out.len() > e.triangles.len() {
            break;
        }
        out.push(u);
        t = u;
    }
    out
}

/// Area of the spherical polygon spanned by the given outward normals.
fn normal_cone_area(normals: &[Vec3]) -> f64 {
    let mut area = 0.0;
    if normals.len() >= 3 {
        let a = normals[0];
        for w in normals[1..].windows(2) {
            let (b, c) = (w[0], w[1]);
            let num = a.dot(&b.cross(&c));
            let den = 1.0 + a.dot(&b) + b.dot(&c) + c.dot(&a);
            area += 2.0 * num.atan2(den);
        }
    }
    area.abs().min(TAU)
}

fn gauss_residual_from(e: &EmbeddedPolyhedron, m: &ConeMetric, v: usize, start: Option<usize>) -> f64 {
    let normals: Vec<Vec3> = match start {
        Some(t) => star(e, v, t).into_iter().map(|t| normal(e, t)).collect(),
        None => vec![],
    };
    (normal_cone_area(&normals) - crate::metric::angle_defect(m, v)).abs()
}

/// Area of the spherical polygon spanned by the outward normals around `v`
/// (the extrinsic Gauss-map image), compared with the intrinsic defect.
pub fn gauss_defect_consistency(e: &EmbeddedPolyhedron, m: &ConeMetric, v: usize) -> f64 {
    let start = e.triangles.iter().position(|t| t.contains(&v));
    gauss_residual_from(e, m, v, start)
}

/// Largest [`gauss_defect_consistency`] over all vertices.
pub fn max_gauss_residual(e: &EmbeddedPolyhedron, m: &ConeMetric) -> f64 {
    let mut first = vec![None; e.positions.len()];
    for (t, tri) in e.triangles.iter().enumerate() {
        for &v in tri {
            first[v].get_or_insert(t);
        }
    }
    (0..m.num_vertices()).map(|v| gauss_residual_from(e, m, v, first[v])).fold(0.0, f64::max)
}

/// Dihedral deviation between the polygon faces and the triangle rings of a
/// realized glued-polygon pair: the largest non-seam deviation.
pub fn ring_dihedral(e: &EmbeddedPolyhedron, m: &ConeMetric) -> f64 {
    interior_deviations(e, m).into_iter().fold(0.0, f64::max).min(PI)
}
