//! Closed-form test bodies as cone metrics.

use crate::curves::PlanarCurve;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::gluing::{make_dform, make_relaxed, GluedBoundary};
use crate::metric::ConeMetric;

fn from_faces(nv: usize, faces: Vec<[usize; 3]>, pos: &[[f64; 3]]) -> Result<ConeMetric> {
    let d = |a: usize, b: usize| {
        let (p, q) = (pos[a], pos[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let lengths = faces.iter().map(|t| [d(t[0], t[1]), d(t[1], t[2]), d(t[2], t[0])]).collect();
    Ok(ConeMetric::from_triangles(nv, faces, lengths)?.with_all_seams())
}

/// Vertex coordinates of the regular tetrahedron with the given side.
pub fn tetrahedron_positions(side: f64) -> Vec<[f64; 3]> {
    let s = side / 8f64.sqrt();
    vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]]
}

/// Four equilateral triangles.
pub fn tetrahedron(side: f64) -> Result<ConeMetric> {
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    from_faces(4, faces, &tetrahedron_positions(side))
}

/// Vertex coordinates of the axis-aligned cube `[0, side]³`; vertex `i` has
/// coordinates given by the bits of `i`.
pub fn cube_positions(side: f64) -> Vec<[f64; 3]> {
    (0..8).map(|i| [(i & 1) as f64 * side, ((i >> 1) & 1) as f64 * side, ((i >> 2) & 1) as f64 * side]).collect()
}

/// Six squares, each split along one diagonal.
pub fn cube(side: f64) -> Result<ConeMetric> {
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    from_faces(8, faces, &cube_positions(side))
}

/// Two regular `n`-gons of unit circumradius glued rim to rim, the second
/// turned by half an edge. Seam samples sit at every corner of either polygon.
pub fn polygon_pair(n: usize) -> Result<GluedBoundary> {
    let a = PlanarCurve::regular_polygon(n, 1.0)?;
    let p = a.perimeter();
    make_dform(&a, &a, p / (2 * n) as f64, 2 * n)
}

/// Two equal squares glued corner to corner: a doubly covered square.
pub fn square_pillow(side: f64) -> Result<GluedBoundary> {
    let sq = PlanarCurve::polyline(vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]])?;
    make_dform(&sq, &sq, 0.0, 8)
}

/// A convex polyhedron with a straight crease tangent to its seam at both ends.
///
/// Two copies of a polygonal stadium (caps of `cap_edges` edges each, long
/// sides of `side_edges` edges, all edges of length `edge`) are hinged along
/// one long side, each tilted by `half_angle` out of the bisecting plane. The
/// hull of the two rims is bounded by the two stadium faces, which meet in a
/// crease of deviation `π − 2·half_angle`, and by a prism side over the
/// projected rim. Piece `a` is the pair of faces unfolded across the hinge;
/// piece `b` is the unrolled prism side. Both are polygons with `2(2·cap_edges
/// + side_edges)` edges of length `edge`, glued corner to corner.
pub fn creased_wedge(cap_edges: usize, side_edges: usize, edge: f64, half_angle: f64) -> Result<GluedBoundary> {
    if cap_edges < 2 || side_edges < 1 || !(edge > 0.0) || !(half_angle > 0.0 && half_angle < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "creased wedge needs cap_edges ≥ 2, side_edges ≥ 1, edge > 0 and 0 < half_angle < π/2; got {cap_edges}, {side_edges}, {edge}, {half_angle}"
        )));
    }
    let rim = wedge_rim(cap_edges, side_edges, edge);
    let m = rim.len() - 1;
    // Piece a: the rim, then its mirror image back from the far hinge end.
    let mut a: Vec<[f64; 2]> = rim.clone();
    a.extend(rim[1..m].iter().rev().map(|v| [v[0], -v[1]]));
    // Piece b: unrolled prism side; abscissa is arclength along the projected
    // rim, ordinate the half-height of the side at that point.
    let (c, s) = (half_angle.cos(), half_angle.sin());
    let mut sigma = vec![0.0];
    for k in 0..m {
        let (dx, dy) = (rim[k + 1][0] - rim[k][0], (rim[k + 1][1] - rim[k][1]) * c);
        sigma.push(sigma[k] + dx.hypot(dy));
    }
    let mut b: Vec<[f64; 2]> = (0..=m).map(|k| [sigma[k], -rim[k][1] * s]).collect();
    b.extend((1..m).rev().map(|k| [sigma[k], rim[k][1] * s]));
    let (a, b) = (PlanarCurve::polyline(a)?, PlanarCurve::polyline(b)?);
    make_relaxed(&a, &b, 0.0, 2 * m)
}

/// Open polygonal stadium rim from the near hinge end `(0, 0)` around to the
/// far one `(−side_edges·edge, 0)`, leaving and arriving along the hinge.
fn wedge_rim(cap_edges: usize, side_edges: usize, edge: f64) -> Vec<[f64; 2]> {
    let step = PI / cap_edges as f64;
    let mut headings: Vec<f64> = (0..cap_edges).map(|j| (j as f64 + 0.5) * step).collect();
    headings.extend(std::iter::repeat_n(PI, side_edges));
    headings.extend((0..cap_edges).map(|j| PI + (j as f64 + 0.5) * step));
    let mut pts = vec![[0.0, 0.0]];
    for h in headings {
        let last = pts[pts.len() - 1];
        pts.push([last[0] + edge * h.cos(), last[1] + edge * h.sin()]);
    }
    // The far end lies on the hinge up to roundoff; pin it there.
    let m = pts.len() - 1;
    pts[m] = [-(side_edges as f64) * edge, 0.0];
    pts
}
