//! Final mesh: every coarse (cone-vertex) face is a planar triangle in 3-space;
//! the removed flat vertices are placed at their barycentric positions and each
//! coarse face is re-triangulated in its own plane.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hull::Vec3;
use crate::intrinsic::IntrinsicMesh;
use crate::metric::cdt_inside;

/// Barycentric coordinates below this snap a point onto the opposite side.
const SNAP: f64 = 1e-9;

pub(crate) struct Assembled {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub lengths: Vec<f64>,
    /// `neighbors[t][i]`: triangle across side `i` (corner `i` to `i + 1`) of `t`.
    pub neighbors: Vec<[usize; 3]>,
}

pub(crate) fn assemble(mesh: &IntrinsicMesh, cone: &[Option<Vec3>]) -> Result<Assembled> {
    let nv = cone.len();
    let mut positions: Vec<Option<Vec3>> = cone.to_vec();
    // Points on coarse edges, keyed by the representative halfedge (h < twin),
    // with their parameter along that halfedge.
    let mut on_edge: HashMap<usize, Vec<(f64, usize)>> = HashMap::new();
    let mut inside: Vec<Vec<(usize, [f64; 3])>> = vec![Vec::new(); mesh.num_faces()];
    for f in mesh.live_faces() {
        let c = mesh.face(f);
        let p: Vec<Vec3> = c
            .iter()
            .map(|&v| cone[v].ok_or_else(|| Error::Precondition(format!("cone vertex {v} was not placed"))))
            .collect::<Result<_>>()?;
        for tp in &mesh.points[f] {
            let mut b = tp.bary.map(|x| x.max(0.0));
            let k = (0..3).min_by(|&x, &y| b[x].total_cmp(&b[y])).unwrap();
            if b[k] < SNAP {
                b[k] = 0.0;
            }
            let s: f64 = b.iter().sum();
            b.iter_mut().for_each(|x| *x /= s);
            positions[tp.id] = Some(p[0] * b[0] + p[1] * b[1] + p[2] * b[2]);
            if b[k] == 0.0 {
                let side = (k + 1) % 3;
                let h = 3 * f + side;
                let t = b[(k + 2) % 3];
                let rep = h.min(mesh.twin[h]);
                on_edge.entry(rep).or_default().push((if rep == h { t } else { 1.0 - t }, tp.id));
            } else {
                inside[f].push((tp.id, b));
            }
        }
    }
    for pts in on_edge.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut triangles = Vec::new();
    let mut lengths: HashMap<(usize, usize), f64> = HashMap::new();
    // Sides keyed by (context, from, to): the context is the coarse edge for
    // sides on it and the coarse face otherwise, so multi-edges stay apart.
    let mut sides: HashMap<(usize, usize, usize), (usize, usize)> = HashMap::new();
    let face_ctx = |f: usize| 3 * mesh.num_faces() + f;
    for f in mesh.live_faces() {
        let c = mesh.face(f);
        let lay = mesh.layout(f);
        let mut ids = Vec::new();
        let mut xy = Vec::new();
        // Coarse edge owning the boundary segment that starts at each boundary point.
        let mut seg_ctx = Vec::new();
        for i in 0..3 {
            ids.push(c[i]);
            xy.push(lay[i]);
            let h = 3 * f + i;
            let rep = h.min(mesh.twin[h]);
            seg_ctx.push(rep);
            if let Some(pts) = on_edge.get(&rep) {
                let (a, b) = (lay[i], lay[(i + 1) % 3]);
                let ordered: Vec<(f64, usize)> =
                    if rep == h { pts.clone() } else { pts.iter().rev().map(|&(t, id)| (1.0 - t, id)).collect() };
                for (t, id) in ordered {
                    ids.push(id);
                    seg_ctx.push(rep);
                    xy.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
        }
        let nb = ids.len();
        for &(id, b) in &inside[f] {
            ids.push(id);
            xy.push([
                b[0] * lay[0][0] + b[1] * lay[1][0] + b[2] * lay[2][0],
                b[0] * lay[0][1] + b[1] * lay[1][1] + b[2] * lay[2][1],
            ]);
        }
        let local = if ids.len() == 3 {
            vec![[0, 1, 2]]
        } else {
            cdt_inside(&xy, nb).map_err(|reason| Error::Precondition(format!("re-triangulating coarse face {f}: {reason}")))?
        };
        for t in local {
            let ti = triangles.len();
            triangles.push([ids[t[0]], ids[t[1]], ids[t[2]]]);
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let ctx = if a < nb && b < nb && (a + 1) % nb == b {
                    seg_ctx[a]
                } else if a < nb && b < nb && (b + 1) % nb == a {
                    seg_ctx[b]
                } else {
                    face_ctx(f)
                };
                sides.insert((ctx, ids[a], ids[b]), (ti, i));
                let key = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                lengths.entry(key).or_insert_with(|| (xy[a][0] - xy[b][0]).hypot(xy[a][1] - xy[b][1]));
            }
        }
    }
    let positions = positions
        .into_iter()
        .enumerate()
        .map(|(v, p)| p.ok_or_else(|| Error::Precondition(format!("vertex {v} is neither a cone vertex nor tracked"))))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(positions.len(), nv);
    let mut neighbors = vec![[usize::MAX; 3]; triangles.len()];
    for (&(ctx, a, b), &(t, i)) in &sides {
        let &(u, _) = sides
            .get(&(ctx, b, a))
            .ok_or_else(|| Error::Precondition(format!("final mesh side ({a}, {b}) has no opposite side")))?;
        neighbors[t][i] = u;
    }
    let mut keyed: Vec<((usize, usize), f64)> = lengths.into_iter().collect();
    keyed.sort_by_key(|a| a.0);
    Ok(Assembled {
        positions,
        triangles,
        edges: keyed.iter().map(|&((a, b), _)| [a, b]).collect(),
        lengths: keyed.iter().map(|&(_, l)| l).collect(),
        neighbors,
    })
}
