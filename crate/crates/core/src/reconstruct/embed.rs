//! Placing intrinsic triangulations in 3-space: layout from apex distances,
//! spectral initialization, and Levenberg–Marquardt length polishing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::hull::Vec3;
use crate::intrinsic::{next, prev, IntrinsicMesh};

/// Positions of the live vertices from the base dihedral angles of the
/// pyramids (`theta[f][k]` at side `k` of face `f`): faces are unfolded one by
/// one across shared edges, each hinged at the total dihedral angle of its
/// edge. Hinges are taken best conditioned first (long hinge relative to the
/// new sides), since a short hinge amplifies position errors. Corners of every
/// face appear counterclockwise from outside.
pub(crate) fn layout_from_dihedrals(mesh: &IntrinsicMesh, theta: &[Option<[f64; 3]>]) -> Vec<Option<Vec3>> {
    let mut pos: Vec<Option<Vec3>> = vec![None; mesh.vertex_alive.len()];
    let Some(f0) = mesh.live_faces().find(|&f| {
        let c = mesh.face(f);
        c[0] != c[1] && c[1] != c[2] && c[0] != c[2]
    }) else {
        return pos;
    };
    for (v, p) in mesh.face(f0).into_iter().zip(mesh.layout(f0)) {
        pos[v] = Some(Vec3::new(p[0], p[1], 0.0));
    }
    // Candidate hinges: halfedges of faces whose corners are all placed,
    // keyed by hinge length over the longest new side (largest first).
    let mut heap = BinaryHeap::new();
    let mut complete = vec![false; mesh.num_faces()];
    let mut push_complete = |f: usize, pos: &[Option<Vec3>], heap: &mut BinaryHeap<Item>| {
        if complete[f] || !mesh.face(f).iter().all(|&v| pos[v].is_some()) {
            return;
        }
        complete[f] = true;
        for i in 0..3 {
            let h = mesh.twin[3 * f + i];
            let score = mesh.len[h] / mesh.len[next(h)].max(mesh.len[prev(h)]);
            heap.push(Item(-score, 3 * f + i));
        }
    };
    push_complete(f0, &pos, &mut heap);
    while let Some(Item(_, hf)) = heap.pop() {
        let (f, i) = (hf / 3, hf % 3);
        let h = mesh.twin[hf];
        let g = h / 3;
        let (a, b, v) = (mesh.corner[h], mesh.corner[next(h)], mesh.corner[prev(h)]);
        if pos[v].is_some() {
            push_complete(g, &pos, &mut heap);
            continue;
        }
        let c = mesh.face(f);
        let (p0, p1, p2) = (pos[c[0]].unwrap(), pos[c[1]].unwrap(), pos[c[2]].unwrap());
        let (pa, pb, pd) = (pos[a].unwrap(), pos[b].unwrap(), pos[c[(i + 2) % 3]].unwrap());
        let (Some(outward), Some(e)) = ((p1 - p0).cross(&(p2 - p0)).try_normalize(0.0), (pb - pa).try_normalize(0.0)) else {
            continue;
        };
        let toward = pd - pa;
        let (Some(u), Some(tf), Some(tg)) = ((toward - e * toward.dot(&e)).try_normalize(0.0), theta[f], theta[g]) else {
            continue;
        };
        let phi = tf[i] + tg[h % 3];
        let across = u * phi.cos() - outward * phi.sin();
        let (l, la, lb) = (mesh.len[h], mesh.len[prev(h)], mesh.len[next(h)]);
        let x = (l * l + la * la - lb * lb) / (2.0 * l);
        let y = (la * la - x * x).max(0.0).sqrt();
        pos[v] = Some(pa + e * x + across * y);
        for o in mesh.outgoing(v) {
            push_complete(o / 3, &pos, &mut heap);
        }
    }
    pos
}

/// Undirected edges of the live faces as `(a, b, length)`.
pub(crate) fn mesh_edges(mesh: &IntrinsicMesh) -> Vec<(usize, usize, f64)> {
    mesh.edges().into_iter().map(|h| (mesh.corner[h], mesh.corner[next(h)], mesh.len[h])).collect()
}

/// Largest relative edge-length error.
pub(crate) fn max_relative_residual(pos: &[Vec3], edges: &[(usize, usize, f64)]) -> f64 {
    edges.iter().map(|&(a, b, l)| ((pos[a] - pos[b]).norm() - l).abs() / l).fold(0.0, f64::max)
}

/// Levenberg–Marquardt on `Σ ((|x_a − x_b| − l)/l)²`. Returns the final largest
/// relative residual.
pub(crate) fn polish(pos: &mut [Vec3], edges: &[(usize, usize, f64)], max_iters: usize) -> f64 {
    let n = pos.len();
    let cost = |p: &[Vec3]| -> f64 { edges.iter().map(|&(a, b, l)| (((p[a] - p[b]).norm() - l) / l).powi(2)).sum() };
    let mut c = cost(pos);
    let mut lambda = 1e-8;
    for _ in 0..max_iters {
        if max_relative_residual(pos, edges) < 1e-14 {
            break;
        }
        let mut a = DMatrix::<f64>::zeros(3 * n, 3 * n);
        let mut g = DVector::<f64>::zeros(3 * n);
        for &(i, j, l) in edges {
            let d = pos[i] - pos[j];
            let len = d.norm();
            let u = d / (len * l);
            let res = (len - l) / l;
            for x in 0..3 {
                g[3 * i + x] += u[x] * res;
                g[3 * j + x] -= u[x] * res;
                for y in 0..3 {
                    let v = u[x] * u[y];
                    a[(3 * i + x, 3 * i + y)] += v;
                    a[(3 * j + x, 3 * j + y)] += v;
                    a[(3 * i + x, 3 * j + y)] -= v;
                    a[(3 * j + x, 3 * i + y)] -= v;
                }
            }
        }
        let scale = (0..3 * n).map(|k| a[(k, k)]).sum::<f64>() / (3 * n) as f64;
        let mut improved = false;
        for _ in 0..40 {
            let mut m = a.clone();
            for k in 0..3 * n {
                m[(k, k)] += lambda * (a[(k, k)] + 1e-3 * scale) + 1e-14 * scale;
            }
            let Some(ch) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = ch.solve(&(-&g));
            let trial: Vec<Vec3> = (0..n).map(|k| pos[k] + Vec3::new(step[3 * k], step[3 * k + 1], step[3 * k + 2])).collect();
            let ct = cost(&trial);
            if ct < c {
                pos.copy_from_slice(&trial);
                c = ct;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    max_relative_residual(pos, edges)
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Classical multidimensional scaling of shortest-path distances along edges.
pub(crate) fn spectral_init(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec3> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, l) in edges {
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        dist[s] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, s)]);
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, l) in &adj[v] {
                if d + l < dist[w] {
                    dist[w] = d + l;
                    heap.push(Item(d + l, w));
                }
            }
        }
        for t in 0..n {
            d2[(s, t)] = dist[t] * dist[t];
        }
    }
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + total));
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    (0..n)
        .map(|i| {
            let mut p = Vec3::zeros();
            for (k, &e) in order.iter().take(3).enumerate() {
                p[k] = eig.eigenvectors[(i, e)] * eig.eigenvalues[e].max(0.0).sqrt();
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjacency(faces: &[[usize; 3]]) -> Vec<[[usize; 2]; 3]> {
        let mut neighbors = vec![[[0; 2]; 3]; faces.len()];
        for (f, a) in faces.iter().enumerate() {
            for i in 0..3 {
                let (u, v) = (a[i], a[(i + 1) % 3]);
                for (g, b) in faces.iter().enumerate() {
                    for j in 0..3 {
                        if b[j] == v && b[(j + 1) % 3] == u {
                            neighbors[f][i] = [g, j];
                        }
                    }
                }
            }
        }
        neighbors
    }

    #[test]
    fn irregular_octahedron_unfolds_from_pyramid_dihedrals() {
        let p = [
            Vec3::new(1.3, 0.1, 0.0),
            Vec3::new(0.0, 1.1, 0.2),
            Vec3::new(-0.8, 0.0, 0.1),
            Vec3::new(0.1, -0.9, 0.0),
            Vec3::new(0.0, 0.2, 1.2),
            Vec3::new(0.1, 0.0, -0.7),
        ];
        let faces = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4], [1, 0, 5], [2, 1, 5], [3, 2, 5], [0, 3, 5]];
        let lengths: Vec<[f64; 3]> = faces.iter().map(|f| [0, 1, 2].map(|i| (p[f[i]] - p[f[(i + 1) % 3]]).norm())).collect();
        let mesh = IntrinsicMesh::new(6, &faces, &lengths, &adjacency(&faces)).unwrap();
        let theta: Vec<Option<[f64; 3]>> = faces
            .iter()
            .zip(&lengths)
            .map(|(f, l)| crate::reconstruct::variational::face_geometry(*l, f.map(|v| p[v].norm())).map(|g| g.theta))
            .collect();
        let pos: Vec<Vec3> = layout_from_dihedrals(&mesh, &theta).into_iter().map(Option::unwrap).collect();
        for (f, l) in faces.iter().zip(&lengths) {
            for i in 0..3 {
                assert!(((pos[f[i]] - pos[f[(i + 1) % 3]]).norm() - l[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regular_tetrahedron_unfolds_isometrically() {
        let faces = [[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]];
        let mesh = IntrinsicMesh::new(4, &faces, &[[1.0; 3]; 4], &adjacency(&faces)).unwrap();
        let half = 0.5 * (1.0f64 / 3.0).acos();
        let pos: Vec<Vec3> = layout_from_dihedrals(&mesh, &[Some([half; 3]); 4]).into_iter().map(Option::unwrap).collect();
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(((pos[a] - pos[b]).norm() - 1.0).abs() < 1e-12);
            }
        }
        for f in faces {
            let (a, b, c) = (pos[f[0]], pos[f[1]], pos[f[2]]);
            let centroid = pos.iter().sum::<Vec3>() / 4.0;
            assert!((b - a).cross(&(c - a)).dot(&(a - centroid)) > 0.0);
        }
    }

    #[test]
    fn polish_recovers_square_from_perturbed_start() {
        let edges = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 2f64.sqrt()), (1, 3, 2f64.sqrt())];
        let mut pos =
            vec![Vec3::new(0.0, 0.0, 0.01), Vec3::new(1.1, 0.0, 0.0), Vec3::new(1.0, 0.9, 0.0), Vec3::new(0.0, 1.0, -0.01)];
        assert!(polish(&mut pos, &edges, 50) < 1e-12);
    }
}
