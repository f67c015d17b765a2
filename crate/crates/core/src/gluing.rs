//! Seam correspondences between piece boundaries.
//!
//! A gluing pairs boundary points by arclength. Seam samples are the discrete
//! matched pairs later used as seam vertices of the cone metric.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::curves::PlanarCurve;
use crate::error::{Error, Result};

/// A boundary location: piece index and arclength along that piece (counterclockwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub piece: usize,
    pub s: f64,
}

/// One matched pair of boundary points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamSample {
    pub a: BoundaryPoint,
    pub b: BoundaryPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GluingKind {
    Dform { offset: f64 },
    Pita { s0: f64 },
    Relaxed { offset: f64 },
}

/// Seam correspondence between piece boundaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluedBoundary {
    pub kind: GluingKind,
    pub pieces: Vec<PlanarCurve>,
    /// Matched sample pairs. D-forms: sample `k` is piece 0 at `kP/n`.
    /// Pita-forms: sample `k` pairs `s0 + kP/n` with `s0 − kP/n`, `k = 0..=n/2`;
    /// the first and last are the fold endpoints and pair a point with itself.
    pub seam_samples: Vec<SeamSample>,
    pub fold_endpoints: Vec<BoundaryPoint>,
    /// Number of boundary samples per piece.
    pub n: usize,
    /// Factor by which the input curves were scaled (1 unless normalized).
    pub scale: f64,
}

/// Outcome of the relaxed-gluing admissibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub admissible: bool,
    /// Arclengths on piece 0 where `κ₁ + κ₂ < −1e-9`.
    pub violations: Vec<f64>,
    pub min_curvature_sum: f64,
}

const CURVATURE_SUM_TOL: f64 = 1e-9;

/// Glue `a` to `b` along their whole boundaries: `a(s)` meets `b` traversed
/// clockwise at arclength `offset + s`.
pub fn make_dform(a: &PlanarCurve, b: &PlanarCurve, offset: f64, n: usize) -> Result<GluedBoundary> {
    build_dform(a, b, offset, n, GluingKind::Dform { offset })
}

/// D-form gluing whose pieces need not be convex; admitted only when the
/// glued metric is locally convex along the seam.
pub fn make_relaxed(a: &PlanarCurve, b: &PlanarCurve, offset: f64, n: usize) -> Result<GluedBoundary> {
    let g = build_dform(a, b, offset, n, GluingKind::Relaxed { offset })?;
    let check = local_convexity_check(&g);
    if !check.admissible {
        return Err(Error::Gluing(format!(
            "relaxed gluing is not locally convex: curvature sum {:.3e} at {} matched pair(s), first at s = {:.6}",
            check.min_curvature_sum,
            check.violations.len(),
            check.violations[0]
        )));
    }
    Ok(g)
}

fn build_dform(a: &PlanarCurve, b: &PlanarCurve, offset: f64, n: usize, kind: GluingKind) -> Result<GluedBoundary> {
    if n < 8 {
        return Err(Error::Domain(format!("need at least 8 seam samples, got {n}")));
    }
    let (pa, pb) = (a.perimeter(), b.perimeter());
    if (pa - pb).abs() > 1e-8 * pa {
        return Err(Error::Gluing(format!("perimeter mismatch: piece a has {pa:.12}, piece b has {pb:.12}")));
    }
    if !a.is_ccw() || !b.is_ccw() {
        return Err(Error::Gluing("pieces must be given counterclockwise".into()));
    }
    let p = pa;
    let seam_samples: Vec<SeamSample> = (0..n)
        .map(|k| {
            let s = p * k as f64 / n as f64;
            SeamSample { a: BoundaryPoint { piece: 0, s }, b: BoundaryPoint { piece: 1, s: dform_partner(p, offset, s) } }
        })
        .collect();
    let g = GluedBoundary { kind, pieces: vec![a.clone(), b.clone()], seam_samples, fold_endpoints: vec![], n, scale: 1.0 };
    g.check_corners_sampled()?;
    Ok(g)
}

/// Counterclockwise arclength on piece b matched to arclength `s` on piece a.
fn dform_partner(p: f64, offset: f64, s: f64) -> f64 {
    wrap(-(offset + s), p)
}

/// Fold a single convex curve onto itself: `s0 + t` meets `s0 − t`.
pub fn make_pita(c: &PlanarCurve, s0: f64, n: usize) -> Result<GluedBoundary> {
    if n < 8 {
        return Err(Error::Domain(format!("need at least 8 seam samples, got {n}")));
    }
    if !n.is_multiple_of(2) {
        return Err(Error::Domain(format!("pita-forms need an even sample count, got {n}")));
    }
    if !c.is_ccw() {
        return Err(Error::Gluing("piece must be given counterclockwise".into()));
    }
    let conv = c.is_convex();
    if !conv.convex {
        return Err(Error::Gluing(format!("pita-forms require a convex piece; convexity fails at s = {:?}", conv.violation_at)));
    }
    let p = c.perimeter();
    let seam_samples = (0..=n / 2)
        .map(|k| {
            let t = p * k as f64 / n as f64;
            SeamSample { a: BoundaryPoint { piece: 0, s: wrap(s0 + t, p) }, b: BoundaryPoint { piece: 0, s: wrap(s0 - t, p) } }
        })
        .collect();
    let g = GluedBoundary {
        kind: GluingKind::Pita { s0 },
        pieces: vec![c.clone()],
        seam_samples,
        fold_endpoints: vec![BoundaryPoint { piece: 0, s: wrap(s0, p) }, BoundaryPoint { piece: 0, s: wrap(s0 + p / 2.0, p) }],
        n,
        scale: 1.0,
    };
    g.check_corners_sampled()?;
    Ok(g)
}

/// Admissible iff `κ₁(s) + κ₂(s′) ≥ −1e-9` at every matched pair. Checked at
/// the seam samples and on a dense oversampling between them.
pub fn local_convexity_check(g: &GluedBoundary) -> ConvexityCheck {
    let p = g.perimeter();
    let mut violations = Vec::new();
    let mut min_sum = f64::INFINITY;
    if g.pieces.iter().any(|c| c.is_polyline()) {
        // Polygonal pieces carry curvature only at corners; a corner's turning
        // adds to that of the corner it is glued to, if any.
        for (x, sum) in g.corner_turning_sums() {
            min_sum = min_sum.min(sum);
            if sum < -CURVATURE_SUM_TOL {
                violations.push(if x.piece == 0 { x.s } else { g.partner(x).s });
            }
        }
    } else {
        let m = (4 * g.n).max(2048);
        let t_max = if g.is_pita() { p / 2.0 } else { p };
        let count = if g.is_pita() { m / 2 } else { m };
        for k in 0..=count {
            let t = t_max * k as f64 / count as f64;
            let (a, b) = g.pair_at(t);
            let ka = g.pieces[a.piece].curvature_at(a.s).unwrap();
            let kb = g.pieces[b.piece].curvature_at(b.s).unwrap();
            let sum = ka + kb;
            min_sum = min_sum.min(sum);
            if sum < -CURVATURE_SUM_TOL {
                violations.push(a.s);
            }
        }
    }
    violations.sort_by(f64::total_cmp);
    violations.dedup();
    ConvexityCheck { admissible: violations.is_empty(), violations, min_curvature_sum: min_sum }
}

impl GluedBoundary {
    pub fn perimeter(&self) -> f64 {
        self.pieces[0].perimeter()
    }

    pub fn is_pita(&self) -> bool {
        matches!(self.kind, GluingKind::Pita { .. })
    }

    /// Arclength spacing of the seam samples.
    pub fn spacing(&self) -> f64 {
        self.perimeter() / self.n as f64
    }

    /// Matched pair at seam parameter `t`: D-forms use `t` as arclength on
    /// piece 0; pita-forms use `t ∈ [0, P/2]` as the distance from the first fold endpoint.
    pub fn pair_at(&self, t: f64) -> (BoundaryPoint, BoundaryPoint) {
        let p = self.perimeter();
        match self.kind {
            GluingKind::Dform { offset } | GluingKind::Relaxed { offset } => {
                (BoundaryPoint { piece: 0, s: wrap(t, p) }, BoundaryPoint { piece: 1, s: dform_partner(p, offset, t) })
            }
            GluingKind::Pita { s0 } => {
                (BoundaryPoint { piece: 0, s: wrap(s0 + t, p) }, BoundaryPoint { piece: 0, s: wrap(s0 - t, p) })
            }
        }
    }

    /// The point glued to `x`.
    pub fn partner(&self, x: BoundaryPoint) -> BoundaryPoint {
        let p = self.perimeter();
        match self.kind {
            GluingKind::Dform { offset } | GluingKind::Relaxed { offset } => {
                if x.piece == 0 {
                    BoundaryPoint { piece: 1, s: dform_partner(p, offset, x.s) }
                } else {
                    BoundaryPoint { piece: 0, s: self.partner_of_b(x.s) }
                }
            }
            GluingKind::Pita { s0 } => BoundaryPoint { piece: 0, s: wrap(2.0 * s0 - x.s, p) },
        }
    }

    fn partner_of_b(&self, sb: f64) -> f64 {
        let p = self.perimeter();
        match self.kind {
            GluingKind::Dform { offset } | GluingKind::Relaxed { offset } => wrap(-offset - sb, p),
            GluingKind::Pita { s0 } => wrap(2.0 * s0 - sb, p),
        }
    }

    /// Every polygon corner with the total turning at its seam point: its own
    /// turning plus that of the glued corner, when the partner is one.
    pub fn corner_turning_sums(&self) -> Vec<(BoundaryPoint, f64)> {
        let p = self.perimeter();
        let mut corners: Vec<(BoundaryPoint, f64)> = Vec::new();
        for (i, c) in self.pieces.iter().enumerate() {
            if let (Ok(turns), Some(pos)) = (c.turning_angles(), c.vertex_arclengths()) {
                corners.extend(pos.into_iter().zip(turns).map(|(s, t)| (BoundaryPoint { piece: i, s }, t)));
            }
        }
        let near = |a: BoundaryPoint, b: BoundaryPoint| {
            let d = (a.s - b.s).rem_euclid(p);
            a.piece == b.piece && d.min(p - d) <= 1e-9 * p
        };
        corners
            .iter()
            .map(|&(x, t)| {
                let y = self.partner(x);
                let other = if near(x, y) { 0.0 } else { corners.iter().find(|c| near(c.0, y)).map_or(0.0, |c| c.1) };
                (x, t + other)
            })
            .collect()
    }

    /// Boundary sample positions along piece `i`: `(arclength, seam sample index)`
    /// in counterclockwise order, starting from the piece's first sample.
    pub fn boundary_samples(&self, piece: usize) -> Vec<(f64, usize)> {
        let p = self.perimeter();
        let n = self.n;
        match self.kind {
            GluingKind::Pita { s0 } => (0..n)
                .map(|k| {
                    let seam = if k <= n / 2 { k } else { n - k };
                    (wrap(s0 + p * k as f64 / n as f64, p), seam)
                })
                .collect(),
            _ => {
                let mut v: Vec<(f64, usize)> = self
                    .seam_samples
                    .iter()
                    .enumerate()
                    .map(|(k, smp)| (if piece == 0 { smp.a.s } else { smp.b.s }, k))
                    .collect();
                if piece == 1 {
                    // Piece b meets the samples clockwise; list them counterclockwise.
                    v.reverse();
                    v.rotate_right(1);
                }
                v
            }
        }
    }

    /// Copy with every piece scaled so the common perimeter is `2π`.
    pub fn normalized(&self) -> Result<Self> {
        let lambda = TAU / self.perimeter();
        let mut g = self.clone();
        g.pieces = self.pieces.iter().map(|c| c.scaled(lambda)).collect::<Result<_>>()?;
        let scale_bp = |b: &mut BoundaryPoint| b.s *= lambda;
        for s in &mut g.seam_samples {
            scale_bp(&mut s.a);
            scale_bp(&mut s.b);
        }
        g.fold_endpoints.iter_mut().for_each(scale_bp);
        g.kind = match g.kind {
            GluingKind::Dform { offset } => GluingKind::Dform { offset: offset * lambda },
            GluingKind::Relaxed { offset } => GluingKind::Relaxed { offset: offset * lambda },
            GluingKind::Pita { s0 } => GluingKind::Pita { s0: s0 * lambda },
        };
        g.scale = self.scale * lambda;
        Ok(g)
    }

    /// Polygon corners must be seam samples, or the metric would cut them off.
    fn check_corners_sampled(&self) -> Result<()> {
        let p = self.perimeter();
        for (i, c) in self.pieces.iter().enumerate() {
            let Some(corners) = c.vertex_arclengths() else { continue };
            let samples: Vec<f64> = self.boundary_samples(i).iter().map(|x| x.0).collect();
            for s in corners {
                let hit = samples.iter().any(|&t| {
                    let d = (t - s).rem_euclid(p);
                    d.min(p - d) <= 1e-9 * p
                });
                if !hit {
                    return Err(Error::Gluing(format!(
                        "polygon corner of piece {i} at arclength {s:.9} is not a seam sample; choose n and offset so corners are sampled"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn wrap(s: f64, p: f64) -> f64 {
    let u = s.rem_euclid(p);
    if u >= p || (p - u) <= 1e-14 * p {
        0.0
    } else {
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{dist, CurveKind};

    #[test]
    fn circles_offset_zero_match_mirror_twins() {
        let c = PlanarCurve::circle(1.0).unwrap();
        let g = make_dform(&c, &c, 0.0, 16).unwrap();
        for smp in &g.seam_samples {
            let pa = c.point_periodic(smp.a.s);
            let pb = c.point_periodic(smp.b.s);
            assert!(dist(pa, [pb[0], -pb[1]]) < 1e-12);
        }
        assert!(g.fold_endpoints.is_empty());
    }

    #[test]
    fn dform_perimeter_mismatch_reports_both() {
        let a = PlanarCurve::circle(1.0).unwrap();
        let b = PlanarCurve::circle(1.1).unwrap();
        let err = make_dform(&a, &b, 0.0, 16).unwrap_err().to_string();
        assert!(err.contains("6.283185") && err.contains("6.911503"), "{err}");
    }

    #[test]
    fn dform_offset_periodic() {
        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let p = e.perimeter();
        let g1 = make_dform(&e, &e, p / 4.0, 32).unwrap();
        let g2 = make_dform(&e, &e, p / 4.0 + p, 32).unwrap();
        for (x, y) in g1.seam_samples.iter().zip(&g2.seam_samples) {
            let d = (x.b.s - y.b.s).abs();
            assert!(d.min(p - d) < 1e-10);
        }
    }

    #[test]
    fn pita_fold_endpoints() {
        let c = PlanarCurve::circle(1.0).unwrap();
        let g = make_pita(&c, 0.0, 16).unwrap();
        let f: Vec<_> = g.fold_endpoints.iter().map(|b| c.point_periodic(b.s)).collect();
        assert!(dist(f[0], [1.0, 0.0]) < 1e-12 && dist(f[1], [-1.0, 0.0]) < 1e-12);

        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let g = make_pita(&e, 0.0, 16).unwrap();
        let f: Vec<_> = g.fold_endpoints.iter().map(|b| e.point_periodic(b.s)).collect();
        assert!(dist(f[0], [2.0, 0.0]) < 1e-10 && dist(f[1], [-2.0, 0.0]) < 1e-10);
        let g = make_pita(&e, e.perimeter() / 4.0, 16).unwrap();
        let f: Vec<_> = g.fold_endpoints.iter().map(|b| e.point_periodic(b.s)).collect();
        assert!(dist(f[0], [0.0, 1.0]) < 1e-10 && dist(f[1], [0.0, -1.0]) < 1e-10);
    }

    #[test]
    fn pita_rejects_nonconvex() {
        let peanut = PlanarCurve::new(CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.3, 0.0]] }).unwrap();
        assert!(matches!(make_pita(&peanut, 0.0, 16), Err(Error::Gluing(_))));
    }

    #[test]
    fn convex_dform_is_admissible() {
        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let g = make_dform(&e, &e, e.perimeter() / 4.0, 64).unwrap();
        let chk = local_convexity_check(&g);
        assert!(chk.admissible && chk.min_curvature_sum > 0.0);
    }

    #[test]
    fn relaxed_requires_compensation() {
        // The peanut's waist (κ ≈ −0.44) is compensated by a circle of the same
        // perimeter (κ ≈ 1) but not by the nearly straight flank of a flat ellipse.
        let peanut = PlanarCurve::new(CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.25, 0.0]] }).unwrap();
        let p = peanut.perimeter();
        let circle = PlanarCurve::circle(p / TAU).unwrap();
        assert!(make_relaxed(&peanut, &circle, 0.0, 64).is_ok());
        let b = 0.25;
        let flat = PlanarCurve::ellipse(1.0, b).unwrap();
        let flat = flat.scaled(p / flat.perimeter()).unwrap();
        let err = make_relaxed(&peanut, &flat, 0.0, 64);
        assert!(matches!(err, Err(Error::Gluing(_))), "{err:?}");
    }

    #[test]
    fn polygon_corners_must_be_sampled() {
        let sq = PlanarCurve::regular_polygon(4, 1.0).unwrap();
        assert!(make_dform(&sq, &sq, 0.0, 8).is_ok());
        assert!(make_dform(&sq, &sq, 0.0, 10).is_err());
        let half = sq.perimeter() / 8.0;
        assert!(make_dform(&sq, &sq, half, 8).is_ok());
    }

    #[test]
    fn normalization_records_scale() {
        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let g = make_dform(&e, &e, e.perimeter() / 4.0, 16).unwrap().normalized().unwrap();
        assert!((g.perimeter() - TAU).abs() < 1e-10);
        assert!((g.scale - TAU / e.perimeter()).abs() < 1e-14);
    }
}
