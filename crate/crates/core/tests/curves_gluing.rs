use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use approx::assert_relative_eq;
use proptest::prelude::*;
use seamform::fixtures::creased_wedge;
use seamform::gluing::{local_convexity_check, make_dform, make_pita, make_relaxed};
use seamform::hull::{kabsch, Vec3};
use seamform::metric::{triangulate, validate, MeshOptions, VertexTag};
use seamform::reconstruct::{reconstruct, ReconstructOptions};
use seamform::{CurveKind, Error, PlanarCurve};

/// Perimeter of `(a cos t, b sin t)` by the trapezoid rule, which converges
/// geometrically for smooth periodic integrands.
fn ellipse_perimeter_oracle(a: f64, b: f64) -> f64 {
    let n = 20_000;
    let h = TAU / n as f64;
    (0..n).map(|k| k as f64 * h).map(|t| (a * t.sin()).hypot(b * t.cos())).sum::<f64>() * h
}

/// Curvature from the circle through three nearby arclength samples.
fn curvature_oracle(c: &PlanarCurve, s: f64) -> f64 {
    let h = 1e-3 * c.perimeter();
    let (p, q, r) = (c.point_periodic(s - h), c.point_periodic(s), c.point_periodic(s + h));
    let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let d = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).hypot(x[1] - y[1]);
    2.0 * cross / (d(p, q) * d(q, r) * d(p, r))
}

fn close(p: [f64; 2], q: [f64; 2], tol: f64) -> bool {
    (p[0] - q[0]).hypot(p[1] - q[1]) < tol
}

#[test]
fn ellipse_perimeter_matches_quadrature_oracle() {
    for (a, b) in [(2.0, 1.0), (1.0, 1.0), (3.0, 0.2)] {
        let c = PlanarCurve::ellipse(a, b).unwrap();
        assert_relative_eq!(c.perimeter(), ellipse_perimeter_oracle(a, b), max_relative = 1e-10);
    }
}

#[test]
fn curvature_examples() {
    let stadium = PlanarCurve::stadium(1.0, 2.0).unwrap();
    let flat: Vec<f64> = (0..400)
        .map(|k| stadium.perimeter() * k as f64 / 400.0)
        .map(|s| stadium.curvature_at(s).unwrap())
        .filter(|k| k.abs() < 1e-9)
        .collect();
    // The two straight sides take 4 of the 2π + 4 perimeter.
    let share = flat.len() as f64 / 400.0;
    assert!((share - 4.0 / (TAU + 4.0)).abs() < 0.01, "{share}");
    let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
    assert_relative_eq!(e.curvature_at(0.0).unwrap(), 2.0, max_relative = 1e-10);
    assert!(matches!(PlanarCurve::regular_polygon(5, 1.0).unwrap().curvature_at(0.1), Err(Error::UnsupportedKind { .. })));
}

#[test]
fn curvature_agrees_with_finite_difference_oracle() {
    let kinds = [
        CurveKind::Superellipse { a: 1.5, b: 1.0, p: 3.0 },
        CurveKind::FourierSupport { a0: 1.0, terms: vec![[0.0, 0.0], [0.05, -0.03], [0.01, 0.02]] },
        CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.25, 0.0]] },
    ];
    for kind in kinds {
        let c = PlanarCurve::new(kind).unwrap();
        for k in 0..37 {
            let s = c.perimeter() * (k as f64 + 0.3) / 37.0;
            let exact = c.curvature_at(s).unwrap();
            assert!((exact - curvature_oracle(&c, s)).abs() < 1e-4 * c.max_abs_curvature().max(1.0), "s = {s}");
        }
    }
}

#[test]
fn arclength_queries_reject_out_of_range() {
    let c = PlanarCurve::circle(1.0).unwrap();
    assert!(matches!(c.point_at_arclength(-0.1), Err(Error::Domain(_))));
    assert!(matches!(c.point_at_arclength(TAU + 0.1), Err(Error::Domain(_))));
    assert!(close(c.point_at_arclength(FRAC_PI_2).unwrap(), [0.0, 1.0], 1e-12));
    assert!(close(c.point_at_arclength(TAU).unwrap(), c.point_at_arclength(0.0).unwrap(), 1e-12));
    assert!(matches!(c.sample_by_arclength(2, 0.0), Err(Error::Domain(_))));
}

#[test]
fn rotated_quarter_samples() {
    let c = PlanarCurve::circle(1.0).unwrap();
    let r = FRAC_PI_4.cos();
    let pts = c.sample_by_arclength(4, FRAC_PI_4).unwrap();
    for (p, q) in pts.iter().zip([[r, r], [-r, r], [-r, -r], [r, -r]]) {
        assert!(close(*p, q, 1e-12), "{p:?} vs {q:?}");
    }
}

#[test]
fn arc_spline_stadium_matches_stadium_kind() {
    let (r, l) = (0.7, 1.3);
    let spline = PlanarCurve::new(CurveKind::ArcSpline {
        start: [0.0, -r],
        heading: 0.0,
        pieces: vec![[l, 0.0], [PI * r, 1.0 / r], [l, 0.0], [PI * r, 1.0 / r]],
    })
    .unwrap();
    let stadium = PlanarCurve::stadium(r, l).unwrap();
    assert_relative_eq!(spline.perimeter(), stadium.perimeter(), max_relative = 1e-12);
    assert_relative_eq!(spline.perimeter(), 2.0 * l + TAU * r, max_relative = 1e-12);
    assert!(spline.is_convex().convex);
    assert_relative_eq!(spline.curvature_at(l + 0.5 * PI * r).unwrap(), 1.0 / r, max_relative = 1e-9);
    assert!(spline.curvature_at(0.5 * l).unwrap().abs() < 1e-12);
}

#[test]
fn peanut_violation_lies_on_its_waist() {
    let peanut = PlanarCurve::new(CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.25, 0.0]] }).unwrap();
    let report = peanut.is_convex();
    assert!(!report.convex);
    let s = report.violation_at.unwrap();
    assert!(curvature_oracle(&peanut, s) < 0.0);
}

#[test]
fn pita_fold_endpoints_on_the_minor_axis() {
    let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
    let p = e.perimeter();
    let g = make_pita(&e, p / 4.0, 64).unwrap();
    let ends: Vec<[f64; 2]> = g.fold_endpoints.iter().map(|x| e.point_at_arclength(x.s).unwrap()).collect();
    assert!(close(ends[0], [0.0, 1.0], 1e-10) && close(ends[1], [0.0, -1.0], 1e-10), "{ends:?}");
    let circle = PlanarCurve::circle(1.0).unwrap();
    let g = make_pita(&circle, 0.0, 16).unwrap();
    assert!(close(circle.point_at_arclength(g.fold_endpoints[1].s).unwrap(), [-1.0, 0.0], 1e-12));
}

#[test]
fn circle_dform_metric_does_not_depend_on_offset() {
    let c = PlanarCurve::circle(1.0).unwrap();
    let defects = |offset: f64| {
        let g = make_dform(&c, &c, offset, 32).unwrap();
        let mut d = triangulate(&g, &MeshOptions::default()).unwrap().defects();
        d.sort_by(f64::total_cmp);
        d
    };
    // Offsets that are whole sample steps give the same complex, rotated.
    let (d0, d1) = (defects(0.0), defects(5.0 * TAU / 32.0));
    for (x, y) in d0.iter().zip(&d1) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn convexity_check_agrees_with_curvature_oracle() {
    let peanut = PlanarCurve::new(CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.25, 0.0]] }).unwrap();
    let p = peanut.perimeter();
    let flat = PlanarCurve::ellipse(1.0, 0.25).unwrap();
    let flat = flat.scaled(p / flat.perimeter()).unwrap();
    let g = make_dform(&peanut, &flat, 0.0, 64).unwrap();
    let check = local_convexity_check(&g);
    assert!(!check.admissible);
    for &s in &check.violations {
        let partner = g.partner(seamform::gluing::BoundaryPoint { piece: 0, s });
        let sum = curvature_oracle(&peanut, s) + curvature_oracle(&flat, partner.s);
        assert!(sum < 1e-3, "violation at {s} with oracle curvature sum {sum}");
    }
    let circle = PlanarCurve::circle(p / TAU).unwrap();
    assert!(local_convexity_check(&make_dform(&peanut, &circle, 0.0, 64).unwrap()).admissible);
    assert!(matches!(make_relaxed(&peanut, &flat, 0.0, 64), Err(Error::Gluing(_))));
}

#[test]
fn creased_wedge_is_an_admissible_polygon_gluing() {
    let g = creased_wedge(6, 4, 1.0, FRAC_PI_4).unwrap();
    assert_eq!(g.n, 2 * (2 * 6 + 4));
    assert_relative_eq!(g.pieces[0].perimeter(), g.pieces[1].perimeter(), max_relative = 1e-12);
    assert!(local_convexity_check(&g).admissible);
    // Every corner is glued to a corner: the pair sums over one piece add up
    // to the total turning of both pieces, and none is negative.
    let sums = g.corner_turning_sums();
    assert!(sums.iter().all(|(_, t)| *t >= -1e-12));
    let over_a: f64 = sums.iter().filter(|(x, _)| x.piece == 0).map(|(_, t)| t).sum();
    assert_relative_eq!(over_a, 2.0 * TAU, max_relative = 1e-12);
    assert!(creased_wedge(1, 4, 1.0, FRAC_PI_4).is_err());
    assert!(creased_wedge(6, 4, 1.0, FRAC_PI_2).is_err());
}

#[test]
fn creased_wedge_reconstructs_to_its_closed_form() {
    let half_angle = 0.6;
    let g = creased_wedge(6, 4, 1.0, half_angle).unwrap();
    let m = triangulate(&g, &MeshOptions::with_density(0.8)).unwrap();
    assert!(validate(&m).ok);
    let e = reconstruct(&m, &ReconstructOptions::default()).unwrap();
    // Piece a is the two faces unfolded across the hinge (the x axis): a point
    // (x, y) folds to (x, |y| cos α, y sin α).
    let (c, s) = (half_angle.cos(), half_angle.sin());
    let (mut got, mut want) = (Vec::new(), Vec::new());
    for (v, mv) in m.vertices.iter().enumerate() {
        if let Some(src) = mv.sources.iter().find(|x| x.piece == 0) {
            let [x, y] = src.xy;
            got.push(e.positions[v]);
            want.push(Vec3::new(x, y.abs() * c, y * s));
        }
    }
    assert!(got.len() > g.n && m.vertices.iter().any(|v| v.tag == VertexTag::Interior));
    let motion = kabsch(&got, &want).unwrap();
    assert!(motion.rms < 1e-6 * e.diameter, "rms {}", motion.rms);
}

fn convex_support() -> impl Strategy<Value = CurveKind> {
    (-0.1f64..0.1, -0.1f64..0.1, -0.03f64..0.03, -0.03f64..0.03)
        .prop_map(|(a2, b2, a3, b3)| CurveKind::FourierSupport { a0: 1.0, terms: vec![[0.0, 0.0], [a2, b2], [a3, b3]] })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perimeter_scales_linearly(a in 0.3f64..3.0, b in 0.3f64..3.0, lambda in 0.1f64..10.0) {
        let c = PlanarCurve::ellipse(a, b).unwrap();
        let scaled = c.scaled(lambda).unwrap();
        prop_assert!((scaled.perimeter() - lambda * c.perimeter()).abs() <= 1e-10 * lambda * c.perimeter());
    }

    #[test]
    fn arclength_is_periodic(kind in convex_support(), s in 0.0f64..1.0) {
        let c = PlanarCurve::new(kind).unwrap();
        let p = c.perimeter();
        prop_assert!(close(c.point_periodic(s * p), c.point_periodic(s * p + p), 1e-10));
    }

    #[test]
    fn total_curvature_is_a_full_turn(kind in convex_support()) {
        let c = PlanarCurve::new(kind).unwrap();
        let n = 4000;
        let h = c.perimeter() / n as f64;
        let total: f64 = (0..n).map(|k| c.curvature_at(k as f64 * h).unwrap()).sum::<f64>() * h;
        prop_assert!((total - TAU).abs() < 1e-8, "{}", total);
    }

    #[test]
    fn samples_invariant_under_full_period_offset(kind in convex_support(), offset in 0.0f64..7.0) {
        let c = PlanarCurve::new(kind).unwrap();
        let a = c.sample_by_arclength(12, offset).unwrap();
        let b = c.sample_by_arclength(12, offset + c.perimeter()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!(close(*p, *q, 1e-10));
        }
    }

    #[test]
    fn dform_matching_preserves_arclength(ka in convex_support(), offset in 0.0f64..7.0) {
        let a = PlanarCurve::new(ka).unwrap();
        let b = PlanarCurve::ellipse(1.3, 0.8).unwrap();
        let b = b.scaled(a.perimeter() / b.perimeter()).unwrap();
        let g = make_dform(&a, &b, offset, 24).unwrap();
        let p = g.perimeter();
        for w in g.seam_samples.windows(2) {
            let da = w[1].a.s - w[0].a.s;
            let db = (w[0].b.s - w[1].b.s).rem_euclid(p);
            prop_assert!((da - db).abs() < 1e-10);
        }
        let shifted = make_dform(&a, &b, offset + p, 24).unwrap();
        for (x, y) in g.seam_samples.iter().zip(&shifted.seam_samples) {
            let d = (x.b.s - y.b.s).abs();
            prop_assert!(d < 1e-9 || (d - p).abs() < 1e-9);
        }
        prop_assert!(local_convexity_check(&g).admissible);
    }

    #[test]
    fn pita_fold_endpoints_are_antipodal(kind in convex_support(), s0 in 0.0f64..6.0) {
        let c = PlanarCurve::new(kind).unwrap();
        let g = make_pita(&c, s0, 32).unwrap();
        let p = c.perimeter();
        let d = (g.fold_endpoints[1].s - g.fold_endpoints[0].s).rem_euclid(p);
        prop_assert!((d - p / 2.0).abs() < 1e-10);
    }
}
