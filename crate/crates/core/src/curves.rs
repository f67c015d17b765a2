//! Closed planar boundary curves of the flat pieces.
//!
//! Analytic kinds are evaluated through a periodic parameter `t ∈ [0, 2π)`
//! together with its first two derivatives; arclength is recovered from a
//! cumulative table built by adaptive Gauss–Kronrod quadrature of the speed
//! `|c'(t)|`. Polylines are exact and bypass curvature queries.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Curve family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveKind {
    /// `(a cos t, b sin t)`.
    Ellipse { a: f64, b: f64 },
    /// `|x/a|^p + |y/b|^p = 1`, `p ≥ 2`, evaluated in polar form.
    Superellipse { a: f64, b: f64, p: f64 },
    /// Two semicircular caps of radius `r` joined by straight sides of length `l`.
    Stadium { r: f64, l: f64 },
    /// Support function `h(θ) = a0 + Σ a_k cos kθ + b_k sin kθ`; `terms[k-1] = [a_k, b_k]`.
    FourierSupport { a0: f64, terms: Vec<[f64; 2]> },
    /// Polar radius `r(φ) = a0 + Σ a_k cos kφ + b_k sin kφ`; may be nonconvex.
    FourierRadial { a0: f64, terms: Vec<[f64; 2]> },
    /// Tangent-continuous chain of circular arcs and segments: from `start`
    /// with direction angle `heading`, each piece is `[length, curvature]`.
    ArcSpline { start: Point2, heading: f64, pieces: Vec<[f64; 2]> },
    /// Closed polygon through `points` (counterclockwise).
    Polyline { points: Vec<Point2> },
}

impl CurveKind {
    fn name(&self) -> &'static str {
        match self {
            CurveKind::Ellipse { .. } => "ellipse",
            CurveKind::Superellipse { .. } => "superellipse",
            CurveKind::Stadium { .. } => "stadium",
            CurveKind::FourierSupport { .. } => "fourier-support",
            CurveKind::FourierRadial { .. } => "fourier-radial",
            CurveKind::ArcSpline { .. } => "arc-spline",
            CurveKind::Polyline { .. } => "polyline",
        }
    }
}

/// Serialized form of a curve: the kind plus the traversal orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    #[serde(flatten)]
    pub kind: CurveKind,
    #[serde(default = "default_ccw")]
    pub ccw: bool,
}

fn default_ccw() -> bool {
    true
}

/// A validated closed planar curve with a precomputed arclength table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct PlanarCurve {
    kind: CurveKind,
    ccw: bool,
    table: ArcTable,
}

impl TryFrom<CurveSpec> for PlanarCurve {
    type Error = Error;
    fn try_from(spec: CurveSpec) -> Result<Self> {
        let c = PlanarCurve::new(spec.kind)?;
        Ok(if spec.ccw { c } else { c.reversed() })
    }
}

impl From<PlanarCurve> for CurveSpec {
    fn from(c: PlanarCurve) -> Self {
        CurveSpec { kind: c.kind, ccw: c.ccw }
    }
}

#[derive(Debug, Clone)]
enum ArcTable {
    /// Panel breakpoints in `t` and cumulative arclength at each breakpoint.
    Analytic { t: Vec<f64>, s: Vec<f64> },
    /// Cumulative arclength at each polyline vertex (closing vertex included).
    Polyline { s: Vec<f64> },
}

impl ArcTable {
    fn total(&self) -> f64 {
        match self {
            ArcTable::Analytic { s, .. } | ArcTable::Polyline { s } => *s.last().unwrap(),
        }
    }
}

/// Result of a convexity query.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub convex: bool,
    /// Arclength of the first violation found, if any.
    pub violation_at: Option<f64>,
    pub min_curvature: f64,
    pub total_turning: f64,
}

const MIN_PANELS: usize = 256;

impl PlanarCurve {
    pub fn new(kind: CurveKind) -> Result<Self> {
        validate_kind(&kind)?;
        let table = match &kind {
            CurveKind::Polyline { points } => {
                let mut s = vec![0.0];
                for i in 0..points.len() {
                    let j = (i + 1) % points.len();
                    let d = dist(points[i], points[j]);
                    s.push(s[i] + d);
                }
                ArcTable::Polyline { s }
            }
            _ => build_table(&kind),
        };
        let curve = PlanarCurve { kind, ccw: true, table };
        curve.check_regular()?;
        Ok(curve)
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(CurveKind::Ellipse { a, b })
    }

    pub fn circle(r: f64) -> Result<Self> {
        Self::new(CurveKind::Ellipse { a: r, b: r })
    }

    pub fn stadium(r: f64, l: f64) -> Result<Self> {
        Self::new(CurveKind::Stadium { r, l })
    }

    pub fn polyline(points: Vec<Point2>) -> Result<Self> {
        Self::new(CurveKind::Polyline { points })
    }

    /// Regular `n`-gon with circumradius `r`, first vertex at `(r, 0)`.
    pub fn regular_polygon(n: usize, r: f64) -> Result<Self> {
        let points = (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        Self::polyline(points)
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn is_ccw(&self) -> bool {
        self.ccw
    }

    pub fn is_polyline(&self) -> bool {
        matches!(self.kind, CurveKind::Polyline { .. })
    }

    /// Same point set traversed in the opposite direction from the same start.
    pub fn reversed(&self) -> Self {
        let mut c = self.clone();
        c.ccw = !c.ccw;
        c
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {lambda}")));
        }
        let scale_terms = |t: &Vec<[f64; 2]>| t.iter().map(|[a, b]| [a * lambda, b * lambda]).collect();
        let kind = match &self.kind {
            CurveKind::Ellipse { a, b } => CurveKind::Ellipse { a: a * lambda, b: b * lambda },
            CurveKind::Superellipse { a, b, p } => CurveKind::Superellipse { a: a * lambda, b: b * lambda, p: *p },
            CurveKind::Stadium { r, l } => CurveKind::Stadium { r: r * lambda, l: l * lambda },
            CurveKind::FourierSupport { a0, terms } => CurveKind::FourierSupport { a0: a0 * lambda, terms: scale_terms(terms) },
            CurveKind::FourierRadial { a0, terms } => CurveKind::FourierRadial { a0: a0 * lambda, terms: scale_terms(terms) },
            CurveKind::ArcSpline { start, heading, pieces } => CurveKind::ArcSpline {
                start: [start[0] * lambda, start[1] * lambda],
                heading: *heading,
                pieces: pieces.iter().map(|&[l, k]| [l * lambda, k / lambda]).collect(),
            },
            CurveKind::Polyline { points } => {
                CurveKind::Polyline { points: points.iter().map(|p| [p[0] * lambda, p[1] * lambda]).collect() }
            }
        };
        let c = PlanarCurve::new(kind)?;
        Ok(if self.ccw { c } else { c.reversed() })
    }

    /// Total arclength.
    pub fn perimeter(&self) -> f64 {
        self.table.total()
    }

    /// Point at arclength `s ∈ [0, P]` measured along the traversal direction.
    pub fn point_at_arclength(&self, s: f64) -> Result<Point2> {
        let p = self.perimeter();
        let tol = 1e-12 * p;
        if !(s >= -tol && s <= p + tol) {
            return Err(Error::Domain(format!("arclength {s} outside [0, {p}]")));
        }
        Ok(self.point_periodic(s))
    }

    /// Point at arclength `s` reduced modulo the perimeter.
    pub fn point_periodic(&self, s: f64) -> Point2 {
        let u = self.forward_arclength(s);
        match &self.kind {
            CurveKind::Polyline { points } => polyline_point(points, self.polyline_cum(), u),
            kind => eval(kind, self.param_at(u)).0,
        }
    }

    /// Unit tangent along the traversal direction at arclength `s`.
    pub fn tangent_at(&self, s: f64) -> Point2 {
        let u = self.forward_arclength(s);
        let t = match &self.kind {
            CurveKind::Polyline { points } => {
                let cum = self.polyline_cum();
                let i = segment_index(cum, u);
                let j = (i + 1) % points.len();
                normalize([points[j][0] - points[i][0], points[j][1] - points[i][1]])
            }
            kind => normalize(eval(kind, self.param_at(u)).1),
        };
        if self.ccw {
            t
        } else {
            [-t[0], -t[1]]
        }
    }

    /// Signed curvature at arclength `s`; positive on convex counterclockwise arcs.
    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        if self.is_polyline() {
            return Err(Error::UnsupportedKind { kind: "polyline", hint: "use turning_angles() for per-vertex turning" });
        }
        let k = curvature_param(&self.kind, self.param_at(self.forward_arclength(s)));
        Ok(if self.ccw { k } else { -k })
    }

    /// Signed exterior turning angle at each polyline vertex, in traversal order.
    pub fn turning_angles(&self) -> Result<Vec<f64>> {
        let CurveKind::Polyline { points } = &self.kind else {
            return Err(Error::UnsupportedKind { kind: self.kind.name(), hint: "use curvature_at() for analytic curves" });
        };
        let n = points.len();
        let mut out: Vec<f64> = (0..n)
            .map(|i| {
                let a = points[(i + n - 1) % n];
                let b = points[i];
                let c = points[(i + 1) % n];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - b[0], c[1] - b[1]];
                (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1])
            })
            .collect();
        if !self.ccw {
            out.reverse();
            out.rotate_right(1);
            out.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(out)
    }

    /// Arclength positions of the polyline vertices along the traversal direction.
    pub fn vertex_arclengths(&self) -> Option<Vec<f64>> {
        let ArcTable::Polyline { s } = &self.table else { return None };
        let p = self.perimeter();
        let n = s.len() - 1;
        let mut out: Vec<f64> = s[..n].to_vec();
        if !self.ccw {
            out = out.iter().map(|&x| if x == 0.0 { 0.0 } else { p - x }).collect();
            out.sort_by(f64::total_cmp);
        }
        Some(out)
    }

    /// Discrete curvature measure carried by the boundary around arclength `s`
    /// over a window of half-width `h` on each side: `∫κ ds` for analytic kinds,
    /// the sum of turning angles for polylines.
    pub fn turning_in_window(&self, s: f64, h: f64) -> f64 {
        match &self.kind {
            CurveKind::Polyline { .. } => {
                let p = self.perimeter();
                let turns = self.turning_angles().unwrap();
                let pos = self.vertex_arclengths().unwrap();
                let mut total = 0.0;
                for (k, &sv) in pos.iter().enumerate() {
                    let mut d = (sv - s).rem_euclid(p);
                    if d > p / 2.0 {
                        d -= p;
                    }
                    if d.abs() < h - 1e-12 * p || (d.abs() - h).abs() <= 1e-12 * p && d < 0.0 {
                        total += turns[k];
                    }
                }
                total
            }
            _ => {
                // Gauss–Legendre over the window; curvature is smooth or piecewise smooth.
                let n = 16;
                let (x, w) = gauss_legendre_16();
                let mut total = 0.0;
                for i in 0..n {
                    let u = s + h * x[i];
                    total += w[i] * h * self.curvature_at(u.rem_euclid(self.perimeter())).unwrap();
                }
                total
            }
        }
    }

    /// Convexity check with the first violation location.
    pub fn is_convex(&self) -> ConvexityReport {
        let p = self.perimeter();
        match &self.kind {
            CurveKind::Polyline { .. } => {
                let turns = self.turning_angles().unwrap();
                let pos = self.vertex_arclengths().unwrap();
                let total: f64 = turns.iter().sum();
                let min = turns.iter().copied().fold(f64::INFINITY, f64::min);
                let max = turns.iter().map(|t| t.abs()).fold(0.0, f64::max);
                let tol = 1e-9 * max;
                let violation = turns.iter().position(|&t| t < -tol).map(|k| pos[k]);
                ConvexityReport {
                    convex: violation.is_none() && (total - TAU).abs() < 1e-9,
                    violation_at: violation,
                    min_curvature: min,
                    total_turning: total,
                }
            }
            CurveKind::FourierSupport { .. } => {
                // Speed is |h + h''|; a sign change produces cusps, never a convex curve.
                let m = 4096;
                let mut min_rho = f64::INFINITY;
                let mut violation = None;
                for i in 0..m {
                    let theta = TAU * i as f64 / m as f64;
                    let rho = support_radius_of_curvature(&self.kind, theta);
                    min_rho = min_rho.min(rho);
                    if rho <= 0.0 && violation.is_none() {
                        violation = Some(self.arclength_of_param(theta));
                    }
                }
                let min_k = if min_rho > 0.0 { 1.0 / self.max_radius_of_curvature() } else { -1.0 };
                ConvexityReport {
                    convex: violation.is_none(),
                    violation_at: violation,
                    min_curvature: min_k,
                    total_turning: if violation.is_none() { TAU } else { f64::NAN },
                }
            }
            _ => {
                let m = (4 * self.panel_count()).max(4096);
                let ks: Vec<f64> = (0..m).map(|i| self.curvature_at(p * i as f64 / m as f64).unwrap()).collect();
                let max = ks.iter().map(|k| k.abs()).fold(0.0, f64::max);
                let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
                let tol = 1e-9 * max;
                let violation = ks.iter().position(|&k| k < -tol).map(|i| p * i as f64 / m as f64);
                let total = self.total_turning();
                ConvexityReport {
                    convex: violation.is_none() && (total - TAU).abs() < 1e-6,
                    violation_at: violation,
                    min_curvature: min,
                    total_turning: total,
                }
            }
        }
    }

    /// `∫ κ ds` over the whole curve.
    pub fn total_turning(&self) -> f64 {
        if self.is_polyline() {
            return self.turning_angles().unwrap().iter().sum();
        }
        if let CurveKind::ArcSpline { pieces, .. } = &self.kind {
            // Curvature jumps between pieces; the exact sum avoids quadrature across them.
            let total: f64 = pieces.iter().map(|[len, k]| len * k).sum();
            return if self.ccw { total } else { -total };
        }
        let (t, _) = match &self.table {
            ArcTable::Analytic { t, s } => (t, s),
            _ => unreachable!(),
        };
        // κ ds = κ |c'| dt, integrated panel by panel.
        let mut total = 0.0;
        for w in t.windows(2) {
            total += gk15(|x| curvature_param(&self.kind, x) * speed(&self.kind, x), w[0], w[1]).0;
        }
        if self.ccw {
            total
        } else {
            -total
        }
    }

    /// `n` points at arclengths `offset + kP/n (mod P)`.
    pub fn sample_by_arclength(&self, n: usize, offset: f64) -> Result<Vec<Point2>> {
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 samples, got {n}")));
        }
        let p = self.perimeter();
        Ok((0..n).map(|k| self.point_periodic(offset + p * k as f64 / n as f64)).collect())
    }

    /// Largest distance between any two of 512 arclength samples (polyline: vertices).
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point2> = match &self.kind {
            CurveKind::Polyline { points } => points.clone(),
            _ => (0..512).map(|k| self.point_periodic(self.perimeter() * k as f64 / 512.0)).collect(),
        };
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(dist(pts[i], pts[j]));
            }
        }
        d
    }

    /// Maximum |κ| over a dense sample (0 for polylines).
    pub fn max_abs_curvature(&self) -> f64 {
        if self.is_polyline() {
            return 0.0;
        }
        let p = self.perimeter();
        let m = (4 * self.panel_count()).max(2048);
        (0..m).map(|i| self.curvature_at(p * i as f64 / m as f64).unwrap().abs()).fold(0.0, f64::max)
    }

    fn max_radius_of_curvature(&self) -> f64 {
        (0..4096).map(|i| support_radius_of_curvature(&self.kind, TAU * i as f64 / 4096.0)).fold(0.0, f64::max)
    }

    fn panel_count(&self) -> usize {
        match &self.table {
            ArcTable::Analytic { t, .. } => t.len() - 1,
            ArcTable::Polyline { s } => s.len() - 1,
        }
    }

    fn polyline_cum(&self) -> &[f64] {
        match &self.table {
            ArcTable::Polyline { s } => s,
            _ => unreachable!(),
        }
    }

    /// Arclength measured in the underlying counterclockwise parameterization.
    fn forward_arclength(&self, s: f64) -> f64 {
        let p = self.perimeter();
        let u = if self.ccw { s } else { -s };
        let u = u.rem_euclid(p);
        if u >= p {
            0.0
        } else {
            u
        }
    }

    fn arclength_of_param(&self, theta: f64) -> f64 {
        let ArcTable::Analytic { t, s } = &self.table else { unreachable!() };
        let i = match t.binary_search_by(|x| x.total_cmp(&theta)) {
            Ok(i) => i.min(t.len() - 2),
            Err(i) => i.saturating_sub(1).min(t.len() - 2),
        };
        let u = s[i] + gk15(|x| speed(&self.kind, x), t[i], theta).0;
        if self.ccw {
            u
        } else {
            (self.perimeter() - u).rem_euclid(self.perimeter())
        }
    }

    /// Parameter `t` with forward arclength `u`, by safeguarded Newton on the panel.
    fn param_at(&self, u: f64) -> f64 {
        let ArcTable::Analytic { t, s } = &self.table else { unreachable!() };
        let i = match s.binary_search_by(|x| x.total_cmp(&u)) {
            Ok(i) => i.min(t.len() - 2),
            Err(i) => i.saturating_sub(1).min(t.len() - 2),
        };
        let (mut lo, mut hi) = (t[i], t[i + 1]);
        let target = u - s[i];
        let panel_len = s[i + 1] - s[i];
        let mut x = lo + (hi - lo) * (target / panel_len).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = gk15(|y| speed(&self.kind, y), t[i], x).0 - target;
            if f.abs() <= 1e-15 * self.perimeter().max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = speed(&self.kind, x);
            let mut nx = x - f / d;
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() < 1e-16 {
                break;
            }
            x = nx;
        }
        x
    }

    fn check_regular(&self) -> Result<()> {
        if self.is_polyline() {
            return Ok(());
        }
        let p = self.perimeter();
        let mean_speed = p / TAU;
        let m = 4096;
        for i in 0..m {
            let t = TAU * i as f64 / m as f64;
            if speed(&self.kind, t) < 1e-9 * mean_speed {
                return Err(Error::InvalidCurve(format!("regular: speed vanishes near parameter t = {t:.6}")));
            }
        }
        Ok(())
    }
}

fn validate_kind(kind: &CurveKind) -> Result<()> {
    let pos = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidCurve(format!("{name} must be positive and finite, got {v}")))
        }
    };
    match kind {
        CurveKind::Ellipse { a, b } => {
            pos("a", *a)?;
            pos("b", *b)
        }
        CurveKind::Superellipse { a, b, p } => {
            pos("a", *a)?;
            pos("b", *b)?;
            if !(*p >= 2.0 && p.is_finite()) {
                return Err(Error::InvalidCurve(format!("superellipse exponent must be >= 2, got {p}")));
            }
            Ok(())
        }
        CurveKind::Stadium { r, l } => {
            pos("r", *r)?;
            if !(*l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidCurve(format!("stadium side length must be >= 0, got {l}")));
            }
            Ok(())
        }
        CurveKind::FourierSupport { a0, terms } | CurveKind::FourierRadial { a0, terms } => {
            pos("a0", *a0)?;
            if terms.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidCurve("non-finite Fourier coefficient".into()));
            }
            if let CurveKind::FourierSupport { .. } = kind {
                for i in 0..4096 {
                    let theta = TAU * i as f64 / 4096.0;
                    if support_radius_of_curvature(kind, theta) <= 0.0 {
                        return Err(Error::InvalidCurve(format!(
                            "support function must satisfy h + h'' > 0 (fails near θ = {theta:.4})"
                        )));
                    }
                }
            }
            if let CurveKind::FourierRadial { .. } = kind {
                for i in 0..2048 {
                    let phi = TAU * i as f64 / 2048.0;
                    if fourier(*a0, terms, phi, 0) <= 0.0 {
                        return Err(Error::InvalidCurve(format!("radial function must stay positive (fails near φ = {phi:.4})")));
                    }
                }
            }
            Ok(())
        }
        CurveKind::ArcSpline { start, heading, pieces } => {
            if pieces.is_empty() || pieces.iter().any(|&[l, k]| !(l > 0.0 && l.is_finite() && k.is_finite())) {
                return Err(Error::InvalidCurve("arc-spline pieces need positive lengths and finite curvatures".into()));
            }
            if !(start.iter().all(|x| x.is_finite()) && heading.is_finite()) {
                return Err(Error::InvalidCurve("non-finite arc-spline start".into()));
            }
            let total: f64 = pieces.iter().map(|p| p[0]).sum();
            let (end, end_heading) = arc_spline_walk(*start, *heading, pieces, pieces.len());
            if dist(end, *start) > 1e-9 * total {
                return Err(Error::InvalidCurve(format!(
                    "closed: arc-spline ends {:.3e} away from its start",
                    dist(end, *start)
                )));
            }
            let turn = end_heading - heading;
            if (turn - (turn / TAU).round() * TAU).abs() > 1e-9 {
                return Err(Error::InvalidCurve("closed: arc-spline heading does not return to its start".into()));
            }
            Ok(())
        }
        CurveKind::Polyline { points } => {
            if points.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidCurve("non-finite polyline coordinate".into()));
            }
            let n = points.len();
            for i in 0..n {
                if points[i] == points[(i + 1) % n] {
                    return Err(Error::InvalidCurve(format!("polyline has repeated consecutive points at index {i}")));
                }
            }
            let mut distinct: Vec<Point2> = Vec::new();
            for p in points {
                if !distinct.contains(p) {
                    distinct.push(*p);
                }
            }
            if distinct.len() < 3 {
                return Err(Error::InvalidCurve("polyline needs at least 3 distinct points".into()));
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Analytic evaluation

/// Position and first two derivatives at parameter `t`.
fn eval(kind: &CurveKind, t: f64) -> (Point2, Point2, Point2) {
    match kind {
        CurveKind::Ellipse { a, b } => {
            let (s, c) = t.sin_cos();
            ([a * c, b * s], [-a * s, b * c], [-a * c, -b * s])
        }
        CurveKind::Superellipse { a, b, p } => {
            let (r, r1, r2) = superellipse_radius(*a, *b, *p, t);
            radial_eval(t, r, r1, r2)
        }
        CurveKind::FourierRadial { a0, terms } => {
            radial_eval(t, fourier(*a0, terms, t, 0), fourier(*a0, terms, t, 1), fourier(*a0, terms, t, 2))
        }
        CurveKind::FourierSupport { a0, terms } => {
            let h = fourier(*a0, terms, t, 0);
            let h1 = fourier(*a0, terms, t, 1);
            let h2 = fourier(*a0, terms, t, 2);
            let h3 = fourier(*a0, terms, t, 3);
            let (s, c) = t.sin_cos();
            let rho = h + h2;
            let p = [h * c - h1 * s, h * s + h1 * c];
            let d1 = [-rho * s, rho * c];
            let drho = h1 + h3;
            let d2 = [-drho * s - rho * c, drho * c - rho * s];
            (p, d1, d2)
        }
        CurveKind::Stadium { r, l } => stadium_eval(*r, *l, t),
        CurveKind::ArcSpline { start, heading, pieces } => arc_spline_eval(*start, *heading, pieces, t),
        CurveKind::Polyline { .. } => unreachable!("polylines have no analytic parameterization"),
    }
}

fn radial_eval(t: f64, r: f64, r1: f64, r2: f64) -> (Point2, Point2, Point2) {
    let (s, c) = t.sin_cos();
    ([r * c, r * s], [r1 * c - r * s, r1 * s + r * c], [(r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c])
}

fn superellipse_radius(a: f64, b: f64, p: f64, t: f64) -> (f64, f64, f64) {
    let (s, c) = t.sin_cos();
    let (ac, as_) = (c.abs(), s.abs());
    let ap = a.powf(-p);
    let bp = b.powf(-p);
    let cp2 = ac.powf(p - 2.0);
    let sp2 = as_.powf(p - 2.0);
    let f = ap * ac.powf(p) + bp * as_.powf(p);
    let f1 = -p * ap * cp2 * c * s + p * bp * sp2 * s * c;
    let f2 = -p * ap * cp2 * (c * c - (p - 1.0) * s * s) + p * bp * sp2 * ((p - 1.0) * c * c - s * s);
    let r = f.powf(-1.0 / p);
    let r1 = -(1.0 / p) * f.powf(-1.0 / p - 1.0) * f1;
    let r2 = -(1.0 / p) * ((-1.0 / p - 1.0) * f.powf(-1.0 / p - 2.0) * f1 * f1 + f.powf(-1.0 / p - 1.0) * f2);
    (r, r1, r2)
}

fn stadium_eval(r: f64, l: f64, t: f64) -> (Point2, Point2, Point2) {
    let perim = TAU * r + 2.0 * l;
    let k = perim / TAU; // du/dt
    let u = (t.rem_euclid(TAU)) * k;
    let q = PI * r / 2.0;
    let arc = |cx: f64, theta: f64| {
        let (s, c) = theta.sin_cos();
        ([cx + r * c, r * s], [-s * k, c * k], [-c * k * k / r, -s * k * k / r])
    };
    if u < q {
        arc(l / 2.0, u / r)
    } else if u < q + l {
        ([l / 2.0 - (u - q), r], [-k, 0.0], [0.0, 0.0])
    } else if u < 3.0 * q + l {
        arc(-l / 2.0, PI / 2.0 + (u - q - l) / r)
    } else if u < 3.0 * q + 2.0 * l {
        ([-l / 2.0 + (u - 3.0 * q - l), -r], [k, 0.0], [0.0, 0.0])
    } else {
        arc(l / 2.0, 3.0 * PI / 2.0 + (u - 3.0 * q - 2.0 * l) / r)
    }
}

/// Point and heading after walking along a constant-curvature piece.
fn arc_step(p: Point2, theta: f64, len: f64, k: f64) -> (Point2, f64) {
    let end = theta + k * len;
    if (k * len).abs() < 1e-12 {
        let (s, c) = theta.sin_cos();
        ([p[0] + len * c, p[1] + len * s], end)
    } else {
        ([p[0] + (end.sin() - theta.sin()) / k, p[1] - (end.cos() - theta.cos()) / k], end)
    }
}

/// Start point and heading of piece `upto` (or the end point for `upto == len`).
fn arc_spline_walk(start: Point2, heading: f64, pieces: &[[f64; 2]], upto: usize) -> (Point2, f64) {
    pieces[..upto].iter().fold((start, heading), |(p, th), &[l, k]| arc_step(p, th, l, k))
}

/// Constant-speed parameterization: `t` maps linearly onto arclength.
fn arc_spline_eval(start: Point2, heading: f64, pieces: &[[f64; 2]], t: f64) -> (Point2, Point2, Point2) {
    let total: f64 = pieces.iter().map(|p| p[0]).sum();
    let k = total / TAU;
    let mut u = t.rem_euclid(TAU) * k;
    let (mut p, mut th) = (start, heading);
    for (i, &[l, kappa]) in pieces.iter().enumerate() {
        if u < l || i + 1 == pieces.len() {
            let (q, th_u) = arc_step(p, th, u, kappa);
            let (s, c) = th_u.sin_cos();
            return (q, [k * c, k * s], [-kappa * k * k * s, kappa * k * k * c]);
        }
        u -= l;
        (p, th) = arc_step(p, th, l, kappa);
    }
    unreachable!()
}

/// `d`-th derivative of the truncated Fourier series.
fn fourier(a0: f64, terms: &[[f64; 2]], t: f64, d: u32) -> f64 {
    let mut v = if d == 0 { a0 } else { 0.0 };
    for (i, [a, b]) in terms.iter().enumerate() {
        let k = (i + 1) as f64;
        let (s, c) = (k * t).sin_cos();
        let kd = k.powi(d as i32);
        v += kd
            * match d % 4 {
                0 => a * c + b * s,
                1 => -a * s + b * c,
                2 => -a * c - b * s,
                _ => a * s - b * c,
            };
    }
    v
}

fn support_radius_of_curvature(kind: &CurveKind, theta: f64) -> f64 {
    match kind {
        CurveKind::FourierSupport { a0, terms } => fourier(*a0, terms, theta, 0) + fourier(*a0, terms, theta, 2),
        _ => unreachable!(),
    }
}

fn speed(kind: &CurveKind, t: f64) -> f64 {
    let d = eval(kind, t).1;
    d[0].hypot(d[1])
}

fn curvature_param(kind: &CurveKind, t: f64) -> f64 {
    let (_, d1, d2) = eval(kind, t);
    let sp = d1[0].hypot(d1[1]);
    (d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp)
}

// ---------------------------------------------------------------------------
// Quadrature

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_W: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Gauss–Kronrod 7/15 rule on `[a, b]`: (K15 estimate, |K15 − G7|).
fn gk15(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_W[7] * fc;
    let mut g = G7_W[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_W[i] * s;
        if i % 2 == 1 {
            g += G7_W[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn build_table(kind: &CurveKind) -> ArcTable {
    let mut breaks: Vec<f64> = (0..=MIN_PANELS).map(|i| TAU * i as f64 / MIN_PANELS as f64).collect();
    if let CurveKind::Stadium { r, l } = kind {
        // Curvature jumps where caps meet sides; keep those joints on panel boundaries.
        let k = (TAU * r + 2.0 * l) / TAU;
        let q = PI * r / 2.0;
        for u in [q, q + l, 3.0 * q + l, 3.0 * q + 2.0 * l] {
            breaks.push(u / k);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    }
    let mut panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    let scale: f64 = panels.iter().map(|&(a, b)| gk15(|x| speed(kind, x), a, b).0).sum();
    let mut done: Vec<(f64, f64, f64)> = Vec::new();
    while let Some((a, b)) = panels.pop() {
        let (v, err) = gk15(|x| speed(kind, x), a, b);
        let width = (b - a) / TAU;
        if err <= 1e-14 * scale * width.max(1e-6) || b - a < 1e-9 {
            done.push((a, b, v));
        } else {
            let m = 0.5 * (a + b);
            panels.push((m, b));
            panels.push((a, m));
        }
    }
    done.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut t = vec![0.0];
    let mut s = vec![0.0];
    for (_, b, v) in done {
        t.push(b);
        s.push(s.last().unwrap() + v);
    }
    ArcTable::Analytic { t, s }
}

fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    const X: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_7,
        0.755_404_408_355_003,
        0.865_631_202_387_831_7,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const W: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    let mut x = [0.0; 16];
    let mut w = [0.0; 16];
    for i in 0..8 {
        x[2 * i] = -X[i];
        x[2 * i + 1] = X[i];
        w[2 * i] = W[i];
        w[2 * i + 1] = W[i];
    }
    (x, w)
}

// ---------------------------------------------------------------------------
// Polyline helpers

fn segment_index(cum: &[f64], u: f64) -> usize {
    let n = cum.len() - 1;
    match cum.binary_search_by(|x| x.total_cmp(&u)) {
        Ok(i) => i.min(n - 1),
        Err(i) => i.saturating_sub(1).min(n - 1),
    }
}

fn polyline_point(points: &[Point2], cum: &[f64], u: f64) -> Point2 {
    let i = segment_index(cum, u);
    let j = (i + 1) % points.len();
    let len = cum[i + 1] - cum[i];
    let f = ((u - cum[i]) / len).clamp(0.0, 1.0);
    if f == 0.0 {
        return points[i];
    }
    if f == 1.0 {
        return points[j];
    }
    [points[i][0] + f * (points[j][0] - points[i][0]), points[i][1] + f * (points[j][1] - points[i][1])]
}

pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn normalize(v: Point2) -> Point2 {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent reference: 8·E(3/4) evaluated in extended precision.
    const ELLIPSE_2_1_PERIMETER: f64 = 9.688_448_220_547_676;

    #[test]
    fn circle_perimeter_is_two_pi() {
        let c = PlanarCurve::circle(1.0).unwrap();
        assert_relative_eq!(c.perimeter(), TAU, max_relative = 1e-12);
    }

    #[test]
    fn ellipse_perimeter_matches_reference() {
        let c = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        assert_relative_eq!(c.perimeter(), ELLIPSE_2_1_PERIMETER, max_relative = 1e-10);
    }

    #[test]
    fn square_perimeter_and_quarter_samples() {
        let sq = PlanarCurve::polyline(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sq.perimeter(), 4.0);
        let pts = sq.sample_by_arclength(4, 0.0).unwrap();
        assert_eq!(pts, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!(sq.is_convex().convex);
        assert!(matches!(sq.curvature_at(0.5), Err(Error::UnsupportedKind { .. })));
    }

    #[test]
    fn circle_arclength_points() {
        let c = PlanarCurve::circle(1.0).unwrap();
        let p = c.point_at_arclength(PI / 2.0).unwrap();
        assert!((p[0]).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        let p0 = c.point_at_arclength(0.0).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-15 && p0[1].abs() < 1e-15);
        let pp = c.point_at_arclength(TAU).unwrap();
        assert!((pp[0] - 1.0).abs() < 1e-12 && pp[1].abs() < 1e-12);
        assert!(c.point_at_arclength(7.0).is_err());
        assert!(c.point_at_arclength(-0.1).is_err());
    }

    #[test]
    fn ellipse_half_perimeter_is_antipode() {
        let c = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let p = c.point_at_arclength(c.perimeter() / 2.0).unwrap();
        assert!((p[0] + 2.0).abs() < 1e-10 && p[1].abs() < 1e-10, "{p:?}");
    }

    #[test]
    fn curvature_examples() {
        let c = PlanarCurve::circle(1.0).unwrap();
        for s in [0.0, 1.0, 4.0] {
            assert_relative_eq!(c.curvature_at(s).unwrap(), 1.0, max_relative = 1e-12);
        }
        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        assert_relative_eq!(e.curvature_at(0.0).unwrap(), 2.0, max_relative = 1e-12);
        let st = PlanarCurve::stadium(1.0, 2.0).unwrap();
        // Top straight side starts at arclength π/2.
        assert!(st.curvature_at(PI / 2.0 + 1.0).unwrap().abs() < 1e-14);
        assert_relative_eq!(st.curvature_at(0.3).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.reversed().curvature_at(0.0).unwrap(), -2.0, max_relative = 1e-12);
    }

    #[test]
    fn circle_quarter_samples_with_offset() {
        let c = PlanarCurve::circle(1.0).unwrap();
        let pts = c.sample_by_arclength(4, 0.0).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, e) in pts.iter().zip(expect) {
            assert!(dist(*p, e) < 1e-12);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pts = c.sample_by_arclength(4, PI / 4.0).unwrap();
        let expect = [[h, h], [-h, h], [-h, -h], [h, -h]];
        for (p, e) in pts.iter().zip(expect) {
            assert!(dist(*p, e) < 1e-12);
        }
        assert!(c.sample_by_arclength(2, 0.0).is_err());
    }

    #[test]
    fn peanut_is_not_convex() {
        // r(φ) = 1 + 0.3 cos 2φ pinches at φ = ±π/2.
        let peanut = PlanarCurve::new(CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.3, 0.0]] }).unwrap();
        let rep = peanut.is_convex();
        assert!(!rep.convex);
        let s = rep.violation_at.unwrap();
        // Independent check: finite-difference turning of sampled points at the violation.
        let h = 1e-4;
        let a = peanut.point_periodic(s - h);
        let b = peanut.point_periodic(s);
        let c = peanut.point_periodic(s + h);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        assert!(cross < 0.0, "finite-difference turning at violation is {cross}");
        assert!(PlanarCurve::ellipse(2.0, 1.0).unwrap().is_convex().convex);
    }

    #[test]
    fn cusped_support_function_is_not_convex() {
        // h + h'' = 1 - 3·0.5 cos 2θ... goes negative: cusps.
        let r = PlanarCurve::new(CurveKind::FourierSupport { a0: 1.0, terms: vec![[0.0, 0.0], [0.5, 0.0]] });
        // Speed vanishes where h + h'' changes sign.
        assert!(matches!(r, Err(Error::InvalidCurve(_))));
    }

    #[test]
    fn invalid_polylines_rejected() {
        assert!(PlanarCurve::polyline(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(PlanarCurve::polyline(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(PlanarCurve::ellipse(-1.0, 1.0).is_err());
    }

    #[test]
    fn analytic_kinds_integrate_to_full_turn() {
        let kinds = vec![
            CurveKind::Ellipse { a: 2.0, b: 1.0 },
            CurveKind::Superellipse { a: 1.5, b: 1.0, p: 3.0 },
            CurveKind::Stadium { r: 0.7, l: 1.3 },
            CurveKind::FourierSupport { a0: 1.0, terms: vec![[0.1, 0.05], [0.05, -0.02], [0.01, 0.0]] },
            CurveKind::FourierRadial { a0: 1.0, terms: vec![[0.0, 0.0], [0.1, 0.0]] },
        ];
        for k in kinds {
            let c = PlanarCurve::new(k.clone()).unwrap();
            assert!((c.total_turning() - TAU).abs() < 1e-8, "{k:?}: {}", c.total_turning());
            assert!(c.is_convex().convex, "{k:?}");
        }
    }

    #[test]
    fn support_curve_perimeter_is_two_pi_a0() {
        // Cauchy: the perimeter of a convex curve equals ∫h dθ = 2π a0.
        let c =
            PlanarCurve::new(CurveKind::FourierSupport { a0: 1.3, terms: vec![[0.1, 0.2], [0.05, 0.0], [0.0, 0.02]] }).unwrap();
        assert_relative_eq!(c.perimeter(), TAU * 1.3, max_relative = 1e-12);
    }

    #[test]
    fn reversed_traversal() {
        let e = PlanarCurve::ellipse(2.0, 1.0).unwrap();
        let r = e.reversed();
        let p = r.point_at_arclength(1.0).unwrap();
        let q = e.point_at_arclength(e.perimeter() - 1.0).unwrap();
        assert!(dist(p, q) < 1e-12);
        let sq = PlanarCurve::regular_polygon(4, 1.0).unwrap().reversed();
        assert!(sq.turning_angles().unwrap().iter().all(|t| (*t + PI / 2.0).abs() < 1e-12));
    }
}
