//! Scene files, gallery generators, full runs, and refinement sweeps.
//!
//! A scene names a surface source and a list of refinement levels. A run
//! takes every level through triangulate → validate → reconstruct → certify
//! → analyze, then compares levels for persistent creases and evaluates the
//! invariant suites. Reports are deterministic; wall-clock timings go to a
//! separate record.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_report, default_bend_threshold, hull_of_seam_gap, max_gauss_residual, persistent_creases, ring_dihedral,
    tangency_tolerance, CreaseReport, EndpointClass, LevelLoci,
};
use crate::curves::{CurveKind, CurveSpec, PlanarCurve};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::gluing::{make_dform, make_pita, make_relaxed, GluedBoundary, GluingKind};
use crate::metric::{triangulate, validate, ConeMetric, MeshOptions, ValidationReport, VertexTag};
use crate::reconstruct::{certify_convex, reconstruct, Certificate, EmbeddedPolyhedron, ReconstructOptions, SolveReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the number of worker threads for a run.
pub const THREADS_ENV: &str = "SEAMFORM_THREADS";

/// Gauss–Bonnet tolerance on the total defect.
pub const GAUSS_BONNET_TOL: f64 = 1e-9;
/// Largest |δ| allowed at interior vertices of flat pieces.
pub const INTERIOR_FLAT_TOL: f64 = 1e-10;
/// Largest normal-cone-area versus defect mismatch.
pub const GAUSS_EQUALITY_TOL: f64 = 1e-8;
/// Relative growth of the hull gap tolerated between levels.
pub const GAP_NOISE: f64 = 0.1;
/// Hull gaps at or below this are roundoff (layout and polishing on ~10³
/// vertices) and always count as non-increasing.
pub const GAP_FLOOR: f64 = 1e-9;

/// A scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(flatten)]
    pub source: SceneSource,
    /// Refinement levels, coarsest first. Empty for fixed polyhedra.
    #[serde(default)]
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub solver: ReconstructOptions,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".into()
}

/// Where the surface of a scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SceneSource {
    /// Planar pieces sewn along their boundaries.
    Glued {
        curves: Vec<CurveSpec>,
        gluing: GluingSpec,
    },
    /// Two regular polygons of unit circumradius glued rim to rim with a half-edge
    /// turn; a level with `2n` seam samples uses `n`-gons.
    PolygonPairs,
    /// The creased wedge of [`fixtures::creased_wedge`] at its coarsest
    /// resolution; a level with `r` times as many seam samples has every edge
    /// count multiplied by `r`.
    CreasedWedge {
        cap_edges: usize,
        side_edges: usize,
        half_angle: f64,
    },
    Tetrahedron {
        side: f64,
    },
    Cube {
        side: f64,
    },
}

/// Which curves are glued and how; the sample count comes from each level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingSpec {
    #[serde(flatten)]
    pub kind: GluingKind,
    /// Indices into the scene's curves: two for D-forms, one for pita-forms.
    pub pieces: Vec<usize>,
}

/// One refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub seam_samples: usize,
    /// Interior edge length in normalized units (perimeter 2π); `None` uses
    /// boundary vertices only.
    #[serde(default)]
    pub density: Option<f64>,
}

/// Analysis knobs; unset values take the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    /// Bend threshold; default three times the median nonzero interior bend.
    pub tau: Option<f64>,
    /// Cross-level matching tolerance; default twice the coarsest mean edge length.
    pub match_tol: Option<f64>,
    /// Seam-tangency tolerance; default `5·Δs·max|κ|` at the finest level.
    pub angular_tol: Option<f64>,
}

impl SceneSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structural checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scene(format!("{}: {msg}", self.name)));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad("name must be non-empty and use only letters, digits, '-' and '_'".into());
        }
        let fixed = matches!(self.source, SceneSource::Tetrahedron { .. } | SceneSource::Cube { .. });
        if fixed {
            if !self.levels.is_empty() {
                return bad("fixed polyhedra take no refinement levels".into());
            }
        } else if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        for w in self.levels.windows(2) {
            if w[1].seam_samples <= w[0].seam_samples {
                return bad("seam_samples must increase strictly from level to level".into());
            }
        }
        let densities: Vec<f64> = self.levels.iter().filter_map(|l| l.density).collect();
        if densities.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("densities must be positive".into());
        }
        if densities.windows(2).any(|w| w[1] >= w[0]) {
            return bad("densities must decrease strictly (finer levels later)".into());
        }
        match &self.source {
            SceneSource::Glued { curves, gluing } => {
                let want = if matches!(gluing.kind, GluingKind::Pita { .. }) { 1 } else { 2 };
                if gluing.pieces.len() != want {
                    return bad(format!("this gluing takes {want} piece(s), got {}", gluing.pieces.len()));
                }
                if let Some(&i) = gluing.pieces.iter().find(|&&i| i >= curves.len()) {
                    return bad(format!("gluing references curve {i}, but only {} are defined", curves.len()));
                }
            }
            SceneSource::PolygonPairs => {
                if let Some(l) = self.levels.iter().find(|l| l.seam_samples < 6 || l.seam_samples % 2 != 0) {
                    return bad(format!("polygon pairs need an even seam_samples ≥ 6, got {}", l.seam_samples));
                }
            }
            &SceneSource::CreasedWedge { cap_edges, side_edges, .. } => {
                let base = 2 * (2 * cap_edges + side_edges);
                if let Some(l) = self.levels.iter().find(|l| l.seam_samples % base != 0) {
                    return bad(format!("creased wedge levels need a multiple of {base} seam samples, got {}", l.seam_samples));
                }
            }
            SceneSource::Tetrahedron { side } | SceneSource::Cube { side } => {
                if !(*side > 0.0 && side.is_finite()) {
                    return bad(format!("side must be positive, got {side}"));
                }
            }
        }
        Ok(())
    }

    /// Levels to run: the declared ones, or a single implicit level for fixed polyhedra.
    fn run_levels(&self) -> Vec<Option<LevelSpec>> {
        if self.levels.is_empty() {
            vec![None]
        } else {
            self.levels.iter().copied().map(Some).collect()
        }
    }

    /// The glued boundary of a level, normalized to perimeter 2π.
    pub fn glued_boundary(&self, level: &LevelSpec) -> Result<GluedBoundary> {
        let n = level.seam_samples;
        let g = match &self.source {
            SceneSource::Glued { curves, gluing } => {
                let piece = |k: usize| PlanarCurve::try_from(curves[gluing.pieces[k]].clone());
                match gluing.kind {
                    GluingKind::Dform { offset } => make_dform(&piece(0)?, &piece(1)?, offset, n)?,
                    GluingKind::Relaxed { offset } => make_relaxed(&piece(0)?, &piece(1)?, offset, n)?,
                    GluingKind::Pita { s0 } => make_pita(&piece(0)?, s0, n)?,
                }
            }
            SceneSource::PolygonPairs => fixtures::polygon_pair(n / 2)?,
            &SceneSource::CreasedWedge { cap_edges, side_edges, half_angle } => {
                let r = n / (2 * (2 * cap_edges + side_edges));
                fixtures::creased_wedge(cap_edges * r, side_edges * r, 1.0 / r as f64, half_angle)?
            }
            SceneSource::Tetrahedron { .. } | SceneSource::Cube { .. } => {
                return Err(Error::Scene(format!("{}: fixed polyhedra have no glued boundary", self.name)))
            }
        };
        g.normalized()
    }
}

/// Pipeline stage, also fixing the process exit code when it fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Build,
    Triangulate,
    Validate,
    Reconstruct,
    Certify,
    Analyze,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Build => 10,
            Stage::Triangulate => 11,
            Stage::Validate => 12,
            Stage::Reconstruct => 13,
            Stage::Certify => 14,
            Stage::Analyze => 15,
        }
    }
}

/// Exit code of a run whose stages all succeeded but an invariant suite failed.
pub const EXIT_SUITE_FAILED: i32 = 1;
/// Exit code for command-line misuse and invalid scene files.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

/// Counts and checks of a level's cone metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub seam_vertices: usize,
    pub spacing: Option<f64>,
    pub scale: f64,
    /// Largest |δ| over interior vertices of flat pieces.
    pub max_interior_defect: f64,
    pub validation: ValidationReport,
}

/// Per-level measurements on the realized body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAnalysis {
    pub tau: f64,
    pub bend_chains: usize,
    /// Largest deviation over the extracted chains.
    pub max_chain_deviation: f64,
    pub hull_gap: f64,
    /// Largest defect over seam vertices other than fold endpoints.
    pub max_seam_defect: f64,
    /// Largest dihedral deviation off the seams.
    pub max_interior_dihedral: f64,
    /// Largest normal-cone-area versus defect mismatch; absent for degenerate bodies.
    pub max_gauss_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    /// 1-based level number; matches the `_L<k>` OBJ suffix.
    pub level: usize,
    pub seam_samples: Option<usize>,
    pub density: Option<f64>,
    pub metric: Option<MetricSummary>,
    pub solve: Option<SolveReport>,
    pub max_residual: Option<f64>,
    pub degenerate: Option<bool>,
    pub certificate: Option<Certificate>,
    pub analysis: Option<LevelAnalysis>,
    pub error: Option<StageError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Deterministic record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scene: String,
    pub tool_version: String,
    pub solver: ReconstructOptions,
    pub analysis_options: AnalysisOptions,
    pub levels: Vec<LevelReport>,
    /// Present when at least three levels were realized.
    pub creases: Option<CreaseReport>,
    pub suites: Vec<SuiteResult>,
    pub exit_code: i32,
}

/// Wall-clock timings of a run, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub scene: String,
    pub threads: usize,
    /// Per level: seconds spent building + triangulating, reconstructing, analyzing.
    pub levels: Vec<[f64; 3]>,
    pub total_seconds: f64,
}

/// Everything produced by a level, for in-process callers.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub report: LevelReport,
    pub metric: Option<ConeMetric>,
    pub embedding: Option<EmbeddedPolyhedron>,
    pub loci: Option<LevelLoci>,
    pub seconds: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub timing: TimingReport,
    pub levels: Vec<LevelResult>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.report.exit_code == 0
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.report.suites.iter().find(|s| s.name == name)
    }

    /// OBJ text of level `k` (0-based), with persistent chains as comments on the finest level.
    pub fn obj(&self, k: usize) -> Option<String> {
        let e = self.levels.get(k)?.embedding.as_ref()?;
        let mut s = format!("# {} level {}\n", self.report.scene, k + 1);
        if let Some(m) = self.levels[k].metric.as_ref() {
            let _ = writeln!(s, "# scale {}", m.info.scale);
        }
        if k + 1 == self.levels.len() {
            if let Some(c) = &self.report.creases {
                for pc in &c.chains {
                    let ids: Vec<String> = pc.chain.vertices.iter().map(|v| (v + 1).to_string()).collect();
                    let _ = writeln!(s, "# crease {}", ids.join(" "));
                }
            }
        }
        s.push_str(&e.to_obj());
        Some(s)
    }

    /// Write `<scene>.json`, `<scene>_timing.json` and `<scene>_L<k>.obj` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let name = &self.report.scene;
        write_atomic(&dir.join(format!("{name}.json")), &serde_json::to_string_pretty(&self.report)?)?;
        write_atomic(&dir.join(format!("{name}_timing.json")), &serde_json::to_string_pretty(&self.timing)?)?;
        for k in 0..self.levels.len() {
            if let Some(obj) = self.obj(k) {
                write_atomic(&dir.join(format!("{name}_L{}.obj", k + 1)), &obj)?;
            }
        }
        Ok(())
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Worker count from the environment, defaulting to the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn level_metric(spec: &SceneSpec, level: Option<LevelSpec>) -> std::result::Result<ConeMetric, StageError> {
    let fail = |stage, e: Error| StageError { stage, message: e.to_string() };
    match (&spec.source, level) {
        (SceneSource::Tetrahedron { side }, _) => fixtures::tetrahedron(*side).map_err(|e| fail(Stage::Build, e)),
        (SceneSource::Cube { side }, _) => fixtures::cube(*side).map_err(|e| fail(Stage::Build, e)),
        (_, Some(l)) => {
            let g = spec.glued_boundary(&l).map_err(|e| fail(Stage::Build, e))?;
            let opts = match l.density {
                Some(d) => MeshOptions::with_density(d),
                None => MeshOptions::default(),
            };
            triangulate(&g, &opts).map_err(|e| fail(Stage::Triangulate, e))
        }
        (_, None) => Err(StageError { stage: Stage::Build, message: "level missing".into() }),
    }
}

fn summarize_metric(m: &ConeMetric, validation: ValidationReport) -> MetricSummary {
    let defects = m.defects();
    let max_interior_defect =
        m.vertices.iter().zip(&defects).filter(|(v, _)| v.tag == VertexTag::Interior).map(|(_, d)| d.abs()).fold(0.0, f64::max);
    MetricSummary {
        vertices: m.num_vertices(),
        edges: m.num_edges(),
        triangles: m.triangles.len(),
        seam_vertices: m.vertices.iter().filter(|v| v.tag != VertexTag::Interior).count(),
        spacing: m.info.spacing,
        scale: m.info.scale,
        max_interior_defect,
        validation,
    }
}

fn analyze_level(spec: &SceneSpec, m: &ConeMetric, e: &EmbeddedPolyhedron) -> Result<(LevelAnalysis, LevelLoci)> {
    let tau = spec.analysis.tau.unwrap_or_else(|| default_bend_threshold(e, m));
    let loci = LevelLoci::new(e, m, tau);
    let defects = m.defects();
    let max_seam_defect =
        m.vertices.iter().zip(&defects).filter(|(v, _)| v.tag == VertexTag::Seam).map(|(_, &d)| d).fold(0.0, f64::max);
    let analysis = LevelAnalysis {
        tau,
        bend_chains: loci.chains.len(),
        max_chain_deviation: loci.chains.iter().map(|c| c.max_deviation()).fold(0.0, f64::max),
        hull_gap: hull_of_seam_gap(e, m)?,
        max_seam_defect,
        max_interior_dihedral: ring_dihedral(e, m),
        max_gauss_residual: (!e.degenerate).then(|| max_gauss_residual(e, m)),
    };
    Ok((analysis, loci))
}

fn run_level(spec: &SceneSpec, index: usize, level: Option<LevelSpec>) -> LevelResult {
    let mut report = LevelReport {
        level: index + 1,
        seam_samples: level.map(|l| l.seam_samples),
        density: level.and_then(|l| l.density),
        metric: None,
        solve: None,
        max_residual: None,
        degenerate: None,
        certificate: None,
        analysis: None,
        error: None,
    };
    let mut out = LevelResult { report: report.clone(), metric: None, embedding: None, loci: None, seconds: [0.0; 3] };
    let clock = Instant::now();
    let m = match level_metric(spec, level) {
        Ok(m) => m,
        Err(err) => {
            report.error = Some(err);
            out.report = report;
            return out;
        }
    };
    let v = validate(&m);
    let ok = v.ok;
    let failures = v.failures.join("; ");
    report.metric = Some(summarize_metric(&m, v));
    out.seconds[0] = clock.elapsed().as_secs_f64();
    if !ok {
        report.error = Some(StageError { stage: Stage::Validate, message: failures });
        out.report = report;
        out.metric = Some(m);
        return out;
    }
    let clock = Instant::now();
    let solved = reconstruct(&m, &spec.solver);
    out.seconds[1] = clock.elapsed().as_secs_f64();
    let e = match solved {
        Ok(e) => e,
        Err(err) => {
            report.error = Some(StageError { stage: Stage::Reconstruct, message: err.to_string() });
            out.report = report;
            out.metric = Some(m);
            return out;
        }
    };
    report.solve = Some(e.report.clone());
    report.max_residual = Some(e.max_residual());
    report.degenerate = Some(e.degenerate);
    let cert = certify_convex(&e);
    let cert_ok = cert.ok;
    report.certificate = Some(cert);
    let clock = Instant::now();
    if !cert_ok {
        report.error = Some(StageError { stage: Stage::Certify, message: "convexity certificate failed".into() });
    } else {
        match analyze_level(spec, &m, &e) {
            Ok((a, loci)) => {
                report.analysis = Some(a);
                out.loci = Some(loci);
            }
            Err(err) => report.error = Some(StageError { stage: Stage::Analyze, message: err.to_string() }),
        }
    }
    out.seconds[2] = clock.elapsed().as_secs_f64();
    out.report = report;
    out.metric = Some(m);
    out.embedding = Some(e);
    out
}

/// Run every level (in parallel across [`thread_count`] workers), compare
/// levels, and evaluate the invariant suites.
pub fn run_scene(spec: &SceneSpec) -> Result<RunOutput> {
    run_scene_with_threads(spec, thread_count())
}

pub fn run_scene_with_threads(spec: &SceneSpec, threads: usize) -> Result<RunOutput> {
    spec.validate()?;
    let start = Instant::now();
    let plan = spec.run_levels();
    let threads = threads.clamp(1, plan.len());
    let mut slots: Vec<Option<LevelResult>> = vec![None; plan.len()];
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..threads).map(|w| (w..plan.len()).step_by(threads).collect()).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|ids| {
                let plan = &plan;
                scope.spawn(move || ids.into_iter().map(|k| (k, run_level(spec, k, plan[k]))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("level worker panicked") {
                slots[k] = Some(r);
            }
        }
    });
    let levels: Vec<LevelResult> = slots.into_iter().map(|s| s.expect("every level ran")).collect();

    let mut creases = None;
    let mut crease_error = None;
    let all_loci: Option<Vec<LevelLoci>> = levels.iter().map(|l| l.loci.clone()).collect();
    if let Some(loci) = all_loci.filter(|l| l.len() >= 3) {
        let tol = spec.analysis.match_tol.unwrap_or(2.0 * loci[0].mean_edge_length);
        match persistent_creases(&loci, tol) {
            Ok(mut rep) => {
                let finest = levels.last().unwrap();
                let (m, e) = (finest.metric.as_ref().unwrap(), finest.embedding.as_ref().unwrap());
                let angular = spec.analysis.angular_tol.unwrap_or_else(|| tangency_tolerance(m));
                classify_report(&mut rep, m, e, angular);
                creases = Some(rep);
            }
            Err(err) => crease_error = Some(StageError { stage: Stage::Analyze, message: err.to_string() }),
        }
    }

    let suites = evaluate_suites(spec, &levels, creases.as_ref());
    let first_error = levels.iter().find_map(|l| l.report.error.clone()).or(crease_error);
    let exit_code = match &first_error {
        Some(err) => err.stage.exit_code(),
        None if suites.iter().all(|s| s.passed) => 0,
        None => EXIT_SUITE_FAILED,
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scene: spec.name.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        solver: spec.solver,
        analysis_options: spec.analysis,
        levels: levels.iter().map(|l| l.report.clone()).collect(),
        creases,
        suites,
        exit_code,
    };
    let timing = TimingReport {
        scene: spec.name.clone(),
        threads,
        levels: levels.iter().map(|l| l.seconds).collect(),
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, timing, levels })
}

fn suite(name: &str, failures: Vec<String>, ok_detail: String) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() { ok_detail } else { failures.join("; ") },
    }
}

fn evaluate_suites(spec: &SceneSpec, levels: &[LevelResult], creases: Option<&CreaseReport>) -> Vec<SuiteResult> {
    let mut out = Vec::new();

    let mut f = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    for l in levels {
        if let Some(ms) = &l.report.metric {
            let gb = (ms.validation.total_defect - 2.0 * TAU).abs();
            worst = (worst.0.max(gb), worst.1.max(ms.max_interior_defect));
            if gb > GAUSS_BONNET_TOL {
                f.push(format!("L{}: |Σδ − 4π| = {gb:.3e}", l.report.level));
            }
            if ms.max_interior_defect > INTERIOR_FLAT_TOL {
                f.push(format!("L{}: interior |δ| = {:.3e}", l.report.level, ms.max_interior_defect));
            }
        }
    }
    out.push(suite("gauss-bonnet", f, format!("max |Σδ − 4π| {:.3e}, max interior |δ| {:.3e}", worst.0, worst.1)));

    let mut f = Vec::new();
    let mut worst = 0.0f64;
    for l in levels {
        if let Some(r) = l.report.max_residual {
            worst = worst.max(r);
            if r > spec.solver.eps_len {
                f.push(format!("L{}: residual {r:.3e} > {:.1e}", l.report.level, spec.solver.eps_len));
            }
        }
    }
    out.push(suite("edge-residual", f, format!("max residual {worst:.3e}")));

    let mut f = Vec::new();
    for l in levels {
        if let Some(c) = &l.report.certificate {
            if !c.ok {
                f.push(format!("L{}: violation {:.3e}", l.report.level, c.max_violation));
            }
        }
    }
    out.push(suite("convexity-certificate", f, "all levels certified".into()));

    let mut f = Vec::new();
    let mut worst = 0.0f64;
    for l in levels {
        if let Some(g) = l.report.analysis.as_ref().and_then(|a| a.max_gauss_residual) {
            worst = worst.max(g);
            if g > GAUSS_EQUALITY_TOL {
                f.push(format!("L{}: normal-cone area differs from defect by {g:.3e}", l.report.level));
            }
        }
    }
    out.push(suite("gauss-equality", f, format!("max mismatch {worst:.3e}")));

    let gaps: Vec<(usize, f64)> =
        levels.iter().filter_map(|l| l.report.analysis.as_ref().map(|a| (l.report.level, a.hull_gap))).collect();
    let mut f = Vec::new();
    for w in gaps.windows(2) {
        let ((_, a), (k, b)) = (w[0], w[1]);
        if b > a * (1.0 + GAP_NOISE) && b > GAP_FLOOR {
            f.push(format!("L{k}: hull gap grew from {a:.3e} to {b:.3e}"));
        }
    }
    let listed: Vec<String> = gaps.iter().map(|g| format!("{:.2e}", g.1)).collect();
    out.push(suite("hull-gap-monotone", f, format!("gaps [{}]", listed.join(", "))));

    if let Some(c) = creases {
        let mut f = Vec::new();
        for (i, pc) in c.chains.iter().enumerate() {
            for ep in &pc.endpoints {
                if ep.class == EndpointClass::Unresolved {
                    f.push(format!("chain {i} endpoint {}: {}", ep.vertex, ep.diagnostics.clone().unwrap_or_default()));
                }
            }
        }
        out.push(suite("crease-endpoints", f, format!("{} persistent chain(s), all endpoints resolved", c.chains.len())));

        let finest = levels.last().and_then(|l| l.metric.as_ref());
        let mut f = Vec::new();
        if let Some(m) = finest {
            let seam: std::collections::BTreeSet<[usize; 2]> =
                m.seam_edges().into_iter().map(|[a, b]| [a.min(b), a.max(b)]).collect();
            for (i, pc) in c.chains.iter().enumerate() {
                for w in pc.chain.vertices.windows(2) {
                    if seam.contains(&[w[0].min(w[1]), w[0].max(w[1])]) {
                        f.push(format!("chain {i} uses seam edge ({}, {})", w[0], w[1]));
                    }
                }
            }
        }
        out.push(suite("creases-off-seam", f, "no persistent chain uses a seam edge".into()));
    }
    out
}

/// Quantities tabulated by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    HullGap,
    MaxDefect,
    AntiprismDihedral,
    CreaseStraightness,
}

impl Quantity {
    pub const ALL: [Quantity; 4] =
        [Quantity::HullGap, Quantity::MaxDefect, Quantity::AntiprismDihedral, Quantity::CreaseStraightness];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::HullGap => "hull-gap",
            Quantity::MaxDefect => "max-defect",
            Quantity::AntiprismDihedral => "antiprism-dihedral",
            Quantity::CreaseStraightness => "crease-straightness",
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL.into_iter().find(|q| q.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Quantity::ALL.iter().map(|q| q.name()).collect();
            Error::Usage(format!("unknown quantity '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: usize,
    pub seam_samples: Option<usize>,
    /// Seam spacing in normalized units.
    pub spacing: Option<f64>,
    pub value: Option<f64>,
}

/// A quantity per refinement level with its empirical convergence behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scene: String,
    pub quantity: Quantity,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log |value − limit| against log spacing.
    pub order: Option<f64>,
    /// Extrapolated limit (Aitken Δ² on the last three values); antiprism dihedral only.
    pub limit: Option<f64>,
}

impl SweepTable {
    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} — {}\n", self.scene, self.quantity);
        let _ = writeln!(s, "{:>5}  {:>12}  {:>12}  {:>22}", "level", "seam_samples", "spacing", "value");
        for r in &self.rows {
            let cell = |x: Option<f64>, p: usize| x.map_or("-".to_string(), |v| format!("{v:.p$e}"));
            let n = r.seam_samples.map_or("-".to_string(), |n| n.to_string());
            let _ = writeln!(s, "{:>5}  {:>12}  {:>12}  {:>22}", r.level, n, cell(r.spacing, 4), cell(r.value, 12));
        }
        if let Some(l) = self.limit {
            let _ = writeln!(s, "extrapolated limit: {l:.9} (π/4 = {:.9}, π/3 = {:.9})", FRAC_PI_4, PI / 3.0);
        }
        match self.order {
            Some(p) => {
                let _ = writeln!(s, "fitted order: {p:.3}");
            }
            None => s.push_str("fitted order: n/a\n"),
        }
        s
    }
}

/// Aitken Δ² extrapolation from the last three terms of a sequence.
pub fn aitken_limit(v: &[f64]) -> Option<f64> {
    let [a, b, c] = v.get(v.len().checked_sub(3)?..)? else { return None };
    let den = (c - b) - (b - a);
    if den.abs() < 1e-300 {
        return Some(*c);
    }
    Some(c - (c - b) * (c - b) / den)
}

/// Least-squares slope of `log y` against `log x` over the positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 1e-14).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Run the scene and tabulate `quantity` per level.
pub fn sweep(spec: &SceneSpec, quantity: Quantity) -> Result<SweepTable> {
    if spec.levels.len() < 3 {
        return Err(Error::Usage(format!("sweeps need at least 3 levels; scene '{}' has {}", spec.name, spec.levels.len())));
    }
    if quantity == Quantity::AntiprismDihedral && spec.source != SceneSource::PolygonPairs {
        return Err(Error::Usage("antiprism-dihedral sweeps need a polygon-pairs scene".into()));
    }
    let out = run_scene(spec)?;
    let straight: Option<Vec<f64>> = out.report.creases.as_ref().and_then(|c| {
        let per_level: Vec<f64> = (0..out.levels.len())
            .map(|k| c.chains.iter().filter_map(|pc| pc.level_straightness.get(k).copied()).fold(f64::NAN, f64::max))
            .collect();
        (!c.chains.is_empty()).then_some(per_level)
    });
    let rows: Vec<SweepRow> = out
        .levels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let a = l.report.analysis.as_ref();
            let value = match quantity {
                Quantity::HullGap => a.map(|a| a.hull_gap),
                Quantity::MaxDefect => a.map(|a| a.max_seam_defect),
                Quantity::AntiprismDihedral => a.map(|a| a.max_interior_dihedral),
                Quantity::CreaseStraightness => straight.as_ref().map(|s| s[k]).filter(|v| !v.is_nan()),
            };
            SweepRow {
                level: k + 1,
                seam_samples: l.report.seam_samples,
                spacing: l.report.metric.as_ref().and_then(|m| m.spacing),
                value,
            }
        })
        .collect();
    let values: Option<Vec<f64>> = rows.iter().map(|r| r.value).collect();
    let limit = match (&values, quantity) {
        (Some(v), Quantity::AntiprismDihedral) => aitken_limit(v),
        _ => None,
    };
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.spacing?, (r.value? - limit.unwrap_or(0.0)).abs()))).collect();
    Ok(SweepTable { scene: spec.name.clone(), quantity, rows, order: loglog_slope(&pts), limit })
}

/// Gallery item names; `antiprism-<n>` accepts any `n ≥ 3`.
pub const GALLERY: [&str; 8] =
    ["fig1-dform", "fig2-relaxed", "fig3-pita", "antiprism-<n>", "antiprism-family", "tetrahedron", "cube", "pillow"];

fn glued(name: &str, curves: Vec<CurveKind>, kind: GluingKind, pieces: Vec<usize>, levels: Vec<LevelSpec>) -> SceneSpec {
    SceneSpec {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        source: SceneSource::Glued {
            curves: curves.into_iter().map(|kind| CurveSpec { kind, ccw: true }).collect(),
            gluing: GluingSpec { kind, pieces },
        },
        levels,
        solver: ReconstructOptions::default(),
        analysis: AnalysisOptions::default(),
        output_dir: default_output_dir(),
    }
}

/// Levels with `n` seam samples and interior spacing four times the seam spacing.
fn dense_levels(ns: &[usize]) -> Vec<LevelSpec> {
    ns.iter().map(|&n| LevelSpec { seam_samples: n, density: Some(4.0 * TAU / n as f64) }).collect()
}

/// Canonical scene for a gallery item.
pub fn gallery(item: &str) -> Result<SceneSpec> {
    let ellipse = CurveKind::Ellipse { a: 2.0, b: 1.0 };
    let p_ellipse = || PlanarCurve::ellipse(2.0, 1.0).map(|c| c.perimeter());
    let spec = match item {
        "fig1-dform" => glued(
            item,
            vec![ellipse.clone(), ellipse],
            GluingKind::Dform { offset: p_ellipse()? / 4.0 },
            vec![0, 1],
            dense_levels(&[100, 200, 400]),
        ),
        "fig3-pita" => glued(
            item,
            vec![ellipse],
            // Folding exactly at the major-axis ends gives the doubly covered
            // half ellipse (a flat body); the fold is turned slightly off axis.
            GluingKind::Pita { s0: p_ellipse()? / 100.0 },
            vec![0],
            dense_levels(&[100, 200, 400]),
        ),
        "fig2-relaxed" => SceneSpec {
            source: SceneSource::CreasedWedge { cap_edges: 10, side_edges: 10, half_angle: FRAC_PI_4 },
            levels: dense_levels(&[60, 120, 240]),
            ..fixed(item, SceneSource::PolygonPairs)
        },
        "antiprism-family" => SceneSpec {
            levels: dense_levels(&[16, 32, 64, 128]),
            // Default τ sits above the ring bends; a low fixed τ makes every
            // level report its rings so that persistence has to reject them.
            analysis: AnalysisOptions { tau: Some(0.1), ..Default::default() },
            ..fixed(item, SceneSource::PolygonPairs)
        },
        "tetrahedron" => fixed(item, SceneSource::Tetrahedron { side: 1.0 }),
        "cube" => fixed(item, SceneSource::Cube { side: 1.0 }),
        "pillow" => glued(
            item,
            vec![CurveKind::Polyline { points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }; 2],
            GluingKind::Dform { offset: 0.0 },
            vec![0, 1],
            vec![LevelSpec { seam_samples: 8, density: None }],
        ),
        _ => match item.strip_prefix("antiprism-").and_then(|n| n.parse::<usize>().ok()).filter(|&n| n >= 3) {
            Some(n) => {
                let poly = PlanarCurve::regular_polygon(n, 1.0)?;
                glued(
                    item,
                    vec![poly.kind().clone(), poly.kind().clone()],
                    GluingKind::Dform { offset: poly.perimeter() / (2 * n) as f64 },
                    vec![0, 1],
                    vec![LevelSpec { seam_samples: 2 * n, density: None }],
                )
            }
            None => return Err(Error::Usage(format!("unknown gallery item '{item}'; expected one of {}", GALLERY.join(", ")))),
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn fixed(name: &str, source: SceneSource) -> SceneSpec {
    SceneSpec {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        source,
        levels: vec![],
        solver: ReconstructOptions::default(),
        analysis: AnalysisOptions::default(),
        output_dir: default_output_dir(),
    }
}
