// `!(x > 0.0)` is used deliberately so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod curves;
pub mod error;
pub mod fixtures;
pub mod gluing;
pub mod hull;
pub mod intrinsic;
pub mod metric;
pub mod reconstruct;
pub mod scene;

pub use curves::{CurveKind, CurveSpec, PlanarCurve, Point2};
pub use error::{Error, Result, SolverFailure};
pub use gluing::{GluedBoundary, GluingKind};
pub use hull::Vec3;
pub use metric::{ConeMetric, MeshOptions};
pub use reconstruct::{EmbeddedPolyhedron, ReconstructOptions};
pub use scene::{gallery, run_scene, sweep, Quantity, RunReport, SceneSpec};
