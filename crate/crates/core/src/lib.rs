//! Camera pose estimation by approximate incidence counting.
//!
//! Each 2D-3D correspondence defines a two-dimensional surface in the
//! four-dimensional space of gravity-aligned poses `(x, y, z, kappa)`. Poses
//! near many surfaces are good candidates. Three counters are provided:
//! a naive grid ([`grid`]), a primal-dual scheme ([`primal_dual`]) and a
//! canonical-surface octree ([`canonical`]).

#![allow(clippy::needless_range_loop)]

pub mod canonical;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod interval;
pub mod io;
pub mod planar;
pub mod primal_dual;
pub mod result;
pub mod solve;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{
    check_conditions, frame_distance, project, surface_parametric, AnalyticConstants, Correspondence, Pose,
    SurfaceSigma,
};
pub use grid::{
    best_vertex, build_grid, cells_crossed, exact_count_at, naive_count, naive_count_indexed, oracle_count, CellIndex,
    GridSpec, IncidenceHistogram,
};
pub use result::{Candidate, IncidenceResult, Method};
pub use solve::{ingest, solve, IngestReport, Normalization, SolveOptions, SolveOutput};
pub use synth::{generate_scene, BenchRecord, Scene, SceneConfig};
