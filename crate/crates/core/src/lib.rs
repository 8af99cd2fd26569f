//! Path planning for air-ground (drive/fly) robots over digital elevation
//! grids.
//!
//! The planner alternates a 2D ground A* with a 3D flight A*: it drives while
//! the terrain permits, flags a takeoff when the mobility test keeps failing,
//! refines the takeoff/landing cells with a beetle-antennae search over a
//! gradient-plus-energy fitness, flies over the blocking terrain with a staged
//! trap-escape heuristic, and resumes driving after landing. Energy and
//! battery state-of-charge are modelled per segment and threaded through the
//! whole pipeline.
//!
//! Modules:
//! - [`terrain`]: elevation grids, ASCII-grid I/O, synthetic terrain, slopes
//! - [`energy`]: hover/move/transform energy model and the battery ledger
//! - [`ground`]: 2D A* with mobility feasibility and the takeoff decision
//! - [`flight`]: 3D voxel A*, direct and trap-escape modes
//! - [`switch`]: switching-point fitness, BAS optimizer and baselines
//! - [`planner`]: the alternating pipeline, accounting, path types
//! - [`smooth`]: Bezier smoothing of planned paths
//! - [`config`]: run configuration, key=value files, validation
//! - [`export`]: CSV/GeoJSON emitters for paths, traces and switch points

// Validators use negated float comparisons (`!(v > 0.0)`) so that NaN
// inputs fail validation; the plain `<=` rewrite clippy suggests would let
// NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod export;
pub mod flight;
pub mod geom;
pub mod ground;
pub mod planner;
pub mod smooth;
pub mod switch;
pub mod terrain;

pub use geom::Vec3;
pub use terrain::{GridIndex, TerrainGrid};
