//! Intensity image reconstruction from event-camera streams.
//!
//! Events are integrated into a running measurement image and, once per
//! packet, the measurement is regularised by total variation on the surface of
//! active events (the graph of each pixel's most recent event time) combined
//! with a generalised Kullback-Leibler data term. The energy is minimised with
//! a first-order primal-dual scheme whose proximal maps are closed-form and
//! pixel-wise independent.
//!
//! Module map:
//!
//! * [`event_io`]: text event streams and PGM frames.
//! * [`manifold`]: time surface, metric tensor, and the manifold gradient
//!   operator with its adjoint.
//! * [`solver`]: proximal maps, energy, primal-dual solve, and the ROF variant.
//! * [`reconstruction`]: per-event state machine and packet pipeline.
//! * [`simulator`]: synthetic scenes, the threshold event model, and PSNR.

pub mod error;
pub mod event_io;
pub mod manifold;
pub mod reconstruction;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use event_io::{Event, Polarity, SensorGeometry};
pub use manifold::{DualField, MetricField, TimeSurface};
pub use reconstruction::{
    EventThresholds, FrameSink, ManifoldConfig, PacketOutput, PacketPolicy, PacketRecord, ReconstructionConfig,
    ReconstructionState, Reconstructor, RunStats, SurfaceWindow,
};
pub use solver::SolverConfig;

/// Scalar image on the pixel grid, indexed `[(row, col)]` = `[(y, x)]`.
pub type Field = ndarray::Array2<f64>;

/// Positive intensity image; values stay inside the solver box once solved.
pub type IntensityImage = Field;

/// Rows handed to one rayon task by the pixel-parallel kernels.
pub(crate) const ROWS_PER_TASK: usize = 8;
