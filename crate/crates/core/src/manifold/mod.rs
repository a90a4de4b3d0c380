//! Geometry of the surface of active events.
//!
//! The surface is the graph `(x, y, t(x, y))` of a per-pixel time field. Its
//! metric tensor `g = [[1 + tx², tx·ty], [tx·ty, 1 + ty²]]` has determinant
//! `G = 1 + tx² + ty²`, and the manifold gradient is represented by the
//! linear map [`apply_lg`] into a 3-channel field.

mod denoise;
mod diff;
pub(crate) mod metric;
pub(crate) mod operator;
mod surface;

pub use denoise::{denoise_timestamps, DEFAULT_DENOISE_ITERATIONS, DEFAULT_DENOISE_WEIGHT};
pub use diff::{forward_diff_x, forward_diff_y, negative_divergence};
pub use metric::{compute_metric, MetricField};
pub use operator::{
    apply_lg, apply_lg_adjoint, apply_lg_adjoint_into, apply_lg_into, estimate_operator_norm_sq,
    operator_norm_bound, DualField,
};
pub use surface::{normalize_timestamps, update_timestamp_map, TimeSurface, DEFAULT_T_SCALE};
