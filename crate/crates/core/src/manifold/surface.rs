use ndarray::Array2;

use crate::error::{Error, Result};
use crate::event_io::Event;
use crate::Field;

/// Height given to the most recent events after normalisation.
pub const DEFAULT_T_SCALE: f64 = 3.0;

/// Per-pixel time field `t(x, y)` whose graph is the event manifold.
///
/// Values are finite and lie in `[0, scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSurface {
    values: Field,
    scale: f64,
}

impl TimeSurface {
    pub fn new(values: Field, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("surface scale must be >= 0, got {scale}")));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0 && **v <= scale)) {
            return Err(Error::Domain(format!(
                "surface value {bad} outside [0, {scale}]"
            )));
        }
        Ok(Self { values, scale })
    }

    /// Surface whose scale is the maximum of `values`, which must be finite
    /// and non-negative. Handy for analytic test surfaces.
    pub fn from_field(values: Field) -> Result<Self> {
        let scale = values.iter().copied().fold(0.0, f64::max);
        Self::new(values, scale)
    }

    /// `t = 0` everywhere: the flat manifold.
    pub fn flat(shape: (usize, usize)) -> Self {
        Self {
            values: Field::zeros(shape),
            scale: 0.0,
        }
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn into_values(self) -> Field {
        self.values
    }

    pub(crate) fn from_parts_unchecked(values: Field, scale: f64) -> Self {
        Self { values, scale }
    }
}

/// Records `event.timestamp` as the latest time at the event's pixel.
pub fn update_timestamp_map(raw: &mut Array2<u64>, event: &Event) {
    raw[(event.y as usize, event.x as usize)] = event.timestamp;
}

/// Maps raw timestamps to a surface: `t = t_scale · (1 − age / t_window)`
/// with `age = clamp(now − raw, 0, t_window)`. The newest pixels sit at
/// `t_scale`, anything older than the window at 0.
pub fn normalize_timestamps(
    raw: &Array2<u64>,
    now: u64,
    t_scale: f64,
    t_window: f64,
) -> Result<TimeSurface> {
    if !(t_window > 0.0 && t_window.is_finite()) {
        return Err(Error::Config(format!("t_window must be positive, got {t_window}")));
    }
    if !(t_scale >= 0.0 && t_scale.is_finite()) {
        return Err(Error::Config(format!("t_scale must be >= 0, got {t_scale}")));
    }
    let values = raw.mapv(|stamp| {
        let age = (now.saturating_sub(stamp) as f64).min(t_window);
        t_scale * (1.0 - age / t_window)
    });
    Ok(TimeSurface::from_parts_unchecked(values, t_scale))
}
