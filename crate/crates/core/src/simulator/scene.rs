use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event_io::SensorGeometry;
use crate::Field;

/// Positive intensity frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthVideo {
    frames: Vec<Field>,
    timestamps: Vec<u64>,
}

impl GroundTruthVideo {
    pub fn new(frames: Vec<Field>, timestamps: Vec<u64>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Config(format!(
                "a video needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if frames.len() != timestamps.len() {
            return Err(Error::Config(format!(
                "{} frames but {} timestamps",
                frames.len(),
                timestamps.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("frame timestamps must be strictly increasing".into()));
        }
        let shape = frames[0].dim();
        for frame in &frames {
            if frame.dim() != shape {
                return Err(Error::GeometryMismatch {
                    expected: shape,
                    actual: frame.dim(),
                });
            }
            if let Some(bad) = frame.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Domain(format!("frame intensity {bad} is not positive")));
            }
        }
        Ok(Self { frames, timestamps })
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn dim(&self) -> (usize, usize) {
        self.frames[0].dim()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame at time `t`, linearly interpolated in log intensity, matching
    /// the event model. Times outside the video clamp to its ends.
    pub fn frame_at(&self, t: u64) -> Field {
        let ts = &self.timestamps;
        if t <= ts[0] {
            return self.frames[0].clone();
        }
        if t >= ts[ts.len() - 1] {
            return self.frames[ts.len() - 1].clone();
        }
        let k = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[k]) as f64 / (ts[k + 1] - ts[k]) as f64;
        let (a, b) = (&self.frames[k], &self.frames[k + 1]);
        Field::from_shape_fn(a.dim(), |ij| ((1.0 - w) * a[ij].ln() + w * b[ij].ln()).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    MovingSquare,
    MovingSine,
    TwoBars,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving_square" => Ok(SceneKind::MovingSquare),
            "moving_sine" => Ok(SceneKind::MovingSine),
            "two_bars" => Ok(SceneKind::TwoBars),
            other => Err(Error::UnknownScene(other.to_string())),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::MovingSquare => "moving_square",
            SceneKind::MovingSine => "moving_sine",
            SceneKind::TwoBars => "two_bars",
        })
    }
}

/// Surface pattern painted onto moving objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texture {
    Uniform,
    /// Alternating cells of `foreground ± contrast/2`.
    Checker { cell: usize, contrast: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Ticks between consecutive frames.
    pub frame_interval: u64,
    /// Square side or bar width; defaults to a quarter of the shorter side.
    pub size: Option<usize>,
    /// Top-left object position at frame 0. The square defaults to entering
    /// from the left edge, vertically centred.
    pub start: Option<(f64, f64)>,
    pub background: f64,
    pub foreground: f64,
    pub texture: Texture,
    /// Grating period in pixels for [`SceneKind::MovingSine`].
    pub period: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            velocity: (1.0, 0.0),
            frame_interval: 1000,
            size: None,
            start: None,
            background: 1.5,
            foreground: 1.8,
            texture: Texture::Uniform,
            period: 16.0,
        }
    }
}

/// Renders a deterministic synthetic scene with values in `[1, 2]`. Moving
/// objects are sampled bilinearly, so fractional velocities give sub-pixel
/// motion.
pub fn render_scene(
    kind: SceneKind,
    geometry: &SensorGeometry,
    n_frames: usize,
    params: &SceneParams,
) -> Result<GroundTruthVideo> {
    geometry.validate()?;
    if params.frame_interval == 0 {
        return Err(Error::Config("frame interval must be positive".into()));
    }
    let (rows, cols) = geometry.shape();
    let size = params.size.unwrap_or(rows.min(cols) / 4).max(1);
    let (vx, vy) = params.velocity;
    let bg = params.background;
    let fg = params.foreground;

    let frames = (0..n_frames)
        .map(|k| {
            let k = k as f64;
            let frame = match kind {
                SceneKind::MovingSquare => {
                    let (sx, sy) = params
                        .start
                        .unwrap_or((-(size as f64), (rows as f64 - size as f64) / 2.0));
                    let sprite = |i: i64, j: i64| {
                        let inside = (0..size as i64).contains(&i) && (0..size as i64).contains(&j);
                        if inside {
                            textured(fg, params.texture, i, j)
                        } else {
                            bg
                        }
                    };
                    Field::from_shape_fn((rows, cols), |(y, x)| {
                        bilinear(&sprite, x as f64 - sx - vx * k, y as f64 - sy - vy * k)
                    })
                }
                SceneKind::MovingSine => {
                    let amplitude = (fg - bg).abs();
                    let (sx, sy) = params.start.unwrap_or((0.0, 0.0));
                    let speed = (vx * vx + vy * vy).sqrt();
                    let (dx, dy) = if speed > 0.0 { (vx / speed, vy / speed) } else { (1.0, 0.0) };
                    Field::from_shape_fn((rows, cols), |(y, x)| {
                        let along = (x as f64 - sx) * dx + (y as f64 - sy) * dy - speed * k;
                        bg + amplitude * (2.0 * PI * along / params.period).sin()
                    })
                }
                SceneKind::TwoBars => {
                    let (sx, _) = params.start.unwrap_or((cols as f64 / 4.0, 0.0));
                    let right_start = cols as f64 - sx - size as f64;
                    let dark = 2.0 * bg - fg;
                    let bar = move |level: f64| {
                        move |i: i64, _j: i64| if (0..size as i64).contains(&i) { level } else { bg }
                    };
                    let bright = bar(fg);
                    let dim = bar(dark);
                    Field::from_shape_fn((rows, cols), |(y, x)| {
                        let a = bilinear(&bright, x as f64 - sx - vx * k, y as f64);
                        let b = bilinear(&dim, x as f64 - right_start + vx * k, y as f64);
                        // bars composite over the background
                        bg + (a - bg) + (b - bg)
                    })
                }
            };
            frame.mapv(|v| v.clamp(1.0, 2.0))
        })
        .collect();
    let timestamps = (0..n_frames as u64).map(|k| k * params.frame_interval).collect();
    GroundTruthVideo::new(frames, timestamps)
}

fn textured(fg: f64, texture: Texture, i: i64, j: i64) -> f64 {
    match texture {
        Texture::Uniform => fg,
        Texture::Checker { cell, contrast } => {
            let cell = cell.max(1) as i64;
            if (i / cell + j / cell) % 2 == 0 {
                fg + 0.5 * contrast
            } else {
                fg - 0.5 * contrast
            }
        }
    }
}

/// Bilinear interpolation of a lattice function at `(u, v)`.
fn bilinear(sprite: &impl Fn(i64, i64) -> f64, u: f64, v: f64) -> f64 {
    let (i0, j0) = (u.floor(), v.floor());
    let (wu, wv) = (u - i0, v - j0);
    let (i, j) = (i0 as i64, j0 as i64);
    let top = (1.0 - wu) * sprite(i, j) + wu * sprite(i + 1, j);
    let bottom = (1.0 - wu) * sprite(i, j + 1) + wu * sprite(i + 1, j + 1);
    (1.0 - wv) * top + wv * bottom
}
