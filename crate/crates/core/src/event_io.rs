//! Plain-text event streams and binary PGM frames.
//!
//! Event files hold one record per line, `timestamp x y polarity`, separated
//! by whitespace. Polarity may be written as `0`/`1` or `-1`/`+1`; `0` denotes
//! a negative event. Lines starting with `#` are comments. A comment of the
//! form `# sensor <width> <height>` declares the sensor geometry.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::Field;

/// Sign of the log-intensity change that fired an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

/// One asynchronous camera event. Timestamps are in sensor ticks
/// (microseconds by default) since stream start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    pub polarity: Polarity,
    pub timestamp: u64,
}

impl Event {
    pub fn new(x: u32, y: u32, polarity: Polarity, timestamp: u64) -> Self {
        Self {
            x,
            y,
            polarity,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorGeometry {
    pub width: usize,
    pub height: usize,
    /// Seconds per timestamp tick.
    pub timestamp_unit: f64,
}

impl SensorGeometry {
    pub const DVS128: SensorGeometry = SensorGeometry {
        width: 128,
        height: 128,
        timestamp_unit: 1e-6,
    };

    pub fn new(width: usize, height: usize) -> Result<Self> {
        let geometry = Self {
            width,
            height,
            timestamp_unit: 1e-6,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Config(format!(
                "sensor must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.timestamp_unit > 0.0 && self.timestamp_unit.is_finite()) {
            return Err(Error::Config(format!(
                "timestamp unit must be positive, got {}",
                self.timestamp_unit
            )));
        }
        Ok(())
    }

    /// Array shape `(rows, cols)` of images on this sensor.
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (x as usize) < self.width && (y as usize) < self.height
    }
}

/// Parses a single `timestamp x y polarity` record. `line_no` is 1-based and
/// only used for error reporting.
pub fn parse_event_line(line: &str, line_no: usize) -> Result<Event> {
    let parse_err = |reason: String| Error::Parse {
        line: line_no,
        reason,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(format!(
            "expected 4 fields (timestamp x y polarity), found {}",
            fields.len()
        )));
    }
    let timestamp = fields[0]
        .parse::<u64>()
        .map_err(|e| parse_err(format!("timestamp `{}`: {e}", fields[0])))?;
    let x = fields[1]
        .parse::<u32>()
        .map_err(|e| parse_err(format!("x coordinate `{}`: {e}", fields[1])))?;
    let y = fields[2]
        .parse::<u32>()
        .map_err(|e| parse_err(format!("y coordinate `{}`: {e}", fields[2])))?;
    let polarity = match fields[3] {
        "1" | "+1" => Polarity::Positive,
        "0" | "-1" => Polarity::Negative,
        other => return Err(parse_err(format!("polarity `{other}` is not one of 0, 1, -1, +1"))),
    };
    Ok(Event {
        x,
        y,
        polarity,
        timestamp,
    })
}

/// Streaming reader over an event file. Yields events in file order, holding
/// only the current line in memory.
pub struct EventReader<R> {
    source: R,
    geometry: SensorGeometry,
    slack: u64,
    line: String,
    line_no: usize,
    index: usize,
    latest: Option<u64>,
    failed: bool,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(source: R, geometry: SensorGeometry) -> Self {
        Self {
            source,
            geometry,
            slack: 0,
            line: String::new(),
            line_no: 0,
            index: 0,
            latest: None,
            failed: false,
        }
    }

    /// Tolerated backwards jump in timestamps, in ticks, relative to the
    /// latest timestamp seen so far.
    pub fn with_slack(mut self, slack: u64) -> Self {
        self.slack = slack;
        self
    }

    fn next_event(&mut self) -> Result<Option<Event>> {
        loop {
            self.line.clear();
            let read = self.source.read_line(&mut self.line)?;
            if read == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = self.line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let event = parse_event_line(trimmed, self.line_no)?;
            if !self.geometry.contains(event.x, event.y) {
                return Err(Error::OutOfBounds {
                    index: self.index,
                    x: event.x,
                    y: event.y,
                    width: self.geometry.width,
                    height: self.geometry.height,
                });
            }
            if let Some(latest) = self.latest {
                if event.timestamp.saturating_add(self.slack) < latest {
                    return Err(Error::StreamOrder {
                        index: self.index,
                        timestamp: event.timestamp,
                        previous: latest,
                        slack: self.slack,
                    });
                }
            }
            self.latest = Some(self.latest.map_or(event.timestamp, |t| t.max(event.timestamp)));
            self.index += 1;
            return Ok(Some(event));
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_event() {
            Ok(Some(event)) => Some(Ok(event)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Wraps `source` in an [`EventReader`] with zero slack.
pub fn read_stream<R: BufRead>(source: R, geometry: SensorGeometry) -> EventReader<R> {
    EventReader::new(source, geometry)
}

/// Opens an event file for streaming.
pub fn open_event_file(
    path: impl AsRef<Path>,
    geometry: SensorGeometry,
) -> Result<EventReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(EventReader::new(BufReader::new(file), geometry))
}

/// Reads the `# sensor <width> <height>` declaration from the leading comment
/// block of an event file, if present.
pub fn sniff_geometry(path: impl AsRef<Path>) -> Result<Option<SensorGeometry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(comment) = trimmed.strip_prefix('#') else {
            break;
        };
        let mut words = comment.split_whitespace();
        if words.next() == Some("sensor") {
            let width = words.next().and_then(|w| w.parse().ok());
            let height = words.next().and_then(|h| h.parse().ok());
            if let (Some(width), Some(height)) = (width, height) {
                return SensorGeometry::new(width, height).map(Some);
            }
        }
    }
    Ok(None)
}

/// Writes events in the text format read by [`EventReader`], preceded by a
/// sensor declaration. Polarity is written as `1`/`0`.
pub fn write_events<W: Write>(
    mut sink: W,
    geometry: &SensorGeometry,
    events: &[Event],
) -> std::io::Result<()> {
    writeln!(sink, "# timestamp x y polarity")?;
    writeln!(sink, "# sensor {} {}", geometry.width, geometry.height)?;
    for e in events {
        let p = match e.polarity {
            Polarity::Positive => 1,
            Polarity::Negative => 0,
        };
        writeln!(sink, "{} {} {} {}", e.timestamp, e.x, e.y, p)?;
    }
    sink.flush()
}

pub fn write_event_file(
    path: impl AsRef<Path>,
    geometry: &SensorGeometry,
    events: &[Event],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_events(BufWriter::new(file), geometry, events).map_err(|e| Error::io(path, e))
}

/// Maps a value in `[lo, hi]` to an 8-bit gray level, rounding half up.
pub fn gray_level(value: f64, lo: f64, hi: f64) -> u8 {
    let scaled = 255.0 * (value - lo) / (hi - lo);
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes `image` as a binary PGM (P5, maxval 255), rows top to bottom.
/// Values outside `bounds` saturate.
pub fn encode_pgm(image: &Field, bounds: (f64, f64)) -> Vec<u8> {
    let (rows, cols) = image.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols);
    out.extend(image.iter().map(|&v| gray_level(v, bounds.0, bounds.1)));
    out
}

pub fn write_pgm(image: &Field, bounds: (f64, f64), path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !(bounds.1 > bounds.0) {
        return Err(Error::Config(format!(
            "gray-mapping bounds must satisfy lo < hi, got {bounds:?}"
        )));
    }
    std::fs::write(path, encode_pgm(image, bounds)).map_err(|e| Error::io(path, e))
}

/// Writes `image` stretched to its own min/max range. Used for debug dumps
/// of time surfaces and metric determinants.
pub fn write_pgm_autoscaled(image: &Field, path: impl AsRef<Path>) -> Result<()> {
    let lo = image.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = image.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    write_pgm(image, (lo, hi), path)
}

/// `<dir>/<prefix>_<index:06>.pgm`
pub fn frame_path(dir: impl AsRef<Path>, prefix: &str, index: usize) -> PathBuf {
    dir.as_ref().join(format!("{prefix}_{index:06}.pgm"))
}
