use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity};
use crate::simulator::GroundTruthVideo;

/// Tolerance for a crossing that lands exactly on a threshold level.
const LEVEL_EPS: f64 = 1e-9;

/// Converts a video into events with the threshold model.
///
/// Each pixel keeps a reference log intensity. Log intensity is interpolated
/// linearly between frames; whenever it rises by `dp` (falls by `dn`) past
/// the reference, a positive (negative) event is emitted at the interpolated
/// crossing time, rounded to the nearest tick, and the reference moves by
/// exactly that threshold. The output is sorted by
/// `(timestamp, y, x, polarity)`.
pub fn generate_events(video: &GroundTruthVideo, dp: f64, dn: f64) -> Result<Vec<Event>> {
    if !(dp > 0.0 && dn > 0.0) {
        return Err(Error::Config(format!(
            "thresholds must be positive, got dp={dp} dn={dn}"
        )));
    }
    let (rows, cols) = video.dim();
    let frames = video.frames();
    let stamps = video.timestamps();
    let logs: Vec<_> = frames.iter().map(|f| f.mapv(f64::ln)).collect();

    let mut events: Vec<Event> = (0..rows * cols)
        .into_par_iter()
        .flat_map_iter(|pixel| {
            let (y, x) = (pixel / cols, pixel % cols);
            let mut out = Vec::new();
            let mut reference = logs[0][(y, x)];
            for k in 0..logs.len() - 1 {
                let (a, b) = (logs[k][(y, x)], logs[k + 1][(y, x)]);
                let (t0, t1) = (stamps[k], stamps[k + 1]);
                let crossing_time = |level: f64| {
                    let frac = ((level - a) / (b - a)).clamp(0.0, 1.0);
                    t0 + (frac * (t1 - t0) as f64).round() as u64
                };
                if b > a {
                    while b >= reference + dp - LEVEL_EPS {
                        reference += dp;
                        out.push(Event::new(x as u32, y as u32, Polarity::Positive, crossing_time(reference)));
                    }
                } else if b < a {
                    while b <= reference - dn + LEVEL_EPS {
                        reference -= dn;
                        out.push(Event::new(x as u32, y as u32, Polarity::Negative, crossing_time(reference)));
                    }
                }
            }
            out
        })
        .collect();
    sort_events(&mut events);
    Ok(events)
}

fn sort_events(events: &mut [Event]) {
    events.sort_by_key(|e| (e.timestamp, e.y, e.x, e.polarity));
}

/// Adds uniform jitter in `[-max_jitter, max_jitter]` ticks to every
/// timestamp (saturating at 0) and re-sorts. Deterministic for a given seed.
pub fn jitter_timestamps(events: &mut [Event], max_jitter: u64, seed: u64) {
    if max_jitter == 0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = max_jitter as i64;
    for e in events.iter_mut() {
        let d: i64 = rng.random_range(-span..=span);
        e.timestamp = e.timestamp.saturating_add_signed(d);
    }
    sort_events(events);
}
