use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use event_manifold::event_io::{
    frame_path, open_event_file, sniff_geometry, write_event_file, write_pgm, write_pgm_autoscaled,
};
use event_manifold::manifold::compute_metric;
use event_manifold::simulator::{
    generate_events, jitter_timestamps, render_scene, SceneKind, SceneParams, Texture,
};
use event_manifold::solver::rof_manifold_solve;
use event_manifold::{Event, Field, MetricField, Reconstructor, RunStats, SensorGeometry, TimeSurface};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::args::{BenchArgs, ReconstructArgs, RofdemoArgs, SimulateArgs};
use crate::error::{CliError, CliResult};
use crate::writer::ReconstructSink;

pub const EVENT_FILE: &str = "events.txt";

#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub geometry: SensorGeometry,
    pub stats: RunStats,
    pub files: Vec<PathBuf>,
}

/// Reads the event file, writes `<prefix>_NNNNNN.pgm` frames and returns the
/// run statistics. On failure every file written so far is removed.
pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<ReconstructReport> {
    let mut config = args.pipeline.reconstruction_config()?;
    config.solver.record_trace = args.energy_trace.is_some();
    let input = args
        .io
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("reconstruct needs --input".into()))?;
    let geometry = match (args.width, args.height) {
        (Some(w), Some(h)) => SensorGeometry::new(w, h)?,
        (None, None) => sniff_geometry(input)?.unwrap_or(SensorGeometry::DVS128),
        _ => return Err(CliError::Usage("--width and --height must be given together".into())),
    };
    let events = open_event_file(input, geometry)?.with_slack(args.slack);
    let mut reconstructor = Reconstructor::new(geometry, config.clone())?;
    let dir = &args.io.output_dir;
    create_dir(dir)?;

    let mut sink = ReconstructSink::new(
        dir,
        &args.prefix,
        config.solver.bounds(),
        config.packets.frames_to_skip,
        args.energy_trace.as_deref(),
        args.dump_surface,
    )?;
    let run = reconstructor.run_stream(events, &mut sink);
    let (files, written) = sink.finish();
    match (run, written) {
        (Ok(stats), Ok(())) => Ok(ReconstructReport { geometry, stats, files }),
        (Err(e), _) | (_, Err(e)) => {
            remove_all(&files);
            Err(e.into())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub events: usize,
    pub frames: usize,
    pub event_file: PathBuf,
}

/// Writes `events.txt` and ground-truth frames `gt_NNNNNN.pgm`.
pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateReport> {
    let kind: SceneKind = args.scene.parse()?;
    let geometry = SensorGeometry::new(args.width, args.height)?;
    let thresholds = args.thresholds.thresholds();
    thresholds.validate()?;
    let params = SceneParams {
        velocity: (args.velocity_x, args.velocity_y),
        frame_interval: args.frame_interval,
        size: args.size,
        background: args.background,
        foreground: args.foreground,
        texture: if args.checker > 0 {
            Texture::Checker {
                cell: args.checker,
                contrast: args.checker_contrast,
            }
        } else {
            Texture::Uniform
        },
        ..SceneParams::default()
    };
    let video = render_scene(kind, &geometry, args.frames, &params)?;
    let mut events = generate_events(&video, thresholds.positive, thresholds.negative)?;
    jitter_timestamps(&mut events, args.jitter, args.io.seed);
    if events.is_empty() {
        log::warn!("the scene produced no events; writing an empty event file");
    }

    let dir = &args.io.output_dir;
    create_dir(dir)?;
    let event_file = dir.join(EVENT_FILE);
    let mut files = vec![event_file.clone()];
    let result = write_event_file(&event_file, &geometry, &events).and_then(|()| {
        for (i, frame) in video.frames().iter().enumerate() {
            let path = frame_path(dir, "gt", i);
            write_pgm(frame, (1.0, 2.0), &path)?;
            files.push(path);
        }
        Ok(())
    });
    if let Err(e) = result {
        remove_all(&files);
        return Err(e.into());
    }
    Ok(SimulateReport {
        events: events.len(),
        frames: video.len(),
        event_file,
    })
}

/// Inputs and outputs of the ROF surface study.
#[derive(Debug, Clone)]
pub struct RofDemo {
    pub clean: Field,
    pub noisy: Field,
    pub ramp_surface: TimeSurface,
    pub sine_surface: TimeSurface,
    pub flat: Field,
    pub ramp: Field,
    pub sine: Field,
}

/// Concentric sinusoidal rings of period 16 px in [0.25, 0.75], so every
/// edge orientation appears with its own contrast.
pub fn rof_test_image(size: usize) -> Field {
    let c = (size as f64 - 1.0) / 2.0;
    Field::from_shape_fn((size, size), |(y, x)| {
        let r = (x as f64 - c).hypot(y as f64 - c);
        0.5 + 0.25 * (2.0 * PI * r / 16.0).sin()
    })
}

/// `t = a·x`
pub fn ramp_surface(size: usize, slope: f64) -> TimeSurface {
    let t = Field::from_shape_fn((size, size), |(_, x)| slope * x as f64);
    TimeSurface::from_field(t).expect("ramp is finite and non-negative")
}

/// `t = (A/2)·(1 + sin(2π(x + y)/P))`, level sets along the anti-diagonal.
pub fn sine_surface(size: usize, amplitude: f64, period: f64) -> TimeSurface {
    let t = Field::from_shape_fn((size, size), |(y, x)| {
        0.5 * amplitude * (1.0 + (2.0 * PI * (x + y) as f64 / period).sin())
    });
    TimeSurface::new(t, amplitude.max(0.0)).expect("sine surface lies in [0, amplitude]")
}

pub fn rofdemo(args: &RofdemoArgs) -> CliResult<RofDemo> {
    if args.size < 2 {
        return Err(CliError::Usage("--size must be at least 2".into()));
    }
    if !(args.noise >= 0.0) {
        return Err(CliError::Usage("--noise must be non-negative".into()));
    }
    let clean = rof_test_image(args.size);
    let mut rng = ChaCha8Rng::seed_from_u64(args.io.seed);
    let normal = Normal::new(0.0, args.noise).expect("noise is finite and non-negative");
    let noisy = clean.mapv(|v| v + normal.sample(&mut rng));

    let ramp_surface = ramp_surface(args.size, args.ramp_slope);
    let sine_surface = sine_surface(args.size, args.sine_amplitude, args.sine_period);
    let solve = |m: &MetricField| rof_manifold_solve(&noisy, m, args.lambda, args.iterations);
    let flat = solve(&MetricField::flat((args.size, args.size)))?;
    let ramp = solve(&compute_metric(&ramp_surface))?;
    let sine = solve(&compute_metric(&sine_surface))?;
    Ok(RofDemo {
        clean,
        noisy,
        ramp_surface,
        sine_surface,
        flat,
        ramp,
        sine,
    })
}

pub fn cmd_rofdemo(args: &RofdemoArgs) -> CliResult<(RofDemo, Vec<PathBuf>)> {
    let demo = rofdemo(args)?;
    let dir = &args.io.output_dir;
    create_dir(dir)?;
    let mut files = Vec::new();
    let unit = (0.0, 1.0);
    let result = (|| -> event_manifold::Result<()> {
        let images = [
            ("clean", &demo.clean),
            ("noisy", &demo.noisy),
            ("rof_flat", &demo.flat),
            ("rof_ramp", &demo.ramp),
            ("rof_sine", &demo.sine),
        ];
        for (name, image) in images {
            let path = dir.join(format!("{name}.pgm"));
            write_pgm(image, unit, &path)?;
            files.push(path);
        }
        for (name, surface) in [("surface_ramp", &demo.ramp_surface), ("surface_sine", &demo.sine_surface)] {
            let path = dir.join(format!("{name}.pgm"));
            write_pgm_autoscaled(surface.values(), &path)?;
            files.push(path);
        }
        Ok(())
    })();
    if let Err(e) = result {
        remove_all(&files);
        return Err(e.into());
    }
    Ok((demo, files))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub geometry: SensorGeometry,
    pub packets: usize,
    pub events_per_packet: usize,
    pub iterations: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub fps: f64,
    pub target_fps: f64,
}

impl BenchReport {
    pub fn meets_target(&self) -> bool {
        self.fps >= self.target_fps
    }
}

/// Times `process_packet` on in-memory events. Without `--input` a
/// `moving_sine` stream long enough for `--packets` packets is simulated.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<BenchReport> {
    let config = args.pipeline.reconstruction_config()?;
    if args.packets == 0 {
        return Err(CliError::Usage("--packets must be at least 1".into()));
    }
    let per_packet = config.packets.events_per_packet;
    let wanted = args.packets * per_packet;
    let (geometry, events) = match &args.io.input {
        Some(path) => {
            let geometry = sniff_geometry(path)?.unwrap_or(SensorGeometry::new(args.width, args.height)?);
            let events = open_event_file(path, geometry)?.collect::<event_manifold::Result<Vec<_>>>()?;
            (geometry, events)
        }
        None => {
            let geometry = SensorGeometry::new(args.width, args.height)?;
            (geometry, simulated_stream(&geometry, wanted, &config.thresholds)?)
        }
    };
    let packets: Vec<&[Event]> = events.chunks(per_packet).take(args.packets).collect();
    if packets.is_empty() {
        return Err(CliError::Usage("no events to benchmark".into()));
    }
    if packets.len() < args.packets {
        log::warn!("only {} of {} packets available", packets.len(), args.packets);
    }

    let mut reconstructor = Reconstructor::new(geometry, config.clone())?;
    let mut ms = Vec::with_capacity(packets.len());
    for packet in &packets {
        let started = Instant::now();
        reconstructor.process_packet(packet)?;
        ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = ms.iter().sum::<f64>() / ms.len() as f64;
    ms.sort_by(f64::total_cmp);
    Ok(BenchReport {
        geometry,
        packets: ms.len(),
        events_per_packet: per_packet,
        iterations: config.solver.max_iterations,
        mean_ms,
        median_ms: percentile(&ms, 0.5),
        p95_ms: percentile(&ms, 0.95),
        fps: 1e3 / mean_ms,
        target_fps: args.target_fps,
    })
}

fn simulated_stream(
    geometry: &SensorGeometry,
    wanted: usize,
    thresholds: &event_manifold::EventThresholds,
) -> CliResult<Vec<Event>> {
    let params = SceneParams {
        velocity: (0.5, 0.25),
        ..SceneParams::default()
    };
    let mut frames = 16;
    loop {
        let video = render_scene(SceneKind::MovingSine, geometry, frames, &params)?;
        let events = generate_events(&video, thresholds.positive, thresholds.negative)?;
        if events.len() >= wanted || frames >= 1 << 16 {
            return Ok(events);
        }
        let per_frame = (events.len() / (frames - 1)).max(1);
        frames = (frames * 2).max(wanted / per_frame + 2);
    }
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn remove_all(files: &[PathBuf]) {
    for f in files {
        if let Err(e) = std::fs::remove_file(f) {
            log::warn!("could not remove partial output {}: {e}", f.display());
        }
    }
}
