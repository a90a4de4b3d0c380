//! Per-event state machine and packet pipeline.
//!
//! Every event multiplies the running measurement `f` at its pixel by
//! `exp(Δ+)` or `exp(−Δ−)`. After a packet of events the time surface is
//! rebuilt, the variational problem is solved warm-started from the previous
//! packet, and `f` is re-anchored to the solution.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity, SensorGeometry};
use crate::manifold::{
    compute_metric, denoise_timestamps, normalize_timestamps, update_timestamp_map, DualField,
    MetricField, TimeSurface, DEFAULT_DENOISE_ITERATIONS, DEFAULT_DENOISE_WEIGHT, DEFAULT_T_SCALE,
};
use crate::solver::{primal_dual_solve, SolverConfig, TraceRow};
use crate::Field;

pub const DEFAULT_THRESHOLD: f64 = 0.15;
pub const DEFAULT_EVENTS_PER_PACKET: usize = 500;
pub const DEFAULT_WINDOW_PACKETS: usize = 10;

/// Log-intensity thresholds `Δ+` and `Δ−`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventThresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for EventThresholds {
    fn default() -> Self {
        Self {
            positive: DEFAULT_THRESHOLD,
            negative: DEFAULT_THRESHOLD,
        }
    }
}

impl EventThresholds {
    /// Multiplicative intensity quantum for an event of the given polarity.
    pub fn factor(&self, polarity: Polarity) -> f64 {
        match polarity {
            Polarity::Positive => self.positive.exp(),
            Polarity::Negative => (-self.negative).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive > 0.0 && self.negative > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "thresholds must be positive, got {} / {}",
                self.positive, self.negative
            )))
        }
    }
}

/// Time span mapped onto `[0, t_scale]` when normalising the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceWindow {
    /// From the first event of the packet `n − 1` packets back to now.
    Packets(usize),
    /// A fixed number of ticks.
    Ticks(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldConfig {
    /// `false` fixes `t = const`, i.e. plain TV.
    pub enabled: bool,
    pub t_scale: f64,
    pub window: SurfaceWindow,
    pub denoise_weight: f64,
    /// Zero skips timestamp denoising.
    pub denoise_iterations: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            t_scale: DEFAULT_T_SCALE,
            window: SurfaceWindow::Packets(DEFAULT_WINDOW_PACKETS),
            denoise_weight: DEFAULT_DENOISE_WEIGHT,
            denoise_iterations: DEFAULT_DENOISE_ITERATIONS,
        }
    }
}

impl ManifoldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_scale >= 0.0 && self.t_scale.is_finite()) {
            return Err(Error::Config(format!("t_scale must be >= 0, got {}", self.t_scale)));
        }
        match self.window {
            SurfaceWindow::Packets(0) => {
                return Err(Error::Config("surface window must span at least one packet".into()))
            }
            SurfaceWindow::Ticks(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::Config(format!("t_window must be positive, got {t}")))
            }
            _ => {}
        }
        if !(self.denoise_weight > 0.0) {
            return Err(Error::Config(format!(
                "denoise weight must be > 0, got {}",
                self.denoise_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketPolicy {
    pub events_per_packet: usize,
    /// Frames dropped between two emitted frames.
    pub frames_to_skip: usize,
}

impl Default for PacketPolicy {
    fn default() -> Self {
        Self {
            events_per_packet: DEFAULT_EVENTS_PER_PACKET,
            frames_to_skip: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    pub solver: SolverConfig,
    pub manifold: ManifoldConfig,
    pub packets: PacketPolicy,
    pub thresholds: EventThresholds,
    /// Log a stats line every this many packets; 0 disables.
    pub stats_every: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            manifold: ManifoldConfig::default(),
            packets: PacketPolicy::default(),
            thresholds: EventThresholds::default(),
            stats_every: 100,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.manifold.validate()?;
        self.thresholds.validate()?;
        if self.packets.events_per_packet == 0 {
            return Err(Error::Config("events per packet must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionState {
    /// Latest solved image.
    pub u: Field,
    /// Running measurement, updated per event.
    pub f: Field,
    pub raw_timestamps: Array2<u64>,
    /// Dual variable carried between packet solves.
    pub p: DualField,
    pub events_in_packet: usize,
    /// Packets solved so far.
    pub frame_index: usize,
    packet_starts: VecDeque<u64>,
}

impl ReconstructionState {
    /// Uniform image at the box midpoint, zero timestamps, zero dual.
    pub fn init(geometry: &SensorGeometry, cfg: &SolverConfig) -> Self {
        let shape = geometry.shape();
        let u = Field::from_elem(shape, cfg.midpoint());
        Self {
            f: u.clone(),
            u,
            raw_timestamps: Array2::zeros(shape),
            p: DualField::zeros(shape),
            events_in_packet: 0,
            frame_index: 0,
            packet_starts: VecDeque::new(),
        }
    }

    /// Multiplies `f` at the event pixel by the polarity's quantum, clamps to
    /// the box and records the timestamp. Touches no other pixel.
    pub fn apply_event(&mut self, event: &Event, thresholds: &EventThresholds, cfg: &SolverConfig) {
        let ij = (event.y as usize, event.x as usize);
        self.f[ij] = (self.f[ij] * thresholds.factor(event.polarity)).clamp(cfg.u_min, cfg.u_max);
        if event.timestamp >= self.raw_timestamps[ij] {
            update_timestamp_map(&mut self.raw_timestamps, event);
        }
        self.events_in_packet += 1;
    }
}

/// Per-packet diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub index: usize,
    pub events: usize,
    pub iterations: usize,
    pub final_change: f64,
    pub surface_time: Duration,
    pub solve_time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub events_consumed: usize,
    pub frames_emitted: usize,
    pub packets: Vec<PacketRecord>,
    pub wall_time: Duration,
}

impl RunStats {
    pub fn events_per_second(&self) -> f64 {
        self.events_consumed as f64 / self.wall_time.as_secs_f64().max(1e-12)
    }

    pub fn frames_per_second(&self) -> f64 {
        self.packets.len() as f64 / self.wall_time.as_secs_f64().max(1e-12)
    }

    pub fn mean_solve_ms(&self) -> f64 {
        if self.packets.is_empty() {
            return 0.0;
        }
        self.packets
            .iter()
            .map(|p| (p.solve_time + p.surface_time).as_secs_f64() * 1e3)
            .sum::<f64>()
            / self.packets.len() as f64
    }

    /// Folds another run's stats into this one.
    pub fn merge(&mut self, other: RunStats) {
        self.events_consumed += other.events_consumed;
        self.frames_emitted += other.frames_emitted;
        self.packets.extend(other.packets);
        self.wall_time += other.wall_time;
    }
}

/// Everything one packet solve produced.
#[derive(Debug, Clone)]
pub struct PacketOutput {
    pub frame: Field,
    pub record: PacketRecord,
    /// Denoised surface; `None` with the manifold off or for an empty packet.
    pub surface: Option<TimeSurface>,
    pub metric: Option<MetricField>,
    /// Per-iteration rows when the solver trace is enabled.
    pub trace: Vec<TraceRow>,
}

/// Receives emitted frames in order.
pub trait FrameSink {
    /// `index` counts emitted frames from 0.
    fn emit(&mut self, index: usize, frame: &Field) -> Result<()>;

    /// Sees every solved packet, emitted or not, before `emit`.
    fn inspect(&mut self, _packet: &PacketOutput) -> Result<()> {
        Ok(())
    }
}

impl FrameSink for Vec<Field> {
    fn emit(&mut self, _index: usize, frame: &Field) -> Result<()> {
        self.push(frame.clone());
        Ok(())
    }
}

impl<F: FnMut(usize, &Field) -> Result<()>> FrameSink for F {
    fn emit(&mut self, index: usize, frame: &Field) -> Result<()> {
        self(index, frame)
    }
}

pub struct Reconstructor {
    geometry: SensorGeometry,
    config: ReconstructionConfig,
    state: ReconstructionState,
    frames_emitted: usize,
}

impl Reconstructor {
    pub fn new(geometry: SensorGeometry, config: ReconstructionConfig) -> Result<Self> {
        geometry.validate()?;
        config.validate()?;
        let state = ReconstructionState::init(&geometry, &config.solver);
        Ok(Self {
            geometry,
            config,
            state,
            frames_emitted: 0,
        })
    }

    pub fn state(&self) -> &ReconstructionState {
        &self.state
    }

    pub fn config(&self) -> &ReconstructionConfig {
        &self.config
    }

    pub fn geometry(&self) -> &SensorGeometry {
        &self.geometry
    }

    pub fn apply_event(&mut self, event: &Event) {
        self.state.apply_event(event, &self.config.thresholds, &self.config.solver);
    }

    /// Time surface for the current state, or `None` with the manifold
    /// switched off.
    pub fn time_surface(&self, now: u64) -> Result<Option<TimeSurface>> {
        let mc = &self.config.manifold;
        if !mc.enabled {
            return Ok(None);
        }
        let window = match mc.window {
            SurfaceWindow::Ticks(t) => t,
            SurfaceWindow::Packets(_) => {
                let oldest = self.state.packet_starts.front().copied().unwrap_or(now);
                (now.saturating_sub(oldest) as f64).max(1.0)
            }
        };
        let surface = normalize_timestamps(&self.state.raw_timestamps, now, mc.t_scale, window)?;
        let surface = if mc.denoise_iterations > 0 {
            denoise_timestamps(&surface, mc.denoise_weight, mc.denoise_iterations)?
        } else {
            surface
        };
        Ok(Some(surface))
    }

    /// Integrates `events`, rebuilds the metric, and solves warm-started from
    /// the previous packet. Returns the solved frame; an empty packet leaves
    /// the state untouched and returns the current image.
    pub fn process_packet(&mut self, events: &[Event]) -> Result<(Field, PacketRecord)> {
        let out = self.solve_packet(events)?;
        Ok((out.frame, out.record))
    }

    /// [`Reconstructor::process_packet`] that also returns the geometry and
    /// solver trace of the packet.
    pub fn solve_packet(&mut self, events: &[Event]) -> Result<PacketOutput> {
        let index = self.state.frame_index;
        let (Some(first), Some(last)) = (events.first(), events.last()) else {
            let record = PacketRecord {
                index,
                events: 0,
                iterations: 0,
                final_change: 0.0,
                surface_time: Duration::ZERO,
                solve_time: Duration::ZERO,
            };
            return Ok(PacketOutput {
                frame: self.state.u.clone(),
                record,
                surface: None,
                metric: None,
                trace: Vec::new(),
            });
        };
        if let SurfaceWindow::Packets(n) = self.config.manifold.window {
            self.state.packet_starts.push_back(first.timestamp);
            while self.state.packet_starts.len() > n {
                self.state.packet_starts.pop_front();
            }
        }
        for event in events {
            self.apply_event(event);
        }

        let started = Instant::now();
        let surface = self.time_surface(last.timestamp)?;
        let metric = match &surface {
            Some(surface) => compute_metric(surface),
            None => MetricField::flat(self.geometry.shape()),
        };
        let surface_time = started.elapsed();

        let started = Instant::now();
        let solution = primal_dual_solve(
            &self.state.f,
            &metric,
            &self.config.solver,
            Some(&self.state.u),
            Some(&self.state.p),
        )?;
        let solve_time = started.elapsed();

        self.state.u = solution.u;
        self.state.p = solution.p;
        self.state.f.assign(&self.state.u);
        self.state.events_in_packet = 0;
        self.state.frame_index += 1;
        let record = PacketRecord {
            index,
            events: events.len(),
            iterations: solution.iterations,
            final_change: solution.final_change,
            surface_time,
            solve_time,
        };
        Ok(PacketOutput {
            frame: self.state.u.clone(),
            record,
            surface,
            metric: Some(metric),
            trace: solution.trace,
        })
    }

    /// Splits `events` into packets, solves each and hands every
    /// `(frames_to_skip + 1)`-th frame to `sink`. A trailing short packet is
    /// solved as-is. State carries over between calls.
    pub fn run_stream<I, S>(&mut self, events: I, sink: &mut S) -> Result<RunStats>
    where
        I: IntoIterator<Item = Result<Event>>,
        S: FrameSink + ?Sized,
    {
        let started = Instant::now();
        let per_packet = self.config.packets.events_per_packet;
        let mut stats = RunStats::default();
        let mut packet = Vec::with_capacity(per_packet);
        let mut events = events.into_iter();
        loop {
            let next = events.next().transpose()?;
            if let Some(event) = next {
                packet.push(event);
                stats.events_consumed += 1;
            }
            let full = packet.len() == per_packet;
            let flush = next.is_none() && !packet.is_empty();
            if full || flush {
                self.solve_and_emit(&packet, sink, &mut stats, started)?;
                packet.clear();
            }
            if next.is_none() {
                break;
            }
        }
        stats.wall_time = started.elapsed();
        Ok(stats)
    }

    fn solve_and_emit<S: FrameSink + ?Sized>(
        &mut self,
        packet: &[Event],
        sink: &mut S,
        stats: &mut RunStats,
        started: Instant,
    ) -> Result<()> {
        let out = self.solve_packet(packet)?;
        let record = out.record;
        sink.inspect(&out)?;
        if record.index % (self.config.packets.frames_to_skip + 1) == 0 {
            sink.emit(self.frames_emitted, &out.frame)?;
            self.frames_emitted += 1;
            stats.frames_emitted += 1;
        }
        let every = self.config.stats_every;
        if every > 0 && (record.index + 1) % every == 0 {
            let elapsed = started.elapsed().as_secs_f64().max(1e-12);
            log::info!(
                "packet {} solve {:.3} ms surface {:.3} ms iterations {} events/s {:.0}",
                record.index,
                record.solve_time.as_secs_f64() * 1e3,
                record.surface_time.as_secs_f64() * 1e3,
                record.iterations,
                stats.events_consumed as f64 / elapsed,
            );
        }
        stats.packets.push(record);
        Ok(())
    }
}
