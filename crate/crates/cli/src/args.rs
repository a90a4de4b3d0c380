use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use event_manifold::manifold::{DEFAULT_DENOISE_ITERATIONS, DEFAULT_DENOISE_WEIGHT, DEFAULT_T_SCALE};
use event_manifold::reconstruction::{
    EventThresholds, ManifoldConfig, PacketPolicy, ReconstructionConfig, SurfaceWindow,
    DEFAULT_EVENTS_PER_PACKET, DEFAULT_THRESHOLD, DEFAULT_WINDOW_PACKETS,
};
use event_manifold::solver::{
    SolverConfig, DEFAULT_LAMBDA, DEFAULT_MAX_ITERATIONS, DEFAULT_U_MAX, DEFAULT_U_MIN,
};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug, Clone)]
#[command(name = "evrecon", version, about = "Intensity reconstruction from event-camera streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Reconstruct PGM frames from an event file.
    Reconstruct(ReconstructArgs),
    /// Render a synthetic scene and convert it to events.
    Simulate(SimulateArgs),
    /// ROF denoising of a test image on flat, ramp and sine surfaces.
    Rofdemo(RofdemoArgs),
    /// Time warm-started packet solves, excluding I/O.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct IoArgs {
    /// Event file ("timestamp x y polarity" lines).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    /// Seed for every pseudo-random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// key=value file; command-line flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ThresholdArgs {
    /// Log-intensity step of a positive event.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold_pos: f64,
    /// Log-intensity step of a negative event.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold_neg: f64,
}

impl ThresholdArgs {
    pub fn thresholds(&self) -> EventThresholds {
        EventThresholds {
            positive: self.threshold_pos,
            negative: self.threshold_neg,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Data-term weight.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Primal-dual iterations per packet.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub iterations: usize,
    /// Stop a solve early once the relative primal change drops below this
    /// [default: off].
    #[arg(long)]
    pub early_stop: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_U_MIN)]
    pub umin: f64,
    #[arg(long, default_value_t = DEFAULT_U_MAX)]
    pub umax: f64,
    #[arg(long, default_value_t = DEFAULT_EVENTS_PER_PACKET)]
    pub events_per_packet: usize,
    /// Frames dropped between two written frames.
    #[arg(long, default_value_t = 0)]
    pub skip_frames: usize,
    /// Plain TV: fix the time surface to a constant.
    #[arg(long)]
    pub no_manifold: bool,
    /// Height of the freshest events on the time surface.
    #[arg(long, default_value_t = DEFAULT_T_SCALE)]
    pub t_scale: f64,
    /// Age in ticks mapped to the bottom of the surface
    /// [default: span of the last 10 packets].
    #[arg(long)]
    pub t_window: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DENOISE_WEIGHT)]
    pub denoise_weight: f64,
    /// Timestamp denoising iterations; 0 disables denoising.
    #[arg(long, default_value_t = DEFAULT_DENOISE_ITERATIONS)]
    pub denoise_iters: usize,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Log a stats line every this many packets; 0 disables.
    #[arg(long, default_value_t = 100)]
    pub stats_every: usize,
}

impl PipelineArgs {
    /// Builds and validates the full pipeline configuration.
    pub fn reconstruction_config(&self) -> CliResult<ReconstructionConfig> {
        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            lambda: self.lambda,
            u_min: self.umin,
            u_max: self.umax,
            max_iterations: self.iterations,
            convergence_tol: self.early_stop,
            ..defaults
        };
        let config = ReconstructionConfig {
            solver,
            manifold: ManifoldConfig {
                enabled: !self.no_manifold,
                t_scale: self.t_scale,
                window: match self.t_window {
                    Some(ticks) => SurfaceWindow::Ticks(ticks),
                    None => SurfaceWindow::Packets(DEFAULT_WINDOW_PACKETS),
                },
                denoise_weight: self.denoise_weight,
                denoise_iterations: self.denoise_iters,
            },
            packets: PacketPolicy {
                events_per_packet: self.events_per_packet,
                frames_to_skip: self.skip_frames,
            },
            thresholds: self.thresholds.thresholds(),
            stats_every: self.stats_every,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug, Clone)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Sensor width [default: from the file header, else 128].
    #[arg(long)]
    pub width: Option<usize>,
    /// Sensor height [default: from the file header, else 128].
    #[arg(long)]
    pub height: Option<usize>,
    /// Allowed timestamp regression in ticks.
    #[arg(long, default_value_t = 0)]
    pub slack: u64,
    #[arg(long, default_value = "frame")]
    pub prefix: String,
    /// Write per-iteration energy and primal change of every packet as CSV.
    #[arg(long)]
    pub energy_trace: Option<PathBuf>,
    /// Also write the time surface and G of every written frame (auto-scaled).
    #[arg(long)]
    pub dump_surface: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// moving_square, moving_sine or two_bars.
    #[arg(long, default_value = "moving_square")]
    pub scene: String,
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    /// Ticks between ground-truth frames.
    #[arg(long, default_value_t = 1000)]
    pub frame_interval: u64,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Horizontal speed in pixels per frame.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub velocity_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub velocity_y: f64,
    /// Object size in pixels [default: a quarter of the shorter side].
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    pub background: f64,
    #[arg(long, default_value_t = 1.8)]
    pub foreground: f64,
    /// Checker cell size painted on the object; 0 paints it uniform.
    #[arg(long, default_value_t = 0)]
    pub checker: usize,
    #[arg(long, default_value_t = 0.3)]
    pub checker_contrast: f64,
    /// Uniform timestamp jitter in ticks.
    #[arg(long, default_value_t = 0)]
    pub jitter: u64,
}

#[derive(Args, Debug, Clone)]
pub struct RofdemoArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Weight of the quadratic data term.
    #[arg(long, default_value_t = 8.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    /// Side of the square test image.
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    /// Standard deviation of the added Gaussian noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Slope a of the ramp surface t = a·x.
    #[arg(long, default_value_t = 2.0)]
    pub ramp_slope: f64,
    /// Amplitude of the sine surface.
    #[arg(long, default_value_t = 4.0)]
    pub sine_amplitude: f64,
    /// Period of the sine surface in pixels.
    #[arg(long, default_value_t = 32.0)]
    pub sine_period: f64,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Packets to time; a simulated stream is generated when --input is absent.
    #[arg(long, default_value_t = 100)]
    pub packets: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Frame rate reported as a pass, otherwise a warning.
    #[arg(long, default_value_t = 30.0)]
    pub target_fps: f64,
}

impl Command {
    pub fn io(&self) -> &IoArgs {
        match self {
            Command::Reconstruct(a) => &a.io,
            Command::Simulate(a) => &a.io,
            Command::Rofdemo(a) => &a.io,
            Command::Bench(a) => &a.io,
        }
    }
}

/// Parses `args`, folding in the file named by `--config`. Flags given on
/// the command line win over the file, which wins over built-in defaults.
pub fn parse_with_config<I, T>(args: I) -> CliResult<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let matches = Cli::command().try_get_matches_from(&args)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let Some(path) = cli.command.io().config.clone() else {
        return Ok(cli);
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let command = Cli::command();
    let sub = command.find_subcommand(name).expect("matched subcommand exists");

    let mut merged = args.clone();
    for (line, key, value) in read_config(&path)? {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .filter(|a| a.get_id() != "config")
            .ok_or_else(|| CliError::Config {
                path: path.clone(),
                line,
                reason: format!("unknown key `{key}` for `{name}`"),
            })?;
        let explicit = sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine);
        if explicit {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" | "1" | "yes" => merged.push(format!("--{long}").into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::Config {
                        path: path.clone(),
                        line,
                        reason: format!("`{key}` expects true or false, got `{other}`"),
                    })
                }
            }
        } else {
            merged.push(format!("--{long}={value}").into());
        }
    }
    let matches = Cli::command().try_get_matches_from(&merged)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

/// `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> CliResult<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected key=value, got `{line}`"),
            });
        };
        entries.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}
