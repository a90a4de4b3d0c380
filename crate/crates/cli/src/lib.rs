//! Command-line front end: argument and config handling, the four
//! subcommands, and frame output.

pub mod args;
pub mod commands;
pub mod error;
pub mod writer;

use std::ffi::OsString;

pub use args::{parse_with_config, Cli, Command};
pub use commands::{cmd_bench, cmd_reconstruct, cmd_rofdemo, cmd_simulate, rofdemo};
pub use error::{CliError, CliResult};

/// Runs one command from raw arguments. Summaries go to standard error.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = parse_with_config(args)?;
    match &cli.command {
        Command::Reconstruct(a) => {
            let report = cmd_reconstruct(a)?;
            let s = &report.stats;
            eprintln!(
                "frames {} packets {} events {} mean solve {:.3} ms fps {:.1} events/s {:.0}",
                s.frames_emitted,
                s.packets.len(),
                s.events_consumed,
                s.mean_solve_ms(),
                s.frames_per_second(),
                s.events_per_second(),
            );
        }
        Command::Simulate(a) => {
            let report = cmd_simulate(a)?;
            eprintln!(
                "events {} frames {} -> {}",
                report.events,
                report.frames,
                report.event_file.display()
            );
        }
        Command::Rofdemo(a) => {
            let (_, files) = cmd_rofdemo(a)?;
            eprintln!("wrote {} images to {}", files.len(), a.io.output_dir.display());
        }
        Command::Bench(a) => {
            let r = cmd_bench(a)?;
            eprintln!(
                "bench {}x{} packets {} events/packet {} iterations {}",
                r.geometry.width, r.geometry.height, r.packets, r.events_per_packet, r.iterations
            );
            eprintln!(
                "ms/frame mean {:.3} median {:.3} p95 {:.3} fps {:.1}",
                r.mean_ms, r.median_ms, r.p95_ms, r.fps
            );
            let verdict = if r.meets_target() { "pass" } else { "warn" };
            eprintln!("{verdict}: {:.1} fps against a {:.0} fps target", r.fps, r.target_fps);
        }
    }
    Ok(())
}
