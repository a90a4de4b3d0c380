use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use event_manifold::event_io::{frame_path, write_pgm, write_pgm_autoscaled};
use event_manifold::reconstruction::{FrameSink, PacketOutput};
use event_manifold::{Error, Field, Result};

/// Frames queued ahead of the writer thread.
const QUEUE_DEPTH: usize = 4;

type WriterResult = (Vec<PathBuf>, Result<()>);

/// Encodes and writes PGM frames on a background thread so disk I/O overlaps
/// the next packet's solve.
pub struct FrameWriter {
    tx: Option<SyncSender<(PathBuf, Field)>>,
    handle: Option<JoinHandle<WriterResult>>,
    finished: Option<WriterResult>,
}

impl FrameWriter {
    pub fn spawn(bounds: (f64, f64)) -> Self {
        let (tx, rx) = sync_channel::<(PathBuf, Field)>(QUEUE_DEPTH);
        let handle = std::thread::spawn(move || {
            let mut written = Vec::new();
            for (path, frame) in rx {
                if let Err(e) = write_pgm(&frame, bounds, &path) {
                    return (written, Err(e));
                }
                written.push(path);
            }
            (written, Ok(()))
        });
        Self {
            tx: Some(tx),
            handle: Some(handle),
            finished: None,
        }
    }

    pub fn send(&mut self, path: PathBuf, frame: Field) -> Result<()> {
        let Some(tx) = &self.tx else {
            return Err(Error::Config("frame writer already stopped".into()));
        };
        if tx.send((path, frame)).is_ok() {
            return Ok(());
        }
        // the thread only hangs up after a failed write
        self.join();
        match &self.finished {
            Some((_, Err(e))) => Err(Error::Config(format!("frame writer failed: {e}"))),
            _ => Err(Error::Config("frame writer stopped".into())),
        }
    }

    fn join(&mut self) {
        self.tx = None;
        if let Some(handle) = self.handle.take() {
            let result = handle
                .join()
                .unwrap_or_else(|_| (Vec::new(), Err(Error::Config("frame writer panicked".into()))));
            self.finished = Some(result);
        }
    }

    /// Waits for queued frames; returns the files written and the first error.
    pub fn finish(mut self) -> WriterResult {
        self.join();
        self.finished.take().unwrap_or((Vec::new(), Ok(())))
    }
}

/// Sink used by `reconstruct`: frames go to the writer thread, optional
/// debug output is written inline.
pub struct ReconstructSink {
    dir: PathBuf,
    prefix: String,
    every: usize,
    writer: FrameWriter,
    trace: Option<(PathBuf, BufWriter<File>)>,
    dump_surface: bool,
    extra: Vec<PathBuf>,
    emitted: usize,
}

impl ReconstructSink {
    pub fn new(
        dir: &Path,
        prefix: &str,
        bounds: (f64, f64),
        frames_to_skip: usize,
        trace: Option<&Path>,
        dump_surface: bool,
    ) -> Result<Self> {
        let mut extra = Vec::new();
        let trace = match trace {
            Some(path) => {
                let file = File::create(path).map_err(|e| Error::io(path, e))?;
                extra.push(path.to_path_buf());
                let mut w = BufWriter::new(file);
                writeln!(w, "packet,iteration,energy,primal_change").map_err(|e| Error::io(path, e))?;
                Some((path.to_path_buf(), w))
            }
            None => None,
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            every: frames_to_skip + 1,
            writer: FrameWriter::spawn(bounds),
            trace,
            dump_surface,
            extra,
            emitted: 0,
        })
    }

    /// Flushes everything and returns all files written, plus the first error.
    pub fn finish(self) -> WriterResult {
        let (mut written, mut result) = self.writer.finish();
        if let Some((path, mut w)) = self.trace {
            if let Err(e) = w.flush() {
                result = result.and(Err(Error::io(&path, e)));
            }
        }
        written.extend(self.extra);
        (written, result)
    }
}

impl FrameSink for ReconstructSink {
    fn emit(&mut self, index: usize, frame: &Field) -> Result<()> {
        self.emitted = index + 1;
        self.writer.send(frame_path(&self.dir, &self.prefix, index), frame.clone())
    }

    fn inspect(&mut self, packet: &PacketOutput) -> Result<()> {
        if let Some((path, w)) = &mut self.trace {
            for row in &packet.trace {
                writeln!(w, "{},{},{:.12e},{:.12e}", packet.record.index, row.iteration, row.energy, row.primal_change)
                    .map_err(|e| Error::io(&*path, e))?;
            }
        }
        if self.dump_surface && packet.record.index.is_multiple_of(self.every) {
            let index = self.emitted;
            if let Some(surface) = &packet.surface {
                let path = frame_path(&self.dir, "surface", index);
                write_pgm_autoscaled(surface.values(), &path)?;
                self.extra.push(path);
            }
            if let Some(metric) = &packet.metric {
                let path = frame_path(&self.dir, "metric", index);
                write_pgm_autoscaled(metric.g(), &path)?;
                self.extra.push(path);
            }
        }
        Ok(())
    }
}
