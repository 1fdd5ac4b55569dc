//! Wall-clock measurements, kept out of every deterministic artifact.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

pub struct TimingLog {
    file: Option<PathBuf>,
}

impl TimingLog {
    pub fn new(file: Option<PathBuf>) -> Self {
        Self { file }
    }

    pub fn record(&self, command: &str, phase: &str, started: Instant) {
        let line = format!("timing\t{command}\t{phase}\t{:.6}s\n", started.elapsed().as_secs_f64());
        let written = self.file.as_ref().is_some_and(|path| {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .is_ok()
        });
        if !written {
            eprint!("{line}");
        }
    }
}
