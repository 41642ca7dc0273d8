//! Output directory bookkeeping and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use arte_core::pipeline::PhaseTimings;
use serde::Serialize;

use crate::CliError;

/// Output directory that remembers what was written to it.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes `name` through `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let io_err = |source| CliError::File {
            path: path.clone(),
            source,
        };
        let file = File::create(&path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(io_err)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_io<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        self.write(name, |w| f(w).map_err(|source| CliError::File { path, source }))
    }

    /// Writes the manifest last so that it lists every other output.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.outputs = self.files.clone();
        manifest.outputs.push("manifest.json".into());
        self.write("manifest.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(arte_core::Error::from)?;
            writeln!(w).map_err(arte_core::Error::from)?;
            Ok(())
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub arte: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub threads: usize,
    pub timings: PhaseTimings,
    /// Wall time of the timed phases together.
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &'static str, config: serde_json::Value, threads: usize) -> Self {
        RunManifest {
            command,
            config,
            versions: Versions {
                arte: env!("CARGO_PKG_VERSION"),
            },
            threads,
            timings: PhaseTimings::default(),
            wall_seconds: 0.0,
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        }
    }
}
