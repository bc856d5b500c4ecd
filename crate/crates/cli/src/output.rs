use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, OutputSection};
use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Files produced by a command, held in memory and written together once the
/// command has finished.
#[derive(Debug)]
pub struct Artifacts {
    directory: PathBuf,
    csv: bool,
    json: bool,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(output: &OutputSection) -> Self {
        Self {
            directory: output.directory.clone(),
            csv: output.wants(Format::Csv),
            json: output.wants(Format::Json),
            files: Vec::new(),
        }
    }

    pub fn directory(&self) -> &Path {
        &self.directory
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn bytes(&mut self, name: String, data: Vec<u8>) {
        self.files.push((name, data));
    }

    pub fn text(&mut self, name: String, text: String) {
        self.bytes(name, text.into_bytes());
    }

    pub fn csv(&mut self, name: String, text: String) {
        if self.csv {
            self.text(name, text);
        }
    }

    pub fn json<T: Serialize>(&mut self, name: String, value: &T) -> Result<(), CliError> {
        if self.json {
            self.json_always(name, value)?;
        }
        Ok(())
    }

    /// JSON that is written whatever the configured formats.
    pub fn json_always<T: Serialize>(&mut self, name: String, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::numeric)?;
        text.push('\n');
        self.text(name, text);
        Ok(())
    }

    pub fn write_all(self) -> Result<Vec<PathBuf>, CliError> {
        if self.files.is_empty() {
            return Ok(Vec::new());
        }
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(&self.directory).map_err(io(&self.directory))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, data) in self.files {
            let path = self.directory.join(name);
            std::fs::write(&path, data).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}
