//! CSV traces, key=value reports and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const TRACE_HEADER: &str = "tau,omega,residual";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Renders rows under `header`, one line per row.
pub fn render_csv(header: &str, columns: &[&[f64]]) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = String::with_capacity(rows * 24 * columns.len() + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for i in 0..rows {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(col[i]));
        }
        out.push('\n');
    }
    out
}

pub fn render_trace(tau: &[f64], omega: &[f64], residual: &[f64]) -> String {
    render_csv(TRACE_HEADER, &[tau, omega, residual])
}

/// Ordered `key=value` lines.
#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn extend(&mut self, other: &KeyValues) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}={v}");
            s
        })
    }
}

/// Where a command writes its files: `<dir>/<stem><suffix>`.
#[derive(Debug, Clone)]
pub struct OutputSet {
    dir: PathBuf,
    stem: String,
    written: Vec<(String, String)>,
}

impl OutputSet {
    /// Derives directory and stem from an explicit CSV path.
    pub fn from_csv_path(path: &Path) -> Self {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        Self { dir, stem, written: Vec::new() }
    }

    pub fn new(dir: &Path, stem: &str) -> Self {
        Self { dir: dir.to_path_buf(), stem: stem.to_string(), written: Vec::new() }
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    /// Writes `<dir>/<stem><suffix>` and records its digest for the manifest.
    pub fn write_data(&mut self, suffix: &str, body: &str) -> io::Result<PathBuf> {
        let path = self.path(suffix);
        self.write_at(path, body)
    }

    pub fn write_at(&mut self, path: PathBuf, body: &str) -> io::Result<PathBuf> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body)?;
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.written.push((name, sha256_hex(body.as_bytes())));
        Ok(path)
    }

    /// Writes `<stem>.manifest` listing `params` and every data file, then
    /// `<stem>.report` with `report` plus the manifest digest.
    pub fn finish(&self, params: &KeyValues, report: &KeyValues) -> io::Result<String> {
        let mut manifest = KeyValues::new();
        manifest.push("tool", concat!("abc-hybrid ", env!("CARGO_PKG_VERSION")));
        manifest.extend(params);
        for (name, digest) in &self.written {
            manifest.push(format!("output.{name}.sha256"), digest);
        }
        let text = manifest.render();
        let digest = sha256_hex(text.as_bytes());
        if !self.dir.as_os_str().is_empty() {
            fs::create_dir_all(&self.dir)?;
        }
        fs::write(self.path(".manifest"), &text)?;
        let mut full = KeyValues::new();
        full.push("manifest_sha256", &digest);
        full.extend(report);
        fs::write(self.path(".report"), full.render())?;
        Ok(digest)
    }
}

/// `<file stem>` of an input path, used as the default output stem.
pub fn input_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}
