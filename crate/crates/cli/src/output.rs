//! Output directory with a manifest header on every file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use frgrav::fields::{write_snapshot, FieldState};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Version of the CSV layouts described in `docs/csv_schema.md` at the repository root.
pub const SCHEMA_VERSION: u32 = 1;

pub struct Output {
    dir: PathBuf,
    header: String,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_header(command: &str, cfg: &RunConfig) -> String {
    let g = &cfg.grid;
    let kappa = if command == "sweep-kappa" {
        cfg.kappas.iter().map(|k| format!("{k:e}")).collect::<Vec<_>>().join(",")
    } else {
        format!("{:e}", cfg.kappa)
    };
    format!(
        "# frgrav {}\n# schema = {SCHEMA_VERSION}\n# command = {command}\n# config_sha256 = {}\n\
         # grid = dims={} n={} lo={:e} hi={:e}\n# kappa = {kappa}\n# stencil_order = {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash(cfg),
        g.dims,
        g.n,
        g.lo,
        g.hi,
        g.stencil
    )
}

impl Output {
    /// Creates `dir` and writes `manifest.txt` with the resolved configuration.
    pub fn new(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let out = Self { dir: dir.to_path_buf(), header: manifest_header(command, cfg) };
        let mut w = out.create("manifest.txt")?;
        w.write_all(cfg.canonical().as_bytes())?;
        w.flush()?;
        Ok(out)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        w.write_all(self.header.as_bytes())?;
        Ok(w)
    }

    pub fn write_csv(&self, name: &str, columns: &str, rows: &[String]) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{columns}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush().with_context(|| format!("writing {name}"))
    }

    /// Snapshot `index` as `snapshots/state_NNNNNN.bin`: manifest lines, then the binary record.
    pub fn write_snapshot(&self, index: usize, state: &FieldState) -> Result<()> {
        std::fs::create_dir_all(self.dir.join("snapshots"))?;
        let name = format!("snapshots/state_{index:06}.bin");
        let mut w = self.create(&name)?;
        write_snapshot(state, &mut w)?;
        w.flush().with_context(|| format!("writing {name}"))
    }
}

/// Reads a snapshot written by [`Output::write_snapshot`].
#[cfg(test)]
pub fn read_snapshot_file(path: &Path) -> Result<FieldState> {
    let bytes = std::fs::read(path)?;
    let mut rest = &bytes[..];
    while rest.first() == Some(&b'#') {
        let end = rest.iter().position(|&b| b == b'\n').context("unterminated manifest line")?;
        rest = &rest[end + 1..];
    }
    Ok(frgrav::fields::read_snapshot(rest)?)
}
