//! Files written into an artifact directory.

use std::path::{Path, PathBuf};

use serde::Serialize;
use wdm_core::regularize::SampledFunction;
use wdm_core::ParticleEnsemble;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// An artifact directory, created on demand.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

/// Shortest round-trip representation, in exponent form for tiny or huge magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl ArtifactDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn sub(&self, name: &str) -> CliResult<Self> {
        Self::create(self.root.join(name))
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.file(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_manifest(&self, cfg: &ExperimentConfig, mode: &str) -> CliResult<PathBuf> {
        self.write_text("manifest.toml", &cfg.manifest(mode))
    }

    /// A serializable report as TOML.
    pub fn write_report<T: Serialize>(&self, name: &str, report: &T) -> CliResult<PathBuf> {
        let text = toml::to_string(report).map_err(|e| CliError::Other(format!("report {name}: {e}")))?;
        self.write_text(name, &text)
    }

    /// A numeric table with a header row.
    pub fn write_table<R>(&self, name: &str, header: &[&str], rows: R) -> CliResult<PathBuf>
    where
        R: IntoIterator<Item = Vec<f64>>,
    {
        let path = self.file(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| num(*v)))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// A table whose leading column is text.
    pub fn write_labeled_table<R>(&self, name: &str, header: &[&str], rows: R) -> CliResult<PathBuf>
    where
        R: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let path = self.file(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for (label, row) in rows {
            let mut rec = vec![label];
            rec.extend(row.iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// One row per particle: `x1..xd, w, nu`.
    pub fn write_particles(&self, name: &str, ens: &ParticleEnsemble) -> CliResult<PathBuf> {
        let d = ens.dim;
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("w".into());
        header.push("nu".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..ens.len()).map(|i| {
            let mut row = ens.position(i).to_vec();
            row.push(ens.volumes[i]);
            row.push(ens.intensities[i]);
            row
        });
        self.write_table(name, &header, rows)
    }

    /// One row per grid node: `x1..xd, value`.
    pub fn write_sampled(&self, name: &str, f: &SampledFunction) -> CliResult<PathBuf> {
        let d = f.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("value".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut x = vec![0.0; d];
        let rows = (0..f.grid.len()).map(|g| {
            f.grid.point(g, &mut x);
            let mut row = x.clone();
            row.push(f.values[g]);
            row
        });
        self.write_table(name, &header, rows)
    }
}

/// At most `max` evenly strided points, always keeping the last.
pub fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max || max < 2 {
        return items.to_vec();
    }
    let stride = items.len().div_ceil(max - 1);
    let mut out: Vec<T> = items.iter().step_by(stride).cloned().collect();
    if !(items.len() - 1).is_multiple_of(stride) {
        out.push(items[items.len() - 1].clone());
    }
    out
}
