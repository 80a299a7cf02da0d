//! Result files: a JSON summary with a provenance header plus tidy CSV streams.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use critwave::RadialGrid;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    /// SHA-256 of each grid's node positions.
    pub grids: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn new(command: &'static str, config: &ExperimentConfig) -> Result<Self> {
        let echo = serde_json::to_vec(config)?;
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config_sha256: hex::encode(Sha256::digest(&echo)),
            grids: BTreeMap::new(),
            config: config.clone(),
        })
    }

    pub fn add_grid(&mut self, name: &str, grid: &RadialGrid) {
        self.grids.insert(name.to_string(), hex::encode(Sha256::digest(grid.fingerprint())));
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

/// Shortest round-trip text of `v`, switching to exponent form outside
/// `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Long-format CSV: one observation per row.
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self { name: name.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Row of numbers printed in shortest round-trip form.
    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }
}

pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    /// Writes `<command>.json` and returns its text.
    pub fn summary<T: Serialize>(&self, prov: &Provenance, result: &T) -> Result<String> {
        let text = serde_json::to_string_pretty(&Summary { provenance: prov, result })? + "\n";
        let path = self.dir.join(format!("{}.json", prov.command));
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        Ok(text)
    }

    pub fn table(&self, t: &Table) -> Result<PathBuf> {
        let path = self.dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.5, -2.0e-29, 3.0e300, 123456.75, 1e-4, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(5.0e-29), "5e-29");
        assert_eq!(num(0.25), "0.25");
    }
}
