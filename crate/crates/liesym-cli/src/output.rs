//! Artifact writing: run directories keyed by config hash, CSV emission with
//! provenance headers, JSON reports.

use crate::Failure;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Provenance embedded in every emitted artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(command: &str, config_hash: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# command={} config_hash={} seed={} version={}\n",
            self.command,
            self.config_hash,
            self.seed.map_or("none".to_string(), |s| s.to_string()),
            self.version
        )
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..6])
}

/// Create `<out>/<hash>/` and drop a copy of the config inside it.
pub fn run_dir(out: &Path, hash: &str, config_bytes: &[u8]) -> Result<PathBuf, Failure> {
    let dir = out.join(hash);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.json"), config_bytes)?;
    Ok(dir)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Config(format!("serializing {name}: {e}")))?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

/// Write a CSV with a provenance comment, a header row, and numeric rows.
pub fn write_csv(
    dir: &Path,
    name: &str,
    prov: &Provenance,
    header: &str,
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(prov.csv_comment().as_bytes())?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect())
        .collect()
}
