use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use repoprint::pipeline::Summary;

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
    pub report: serde_json::Value,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    seeds: Vec<u64>,
    outputs: Vec<PathBuf>,
    report: serde_json::Value,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        Ok(ManifestBuilder {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            outputs: Vec::new(),
            report: serde_json::Value::Null,
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn seeds(&mut self, seeds: &[u64]) {
        self.seeds = seeds.to_vec();
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn report<R: Serialize>(&mut self, r: &R) -> Result<()> {
        self.report = serde_json::to_value(r)?;
        Ok(())
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let m = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            input_hashes: self.inputs,
            seeds: self.seeds,
            outputs: self.outputs,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            report: self.report,
        };
        fs::write(path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// `<file>.manifest.json` beside a single-file output.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Loads `summary.json` from `dir`, or starts a fresh one.
pub fn load_summary(dir: &Path) -> Summary {
    fs::read_to_string(dir.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_default()
}

pub fn save_summary(dir: &Path, s: &Summary) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(s)? + "\n")?;
    Ok(path)
}
