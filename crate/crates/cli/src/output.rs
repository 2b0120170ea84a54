//! Artifact directory bookkeeping: every file an experiment writes is
//! recorded, and `finish` adds the resolved config plus a manifest that is
//! enough to rerun the experiment.

use std::path::{Path, PathBuf};

use mriq::io::Scaling;
use mriq::RealImage;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_file: String,
    pub config_sha256: String,
    pub rerun: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path of `name`, creating parent directories and recording it.
    pub fn claim(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(path)
    }

    pub fn csv<S: Serialize>(&mut self, name: &str, rows: &[S]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.claim(name)?)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, content: &str) -> CliResult<()> {
        std::fs::write(self.claim(name)?, content)?;
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(mriq::Error::from)?;
        self.text(name, &(text + "\n"))
    }

    pub fn png(&mut self, name: &str, image: &RealImage, scaling: Scaling) -> CliResult<()> {
        mriq::io::write_png(&self.claim(name)?, image, scaling)?;
        Ok(())
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    /// Writes `config.json` and `manifest.json`.
    pub fn finish(mut self, cfg: &ExperimentConfig) -> CliResult<RunManifest> {
        self.text(CONFIG_FILE, &(cfg.canonical_json() + "\n"))?;
        let mut artifacts = self.artifacts.clone();
        artifacts.push(MANIFEST_FILE.to_string());
        artifacts.sort();
        let manifest = RunManifest {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.experiment.name().to_string(),
            seed: cfg.seed,
            config_file: CONFIG_FILE.to_string(),
            config_sha256: cfg.hash(),
            rerun: format!("mriq run --config {CONFIG_FILE} --out <dir>"),
            artifacts,
        };
        self.json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }
}
