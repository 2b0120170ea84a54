//! Experiment runner for the `mriq` toolkit: declarative JSON configs,
//! per-study runners, single-step file commands, and artifact bookkeeping.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiments::{run_experiment, RunOutcome};

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "MRIQ_OUT_ROOT";
pub const DEFAULT_OUT_ROOT: &str = "mriq-out";

/// Output directory precedence: explicit flag, the config's `output_dir`,
/// then `<root>/<experiment>` where root comes from the environment.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env_root: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = env_root.filter(|r| !r.is_empty()).unwrap_or(DEFAULT_OUT_ROOT);
    Path::new(root).join(cfg.experiment.name())
}
