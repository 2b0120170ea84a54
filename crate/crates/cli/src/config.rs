use std::path::{Path, PathBuf};

use mriq::dro::DiskGridSpec;
use mriq::model::{Architecture, CorpusSource, TrainConfig};
use mriq::observer::{AdmmSettings, ObserverChannel, DEFAULT_LAMBDA_R, DEFAULT_ROI_SIZE};
use mriq::WindowSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{schema, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    TrainModel(TrainModelStudy),
    DiskGridStudy(DiskGridStudy),
    SkeObserverStudy(SkeObserverStudy),
    SnrAverages(SnrAveragesStudy),
    Sharpness(SharpnessStudy),
    DenoiseLevels(DenoiseLevelsStudy),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::TrainModel(_) => "train_model",
            Experiment::DiskGridStudy(_) => "disk_grid_study",
            Experiment::SkeObserverStudy(_) => "ske_observer_study",
            Experiment::SnrAverages(_) => "snr_averages",
            Experiment::Sharpness(_) => "sharpness",
            Experiment::DenoiseLevels(_) => "denoise_levels",
        }
    }
}

/// Weight initialization, corpus and optimizer settings. The experiment seed
/// seeds the initial weights and is mixed into the corpus seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TrainModelStudy {
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub corpus: CorpusSource,
}

/// Where a deep-learning experiment gets its network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// Path to a saved model manifest.
    Path(PathBuf),
    /// Train a model before running the experiment.
    Train(TrainModelStudy),
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Train(TrainModelStudy::default())
    }
}

/// Settings shared by the phantom studies: the object is sampled on a
/// `size` grid, its spectrum truncated to `trunc_fraction` per axis, and
/// complex noise of `noise_sigma` (relative to `intensity`) added to the
/// acquired samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomAcquisition {
    pub size: usize,
    pub intensity: f64,
    pub trunc_fraction: f64,
    pub noise_sigma: f64,
}

impl Default for PhantomAcquisition {
    fn default() -> Self {
        Self { size: 128, intensity: 1.0, trunc_fraction: 0.5, noise_sigma: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskGridStudy {
    pub grid: DiskGridSpec,
    pub realizations: usize,
    pub trunc_fraction: f64,
    pub window: WindowSpec,
    pub denoising_level: f64,
    pub model: ModelSource,
    /// z threshold of the automated matched-filter reader.
    pub proxy_threshold: f64,
    /// Reader response files; when absent the automated proxy is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub responses: Option<ResponseFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseFiles {
    pub conventional: PathBuf,
    pub deep_learning: PathBuf,
}

impl Default for DiskGridStudy {
    fn default() -> Self {
        Self {
            grid: DiskGridSpec::default(),
            realizations: mriq::dro::DISK_GRID_REALIZATIONS,
            trunc_fraction: 1.0,
            window: WindowSpec::Hann,
            denoising_level: 0.75,
            model: ModelSource::default(),
            proxy_threshold: mriq::metrics::PROXY_THRESHOLD,
            responses: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeObserverStudy {
    pub object_sizes: Vec<usize>,
    pub grid: usize,
    /// Total signal of each object; intensity is `signal / size`.
    pub signal: f64,
    pub noise_variance: f64,
    pub realizations: usize,
    pub groups: usize,
    pub roi_size: usize,
    pub lambda_r: f64,
    pub channel: ObserverChannel,
    pub admm: AdmmSettings,
    /// Deep-learning arm compared against the original images; `null`
    /// evaluates the original images only.
    pub deep_learning: Option<SkeDeepLearning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeDeepLearning {
    pub denoising_level: f64,
    pub model: ModelSource,
}

impl Default for SkeDeepLearning {
    fn default() -> Self {
        Self { denoising_level: 0.75, model: ModelSource::default() }
    }
}

impl Default for SkeObserverStudy {
    fn default() -> Self {
        Self {
            object_sizes: vec![1, 2, 4],
            grid: 120,
            signal: 3.0,
            noise_variance: 1.41,
            realizations: mriq::dro::SKE_REALIZATIONS,
            groups: mriq::dro::SKE_GROUPS,
            roi_size: DEFAULT_ROI_SIZE,
            lambda_r: DEFAULT_LAMBDA_R,
            channel: ObserverChannel::Real,
            admm: AdmmSettings::default(),
            deep_learning: Some(SkeDeepLearning::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrAveragesStudy {
    pub phantom: PhantomAcquisition,
    pub averages: Vec<usize>,
    pub denoising_levels: Vec<f64>,
    /// Include the unfiltered conventional reconstruction as a reference.
    pub conventional: bool,
    pub model: ModelSource,
}

impl Default for SnrAveragesStudy {
    fn default() -> Self {
        Self {
            phantom: PhantomAcquisition { trunc_fraction: 1.0, noise_sigma: 0.1, ..Default::default() },
            averages: (1..=15).collect(),
            denoising_levels: vec![0.0, 0.25, 0.5, 0.75],
            conventional: true,
            model: ModelSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessStudy {
    pub phantom: PhantomAcquisition,
    pub realizations: usize,
    pub window: WindowSpec,
    pub denoising_level: f64,
    pub model: ModelSource,
}

impl Default for SharpnessStudy {
    fn default() -> Self {
        Self {
            phantom: PhantomAcquisition::default(),
            realizations: 30,
            window: WindowSpec::Hann,
            denoising_level: 0.75,
            model: ModelSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseLevelsStudy {
    pub phantom: PhantomAcquisition,
    pub levels: Vec<f64>,
    pub model: ModelSource,
}

impl Default for DenoiseLevelsStudy {
    fn default() -> Self {
        Self {
            phantom: PhantomAcquisition { noise_sigma: 0.05, ..Default::default() },
            levels: vec![0.30, 0.75, 1.0],
            model: ModelSource::default(),
        }
    }
}

fn check(ok: bool, msg: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(schema(msg))
    }
}

fn check_level(d: f64) -> CliResult<()> {
    check((0.0..=1.0).contains(&d), "denoising levels must lie in [0, 1]")
}

fn check_mriq(r: mriq::Result<()>) -> CliResult<()> {
    r.map_err(|e| schema(e.to_string()))
}

impl TrainModelStudy {
    pub fn validate(&self) -> CliResult<()> {
        let a = &self.architecture;
        check(a.depth >= 1 && a.kernel % 2 == 1 && a.hidden_channels >= 1, "architecture needs depth >= 1, odd kernel, hidden channels >= 1")?;
        check(a.input_channels == 2 && a.output_channels == 4, "the network maps 2 input channels to 4 output channels")?;
        let t = &self.train;
        check(t.batch_size >= 1, "batch size must be positive")?;
        check(t.learning_rate >= 0.0 && t.epsilon > 0.0, "learning rate must be >= 0 and epsilon > 0")?;
        check((0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2), "ADAM betas must lie in [0, 1)")?;
        let c = &self.corpus;
        check(c.patch_size >= a.depth * (a.kernel - 1) + 1, "training patches must be at least the receptive field")?;
        check(!c.trunc_fractions.is_empty() && c.trunc_fractions.iter().all(|f| *f > 0.0 && *f <= 1.0), "truncation fractions must lie in (0, 1]")?;
        check(c.min_snr > 0.0 && c.max_snr >= c.min_snr, "corpus SNR range must be positive and ordered")?;
        check((0.0..=1.0).contains(&c.kspace_noise_fraction), "kspace noise fraction must lie in [0, 1]")?;
        for op in &c.augmentations {
            check(mriq::model::AUGMENTATION_NAMES.contains(&op.as_str()), &format!("unknown augmentation '{op}'"))?;
        }
        Ok(())
    }
}

impl ModelSource {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            ModelSource::Path(_) => Ok(()),
            ModelSource::Train(t) => t.validate(),
        }
    }
}

impl PhantomAcquisition {
    pub fn validate(&self) -> CliResult<()> {
        check(self.size >= 64, "phantom size must be at least 64")?;
        check(self.trunc_fraction > 0.0 && self.trunc_fraction <= 1.0, "truncation fraction must lie in (0, 1]")?;
        check(self.noise_sigma >= 0.0 && self.intensity > 0.0, "noise sigma must be >= 0 and intensity > 0")
    }

    /// Acquired matrix size after truncation.
    pub fn acquired(&self) -> usize {
        ((self.size as f64 * self.trunc_fraction).round() as usize).clamp(1, self.size)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        match &self.experiment {
            Experiment::TrainModel(t) => t.validate(),
            Experiment::DiskGridStudy(s) => {
                check(s.realizations >= 1, "realizations must be positive")?;
                check(s.trunc_fraction > 0.0 && s.trunc_fraction <= 1.0, "truncation fraction must lie in (0, 1]")?;
                check(s.proxy_threshold.is_finite(), "proxy threshold must be finite")?;
                check_mriq(s.window.validate())?;
                check_mriq(mriq::dro::disk_grid_truth(&s.grid).map(|_| ()))?;
                check_level(s.denoising_level)?;
                s.model.validate()
            }
            Experiment::SkeObserverStudy(s) => {
                check(!s.object_sizes.is_empty() && s.object_sizes.iter().all(|&n| n >= 1 && n <= s.roi_size), "object sizes must be positive and fit the ROI")?;
                check(s.roi_size <= s.grid, "ROI must fit the grid")?;
                check(s.groups >= 2 && s.realizations % s.groups == 0, "realizations must split into at least two equal groups")?;
                check(s.realizations / s.groups * (s.groups - 1) >= 2, "each fold needs at least two training realizations")?;
                check(s.lambda_r >= 0.0 && s.noise_variance >= 0.0, "lambda_r and noise variance must be >= 0")?;
                check(s.admm.rho.map_or(true, |r| r > 0.0) && s.admm.max_iters >= 1, "ADMM needs rho > 0 and max_iters >= 1")?;
                match &s.deep_learning {
                    Some(dl) => {
                        check_level(dl.denoising_level)?;
                        dl.model.validate()
                    }
                    None => Ok(()),
                }
            }
            Experiment::SnrAverages(s) => {
                s.phantom.validate()?;
                check(!s.averages.is_empty() && s.averages.iter().all(|&n| n >= 1), "averages must be >= 1")?;
                s.denoising_levels.iter().try_for_each(|&d| check_level(d))?;
                check(s.conventional || !s.denoising_levels.is_empty(), "nothing to measure")?;
                s.model.validate()
            }
            Experiment::Sharpness(s) => {
                s.phantom.validate()?;
                check(s.realizations >= 1, "realizations must be positive")?;
                check_mriq(s.window.validate())?;
                check_level(s.denoising_level)?;
                s.model.validate()
            }
            Experiment::DenoiseLevels(s) => {
                s.phantom.validate()?;
                check(!s.levels.is_empty(), "at least one denoising level is required")?;
                s.levels.iter().try_for_each(|&d| check_level(d))?;
                s.model.validate()
            }
        }
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
