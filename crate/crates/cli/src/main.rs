use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mriq::dro::{DiskGridSpec, SkeSpec};
use mriq::ReconMode;
use mriq_cli::commands::{self, parse_numbers, parse_window, ReconRequest};
use mriq_cli::config::{Experiment, SkeObserverStudy, TrainModelStudy};
use mriq_cli::error::{CliError, CliResult};
use mriq_cli::{resolve_out_dir, run_experiment, ExperimentConfig, OUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "mriq", version, about = "MR reconstruction simulation and image-quality studies")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $MRIQ_OUT_ROOT/<experiment>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment config.
    Run,
    /// Train a denoising model (train_model config or defaults).
    Train {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Generate digital reference objects.
    GenDro {
        #[arg(value_enum)]
        kind: DroKind,
        #[arg(long, default_value_t = 1)]
        realizations: usize,
        /// SKE object size in pixels.
        #[arg(long, default_value_t = 1)]
        size: usize,
        /// Fraction of k-space kept per axis for the acquired disk grid.
        #[arg(long, default_value_t = 1.0)]
        trunc: f64,
    },
    /// Reconstruct a k-space field file.
    Recon {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "conventional")]
        mode: Mode,
        /// rect, hann, tukey:<taper>, fermi:<width>[,<radius>]
        #[arg(long, default_value = "rect")]
        window: String,
        #[arg(long, default_value_t = 0.0)]
        level: f64,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output matrix as W,H.
        #[arg(long)]
        output_size: Option<String>,
    },
    /// SKE model-observer study (ske_observer_study config or defaults).
    Observe {
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Skip the deep-learning arm.
        #[arg(long)]
        original_only: bool,
    },
    /// Single measurements on field files; prints JSON.
    Metrics {
        #[command(subcommand)]
        metric: Metric,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DroKind {
    DiskGrid,
    Ske,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Conventional,
    DeepLearning,
}

#[derive(Subcommand)]
enum Metric {
    /// Pair-difference SNR of two images.
    Snr {
        image1: PathBuf,
        image2: PathBuf,
        /// x,y,width,height; defaults to the central quarter.
        #[arg(long)]
        roi: Option<String>,
    },
    /// Peak-gradient ratio of image A over image B along a line.
    Sharpness {
        image_a: PathBuf,
        image_b: PathBuf,
        /// x0,y0,x1,y1
        #[arg(long)]
        line: String,
    },
    /// Detection probability table from reader responses.
    Detection {
        responses: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Second response file; adds the difference table.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> CliResult<Option<ExperimentConfig>> {
    path.map(ExperimentConfig::load).transpose()
}

fn default_config(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig { experiment, seed: 0, output_dir: None }
}

fn run_config(cli: &Cli, mut cfg: ExperimentConfig) -> CliResult<()> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let env_root = std::env::var(OUT_ROOT_ENV).ok();
    let dir = resolve_out_dir(cli.out.as_deref(), &cfg, env_root.as_deref());
    let outcome = run_experiment(&cfg, &dir, cli.verbose)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary).map_err(mriq::Error::from)?);
    eprintln!("wrote {} artifacts to {}", outcome.manifest.artifacts.len(), dir.display());
    Ok(())
}

fn out_or_default(cli: &Cli, name: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| {
        let root = std::env::var(OUT_ROOT_ENV).ok().filter(|r| !r.is_empty());
        Path::new(root.as_deref().unwrap_or(mriq_cli::DEFAULT_OUT_ROOT)).join(name)
    })
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Schema("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(format!("cannot configure {n} workers: {e}")))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run => {
            let cfg = cfg.ok_or_else(|| CliError::Schema("run needs --config".into()))?;
            run_config(cli, cfg)
        }
        Command::Train { iterations } => {
            let mut cfg = cfg.unwrap_or_else(|| default_config(Experiment::TrainModel(TrainModelStudy::default())));
            let Experiment::TrainModel(study) = &mut cfg.experiment else {
                return Err(CliError::Schema(format!("train expects a train_model config, got {}", cfg.experiment.name())));
            };
            if let Some(n) = iterations {
                study.train.iterations = *n;
            }
            run_config(cli, cfg)
        }
        Command::Observe { realizations, sizes, original_only } => {
            let mut cfg = cfg.unwrap_or_else(|| default_config(Experiment::SkeObserverStudy(SkeObserverStudy::default())));
            let Experiment::SkeObserverStudy(study) = &mut cfg.experiment else {
                return Err(CliError::Schema(format!("observe expects a ske_observer_study config, got {}", cfg.experiment.name())));
            };
            if let Some(n) = realizations {
                study.realizations = *n;
            }
            if let Some(s) = sizes {
                study.object_sizes = s.clone();
            }
            if *original_only {
                study.deep_learning = None;
            }
            run_config(cli, cfg)
        }
        Command::GenDro { kind, realizations, size, trunc } => {
            let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            match kind {
                DroKind::DiskGrid => {
                    let spec = match cfg.as_ref().map(|c| &c.experiment) {
                        Some(Experiment::DiskGridStudy(s)) => s.grid.clone(),
                        Some(other) => return Err(CliError::Schema(format!("gen-dro disk-grid cannot use a {} config", other.name()))),
                        None => DiskGridSpec::default(),
                    };
                    report(&commands::gen_disk_grid(&spec, *realizations, *trunc, seed, &out_or_default(cli, "dro"))?);
                }
                DroKind::Ske => {
                    let spec = match cfg.as_ref().map(|c| &c.experiment) {
                        Some(Experiment::SkeObserverStudy(s)) => SkeSpec {
                            grid: s.grid,
                            object_size: *size,
                            intensity: s.signal / *size as f64,
                            noise_variance: s.noise_variance,
                        },
                        Some(other) => return Err(CliError::Schema(format!("gen-dro ske cannot use a {} config", other.name()))),
                        None => SkeSpec::reference(*size),
                    };
                    if *size == 0 || *size > spec.grid {
                        return Err(CliError::Schema(format!("object size {size} does not fit the {} grid", spec.grid)));
                    }
                    report(&commands::gen_ske(&spec, *realizations, seed, &out_or_default(cli, "dro"))?);
                }
            }
            Ok(())
        }
        Command::Recon { input, mode, window, level, model, output_size } => {
            let output_size = output_size
                .as_deref()
                .map(|s| parse_numbers::<2>(s, "--output-size").map(|[w, h]| [w as usize, h as usize]))
                .transpose()?;
            let req = ReconRequest {
                input: input.clone(),
                mode: match mode {
                    Mode::Conventional => ReconMode::Conventional,
                    Mode::DeepLearning => ReconMode::DeepLearning,
                },
                window: parse_window(window)?,
                denoising_level: *level,
                model: model.clone(),
                output_size,
            };
            report(&commands::recon_file(&req, &out_or_default(cli, "recon"))?);
            Ok(())
        }
        Command::Metrics { metric } => {
            let value = match metric {
                Metric::Snr { image1, image2, roi } => {
                    let roi = roi.as_deref().map(|r| parse_numbers::<4>(r, "--roi")).transpose()?;
                    commands::metric_snr(image1, image2, roi)?
                }
                Metric::Sharpness { image_a, image_b, line } => {
                    commands::metric_sharpness(image_a, image_b, parse_numbers::<4>(line, "--line")?)?
                }
                Metric::Detection { responses, truth, compare } => {
                    commands::metric_detection(responses, truth, compare.as_deref())?
                }
            };
            println!("{}", serde_json::to_string_pretty(&value).map_err(mriq::Error::from)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
