//! Runners for each experiment kind. Every study derives its random streams
//! from the experiment seed, and parallel work is collected in index order,
//! so tables are identical across runs and worker counts.

use std::path::{Path, PathBuf};

use mriq::dro::{disk_grid_truth, generate_disk_grid, GroundTruthMap, SkeSpec};
use mriq::io::Scaling;
use mriq::metrics::{
    detection_probability, edge_sharpness, fit_power_law, fit_sqrt_law, matched_filter_responses, read_responses,
    resolution_phantom, sample_profile, snr_pair, step_overshoot, write_responses, DetectionResponse, DetectionTable,
    ResolutionPhantom,
};
use mriq::model::{train, DenoiseModel, TrainOutcome};
use mriq::noise::derive_seed;
use mriq::observer::{
    binormal_auc, bootstrap_auc, paired_ttest, ske_groups, ske_roi, ObserverConfig, RocCurve, SkeProcessing,
};
use mriq::recon::{conventional_recon, dl_components, dl_recon, DlComponents, ReconConfig};
use mriq::{
    add_complex_gaussian_noise, forward_fft, truncate_kspace, ComplexField, NoiseSpec, RealImage, WindowSpec,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    DenoiseLevelsStudy, DiskGridStudy, Experiment, ExperimentConfig, ModelSource, PhantomAcquisition,
    SharpnessStudy, SkeObserverStudy, SnrAveragesStudy, TrainModelStudy,
};
use crate::error::CliResult;
use crate::output::{ArtifactWriter, RunManifest};
use crate::plot::{heatmap, LinePlot, Series};

const STREAM_MODEL_INIT: u64 = 1;
const STREAM_CORPUS: u64 = 2;
const STREAM_DATA: u64 = 3;

pub const EDGE_NAMES: [&str; 4] = ["left", "right", "top", "bottom"];

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: serde_json::Value,
}

struct Context {
    out: ArtifactWriter,
    seed: u64,
    verbose: bool,
}

impl Context {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[mriq] {}", msg.as_ref());
        }
    }

    fn data_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_DATA)
    }
}

/// Runs a validated config, writing every artifact under `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, verbose: bool) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let mut ctx = Context { out: ArtifactWriter::create(dir)?, seed: cfg.seed, verbose };
    ctx.note(format!("{} -> {}", cfg.experiment.name(), dir.display()));
    let summary = match &cfg.experiment {
        Experiment::TrainModel(s) => run_train(&mut ctx, s)?,
        Experiment::DiskGridStudy(s) => run_disk_grid(&mut ctx, s)?,
        Experiment::SkeObserverStudy(s) => run_ske(&mut ctx, s)?,
        Experiment::SnrAverages(s) => run_snr_averages(&mut ctx, s)?,
        Experiment::Sharpness(s) => run_sharpness(&mut ctx, s)?,
        Experiment::DenoiseLevels(s) => run_denoise_levels(&mut ctx, s)?,
    };
    ctx.out.json("summary.json", &summary)?;
    let manifest = ctx.out.finish(cfg)?;
    Ok(RunOutcome { dir: dir.to_path_buf(), manifest, summary })
}

/// Trains a model: initial weights from the experiment seed, corpus seed
/// mixed with it.
pub fn train_model(study: &TrainModelStudy, seed: u64) -> mriq::Result<TrainOutcome> {
    let model = DenoiseModel::new(study.architecture, derive_seed(seed, STREAM_MODEL_INIT));
    let mut corpus = study.corpus.clone();
    corpus.seed = derive_seed(corpus.seed, derive_seed(seed, STREAM_CORPUS));
    train(&model, &corpus, &study.train)
}

#[derive(Serialize)]
struct LossRow {
    step: usize,
    loss: f64,
}

fn save_trained(ctx: &mut Context, outcome: &TrainOutcome) -> CliResult<()> {
    let manifest = ctx.out.claim("model/model.json")?;
    ctx.out.claim("model/model.bin")?;
    outcome.model.save(&manifest)?;
    let rows: Vec<LossRow> = outcome.loss_trace.iter().enumerate().map(|(step, &loss)| LossRow { step, loss }).collect();
    ctx.out.csv("model/loss.csv", &rows)?;
    let points = rows.iter().map(|r| (r.step as f64, r.loss)).collect();
    let plot = LinePlot::new("Training loss", "step", "MAE (noise-normalized)").with(Series::line("batch loss", points));
    ctx.out.text("model/loss.svg", &plot.to_svg())
}

fn obtain_model(ctx: &mut Context, source: &ModelSource) -> CliResult<DenoiseModel> {
    match source {
        ModelSource::Path(path) => {
            ctx.note(format!("loading model {}", path.display()));
            Ok(DenoiseModel::load(path)?)
        }
        ModelSource::Train(study) => {
            ctx.note(format!("training model: {} steps of {}", study.train.iterations, study.train.batch_size));
            let outcome = train_model(study, ctx.seed)?;
            save_trained(ctx, &outcome)?;
            Ok(outcome.model)
        }
    }
}

fn run_train(ctx: &mut Context, study: &TrainModelStudy) -> CliResult<serde_json::Value> {
    let outcome = train_model(study, ctx.seed)?;
    save_trained(ctx, &outcome)?;
    let trace = &outcome.loss_trace;
    let tail = (trace.len() / 10).max(1);
    let tail_mean = trace.iter().rev().take(tail).sum::<f64>() / tail.min(trace.len()).max(1) as f64;
    Ok(json!({
        "parameters": outcome.model.parameter_count(),
        "receptive_field": outcome.model.receptive_field().0,
        "iterations": trace.len(),
        "first_loss": trace.first(),
        "final_loss": trace.last(),
        "final_decile_mean_loss": if trace.is_empty() { None } else { Some(tail_mean) },
    }))
}

// ---------------------------------------------------------------- disk grid

fn truncated_dims(w: usize, h: usize, fraction: f64) -> (usize, usize) {
    let f = |n: usize| ((n as f64 * fraction).round() as usize).clamp(1, n);
    (f(w), f(h))
}

fn disk_grid_images(
    s: &DiskGridStudy,
    truth: &GroundTruthMap,
    model: &DenoiseModel,
    seed: u64,
) -> mriq::Result<(RealImage, RealImage)> {
    let (w, h) = (truth.width, truth.height);
    let (aw, ah) = truncated_dims(w, h, s.trunc_fraction);
    let (noisy, _) = generate_disk_grid(&s.grid, seed)?;
    let k = truncate_kspace(&forward_fft(&noisy)?, aw, ah)?;
    let conventional = conventional_recon(&k, &ReconConfig::conventional(s.window).with_output_dims(w, h))?.magnitude;
    let dl = dl_recon(&k, model, &ReconConfig::deep_learning(s.denoising_level).with_output_dims(w, h))?.magnitude;
    Ok((conventional, dl))
}

fn nearest_index(values: &[f64], v: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map_or(0, |(i, _)| i)
}

/// Smallest CNR at which the smallest-diameter disk is seen in >= 90% of trials.
fn reliable_cnr(table: &DetectionTable) -> Option<f64> {
    let smallest = table.cells.iter().map(|c| c.diameter).min()?;
    table
        .cells
        .iter()
        .filter(|c| c.diameter == smallest && c.probability >= 0.9)
        .map(|c| c.cnr)
        .min_by(f64::total_cmp)
}

fn run_disk_grid(ctx: &mut Context, s: &DiskGridStudy) -> CliResult<serde_json::Value> {
    let truth = disk_grid_truth(&s.grid)?;
    let base = ctx.data_seed();
    let (conventional, dl, reader) = match &s.responses {
        Some(files) => (read_responses(&files.conventional)?, read_responses(&files.deep_learning)?, "response files"),
        None => {
            let model = obtain_model(ctx, &s.model)?;
            ctx.note(format!("disk grid: {} realizations", s.realizations));
            let per: Vec<(Vec<DetectionResponse>, Vec<DetectionResponse>)> = (0..s.realizations)
                .into_par_iter()
                .map(|r| {
                    let (c, d) = disk_grid_images(s, &truth, &model, derive_seed(base, r as u64))?;
                    Ok((
                        matched_filter_responses(&c, &truth, r, s.proxy_threshold)?,
                        matched_filter_responses(&d, &truth, r, s.proxy_threshold)?,
                    ))
                })
                .collect::<mriq::Result<_>>()?;
            let (c0, d0) = disk_grid_images(s, &truth, &model, derive_seed(base, 0))?;
            ctx.out.png("images/conventional_r0.png", &c0, Scaling::Linear)?;
            ctx.out.png("images/deep_learning_r0.png", &d0, Scaling::Linear)?;
            let (c, d): (Vec<_>, Vec<_>) = per.into_iter().unzip();
            let (c, d): (Vec<_>, Vec<_>) = (c.concat(), d.concat());
            write_responses(&ctx.out.claim("responses_conventional.json")?, &c)?;
            write_responses(&ctx.out.claim("responses_deep_learning.json")?, &d)?;
            (c, d, "matched-filter proxy")
        }
    };
    let table_c = detection_probability(&conventional, &truth)?;
    let table_d = detection_probability(&dl, &truth)?;
    let diff = table_d.difference(&table_c)?;
    ctx.out.csv("detection_conventional.csv", &table_c.cells)?;
    ctx.out.csv("detection_deep_learning.csv", &table_d.cells)?;
    ctx.out.csv("detection_difference.csv", &diff)?;

    let rows: Vec<String> = s.grid.diameters.iter().map(|d| d.to_string()).collect();
    let cols: Vec<String> = s.grid.cnr_levels.iter().map(|c| format!("{c:.1}")).collect();
    let mut values = vec![vec![0.0; cols.len()]; rows.len()];
    for d in &diff {
        let r = s.grid.diameters.iter().position(|&x| x == d.diameter).unwrap_or(0);
        values[r][nearest_index(&s.grid.cnr_levels, d.cnr)] = d.difference;
    }
    let title = "Detection probability difference (deep learning - conventional); rows: diameter, columns: CNR";
    ctx.out.text("detection_difference.svg", &heatmap(title, &rows, &cols, &values, 1.0))?;

    let mean = |t: &DetectionTable| t.cells.iter().map(|c| c.probability).sum::<f64>() / t.cells.len() as f64;
    Ok(json!({
        "reader": reader,
        "disks": truth.disks.len(),
        "mean_probability_conventional": mean(&table_c),
        "mean_probability_deep_learning": mean(&table_d),
        "mean_difference": diff.iter().map(|d| d.difference).sum::<f64>() / diff.len() as f64,
        "reliable_cnr_smallest_disk_conventional": reliable_cnr(&table_c),
        "reliable_cnr_smallest_disk_deep_learning": reliable_cnr(&table_d),
    }))
}

// ---------------------------------------------------------------------- SKE

#[derive(Serialize)]
struct FoldRow {
    object_size: usize,
    pipeline: &'static str,
    fold: usize,
    auc: f64,
}

#[derive(Serialize)]
struct SkeSummaryRow {
    object_size: usize,
    intensity: f64,
    pipeline: &'static str,
    pooled_auc: f64,
    bootstrap_mean: f64,
    bootstrap_std: f64,
    oracle_auc: f64,
}

#[derive(Serialize)]
struct SkeComparison {
    object_size: usize,
    comparison: &'static str,
    t: f64,
    p: f64,
    df: usize,
    mean_difference: f64,
    degenerate: bool,
}

/// At most `max` points of a curve, always keeping both ends.
fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let step = points.len().div_ceil(max - 1);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(step).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

fn run_ske(ctx: &mut Context, s: &SkeObserverStudy) -> CliResult<serde_json::Value> {
    let dl = match &s.deep_learning {
        Some(d) => Some((obtain_model(ctx, &d.model)?, d.denoising_level)),
        None => None,
    };
    let mut folds = Vec::new();
    let mut summary = Vec::new();
    let mut comparisons = Vec::new();
    let mut plot = LinePlot::new("SKE observer ROC", "false positive fraction", "true positive fraction")
        .ranges((0.0, 1.0), (0.0, 1.0));
    for &size in &s.object_sizes {
        let spec = SkeSpec { grid: s.grid, object_size: size, intensity: s.signal / size as f64, noise_variance: s.noise_variance };
        let obs = ObserverConfig { roi: ske_roi(&spec, s.roi_size), lambda_r: s.lambda_r, admm: s.admm };
        let seed = derive_seed(ctx.data_seed(), size as u64);
        let oracle = binormal_auc(s.signal / s.noise_variance.sqrt());
        let mut evaluate = |pipeline: &'static str, processing: SkeProcessing<'_>| -> CliResult<RocCurve> {
            ctx.note(format!("SKE size {size}: {pipeline}"));
            let groups = ske_groups(&spec, s.realizations, s.groups, seed, s.roi_size, s.channel, processing)?;
            let curve = bootstrap_auc(&groups, &obs)?;
            folds.extend(curve.fold_aucs.iter().enumerate().map(|(fold, &auc)| FoldRow { object_size: size, pipeline, fold, auc }));
            summary.push(SkeSummaryRow {
                object_size: size,
                intensity: spec.intensity,
                pipeline,
                pooled_auc: curve.auc,
                bootstrap_mean: curve.bootstrap_mean.unwrap_or(f64::NAN),
                bootstrap_std: curve.bootstrap_std.unwrap_or(f64::NAN),
                oracle_auc: oracle,
            });
            Ok(curve)
        };
        let original = evaluate("original", SkeProcessing::Original)?;
        plot = plot.with(Series::line(format!("{size}px original"), decimate(&original.points, 200)));
        if let Some((model, level)) = &dl {
            let processed = evaluate("deep_learning", SkeProcessing::Denoised { model, level: *level })?;
            let t = paired_ttest(&processed.fold_aucs, &original.fold_aucs)?;
            comparisons.push(SkeComparison {
                object_size: size,
                comparison: "deep_learning - original",
                t: t.t,
                p: t.p,
                df: t.df,
                mean_difference: t.mean_difference,
                degenerate: t.degenerate,
            });
            plot = plot.with(Series::line(format!("{size}px deep learning"), decimate(&processed.points, 200)).dashed());
        }
    }
    ctx.out.csv("fold_auc.csv", &folds)?;
    ctx.out.csv("auc_summary.csv", &summary)?;
    ctx.out.text("roc.svg", &plot.to_svg())?;
    let level = dl.as_ref().map(|d| d.1);
    ctx.out.json("ttest.json", &json!({ "denoising_level": level, "tests": &comparisons }))?;
    Ok(json!({ "auc": summary, "ttests": comparisons }))
}

// ------------------------------------------------------------ phantom studies

struct Acquisition {
    phantom: ResolutionPhantom,
    kspace: ComplexField,
    size: usize,
    noise: f64,
}

impl Acquisition {
    fn new(p: &PhantomAcquisition) -> mriq::Result<Self> {
        let phantom = resolution_phantom(p.size, p.intensity)?;
        let a = p.acquired();
        let kspace = truncate_kspace(&forward_fft(&phantom.image)?, a, a)?;
        Ok(Self { phantom, kspace, size: p.size, noise: p.noise_sigma * p.intensity })
    }

    /// One noisy acquisition; the noise sigma is the per-pixel image-domain
    /// sigma of the reconstruction.
    fn noisy(&self, seed: u64) -> mriq::Result<ComplexField> {
        add_complex_gaussian_noise(&self.kspace, NoiseSpec::new(self.noise, seed))
    }

    /// Mean of `n` independent acquisitions.
    fn averaged(&self, n: usize, seed: u64) -> mriq::Result<ComplexField> {
        let mut acc = self.noisy(derive_seed(seed, 0))?;
        for j in 1..n {
            let next = self.noisy(derive_seed(seed, j as u64))?;
            for (a, b) in acc.samples_mut().iter_mut().zip(next.samples()) {
                *a += b;
            }
        }
        Ok(acc.scale(1.0 / n as f64))
    }

    fn conventional(&self, k: &ComplexField, window: WindowSpec) -> mriq::Result<RealImage> {
        Ok(conventional_recon(k, &ReconConfig::conventional(window).with_output_dims(self.size, self.size))?.magnitude)
    }

    fn deep_learning(&self, k: &ComplexField, model: &DenoiseModel) -> mriq::Result<DlComponents> {
        dl_components(k, model, &ReconConfig::deep_learning(0.0).with_output_dims(self.size, self.size))
    }
}

#[derive(Serialize)]
struct SnrRow {
    pipeline: String,
    denoising_level: Option<f64>,
    averages: usize,
    signal: f64,
    sigma: f64,
    snr: f64,
}

#[derive(Serialize)]
struct FitRow {
    pipeline: String,
    denoising_level: Option<f64>,
    alpha: f64,
    rms_residual: f64,
    sqrt_r_squared: f64,
    exponent: Option<f64>,
    coefficient: Option<f64>,
    power_r_squared: Option<f64>,
}

fn pipeline_label(level: Option<f64>) -> String {
    match level {
        None => "conventional".into(),
        Some(d) => format!("deep_learning d={d:.2}"),
    }
}

fn run_snr_averages(ctx: &mut Context, s: &SnrAveragesStudy) -> CliResult<serde_json::Value> {
    let acq = Acquisition::new(&s.phantom)?;
    let model = if s.denoising_levels.is_empty() { None } else { Some(obtain_model(ctx, &s.model)?) };
    let mut pipelines: Vec<Option<f64>> = Vec::new();
    if s.conventional {
        pipelines.push(None);
    }
    pipelines.extend(s.denoising_levels.iter().map(|&d| Some(d)));
    let base = ctx.data_seed();
    let roi = acq.phantom.flat_roi;

    ctx.note(format!("SNR vs averages over {:?}", s.averages));
    // For every average count, two independent averaged acquisitions, each
    // reconstructed by every pipeline.
    let per_n: Vec<Vec<SnrRow>> = s
        .averages
        .par_iter()
        .map(|&n| {
            let recon_pair = |copy: u64| -> mriq::Result<Vec<RealImage>> {
                let k = acq.averaged(n, derive_seed(derive_seed(base, n as u64), copy))?;
                let parts = model.as_ref().map(|m| acq.deep_learning(&k, m)).transpose()?;
                pipelines
                    .iter()
                    .map(|p| match (p, &parts) {
                        (None, _) => acq.conventional(&k, WindowSpec::Rect),
                        (Some(d), Some(parts)) => Ok(parts.blend(*d).magnitude()),
                        (Some(_), None) => unreachable!("model exists when levels are requested"),
                    })
                    .collect()
            };
            let (a, b) = (recon_pair(0)?, recon_pair(1)?);
            pipelines
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(p, (ia, ib))| {
                    let m = snr_pair(ia, ib, roi)?;
                    Ok(SnrRow { pipeline: pipeline_label(*p), denoising_level: *p, averages: n, signal: m.signal, sigma: m.sigma, snr: m.snr })
                })
                .collect()
        })
        .collect::<mriq::Result<_>>()?;
    let mut rows: Vec<SnrRow> = per_n.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        let key = |r: &SnrRow| r.denoising_level.map_or(-1.0, |d| d);
        key(a).total_cmp(&key(b)).then(a.averages.cmp(&b.averages))
    });

    let mut fits = Vec::new();
    let mut plot = LinePlot::new("SNR vs number of averages", "averages", "SNR");
    let n_max = s.averages.iter().copied().max().unwrap_or(1) as f64;
    for p in &pipelines {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.denoising_level == *p).map(|r| (r.averages as f64, r.snr)).collect();
        let sqrt = fit_sqrt_law(&pts)?;
        let power = fit_power_law(&pts).ok();
        fits.push(FitRow {
            pipeline: pipeline_label(*p),
            denoising_level: *p,
            alpha: sqrt.alpha,
            rms_residual: sqrt.rms_residual,
            sqrt_r_squared: sqrt.r_squared,
            exponent: power.map(|f| f.exponent),
            coefficient: power.map(|f| f.coefficient),
            power_r_squared: power.map(|f| f.r_squared),
        });
        let curve = (0..=50).map(|i| 1.0 + (n_max - 1.0) * i as f64 / 50.0).map(|n| (n, sqrt.predict(n))).collect();
        plot = plot
            .with(Series::markers(pipeline_label(*p), pts))
            .with(Series::line(format!("{:.2} sqrt(n)", sqrt.alpha), curve).dashed());
    }
    ctx.out.csv("snr.csv", &rows)?;
    ctx.out.csv("fits.csv", &fits)?;
    ctx.out.text("snr_vs_averages.svg", &plot.to_svg())?;

    let reference = fits.iter().find(|f| f.denoising_level.is_none()).map(|f| f.alpha);
    let gains: Vec<_> = fits
        .iter()
        .filter_map(|f| f.denoising_level.map(|d| json!({ "denoising_level": d, "alpha": f.alpha, "gain_vs_conventional": reference.map(|r| f.alpha / r) })))
        .collect();
    Ok(json!({ "fits": fits, "alpha_gains": gains }))
}

#[derive(Serialize)]
struct SharpnessRow {
    realization: usize,
    edge: &'static str,
    pipeline: &'static str,
    ratio_vs_raw: f64,
    overshoot: f64,
}

#[derive(Serialize)]
struct SharpnessSummaryRow {
    edge: &'static str,
    pipeline: &'static str,
    mean_ratio: f64,
    std_ratio: f64,
    mean_overshoot: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

const SHARPNESS_PIPELINES: [&str; 3] = ["raw", "filtered", "deep_learning"];

fn run_sharpness(ctx: &mut Context, s: &SharpnessStudy) -> CliResult<serde_json::Value> {
    let acq = Acquisition::new(&s.phantom)?;
    let model = obtain_model(ctx, &s.model)?;
    let base = ctx.data_seed();
    ctx.note(format!("sharpness: {} realizations", s.realizations));
    let images = |r: usize| -> mriq::Result<[RealImage; 3]> {
        let k = acq.noisy(derive_seed(base, r as u64))?;
        let raw = acq.conventional(&k, WindowSpec::Rect)?;
        let filtered = acq.conventional(&k, s.window)?;
        let dl = acq.deep_learning(&k, &model)?.blend(s.denoising_level).magnitude();
        Ok([raw, filtered, dl])
    };
    let per: Vec<Vec<SharpnessRow>> = (0..s.realizations)
        .into_par_iter()
        .map(|r| {
            let imgs = images(r)?;
            let mut rows = Vec::new();
            for (edge, line) in EDGE_NAMES.iter().zip(acq.phantom.edges) {
                for (pipeline, img) in SHARPNESS_PIPELINES.iter().zip(&imgs) {
                    rows.push(SharpnessRow {
                        realization: r,
                        edge,
                        pipeline,
                        ratio_vs_raw: edge_sharpness(img, &imgs[0], line)?.ratio,
                        overshoot: step_overshoot(&sample_profile(img, line)?)?,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<mriq::Result<_>>()?;
    let rows: Vec<SharpnessRow> = per.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for edge in EDGE_NAMES.iter().copied().chain(["all"]) {
        for pipeline in SHARPNESS_PIPELINES {
            let sel: Vec<&SharpnessRow> = rows.iter().filter(|r| r.pipeline == pipeline && (edge == "all" || r.edge == edge)).collect();
            let ratios: Vec<f64> = sel.iter().map(|r| r.ratio_vs_raw).collect();
            let overs: Vec<f64> = sel.iter().map(|r| r.overshoot).collect();
            let (mean_ratio, std_ratio) = mean_std(&ratios);
            summary.push(SharpnessSummaryRow { edge, pipeline, mean_ratio, std_ratio, mean_overshoot: mean_std(&overs).0 });
        }
    }
    ctx.out.csv("sharpness.csv", &rows)?;
    ctx.out.csv("sharpness_summary.csv", &summary)?;

    let imgs = images(0)?;
    let line = acq.phantom.edges[0];
    let mut plot = LinePlot::new("Edge profile (left edge, realization 0)", "position along line (px)", "magnitude");
    for (name, img) in SHARPNESS_PIPELINES.iter().zip(&imgs) {
        let prof = sample_profile(img, line)?;
        plot = plot.with(Series::line(*name, prof.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect()));
    }
    ctx.out.text("edge_profiles.svg", &plot.to_svg())?;

    let all = |p: &str| summary.iter().find(|r| r.edge == "all" && r.pipeline == p);
    let ratio = |p: &str| all(p).map_or(f64::NAN, |r| r.mean_ratio);
    let overshoot = |p: &str| all(p).map_or(f64::NAN, |r| r.mean_overshoot);
    let (dl, filt) = (ratio("deep_learning"), ratio("filtered"));
    Ok(json!({
        "mean_ratio_deep_learning_vs_raw": dl,
        "mean_ratio_filtered_vs_raw": filt,
        "deep_learning_sharper_than_filtered": dl > filt,
        "reference_ratio": 1.6,
        "mean_overshoot": {
            "raw": overshoot("raw"),
            "filtered": overshoot("filtered"),
            "deep_learning": overshoot("deep_learning"),
        },
    }))
}

#[derive(Serialize)]
struct LevelRow {
    image: String,
    denoising_level: Option<f64>,
    flat_mean: f64,
    flat_std: f64,
    removed_rms: f64,
    mean_overshoot: f64,
    sharpness_vs_input: f64,
}

/// Tiles `rows` of equally sized images; each row shares one intensity
/// range.
fn montage(rows: &[Vec<RealImage>], gap: usize) -> mriq::Result<RealImage> {
    let (w, h) = rows[0][0].dims();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (tw, th) = (cols * w + (cols - 1) * gap, rows.len() * h + (rows.len() - 1) * gap);
    let mut out = RealImage::filled(tw, th, 1.0);
    for (r, row) in rows.iter().enumerate() {
        let lo = row.iter().flat_map(|i| i.data.iter()).copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().flat_map(|i| i.data.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        for (c, img) in row.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    out.set(c * (w + gap) + x, r * (h + gap) + y, (img.get(x, y) - lo) / span);
                }
            }
        }
    }
    Ok(out)
}

fn run_denoise_levels(ctx: &mut Context, s: &DenoiseLevelsStudy) -> CliResult<serde_json::Value> {
    let acq = Acquisition::new(&s.phantom)?;
    let model = obtain_model(ctx, &s.model)?;
    let k = acq.noisy(ctx.data_seed())?;
    let input = acq.conventional(&k, WindowSpec::Rect)?;
    let parts = acq.deep_learning(&k, &model)?;
    let roi = acq.phantom.flat_roi;

    let describe = |name: String, level: Option<f64>, img: &RealImage| -> mriq::Result<LevelRow> {
        let flat = roi.extract(img)?;
        let (flat_mean, flat_std) = mean_std(&flat);
        let removed = roi.extract(&input)?.iter().zip(&flat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / flat.len() as f64;
        let mut overs = Vec::new();
        let mut ratios = Vec::new();
        for line in acq.phantom.edges {
            overs.push(step_overshoot(&sample_profile(img, line)?)?);
            ratios.push(edge_sharpness(img, &input, line)?.ratio);
        }
        Ok(LevelRow {
            image: name,
            denoising_level: level,
            flat_mean,
            flat_std,
            removed_rms: removed.sqrt(),
            mean_overshoot: mean_std(&overs).0,
            sharpness_vs_input: mean_std(&ratios).0,
        })
    };

    let mut rows = vec![describe("input".into(), None, &input)?];
    ctx.out.png("input.png", &input, Scaling::Linear)?;
    let mut outputs = Vec::new();
    let mut diffs = Vec::new();
    for &d in &s.levels {
        let out = parts.blend(d).magnitude();
        let diff = RealImage::new(input.width, input.height, input.data.iter().zip(&out.data).map(|(a, b)| a - b).collect())?;
        let tag = format!("{d:.2}");
        ctx.out.png(&format!("dl_d{tag}.png"), &out, Scaling::Linear)?;
        ctx.out.png(&format!("difference_d{tag}.png"), &diff, Scaling::Linear)?;
        rows.push(describe(format!("deep_learning d={tag}"), Some(d), &out)?);
        outputs.push(out);
        diffs.push(diff);
    }
    let mut top = vec![input.clone()];
    top.extend(outputs);
    let mut bottom = vec![RealImage::filled(input.width, input.height, 0.0)];
    bottom.extend(diffs);
    ctx.out.png("grid.png", &montage(&[top, bottom], 4)?, Scaling::Linear)?;
    ctx.out.csv("levels.csv", &rows)?;
    Ok(json!({ "levels": rows }))
}
