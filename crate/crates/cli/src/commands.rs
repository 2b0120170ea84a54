//! Single-step subcommands that operate on files rather than full configs.

use std::path::{Path, PathBuf};

use mriq::dro::{disk_grid_truth, generate_disk_grid, generate_ske_pair, DiskGridSpec, SkeSpec};
use mriq::io::{read_field, write_field, write_png, Scaling};
use mriq::metrics::{detection_probability, edge_sharpness, read_responses, snr_pair, ProfileLine};
use mriq::model::DenoiseModel;
use mriq::noise::derive_seed;
use mriq::{forward_fft, reconstruct, truncate_kspace, ComplexField, ReconConfig, ReconMode, RealImage, Roi, WindowSpec};
use serde_json::json;

use crate::error::{schema, CliResult};

/// Parses `rect`, `hann`, `tukey:<taper>` or `fermi:<width>[,<radius>]`.
pub fn parse_window(text: &str) -> CliResult<WindowSpec> {
    let (name, args) = text.split_once(':').unwrap_or((text, ""));
    let nums = || -> CliResult<Vec<f64>> {
        args.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| schema(format!("bad window parameter '{s}'"))))
            .collect()
    };
    let w = match (name.to_ascii_lowercase().as_str(), nums()?.as_slice()) {
        ("rect", []) => WindowSpec::Rect,
        ("hann", []) => WindowSpec::Hann,
        ("tukey", [taper]) => WindowSpec::Tukey { taper: *taper },
        ("fermi", [width]) => WindowSpec::Fermi { width: *width, radius: 0.9 },
        ("fermi", [width, radius]) => WindowSpec::Fermi { width: *width, radius: *radius },
        _ => return Err(schema(format!("unknown window '{text}'"))),
    };
    w.validate().map_err(|e| schema(e.to_string()))?;
    Ok(w)
}

/// Parses `n` comma-separated numbers.
pub fn parse_numbers<const N: usize>(text: &str, what: &str) -> CliResult<[f64; N]> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| schema(format!("{what}: expected {N} comma-separated numbers, got '{text}'")))?;
    v.try_into().map_err(|_| schema(format!("{what}: expected {N} comma-separated numbers, got '{text}'")))
}

fn save_field_and_png(dir: &Path, stem: &str, field: &ComplexField, written: &mut Vec<PathBuf>) -> CliResult<()> {
    let data = dir.join(format!("{stem}.f32"));
    write_field(&data, field)?;
    written.push(data);
    if field.domain() == mriq::Domain::Image {
        let png = dir.join(format!("{stem}.png"));
        write_png(&png, &field.magnitude(), Scaling::Linear)?;
        written.push(png);
    }
    Ok(())
}

fn acquire(field: &ComplexField, trunc_fraction: f64) -> CliResult<ComplexField> {
    if !(trunc_fraction > 0.0 && trunc_fraction <= 1.0) {
        return Err(schema("truncation fraction must lie in (0, 1]"));
    }
    let (w, h) = field.dims();
    let f = |n: usize| ((n as f64 * trunc_fraction).round() as usize).clamp(1, n);
    Ok(truncate_kspace(&forward_fft(field)?, f(w), f(h))?)
}

/// Writes disk-grid realizations (image and acquired k-space) plus the
/// ground-truth map.
pub fn gen_disk_grid(spec: &DiskGridSpec, realizations: usize, trunc_fraction: f64, seed: u64, dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let truth = disk_grid_truth(spec).map_err(|e| schema(e.to_string()))?;
    let mut written = Vec::new();
    let truth_path = dir.join("disk_grid_truth.json");
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth).map_err(mriq::Error::from)?)?;
    written.push(truth_path);
    for r in 0..realizations {
        let (noisy, _) = generate_disk_grid(spec, derive_seed(seed, r as u64))?;
        save_field_and_png(dir, &format!("disk_grid_r{r:03}"), &noisy, &mut written)?;
        save_field_and_png(dir, &format!("disk_grid_r{r:03}_kspace"), &acquire(&noisy, trunc_fraction)?, &mut written)?;
    }
    Ok(written)
}

/// Writes SKE signal-present / signal-absent pairs.
pub fn gen_ske(spec: &SkeSpec, realizations: usize, seed: u64, dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for r in 0..realizations {
        let (present, absent) = generate_ske_pair(spec, derive_seed(seed, r as u64))?;
        save_field_and_png(dir, &format!("ske{}_r{r:04}_present", spec.object_size), &present, &mut written)?;
        save_field_and_png(dir, &format!("ske{}_r{r:04}_absent", spec.object_size), &absent, &mut written)?;
    }
    Ok(written)
}

pub struct ReconRequest {
    pub input: PathBuf,
    pub mode: ReconMode,
    pub window: WindowSpec,
    pub denoising_level: f64,
    pub model: Option<PathBuf>,
    pub output_size: Option<[usize; 2]>,
}

/// Reconstructs a k-space file; writes the complex image and its magnitude.
pub fn recon_file(req: &ReconRequest, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg = ReconConfig { mode: req.mode, window: req.window, denoising_level: req.denoising_level, output_dims: req.output_size };
    cfg.validate().map_err(|e| schema(e.to_string()))?;
    let model = match (&req.model, req.mode) {
        (Some(p), _) => Some(DenoiseModel::load(p)?),
        (None, ReconMode::DeepLearning) => return Err(schema("deep-learning recon needs --model")),
        (None, ReconMode::Conventional) => None,
    };
    let kspace = read_field(&req.input)?;
    let out = reconstruct(&kspace, model.as_ref(), &cfg)?;
    std::fs::create_dir_all(dir)?;
    let stem = req.input.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let mut written = Vec::new();
    save_field_and_png(dir, &format!("{stem}_recon"), &out.image, &mut written)?;
    Ok(written)
}

fn magnitude_of(path: &Path) -> CliResult<RealImage> {
    Ok(read_field(path)?.magnitude())
}

pub fn metric_snr(img1: &Path, img2: &Path, roi: Option<[f64; 4]>) -> CliResult<serde_json::Value> {
    let (a, b) = (magnitude_of(img1)?, magnitude_of(img2)?);
    let roi = match roi {
        Some([x, y, w, h]) => Roi::new(x as usize, y as usize, w as usize, h as usize),
        None => Roi::centered(a.width, a.height, a.width / 4, a.height / 4),
    };
    Ok(serde_json::to_value(snr_pair(&a, &b, roi)?).map_err(mriq::Error::from)?)
}

pub fn metric_sharpness(img_a: &Path, img_b: &Path, line: [f64; 4]) -> CliResult<serde_json::Value> {
    let [x0, y0, x1, y1] = line;
    let r = edge_sharpness(&magnitude_of(img_a)?, &magnitude_of(img_b)?, ProfileLine::new(x0, y0, x1, y1))?;
    Ok(serde_json::to_value(r).map_err(mriq::Error::from)?)
}

pub fn metric_detection(responses: &Path, truth: &Path, other: Option<&Path>) -> CliResult<serde_json::Value> {
    let truth: mriq::dro::GroundTruthMap =
        serde_json::from_str(&std::fs::read_to_string(truth)?).map_err(|e| schema(format!("ground truth: {e}")))?;
    let table = detection_probability(&read_responses(responses)?, &truth)?;
    let difference = match other {
        Some(p) => Some(table.difference(&detection_probability(&read_responses(p)?, &truth)?)?),
        None => None,
    };
    Ok(json!({ "table": table, "difference": difference }))
}
