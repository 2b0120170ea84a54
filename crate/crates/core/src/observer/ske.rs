use rayon::prelude::*;

use super::bootstrap::ObserverGroup;
use super::ObserverChannel;
use crate::dro::{generate_ske_pair, SkeSpec};
use crate::error::{parameter, Result};
use crate::field::{ComplexField, Roi};
use crate::model::DenoiseModel;
use crate::noise::derive_seed;
use crate::recon::denoise_region;

/// How SKE realizations are processed before the observer reads them.
#[derive(Debug, Clone, Copy)]
pub enum SkeProcessing<'a> {
    Original,
    Denoised { model: &'a DenoiseModel, level: f64 },
}

/// Analysis ROI of side `roi_size` centered on the SKE object.
pub fn ske_roi(spec: &SkeSpec, roi_size: usize) -> Roi {
    Roi::centered(spec.grid, spec.grid, roi_size, roi_size)
}

/// Generates `realizations` signal-present/absent pairs (realization `i`
/// seeded by `derive_seed(seed, i)`, so processing variants see identical
/// noise), applies `processing`, and splits the ROI vectors into `groups`
/// consecutive groups.
pub fn ske_groups(
    spec: &SkeSpec,
    realizations: usize,
    groups: usize,
    seed: u64,
    roi_size: usize,
    channel: ObserverChannel,
    processing: SkeProcessing<'_>,
) -> Result<Vec<ObserverGroup>> {
    if groups == 0 || realizations % groups != 0 {
        return Err(parameter(format!("{realizations} realizations do not split into {groups} equal groups")));
    }
    let roi = ske_roi(spec, roi_size);
    roi.check_within(spec.grid, spec.grid)?;
    let reduce = |field: &ComplexField| -> Result<Vec<f64>> {
        match processing {
            SkeProcessing::Original => roi.extract(&channel.view(field)),
            SkeProcessing::Denoised { model, level } => {
                let out = denoise_region(field, model, level, roi)?;
                Ok(channel.view(&out).data)
            }
        }
    };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|i| {
            let (present, absent) = generate_ske_pair(spec, derive_seed(seed, i as u64))?;
            Ok((reduce(&present)?, reduce(&absent)?))
        })
        .collect::<Result<_>>()?;
    let per_group = realizations / groups;
    Ok(pairs
        .chunks(per_group)
        .map(|chunk| ObserverGroup {
            present: chunk.iter().map(|p| p.0.clone()).collect(),
            absent: chunk.iter().map(|p| p.1.clone()).collect(),
        })
        .collect())
}
