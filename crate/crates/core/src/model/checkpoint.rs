//! Weight checkpoints: a JSON manifest plus a little-endian `f32` blob with
//! the layers' weights concatenated in manifest order, each laid out as
//! `[out][in][ky][kx]`. The format has no slot for bias parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::net::{Architecture, ConvLayer, ConvNet, LayerShape};
use super::{DenoiseModel, OUTPUT_HEADS};
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "mriq-denoiser";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub activation: String,
    pub output_activation: String,
    pub bias: bool,
    pub normalization: String,
    pub input_channels: usize,
    pub output_channels: usize,
    pub heads: Vec<String>,
    pub dtype: String,
    pub byte_order: String,
    pub weight_layout: String,
    pub architecture: Architecture,
    pub layers: Vec<LayerShape>,
    pub parameter_count: usize,
    pub weights_file: String,
}

pub fn weights_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

impl DenoiseModel {
    pub fn manifest(&self, weights_file: &str) -> ModelManifest {
        ModelManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            activation: "relu".into(),
            output_activation: "linear".into(),
            bias: false,
            normalization: "none".into(),
            input_channels: self.net.input_channels(),
            output_channels: self.net.output_channels(),
            heads: OUTPUT_HEADS.iter().map(|s| s.to_string()).collect(),
            dtype: "f32".into(),
            byte_order: "little".into(),
            weight_layout: "out,in,ky,kx".into(),
            architecture: self.arch,
            layers: self.net.layers.iter().map(|l| l.shape).collect(),
            parameter_count: self.parameter_count(),
            weights_file: weights_file.into(),
        }
    }

    pub fn weight_blob(&self) -> Vec<u8> {
        self.net
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().flat_map(|w| w.to_le_bytes()))
            .collect()
    }

    /// Writes `manifest_path` and the weight blob next to it (`.bin`).
    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let blob_path = weights_path(manifest_path);
        let name = blob_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Format("weights path has no file name".into()))?;
        fs::write(&blob_path, self.weight_blob())?;
        fs::write(manifest_path, serde_json::to_vec_pretty(&self.manifest(name))?)?;
        Ok(())
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: ModelManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let blob = fs::read(dir.join(&manifest.weights_file))?;
        Self::from_parts(&manifest, &blob)
    }

    pub fn from_parts(manifest: &ModelManifest, blob: &[u8]) -> Result<Self> {
        if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint {} v{}", manifest.format, manifest.version)));
        }
        if manifest.bias || manifest.activation != "relu" || manifest.normalization != "none" {
            return Err(Error::Format("checkpoint is not a bias-free ReLU network".into()));
        }
        if manifest.layers != manifest.architecture.layer_shapes() {
            return Err(Error::Format("layer shapes disagree with the architecture".into()));
        }
        let count: usize = manifest.layers.iter().map(|s| s.weight_count()).sum();
        if count != manifest.parameter_count || blob.len() != 4 * count {
            return Err(Error::Format(format!(
                "expected {} weights ({} bytes), blob has {} bytes",
                count,
                4 * count,
                blob.len()
            )));
        }
        let mut values = blob.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let layers = manifest
            .layers
            .iter()
            .map(|&shape| ConvLayer { shape, weights: values.by_ref().take(shape.weight_count()).collect() })
            .collect();
        Ok(DenoiseModel { arch: manifest.architecture, net: ConvNet::from_layers(layers) })
    }
}
