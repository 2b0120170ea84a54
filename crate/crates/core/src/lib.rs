//! Simulation and image-quality characterization of MR reconstruction
//! pipelines: k-space physics, digital reference objects, conventional and
//! CNN-based reconstruction, a Hotelling model observer, and measurement
//! tools for SNR, sharpness and detectability.

pub mod dro;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod kspace;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod observer;
pub mod recon;
pub mod window;

pub use error::{Error, Result};
pub use fft::{forward_fft, inverse_fft};
pub use field::{ComplexField, Domain, RealImage, Roi};
pub use kspace::{truncate_kspace, zero_fill};
pub use noise::{add_complex_gaussian_noise, add_real_gaussian_noise, NoiseSpec};
pub use window::{apodize, WindowSpec};
pub use recon::{conventional_recon, dl_recon, reconstruct, ReconConfig, ReconMode, Reconstruction};
