//! Separable k-space apodization windows.

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::field::{ComplexField, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WindowSpec {
    #[default]
    Rect,
    /// Flat top with a raised-cosine taper over the outer `taper` fraction.
    /// `taper = 0` is the rectangular window and `taper = 1` is Hann.
    Tukey { taper: f64 },
    Hann,
    /// Fermi-Dirac roll-off centered at `radius` (fraction of the half
    /// extent) with a transition `width` in samples.
    Fermi {
        width: f64,
        #[serde(default = "default_fermi_radius")]
        radius: f64,
    },
}

fn default_fermi_radius() -> f64 {
    0.9
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WindowSpec::Tukey { taper } if !(0.0..=1.0).contains(&taper) => {
                Err(parameter(format!("tukey taper must lie in [0, 1], got {taper}")))
            }
            WindowSpec::Fermi { width, radius } if !(width > 0.0) || !(radius > 0.0) => {
                Err(parameter("fermi width and radius must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// One-dimensional window over `n` centered k-space samples.
    pub fn profile(&self, n: usize) -> Vec<f64> {
        let half = n as f64 / 2.0;
        (0..n)
            .map(|k| {
                let offset = k as f64 - (n / 2) as f64;
                let t = offset.abs() / half;
                match *self {
                    WindowSpec::Rect => 1.0,
                    WindowSpec::Hann => raised_cosine(t),
                    WindowSpec::Tukey { taper } => {
                        let flat = 1.0 - taper;
                        if t <= flat {
                            1.0
                        } else {
                            raised_cosine((t - flat) / taper)
                        }
                    }
                    WindowSpec::Fermi { width, radius } => {
                        1.0 / (1.0 + ((offset.abs() - radius * half) / width).exp())
                    }
                }
            })
            .collect()
    }
}

fn raised_cosine(t: f64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * t.min(1.0)).cos())
}

/// Multiplies k-space by the separable window `w(kx) * w(ky)`.
pub fn apodize(field: &ComplexField, window: WindowSpec) -> Result<ComplexField> {
    field.expect_domain(Domain::KSpace)?;
    window.validate()?;
    if window == WindowSpec::Rect {
        return Ok(field.clone());
    }
    let wx = window.profile(field.width());
    let wy = window.profile(field.height());
    let mut out = field.clone();
    let w = field.width();
    for (i, c) in out.samples_mut().iter_mut().enumerate() {
        *c *= wx[i % w] * wy[i / w];
    }
    Ok(out)
}
