//! Central cropping and zero padding of DC-centered k-space.

use crate::error::{dimension, Result};
use crate::field::{ComplexField, Domain};

/// Offset of a centered `small` block inside a centered `large` axis, chosen
/// so that the DC bins (`floor(n / 2)`) coincide.
#[inline]
fn center_offset(large: usize, small: usize) -> usize {
    large / 2 - small / 2
}

/// Keeps the central `target_w`x`target_h` block of k-space.
pub fn truncate_kspace(field: &ComplexField, target_w: usize, target_h: usize) -> Result<ComplexField> {
    field.expect_domain(Domain::KSpace)?;
    let (w, h) = field.dims();
    if target_w == 0 || target_h == 0 || target_w > w || target_h > h {
        return Err(dimension(format!(
            "cannot truncate {w}x{h} k-space to {target_w}x{target_h}"
        )));
    }
    let ox = center_offset(w, target_w);
    let oy = center_offset(h, target_h);
    field.crop(ox, oy, target_w, target_h)
}

/// Embeds k-space centrally in a larger zero grid. Sample values are kept
/// as-is, so under the unitary transform the image amplitude scales by
/// `sqrt(source_size / target_size)`.
pub fn zero_fill(field: &ComplexField, target_w: usize, target_h: usize) -> Result<ComplexField> {
    field.expect_domain(Domain::KSpace)?;
    let (w, h) = field.dims();
    if target_w < w || target_h < h {
        return Err(dimension(format!(
            "cannot zero-fill {w}x{h} k-space into {target_w}x{target_h}"
        )));
    }
    let ox = center_offset(target_w, w);
    let oy = center_offset(target_h, h);
    let mut out = ComplexField::zeros(target_w, target_h, Domain::KSpace);
    for y in 0..h {
        for x in 0..w {
            out.set(ox + x, oy + y, field.get(x, y));
        }
    }
    Ok(out)
}
