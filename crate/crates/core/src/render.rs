//! Window/level slice rendering with a mask overlay, encoded as PNG.
//!
//! Image pixel `(u, v)` is the voxel at in-plane coordinates `(u, v)` of the
//! slice, row `v` top to bottom. No flipping or aspect correction is done
//! here; clients use the spacing for that.

use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::volume::{BinaryMask, HuVolume};

pub const DEFAULT_WINDOW_CENTER: f64 = -500.0;
pub const DEFAULT_WINDOW_WIDTH: f64 = 1400.0;
pub const OVERLAY_OPACITY: f64 = 0.4;
pub const OVERLAY_COLOR: [u8; 3] = [0, 0, 255];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub rgb: Vec<u8>,
}

impl SliceImage {
    pub fn pixel(&self, u: usize, v: usize) -> [u8; 3] {
        let i = 3 * (v * self.width + u);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self)
    }
}

/// Gray level for one HU value, rounding half up.
pub fn window_level(hu: f64, center: f64, width: f64) -> u8 {
    let t = ((hu - (center - width / 2.0)) / width).clamp(0.0, 1.0);
    (t * 255.0 + 0.5).floor() as u8
}

fn blend(gray: u8, color: u8) -> u8 {
    let v = (1.0 - OVERLAY_OPACITY) * gray as f64 + OVERLAY_OPACITY * color as f64;
    (v + 0.5).floor().min(255.0) as u8
}

pub fn render_slice(
    volume: &HuVolume,
    overlay: Option<&BinaryMask>,
    plane: Plane,
    index: usize,
    window_center: f64,
    window_width: f64,
) -> Result<SliceImage> {
    let g = volume.geometry();
    let len = g.slice_count(plane);
    if index >= len {
        return Err(Error::IndexOutOfRange { plane, index, len });
    }
    if !(window_width.is_finite() && window_width > 0.0) || !window_center.is_finite() {
        return Err(Error::InvalidWindow(window_width));
    }
    if let Some(mask) = overlay {
        if !mask.geometry().congruent(g) {
            return Err(Error::GeometryMismatch);
        }
    }
    let (width, height) = g.slice_shape(plane);
    let mut rgb = Vec::with_capacity(width * height * 3);
    for v in 0..height {
        for u in 0..width {
            let vox = g.voxel_at_pixel(plane, index, u, v);
            let gray = window_level(volume.at(vox) as f64, window_center, window_width);
            match overlay {
                Some(mask) if mask.get(vox) => {
                    rgb.extend(OVERLAY_COLOR.map(|c| blend(gray, c)));
                }
                _ => rgb.extend([gray; 3]),
            }
        }
    }
    Ok(SliceImage { width, height, rgb })
}

pub fn encode_png(image: &SliceImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(&image.rgb)
            .map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(out)
}
