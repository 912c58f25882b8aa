//! Slice-plane brush strokes: rasterization, add/delete edits with sparse
//! undo records, and seed strokes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Plane, Side, VolumeGeometry, Voxel};
use crate::seeds::{Provenance, SeedSet};
use crate::volume::BinaryMask;

/// Largest gap, in pixels, between consecutive stamps along a segment.
pub const MAX_STAMP_STEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrokeMode {
    Add,
    Delete,
    SeedLeft,
    SeedRight,
}

impl StrokeMode {
    pub fn seed_side(self) -> Option<Side> {
        match self {
            StrokeMode::SeedLeft => Some(Side::Left),
            StrokeMode::SeedRight => Some(Side::Right),
            _ => None,
        }
    }
}

impl fmt::Display for StrokeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            StrokeMode::Add => "add",
            StrokeMode::Delete => "delete",
            StrokeMode::SeedLeft => "seed-left",
            StrokeMode::SeedRight => "seed-right",
        })
    }
}

/// A polyline painted on one slice. Points are in-plane pixel coordinates
/// `[column, row]` (see [`Plane::in_plane_axes`]); fractional positions
/// round half up to the nearest pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub plane: Plane,
    pub slice_index: usize,
    pub points: Vec<[f64; 2]>,
    pub radius_px: u32,
    pub mode: StrokeMode,
}

/// Offsets `(dx, dy)` with `dx² + dy² <= r²`.
pub fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect()
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Pixel centers stamped by a polyline: every vertex plus samples no more
/// than [`MAX_STAMP_STEP`] apart along each segment, deduplicated in order.
fn stamp_centers(points: &[[f64; 2]]) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    let mut push = |p: [f64; 2]| {
        let c = (round_half_up(p[0]), round_half_up(p[1]));
        if out.last() != Some(&c) {
            out.push(c);
        }
    };
    push(points[0]);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let steps = (len / MAX_STAMP_STEP).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
        }
    }
    out
}

impl Stroke {
    pub fn validate(&self, geometry: &VolumeGeometry) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidStroke("stroke has no points".into()));
        }
        if self.points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidStroke("non-finite point coordinate".into()));
        }
        let slices = geometry.slice_count(self.plane);
        if self.slice_index >= slices {
            return Err(Error::InvalidStroke(format!(
                "slice {} out of range for {} plane with {} slices",
                self.slice_index, self.plane, slices
            )));
        }
        Ok(())
    }
}

/// Voxels covered by the stroke on its slice, clipped to the slice bounds,
/// in row-major pixel order.
pub fn rasterize_stroke(stroke: &Stroke, geometry: &VolumeGeometry) -> Result<Vec<Voxel>> {
    stroke.validate(geometry)?;
    let (w, h) = geometry.slice_shape(stroke.plane);
    let mut covered = vec![false; w * h];
    let disc = disc_offsets(stroke.radius_px);
    for (cx, cy) in stamp_centers(&stroke.points) {
        for &(dx, dy) in &disc {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                covered[x as usize + w * y as usize] = true;
            }
        }
    }
    Ok(covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(p, _)| geometry.voxel_at_pixel(stroke.plane, stroke.slice_index, p % w, p / w))
        .collect())
}

/// Sparse record of one edit: every voxel whose bit flipped, with its
/// previous value.
#[derive(Clone, Debug, PartialEq)]
pub struct EditRecord {
    pub stroke: Stroke,
    pub changed_voxels: Vec<(Voxel, bool)>,
}

impl EditRecord {
    pub fn changed(&self) -> usize {
        self.changed_voxels.len()
    }
}

/// Applies an add or delete stroke in place.
pub fn apply_stroke_in_place(mask: &mut BinaryMask, stroke: &Stroke) -> Result<EditRecord> {
    let target = match stroke.mode {
        StrokeMode::Add => true,
        StrokeMode::Delete => false,
        other => return Err(Error::WrongMode(other)),
    };
    let voxels = rasterize_stroke(stroke, mask.geometry())?;
    let mut changed_voxels = Vec::new();
    for v in voxels {
        let previous = mask.get(v);
        if previous != target {
            mask.set(v, target);
            changed_voxels.push((v, previous));
        }
    }
    Ok(EditRecord {
        stroke: stroke.clone(),
        changed_voxels,
    })
}

pub fn apply_stroke(mask: &BinaryMask, stroke: &Stroke) -> Result<(BinaryMask, EditRecord)> {
    let mut out = mask.clone();
    let record = apply_stroke_in_place(&mut out, stroke)?;
    Ok((out, record))
}

pub fn undo_in_place(mask: &mut BinaryMask, record: &EditRecord) {
    for &(v, previous) in &record.changed_voxels {
        mask.set(v, previous);
    }
}

pub fn undo(mask: &BinaryMask, record: &EditRecord) -> BinaryMask {
    let mut out = mask.clone();
    undo_in_place(&mut out, record);
    out
}

/// Seeds from a seed-left or seed-right stroke; only the named side is
/// populated.
pub fn seeds_from_stroke(stroke: &Stroke, geometry: &VolumeGeometry) -> Result<SeedSet> {
    let side = stroke.mode.seed_side().ok_or(Error::WrongMode(stroke.mode))?;
    let voxels = rasterize_stroke(stroke, geometry)?;
    let mut seeds = SeedSet::new(Vec::new(), Vec::new(), Provenance::ManualStroke);
    *seeds.side_mut(side) = voxels;
    Ok(seeds)
}

/// Undo stack of applied edits. Each record gets a sequence id; only the
/// most recent un-undone record may be undone.
#[derive(Clone, Debug, Default)]
pub struct EditHistory {
    records: Vec<(u64, EditRecord)>,
    next_id: u64,
}

impl EditHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies `stroke` to `mask` and records it; returns the record id.
    pub fn apply(&mut self, mask: &mut BinaryMask, stroke: &Stroke) -> Result<(u64, &EditRecord)> {
        let record = apply_stroke_in_place(mask, stroke)?;
        let id = self.next_id;
        self.next_id += 1;
        self.records.push((id, record));
        Ok((id, &self.records.last().expect("just pushed").1))
    }

    /// Undoes the most recent edit, or the edit with `id` if it is the most
    /// recent. Returns `None` when there is nothing to undo.
    pub fn undo(&mut self, mask: &mut BinaryMask, id: Option<u64>) -> Result<Option<EditRecord>> {
        match (self.records.last(), id) {
            (None, None) => Ok(None),
            (None, Some(_)) => Err(Error::StaleRecord),
            (Some((top, _)), Some(id)) if *top != id => Err(Error::StaleRecord),
            (Some(_), _) => {
                let (_, record) = self.records.pop().expect("checked non-empty");
                undo_in_place(mask, &record);
                Ok(Some(record))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}
