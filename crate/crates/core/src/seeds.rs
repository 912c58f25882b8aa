//! Automatic seed localization for the left and right lungs.
//!
//! The body outline and rib cage act as geometric markers; the parenchyma
//! band `[-700, -400]` HU inside them is split into 6-connected candidate
//! regions, and each side is seeded at the minimum-HU voxels of its most
//! robust region.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Side, VolumeGeometry, Voxel};
use crate::morphology::{
    convex_hull, erode6, fill_holes_3d, fill_holes_axial, hull_contains, label_components,
    largest_component, Adjacency,
};
use crate::volume::{BinaryMask, HuVolume, MaskLabel};

pub const BODY_THRESHOLD_HU: f32 = -500.0;
pub const BONE_THRESHOLD_HU: f32 = 200.0;
pub const PARENCHYMA_BAND_HU: (f32, f32) = (-700.0, -400.0);
/// Manual seeds outside this range draw a warning.
pub const PLAUSIBLE_SEED_HU: (f32, f32) = (-1000.0, -300.0);
pub const MAX_SEEDS_PER_SIDE: usize = 8;
pub const MIN_BODY_FRACTION: f64 = 0.01;
pub const MIN_REGION_VOXELS: usize = 1000;
pub const MIN_REGION_FRACTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Automatic,
    ManualClick,
    ManualStroke,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub left: Vec<Voxel>,
    pub right: Vec<Voxel>,
    pub provenance: Provenance,
    /// Non-fatal validation notes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SeedSet {
    pub fn new(left: Vec<Voxel>, right: Vec<Voxel>, provenance: Provenance) -> Self {
        SeedSet {
            left,
            right,
            provenance,
            warnings: Vec::new(),
        }
    }

    pub fn side(&self, side: Side) -> &[Voxel] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<Voxel> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }
}

/// One connected component of the parenchyma threshold set.
#[derive(Clone, Debug)]
pub struct CandidateRegion {
    pub mask: BinaryMask,
    pub side: Side,
    pub voxel_count: usize,
    pub min_hu: f32,
    /// Every voxel attaining `min_hu`, in lexicographic `[x, y, z]` order.
    pub min_hu_locations: Vec<Voxel>,
    pub centroid: [f64; 3],
}

/// Patient body: `HU > -500`, largest 6-connected component, internal
/// cavities filled per axial slice and in 3-D.
pub fn extract_body_mask(volume: &HuVolume) -> Result<BinaryMask> {
    let g = volume.geometry();
    let above = BinaryMask::from_bits(
        g.clone(),
        volume
            .values()
            .iter()
            .map(|&v| u8::from(v > BODY_THRESHOLD_HU))
            .collect(),
    )?;
    let body = largest_component(&above);
    let fraction = body.count() as f64 / g.len() as f64;
    if fraction < MIN_BODY_FRACTION {
        return Err(Error::NoBodyFound { fraction });
    }
    Ok(fill_holes_3d(&fill_holes_axial(&body)).with_label(MaskLabel::Body))
}

/// Bone voxels (`HU >= +200`) inside the body.
pub fn extract_rib_cage(volume: &HuVolume, body: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(volume.geometry().clone(), |v| {
        body.get(v) && volume.at(v) >= BONE_THRESHOLD_HU
    })
}

/// Per-axial-slice convex hull of bone voxels. Slices with fewer than three
/// bone voxels (or collinear ones) impose no constraint.
#[derive(Clone, Debug)]
pub struct RibHull {
    hulls: Vec<Option<Vec<[i64; 2]>>>,
}

impl RibHull {
    pub fn from_ribs(ribs: &BinaryMask) -> Self {
        let [nx, ny, nz] = ribs.geometry().dims;
        let plane = nx * ny;
        let hulls = (0..nz)
            .map(|z| {
                let points: Vec<[i64; 2]> = (0..plane)
                    .filter(|&p| ribs.get_index(z * plane + p))
                    .map(|p| [(p % nx) as i64, (p / nx) as i64])
                    .collect();
                if points.len() < 3 {
                    return None;
                }
                let hull = convex_hull(&points);
                (hull.len() >= 3).then_some(hull)
            })
            .collect();
        RibHull { hulls }
    }

    pub fn allows(&self, v: Voxel) -> bool {
        match &self.hulls[v[2]] {
            Some(hull) => hull_contains(hull, [v[0] as i64, v[1] as i64]),
            None => true,
        }
    }

    pub fn constrained_slices(&self) -> usize {
        self.hulls.iter().filter(|h| h.is_some()).count()
    }
}

fn cmp_lex(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Minimum component size kept as a candidate for a grid of `n` voxels.
pub fn region_size_floor(n: usize) -> usize {
    MIN_REGION_VOXELS.max((n as f64 * MIN_REGION_FRACTION).ceil() as usize)
}

/// Components of the parenchyma band inside the body and the rib hull,
/// largest first.
pub fn candidate_regions(
    volume: &HuVolume,
    body: &BinaryMask,
    ribs: &BinaryMask,
) -> Result<Vec<CandidateRegion>> {
    let g = volume.geometry();
    if !g.congruent(body.geometry()) || !g.congruent(ribs.geometry()) {
        return Err(Error::GeometryMismatch);
    }
    let hull = RibHull::from_ribs(ribs);
    let (lo, hi) = PARENCHYMA_BAND_HU;
    let band = BinaryMask::from_fn(g.clone(), |v| {
        let hu = volume.at(v);
        body.get(v) && (lo..=hi).contains(&hu) && hull.allows(v)
    });
    let (labels, sizes) = label_components(&band, Adjacency::Six);
    let floor = region_size_floor(g.len());
    let body_centroid = body.centroid().ok_or(Error::NoCandidateRegion)?;
    let (lr_axis, _) = g.left_right_axis();

    let kept: Vec<u32> = (1..sizes.len())
        .filter(|&l| sizes[l] >= floor)
        .map(|l| l as u32)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoCandidateRegion);
    }

    let mut regions: Vec<CandidateRegion> = kept
        .iter()
        .map(|&label| {
            let mut mask = BinaryMask::empty(g.clone());
            let mut min_hu = f32::INFINITY;
            let mut min_locations = Vec::new();
            let mut sum = [0.0f64; 3];
            for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == label) {
                mask.set_index(i, true);
                let v = g.voxel(i);
                for a in 0..3 {
                    sum[a] += v[a] as f64;
                }
                let hu = volume.values()[i];
                if hu < min_hu {
                    min_hu = hu;
                    min_locations.clear();
                }
                if hu == min_hu {
                    min_locations.push(v);
                }
            }
            min_locations.sort_unstable();
            let count = sizes[label as usize];
            let centroid = sum.map(|s| s / count as f64);
            CandidateRegion {
                side: g.side_of(centroid[lr_axis], body_centroid[lr_axis]),
                mask,
                voxel_count: count,
                min_hu,
                min_hu_locations: min_locations,
                centroid,
            }
        })
        .collect();
    regions.sort_by(|a, b| {
        b.voxel_count
            .cmp(&a.voxel_count)
            .then_with(|| cmp_lex(&a.centroid, &b.centroid))
    });
    Ok(regions)
}

/// The region a side is seeded from: largest after one erosion step, then
/// largest before it, then lexicographically smallest centroid.
pub fn most_robust_region(regions: &[CandidateRegion], side: Side) -> Option<&CandidateRegion> {
    regions
        .iter()
        .filter(|r| r.side == side)
        .map(|r| (erode6(&r.mask).count(), r))
        .min_by(|(ea, a), (eb, b)| {
            eb.cmp(ea)
                .then(b.voxel_count.cmp(&a.voxel_count))
                .then_with(|| cmp_lex(&a.centroid, &b.centroid))
        })
        .map(|(_, r)| r)
}

/// One seed list per side from the minimum-HU voxels of the most robust
/// region, ties capped at [`MAX_SEEDS_PER_SIDE`].
pub fn select_seeds(regions: &[CandidateRegion]) -> Result<SeedSet> {
    if regions.is_empty() {
        return Err(Error::NoCandidateRegion);
    }
    let mut seeds = SeedSet::new(Vec::new(), Vec::new(), Provenance::Automatic);
    for side in [Side::Left, Side::Right] {
        let region = most_robust_region(regions, side).ok_or(Error::MissingSide(side))?;
        *seeds.side_mut(side) = region
            .min_hu_locations
            .iter()
            .take(MAX_SEEDS_PER_SIDE)
            .copied()
            .collect();
    }
    Ok(seeds)
}

/// Body mask, candidate regions and seeds in one pass.
pub fn auto_seeds(volume: &HuVolume) -> Result<(SeedSet, BinaryMask)> {
    let body = extract_body_mask(volume)?;
    let ribs = extract_rib_cage(volume, &body);
    let regions = candidate_regions(volume, &body, &ribs)?;
    Ok((select_seeds(&regions)?, body))
}

/// Rejects out-of-bounds seeds and annotates implausible ones.
pub fn validate_manual_seeds(volume: &HuVolume, seeds: SeedSet) -> Result<SeedSet> {
    let g = volume.geometry();
    let mut seeds = seeds;
    let mut warnings = Vec::new();
    for side in [Side::Left, Side::Right] {
        for &v in seeds.side(side) {
            if !g.contains(v) {
                return Err(Error::OutOfBounds(v));
            }
            let hu = volume.at(v);
            let (lo, hi) = PLAUSIBLE_SEED_HU;
            if !(lo..=hi).contains(&hu) {
                warnings.push(format!(
                    "{side} seed {v:?} has {hu} HU, outside the plausible lung range [{lo}, {hi}]"
                ));
            }
        }
    }
    if let Some(v) = seeds.left.iter().find(|v| seeds.right.contains(v)) {
        warnings.push(format!("seed {v:?} is listed for both lungs"));
    }
    seeds.warnings.extend(warnings);
    Ok(seeds)
}

/// Grid-mirrored copy of a voxel along the left-right axis.
pub fn mirror_voxel(geometry: &VolumeGeometry, v: Voxel) -> Voxel {
    let (axis, _) = geometry.left_right_axis();
    let mut out = v;
    out[axis] = geometry.dims[axis] - 1 - v[axis];
    out
}
