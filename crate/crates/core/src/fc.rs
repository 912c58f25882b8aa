//! Fuzzy-connectedness segmentation.
//!
//! The affinity between adjacent voxels is a Gaussian of their mean HU
//! around the parenchyma mean `m` with spread `σ`:
//!
//! ```text
//! κ(c, d) = exp(-((f(c) + f(d)) / 2 - m)² / (2σ²))
//! ```
//!
//! A voxel's connectivity is the strength of its best path to any seed,
//! where a path is as strong as its weakest link. Strengths are computed
//! by best-first propagation from the seeds (each voxel finalized once),
//! which yields the unique fixpoint `K(c) = max_d min(K(d), κ(d, c))`.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Side, VolumeGeometry, Voxel};
use crate::morphology::{components_containing, fill_holes_axial, for_each_neighbor, Adjacency};
use crate::seeds::{auto_seeds, SeedSet};
use crate::volume::{BinaryMask, HuVolume, MaskLabel};

pub const DEFAULT_MEAN_HU: f64 = -550.0;
pub const DEFAULT_SIGMA_HU: f64 = 150.0;
pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityParams {
    pub mean_hu: f64,
    /// Standard deviation of the parenchyma intensity model, in HU.
    pub sigma_hu: f64,
    pub adjacency: Adjacency,
}

impl Default for AffinityParams {
    fn default() -> Self {
        AffinityParams {
            mean_hu: DEFAULT_MEAN_HU,
            sigma_hu: DEFAULT_SIGMA_HU,
            adjacency: Adjacency::Six,
        }
    }
}

impl AffinityParams {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_hu.is_finite() {
            return Err(Error::InvalidParams(format!("mean {} is not finite", self.mean_hu)));
        }
        if !(self.sigma_hu.is_finite() && self.sigma_hu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must be positive, got {}",
                self.sigma_hu
            )));
        }
        Ok(())
    }

    /// Affinity of an adjacent pair with intensities `a` and `b`.
    #[inline]
    pub fn pair_affinity(&self, a: f64, b: f64) -> f64 {
        let dev = (a + b) / 2.0 - self.mean_hu;
        (-(dev * dev) / (2.0 * self.sigma_hu * self.sigma_hu)).exp()
    }
}

/// Affinity between voxels `c` and `d`; zero unless they are adjacent.
pub fn affinity(volume: &HuVolume, params: &AffinityParams, c: Voxel, d: Voxel) -> f64 {
    if !params.adjacency.are_adjacent(c, d) {
        return 0.0;
    }
    params.pair_affinity(volume.at(c) as f64, volume.at(d) as f64)
}

/// Per-voxel connectivity strength in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityScene {
    geometry: VolumeGeometry,
    strength: Vec<f32>,
}

impl ConnectivityScene {
    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn strength(&self) -> &[f32] {
        &self.strength
    }

    pub fn at(&self, v: Voxel) -> f32 {
        self.strength[self.geometry.index(v)]
    }
}

/// Max-min connectivity from `seeds` through voxels of `domain`.
pub fn compute_connectivity(
    volume: &HuVolume,
    seeds: &[Voxel],
    params: &AffinityParams,
    domain: &BinaryMask,
) -> Result<ConnectivityScene> {
    propagate(volume, seeds, params, domain, |i| u32::MAX - i)
}

/// Best-first propagation. Heap entries order by strength, then by
/// `tie_key(index)`; the result does not depend on `tie_key`.
pub(crate) fn propagate(
    volume: &HuVolume,
    seeds: &[Voxel],
    params: &AffinityParams,
    domain: &BinaryMask,
    tie_key: impl Fn(u32) -> u32,
) -> Result<ConnectivityScene> {
    params.validate()?;
    let g = volume.geometry();
    if !g.congruent(domain.geometry()) {
        return Err(Error::GeometryMismatch);
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if g.len() > u32::MAX as usize {
        return Err(Error::InvalidParams("grid too large for 32-bit indexing".into()));
    }
    for &s in seeds {
        if !g.contains(s) || !domain.get(s) {
            return Err(Error::SeedOutsideDomain(s));
        }
    }

    let values = volume.values();
    let mut strength = vec![0f32; g.len()];
    let mut done = vec![false; g.len()];
    // entry = strength bits (non-negative f32 bits order like the floats) << 32 | tie key
    let entry = |k: f32, i: usize| ((k.to_bits() as u64) << 32) | tie_key(i as u32) as u64;
    let mut heap = BinaryHeap::with_capacity(1 << 16);
    for &s in seeds {
        let i = g.index(s);
        if strength[i] < 1.0 {
            strength[i] = 1.0;
            heap.push((entry(1.0, i), i as u32));
        }
    }
    while let Some((e, i)) = heap.pop() {
        let i = i as usize;
        if done[i] {
            continue;
        }
        let k = f32::from_bits((e >> 32) as u32);
        if k < strength[i] {
            continue;
        }
        done[i] = true;
        let fi = values[i] as f64;
        for_each_neighbor(g, params.adjacency, g.voxel(i), |n| {
            if done[n] || !domain.get_index(n) {
                return;
            }
            let link = params.pair_affinity(fi, values[n] as f64) as f32;
            let cand = k.min(link);
            if cand > strength[n] {
                strength[n] = cand;
                heap.push((entry(cand, n), n as u32));
            }
        });
    }
    Ok(ConnectivityScene {
        geometry: g.clone(),
        strength,
    })
}

/// Voxels with connectivity at least `theta`.
pub fn threshold_scene(scene: &ConnectivityScene, theta: f64) -> Result<BinaryMask> {
    check_theta(theta)?;
    BinaryMask::from_bits(
        scene.geometry.clone(),
        scene
            .strength
            .iter()
            .map(|&k| u8::from(k as f64 >= theta))
            .collect(),
    )
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

/// Restricts to the body, keeps seed-connected components, and fills
/// enclosed holes on each axial slice.
pub fn postprocess_mask(raw: &BinaryMask, seeds: &[Voxel], body: &BinaryMask) -> Result<BinaryMask> {
    let inside = raw.intersection(body)?;
    let kept = components_containing(&inside, seeds);
    if kept.is_empty() {
        return Err(Error::EmptyResult(None));
    }
    let mut out = fill_holes_axial(&kept);
    out.label = raw.label;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FcResult {
    pub left_mask: BinaryMask,
    pub right_mask: BinaryMask,
    pub combined_mask: BinaryMask,
    pub left_scene: ConnectivityScene,
    pub right_scene: ConnectivityScene,
    pub seeds: SeedSet,
    pub params: AffinityParams,
    pub theta: f64,
}

impl FcResult {
    pub fn mask(&self, side: Side) -> &BinaryMask {
        match side {
            Side::Left => &self.left_mask,
            Side::Right => &self.right_mask,
        }
    }

    /// Label map with 1 for right-lung and 2 for left-lung voxels (left wins
    /// where the two overlap).
    pub fn side_labels(&self) -> Vec<u8> {
        self.right_mask
            .bits()
            .iter()
            .zip(self.left_mask.bits())
            .map(|(&r, &l)| if l != 0 { 2 } else { r })
            .collect()
    }
}

/// Full segmentation from validated seeds: body mask, then independent
/// per-side connectivity, thresholding and cleanup.
pub fn segment_lungs(
    volume: &HuVolume,
    seeds: &SeedSet,
    params: &AffinityParams,
    theta: f64,
) -> Result<FcResult> {
    check_theta(theta)?;
    params.validate()?;
    let body = crate::seeds::extract_body_mask(volume)?;
    segment_lungs_in_body(volume, &body, seeds, params, theta)
}

/// [`segment_lungs`] with a precomputed body mask.
pub fn segment_lungs_in_body(
    volume: &HuVolume,
    body: &BinaryMask,
    seeds: &SeedSet,
    params: &AffinityParams,
    theta: f64,
) -> Result<FcResult> {
    check_theta(theta)?;
    params.validate()?;
    for side in [Side::Left, Side::Right] {
        if seeds.side(side).is_empty() {
            return Err(Error::MissingSide(side));
        }
    }
    let run = |side: Side| -> Result<(BinaryMask, ConnectivityScene)> {
        let side_seeds = seeds.side(side);
        let scene = compute_connectivity(volume, side_seeds, params, body)?;
        let raw = threshold_scene(&scene, theta)?;
        let mask = postprocess_mask(&raw, side_seeds, body)
            .map_err(|e| match e {
                Error::EmptyResult(_) => Error::EmptyResult(Some(side)),
                other => other,
            })?
            .with_label(MaskLabel::from(side));
        Ok((mask, scene))
    };
    let (left, right) = rayon::join(|| run(Side::Left), || run(Side::Right));
    let (left_mask, left_scene) = left?;
    let (right_mask, right_scene) = right?;
    let combined_mask = left_mask.union(&right_mask)?.with_label(MaskLabel::Combined);
    Ok(FcResult {
        left_mask,
        right_mask,
        combined_mask,
        left_scene,
        right_scene,
        seeds: seeds.clone(),
        params: *params,
        theta,
    })
}

/// One-click pipeline: markers, candidate regions, automatic seeds, then
/// connectivity segmentation.
pub fn segment_auto(volume: &HuVolume, params: &AffinityParams, theta: f64) -> Result<FcResult> {
    check_theta(theta)?;
    params.validate()?;
    let (seeds, body) = auto_seeds(volume)?;
    segment_lungs_in_body(volume, &body, &seeds, params, theta)
}
