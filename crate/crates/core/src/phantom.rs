//! Synthetic thorax CT volumes with exactly known lung masks.
//!
//! The layout is fixed relative to the physical extent `E` of the grid,
//! measured from voxel centers:
//!
//! * body: elliptic cylinder along `z`, semi-axes `0.47·E_x` and `0.42·E_y`,
//!   spanning every slice;
//! * lungs: ellipsoids with semi-axes `(0.18·E_x, 0.28·E_y, 0.38·E_z)`,
//!   centered `0.22·E_x` either side of the midline (the patient's left lung
//!   toward lower `x`, since the grid is written RAS);
//! * ribs: lateral arcs at elliptic radius `0.91..0.98` of the body outline
//!   where `|cos θ| > 0.3`, in ten bands along `z` each `0.04·E_z` thick;
//! * air everywhere outside the body.
//!
//! Lung voxels get `lung_mean_hu` plus i.i.d. Gaussian noise clamped to
//! `[air_hu, body_hu]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Side, VolumeGeometry, Voxel};
use crate::volume::{BinaryMask, HuVolume, MaskLabel};

pub const LUNG_SEMI_AXES: [f64; 3] = [0.18, 0.28, 0.38];
pub const LUNG_OFFSET: f64 = 0.22;
pub const BODY_SEMI_AXES: [f64; 2] = [0.47, 0.42];
pub const RIB_RADII: (f64, f64) = (0.91, 0.98);
pub const RIB_BANDS: f64 = 10.0;
pub const RIB_BAND_FILL: f64 = 0.4;
pub const MIN_DIM: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub lung_mean_hu: f64,
    pub lung_noise_sd: f64,
    pub body_hu: f64,
    pub rib_hu: f64,
    pub air_hu: f64,
    pub rng_seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [128; 3],
            spacing: [1.0; 3],
            lung_mean_hu: -550.0,
            lung_noise_sd: 0.0,
            body_hu: 0.0,
            rib_hu: 700.0,
            air_hu: -1000.0,
            rng_seed: 0,
        }
    }
}

impl PhantomSpec {
    /// Cubic grid of `size` voxels per side at 1 mm spacing.
    pub fn cube(size: usize, noise_sd: f64, rng_seed: u64) -> Self {
        PhantomSpec {
            dims: [size; 3],
            lung_noise_sd: noise_sd,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.dims.iter().find(|&&d| d < MIN_DIM) {
            return Err(Error::InvalidSpec(format!(
                "every dimension must be at least {MIN_DIM} voxels for the lungs to fit, got {d}"
            )));
        }
        if !self.spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidSpec("spacing must be positive".into()));
        }
        if !(self.lung_noise_sd.is_finite() && self.lung_noise_sd >= 0.0) {
            return Err(Error::InvalidSpec("noise sd must be non-negative".into()));
        }
        let ordered = self.air_hu <= self.lung_mean_hu
            && self.lung_mean_hu < self.body_hu
            && self.body_hu < self.rib_hu;
        if !ordered {
            return Err(Error::InvalidSpec(
                "intensities must satisfy air <= lung < body < rib".into(),
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> VolumeGeometry {
        VolumeGeometry::new(self.dims, self.spacing)
    }

    pub fn layout(&self) -> PhantomLayout {
        PhantomLayout::new(self.dims, self.spacing)
    }
}

/// Analytic shapes of the phantom in voxel-center millimetres.
#[derive(Clone, Debug)]
pub struct PhantomLayout {
    spacing: [f64; 3],
    extent: [f64; 3],
    center: [f64; 3],
}

impl PhantomLayout {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        let extent = [0, 1, 2].map(|a| dims[a] as f64 * spacing[a]);
        PhantomLayout {
            spacing,
            extent,
            center: extent.map(|e| e / 2.0),
        }
    }

    fn position(&self, v: Voxel) -> [f64; 3] {
        [0, 1, 2].map(|a| (v[a] as f64 + 0.5) * self.spacing[a])
    }

    /// `(x, y)` offsets of a voxel from the body axis, in units of the body
    /// semi-axes.
    fn body_coords(&self, v: Voxel) -> (f64, f64) {
        let p = self.position(v);
        (
            (p[0] - self.center[0]) / (BODY_SEMI_AXES[0] * self.extent[0]),
            (p[1] - self.center[1]) / (BODY_SEMI_AXES[1] * self.extent[1]),
        )
    }

    pub fn lung_center(&self, side: Side) -> [f64; 3] {
        let dx = LUNG_OFFSET * self.extent[0];
        let x = match side {
            Side::Left => self.center[0] - dx,
            Side::Right => self.center[0] + dx,
        };
        [x, self.center[1], self.center[2]]
    }

    /// Ellipsoid semi-axes in mm.
    pub fn lung_semi_axes(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| LUNG_SEMI_AXES[a] * self.extent[a])
    }

    pub fn in_body(&self, v: Voxel) -> bool {
        let (u, w) = self.body_coords(v);
        u * u + w * w <= 1.0
    }

    pub fn in_lung(&self, side: Side, v: Voxel) -> bool {
        let p = self.position(v);
        let c = self.lung_center(side);
        let r = self.lung_semi_axes();
        (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
    }

    pub fn in_rib(&self, v: Voxel) -> bool {
        let (u, w) = self.body_coords(v);
        let r = (u * u + w * w).sqrt();
        if !(RIB_RADII.0..=RIB_RADII.1).contains(&r) || u.abs() <= 0.3 * r {
            return false;
        }
        let z = self.position(v)[2] / self.extent[2];
        (z * RIB_BANDS).fract() < RIB_BAND_FILL
    }

    /// Analytic ellipsoid volume in mm³.
    pub fn lung_volume_mm3(&self) -> f64 {
        let r = self.lung_semi_axes();
        4.0 / 3.0 * std::f64::consts::PI * r[0] * r[1] * r[2]
    }
}

/// A generated phantom and its ground truth.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub volume: HuVolume,
    pub truth_left: BinaryMask,
    pub truth_right: BinaryMask,
}

impl Phantom {
    pub fn truth(&self, side: Side) -> &BinaryMask {
        match side {
            Side::Left => &self.truth_left,
            Side::Right => &self.truth_right,
        }
    }
}

/// Rasterizes the phantom; a pure function of `spec`.
pub fn generate_thorax_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let geometry = spec.geometry();
    let layout = spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let noise = Normal::new(0.0, spec.lung_noise_sd)
        .map_err(|e| Error::InvalidSpec(format!("noise: {e}")))?;

    let n = geometry.len();
    let mut values = vec![spec.air_hu as f32; n];
    let mut left = vec![0u8; n];
    let mut right = vec![0u8; n];
    for (i, value) in values.iter_mut().enumerate() {
        let v = geometry.voxel(i);
        if !layout.in_body(v) {
            continue;
        }
        let side = if layout.in_lung(Side::Left, v) {
            left[i] = 1;
            Some(Side::Left)
        } else if layout.in_lung(Side::Right, v) {
            right[i] = 1;
            Some(Side::Right)
        } else {
            None
        };
        *value = match side {
            Some(_) => {
                let hu = if spec.lung_noise_sd > 0.0 {
                    spec.lung_mean_hu + noise.sample(&mut rng)
                } else {
                    spec.lung_mean_hu
                };
                hu.clamp(spec.air_hu, spec.body_hu) as f32
            }
            None if layout.in_rib(v) => spec.rib_hu as f32,
            None => spec.body_hu as f32,
        };
    }

    let truth_left = BinaryMask::from_bits(geometry.clone(), left)?.with_label(MaskLabel::Left);
    let truth_right = BinaryMask::from_bits(geometry.clone(), right)?.with_label(MaskLabel::Right);
    Ok(Phantom {
        volume: HuVolume::new(geometry, values)?,
        truth_left,
        truth_right,
    })
}
