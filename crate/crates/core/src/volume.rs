use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Side, VolumeGeometry, Voxel};

/// Calibrated CT volume in Hounsfield units. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct HuVolume {
    geometry: VolumeGeometry,
    values: Vec<f32>,
}

impl HuVolume {
    pub fn new(geometry: VolumeGeometry, values: Vec<f32>) -> Result<Self> {
        if !geometry.is_valid() {
            return Err(Error::CorruptHeader(format!(
                "invalid geometry: dims {:?}, spacing {:?}",
                geometry.dims, geometry.spacing
            )));
        }
        if values.len() != geometry.len() {
            return Err(Error::CorruptHeader(format!(
                "{} values for a {:?} grid",
                values.len(),
                geometry.dims
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::CorruptHeader(format!(
                "non-finite value at voxel {:?}",
                geometry.voxel(i)
            )));
        }
        Ok(HuVolume { geometry, values })
    }

    /// Volume filled with a single value.
    pub fn uniform(geometry: VolumeGeometry, hu: f32) -> Result<Self> {
        let n = geometry.len();
        Self::new(geometry, vec![hu; n])
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn at(&self, v: Voxel) -> f32 {
        self.values[self.geometry.index(v)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// What a mask annotates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskLabel {
    Left,
    Right,
    Combined,
    Body,
}

impl From<Side> for MaskLabel {
    fn from(side: Side) -> Self {
        match side {
            Side::Left => MaskLabel::Left,
            Side::Right => MaskLabel::Right,
        }
    }
}

/// One byte per voxel, each exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    geometry: VolumeGeometry,
    bits: Vec<u8>,
    pub label: Option<MaskLabel>,
}

impl BinaryMask {
    pub fn empty(geometry: VolumeGeometry) -> Self {
        let n = geometry.len();
        BinaryMask {
            geometry,
            bits: vec![0; n],
            label: None,
        }
    }

    pub fn full(geometry: VolumeGeometry) -> Self {
        let n = geometry.len();
        BinaryMask {
            geometry,
            bits: vec![1; n],
            label: None,
        }
    }

    /// Any nonzero byte is treated as set.
    pub fn from_bits(geometry: VolumeGeometry, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::GeometryMismatch);
        }
        let bits = bits.into_iter().map(|b| u8::from(b != 0)).collect();
        Ok(BinaryMask {
            geometry,
            bits,
            label: None,
        })
    }

    pub fn from_fn(geometry: VolumeGeometry, mut f: impl FnMut(Voxel) -> bool) -> Self {
        let bits = (0..geometry.len())
            .map(|i| u8::from(f(geometry.voxel(i))))
            .collect();
        BinaryMask {
            geometry,
            bits,
            label: None,
        }
    }

    /// Mask of voxels whose value equals `label` (or is nonzero when
    /// `label` is `None`).
    pub fn from_volume(volume: &HuVolume, label: Option<f32>) -> Self {
        let bits = volume
            .values()
            .iter()
            .map(|&v| u8::from(label.map_or(v != 0.0, |l| v == l)))
            .collect();
        BinaryMask {
            geometry: volume.geometry().clone(),
            bits,
            label: None,
        }
    }

    pub fn with_label(mut self, label: MaskLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> bool {
        self.bits[self.geometry.index(v)] != 0
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.bits[i] != 0
    }

    #[inline]
    pub fn set(&mut self, v: Voxel, on: bool) {
        let i = self.geometry.index(v);
        self.bits[i] = u8::from(on);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, on: bool) {
        self.bits[i] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| i)
    }

    fn check_congruent(&self, other: &BinaryMask) -> Result<()> {
        if self.geometry.congruent(&other.geometry) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> Result<BinaryMask> {
        self.check_congruent(other)?;
        Ok(BinaryMask {
            geometry: self.geometry.clone(),
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            label: None,
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        self.check_congruent(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b))
    }

    /// `(|a ∩ b|, |a|, |b|)`.
    pub fn overlap_counts(&self, other: &BinaryMask) -> Result<(usize, usize, usize)> {
        self.check_congruent(other)?;
        let mut inter = 0;
        let mut a = 0;
        let mut b = 0;
        for (&x, &y) in self.bits.iter().zip(&other.bits) {
            a += x as usize;
            b += y as usize;
            inter += (x & y) as usize;
        }
        Ok((inter, a, b))
    }

    /// Mean voxel coordinate of set voxels, `None` when empty.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for i in self.iter_set() {
            let v = self.geometry.voxel(i);
            for a in 0..3 {
                sum[a] += v[a] as f64;
            }
            n += 1;
        }
        (n > 0).then(|| sum.map(|s| s / n as f64))
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_rejects_wrong_length_and_nonfinite() {
        let g = VolumeGeometry::new([2, 2, 2], [1.0; 3]);
        assert!(HuVolume::new(g.clone(), vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f32::NAN;
        assert!(matches!(
            HuVolume::new(g.clone(), v),
            Err(Error::CorruptHeader(_))
        ));
        assert!(HuVolume::new(VolumeGeometry::new([0, 2, 2], [1.0; 3]), vec![]).is_err());
    }

    #[test]
    fn mask_set_algebra() {
        let g = VolumeGeometry::new([4, 1, 1], [1.0; 3]);
        let a = BinaryMask::from_bits(g.clone(), vec![1, 1, 0, 0]).unwrap();
        let b = BinaryMask::from_bits(g.clone(), vec![0, 1, 1, 0]).unwrap();
        assert_eq!(a.union(&b).unwrap().bits(), &[1, 1, 1, 0]);
        assert_eq!(a.intersection(&b).unwrap().bits(), &[0, 1, 0, 0]);
        assert_eq!(a.difference(&b).unwrap().bits(), &[1, 0, 0, 0]);
        assert_eq!(a.overlap_counts(&b).unwrap(), (1, 2, 2));
        assert_eq!(a.centroid(), Some([0.5, 0.0, 0.0]));

        let other = BinaryMask::empty(VolumeGeometry::new([2, 2, 1], [1.0; 3]));
        assert!(matches!(a.union(&other), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn from_bits_normalizes_to_zero_one() {
        let g = VolumeGeometry::new([3, 1, 1], [1.0; 3]);
        let m = BinaryMask::from_bits(g, vec![0, 2, 255]).unwrap();
        assert_eq!(m.bits(), &[0, 1, 1]);
    }
}
