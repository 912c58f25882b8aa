//! Voxel grid geometry: dimensions, spacing, world placement and anatomical
//! orientation of a scan, plus the three viewing planes.
//!
//! Voxels are addressed as `[x, y, z]` with `x` varying fastest in memory,
//! the same order NIfTI stores them.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Voxel coordinate `[x, y, z]`.
pub type Voxel = [usize; 3];

/// Anatomical direction an increasing voxel index points toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "R")]
    Right,
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "A")]
    Anterior,
    #[serde(rename = "P")]
    Posterior,
    #[serde(rename = "S")]
    Superior,
    #[serde(rename = "I")]
    Inferior,
}

impl Direction {
    pub fn code(self) -> char {
        match self {
            Direction::Right => 'R',
            Direction::Left => 'L',
            Direction::Anterior => 'A',
            Direction::Posterior => 'P',
            Direction::Superior => 'S',
            Direction::Inferior => 'I',
        }
    }

    /// Direction of a world axis (RAS+ convention) with the given sign.
    fn from_world_axis(axis: usize, positive: bool) -> Self {
        match (axis, positive) {
            (0, true) => Direction::Right,
            (0, false) => Direction::Left,
            (1, true) => Direction::Anterior,
            (1, false) => Direction::Posterior,
            (2, true) => Direction::Superior,
            _ => Direction::Inferior,
        }
    }
}

/// Patient side of a lung.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Orthogonal viewing plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// Fixed `z`; pixels are `(x, y)`.
    Axial,
    /// Fixed `y`; pixels are `(x, z)`.
    Coronal,
    /// Fixed `x`; pixels are `(y, z)`.
    Sagittal,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Axial, Plane::Coronal, Plane::Sagittal];

    pub fn fixed_axis(self) -> usize {
        match self {
            Plane::Axial => 2,
            Plane::Coronal => 1,
            Plane::Sagittal => 0,
        }
    }

    /// Voxel axes mapped to the image column and row.
    pub fn in_plane_axes(self) -> (usize, usize) {
        match self {
            Plane::Axial => (0, 1),
            Plane::Coronal => (0, 2),
            Plane::Sagittal => (1, 2),
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        })
    }
}

impl std::str::FromStr for Plane {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "axial" => Ok(Plane::Axial),
            "coronal" => Ok(Plane::Coronal),
            "sagittal" => Ok(Plane::Sagittal),
            other => Err(format!("unknown plane {other:?}")),
        }
    }
}

/// Placement of a voxel grid in world space.
///
/// `direction` holds one unit column per voxel axis, expressed in RAS+ world
/// coordinates; `origin` is the world position of voxel `[0, 0, 0]` in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeGeometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub direction: [[f64; 3]; 3],
}

impl VolumeGeometry {
    pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    /// Axis-aligned (RAS) geometry at the world origin.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        VolumeGeometry {
            dims,
            spacing,
            origin: [0.0; 3],
            direction: Self::IDENTITY,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.dims.iter().all(|&d| d >= 1)
            && self.spacing.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.origin.iter().all(|o| o.is_finite())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Returns `(voxel volume in mm³, physical extent per axis in mm)`.
    pub fn world_extent(&self) -> (f64, [f64; 3]) {
        let physical = [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ];
        (self.voxel_volume_mm3(), physical)
    }

    #[inline]
    pub fn index(&self, v: Voxel) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    #[inline]
    pub fn voxel(&self, index: usize) -> Voxel {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn contains(&self, v: Voxel) -> bool {
        v[0] < self.dims[0] && v[1] < self.dims[1] && v[2] < self.dims[2]
    }

    /// Whether two grids are voxel-for-voxel congruent. Spacing is compared
    /// at single precision since NIfTI headers store it as 32-bit floats.
    pub fn congruent(&self, other: &VolumeGeometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0))
    }

    /// Direction each voxel axis points toward, taken from the dominant
    /// world component of its direction column.
    pub fn axis_codes(&self) -> [Direction; 3] {
        let mut codes = [Direction::Right, Direction::Anterior, Direction::Superior];
        for (axis, code) in codes.iter_mut().enumerate() {
            let col = self.direction[axis];
            let dominant = (0..3)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
                .unwrap_or(axis);
            *code = Direction::from_world_axis(dominant, col[dominant] >= 0.0);
        }
        codes
    }

    /// True when some direction column has an off-axis component above 10%
    /// of its dominant component.
    pub fn is_oblique(&self) -> bool {
        self.direction.iter().any(|col| {
            let max = col.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            col.iter()
                .filter(|c| c.abs() < max)
                .any(|c| c.abs() > 0.1 * max)
        })
    }

    /// The voxel axis running along the patient left-right direction, and
    /// whether increasing index along it moves toward the patient's left.
    /// Grids without any L/R-coded axis fall back to `x` pointing right.
    pub fn left_right_axis(&self) -> (usize, bool) {
        let codes = self.axis_codes();
        codes
            .iter()
            .position(|c| matches!(c, Direction::Left | Direction::Right))
            .map(|axis| (axis, codes[axis] == Direction::Left))
            .unwrap_or((0, false))
    }

    /// Side of `position` relative to `reference`, both measured in voxel
    /// units along the left-right axis.
    pub fn side_of(&self, position: f64, reference: f64) -> Side {
        let (_, increasing_is_left) = self.left_right_axis();
        let left = if increasing_is_left {
            position > reference
        } else {
            position < reference
        };
        if left {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn slice_count(&self, plane: Plane) -> usize {
        self.dims[plane.fixed_axis()]
    }

    /// Image `(width, height)` of a slice in the given plane.
    pub fn slice_shape(&self, plane: Plane) -> (usize, usize) {
        let (u, v) = plane.in_plane_axes();
        (self.dims[u], self.dims[v])
    }

    /// Voxel under in-plane pixel `(u, v)` of slice `index`. No bounds check.
    #[inline]
    pub fn voxel_at_pixel(&self, plane: Plane, index: usize, u: usize, v: usize) -> Voxel {
        let (ua, va) = plane.in_plane_axes();
        let mut out = [0usize; 3];
        out[plane.fixed_axis()] = index;
        out[ua] = u;
        out[va] = v;
        out
    }

    /// Row-major 4x4 voxel-to-world affine (RAS+ mm).
    pub fn affine(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for row in 0..3 {
            for axis in 0..3 {
                m[row][axis] = self.direction[axis][row] * self.spacing[axis];
            }
            m[row][3] = self.origin[row];
        }
        m[3][3] = 1.0;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn world_extent_examples() {
        let g = VolumeGeometry::new([64, 64, 64], [1.0, 1.0, 1.0]);
        assert_eq!(g.world_extent(), (1.0, [64.0, 64.0, 64.0]));

        let g = VolumeGeometry::new([512, 512, 400], [0.7, 0.7, 1.25]);
        let (vv, ext) = g.world_extent();
        assert!(close(vv, 0.6125));
        assert!(close(ext[0], 358.4) && close(ext[1], 358.4) && close(ext[2], 500.0));

        let g = VolumeGeometry::new([1, 1, 1], [2.0, 2.0, 2.5]);
        let (vv, ext) = g.world_extent();
        assert!(close(vv, 10.0));
        assert_eq!(ext, [2.0, 2.0, 2.5]);
    }

    #[test]
    fn index_roundtrip() {
        let g = VolumeGeometry::new([3, 4, 5], [1.0; 3]);
        for i in 0..g.len() {
            assert_eq!(g.index(g.voxel(i)), i);
        }
        assert_eq!(g.index([2, 3, 4]), 59);
    }

    #[test]
    fn axis_codes_follow_direction() {
        let mut g = VolumeGeometry::new([4, 4, 4], [1.0; 3]);
        assert_eq!(
            g.axis_codes(),
            [Direction::Right, Direction::Anterior, Direction::Superior]
        );
        assert_eq!(g.left_right_axis(), (0, false));
        assert_eq!(g.side_of(1.0, 2.0), Side::Left);

        // LPS-style flips of x and y
        g.direction = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(
            g.axis_codes(),
            [Direction::Left, Direction::Posterior, Direction::Superior]
        );
        assert_eq!(g.side_of(1.0, 2.0), Side::Right);

        // x axis mapped onto world y; y axis onto world x
        g.direction = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(g.left_right_axis(), (1, false));
    }

    #[test]
    fn oblique_detection() {
        let mut g = VolumeGeometry::new([4, 4, 4], [1.0; 3]);
        assert!(!g.is_oblique());
        let (s, c) = (0.2f64.sin(), 0.2f64.cos());
        g.direction = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
        assert!(g.is_oblique());
        assert_eq!(g.axis_codes()[0], Direction::Right);
    }

    #[test]
    fn plane_pixels_map_to_voxels() {
        let g = VolumeGeometry::new([5, 6, 7], [1.0; 3]);
        assert_eq!(g.slice_shape(Plane::Axial), (5, 6));
        assert_eq!(g.slice_shape(Plane::Coronal), (5, 7));
        assert_eq!(g.slice_shape(Plane::Sagittal), (6, 7));
        assert_eq!(g.voxel_at_pixel(Plane::Axial, 3, 1, 2), [1, 2, 3]);
        assert_eq!(g.voxel_at_pixel(Plane::Coronal, 3, 1, 2), [1, 3, 2]);
        assert_eq!(g.voxel_at_pixel(Plane::Sagittal, 3, 1, 2), [3, 1, 2]);
    }
}
