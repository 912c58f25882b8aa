//! Connected components, hole filling and erosion on binary voxel masks.

use std::collections::VecDeque;

use crate::geometry::{VolumeGeometry, Voxel};
use crate::volume::BinaryMask;

/// Voxel adjacency used by labeling and connectivity propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Adjacency {
    /// Face neighbors.
    #[default]
    #[serde(rename = "6")]
    Six,
    /// Face, edge and corner neighbors.
    #[serde(rename = "26")]
    TwentySix,
}

impl Adjacency {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Adjacency::Six),
            26 => Some(Adjacency::TwentySix),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Adjacency::Six => 6,
            Adjacency::TwentySix => 26,
        }
    }

    pub fn offsets(self) -> &'static [[i8; 3]] {
        match self {
            Adjacency::Six => &FACE_OFFSETS,
            Adjacency::TwentySix => &ALL_OFFSETS,
        }
    }

    pub fn are_adjacent(self, a: Voxel, b: Voxel) -> bool {
        let d: Vec<usize> = (0..3).map(|i| a[i].abs_diff(b[i])).collect();
        if d.iter().any(|&x| x > 1) {
            return false;
        }
        let moved = d.iter().filter(|&&x| x == 1).count();
        match self {
            Adjacency::Six => moved == 1,
            Adjacency::TwentySix => moved >= 1,
        }
    }
}

const FACE_OFFSETS: [[i8; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

const ALL_OFFSETS: [[i8; 3]; 26] = {
    let mut out = [[0i8; 3]; 26];
    let mut n = 0;
    let mut z = -1i8;
    while z <= 1 {
        let mut y = -1i8;
        while y <= 1 {
            let mut x = -1i8;
            while x <= 1 {
                if x != 0 || y != 0 || z != 0 {
                    out[n] = [x, y, z];
                    n += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
};

/// Calls `f(neighbor_index)` for every in-bounds neighbor of `v`.
#[inline]
pub fn for_each_neighbor(
    geometry: &VolumeGeometry,
    adjacency: Adjacency,
    v: Voxel,
    mut f: impl FnMut(usize),
) {
    let dims = geometry.dims;
    for off in adjacency.offsets() {
        let mut n = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let c = v[a] as isize + off[a] as isize;
            if c < 0 || c >= dims[a] as isize {
                inside = false;
                break;
            }
            n[a] = c as usize;
        }
        if inside {
            f(geometry.index(n));
        }
    }
}

/// Component labels (0 = background, components numbered from 1 in scan
/// order) and the voxel count of each component (index 0 unused).
pub fn label_components(mask: &BinaryMask, adjacency: Adjacency) -> (Vec<u32>, Vec<usize>) {
    let g = mask.geometry();
    let mut labels = vec![0u32; g.len()];
    let mut sizes = vec![0usize];
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if !mask.get_index(start) || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for_each_neighbor(g, adjacency, g.voxel(i), |n| {
                if mask.get_index(n) && labels[n] == 0 {
                    labels[n] = label;
                    queue.push_back(n);
                }
            });
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// The largest 6-connected component; ties go to the first in scan order.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask, Adjacency::Six);
    let best = (1..sizes.len()).fold(None, |best: Option<usize>, l| match best {
        Some(b) if sizes[b] >= sizes[l] => Some(b),
        _ => Some(l),
    });
    let mut out = BinaryMask::empty(mask.geometry().clone());
    if let Some(best) = best {
        for (i, &l) in labels.iter().enumerate() {
            if l as usize == best {
                out.set_index(i, true);
            }
        }
    }
    out
}

/// Voxels of `mask` 6-connected to any of the `seeds` that lie in `mask`.
pub fn components_containing(mask: &BinaryMask, seeds: &[Voxel]) -> BinaryMask {
    let g = mask.geometry();
    let mut out = BinaryMask::empty(g.clone());
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if g.contains(s) {
            let i = g.index(s);
            if mask.get_index(i) && !out.get_index(i) {
                out.set_index(i, true);
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        for_each_neighbor(g, Adjacency::Six, g.voxel(i), |n| {
            if mask.get_index(n) && !out.get_index(n) {
                out.set_index(n, true);
                queue.push_back(n);
            }
        });
    }
    out
}

/// Sets every unset voxel that is not 6-connected to the grid boundary
/// through unset voxels.
pub fn fill_holes_3d(mask: &BinaryMask) -> BinaryMask {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let mut outside = vec![false; g.len()];
    let mut queue = VecDeque::new();
    for i in 0..g.len() {
        let [x, y, z] = g.voxel(i);
        let on_border =
            x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
        if on_border && !mask.get_index(i) {
            outside[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for_each_neighbor(g, Adjacency::Six, g.voxel(i), |n| {
            if !mask.get_index(n) && !outside[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        });
    }
    let mut out = mask.clone();
    for (i, &o) in outside.iter().enumerate() {
        if !o {
            out.set_index(i, true);
        }
    }
    out.label = mask.label;
    out
}

/// Per axial slice, sets every unset pixel not 4-connected to the slice
/// border through unset pixels.
pub fn fill_holes_axial(mask: &BinaryMask) -> BinaryMask {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let plane = nx * ny;
    let mut out = mask.clone();
    let mut outside = vec![false; plane];
    let mut stack = Vec::new();
    for z in 0..nz {
        let base = z * plane;
        outside.iter_mut().for_each(|o| *o = false);
        for y in 0..ny {
            for x in 0..nx {
                let on_border = x == 0 || y == 0 || x + 1 == nx || y + 1 == ny;
                let p = x + nx * y;
                if on_border && !mask.get_index(base + p) && !outside[p] {
                    outside[p] = true;
                    stack.push(p);
                }
            }
        }
        while let Some(p) = stack.pop() {
            let (x, y) = (p % nx, p / nx);
            let mut visit = |q: usize| {
                if !mask.get_index(base + q) && !outside[q] {
                    outside[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < nx {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - nx);
            }
            if y + 1 < ny {
                visit(p + nx);
            }
        }
        for (p, &o) in outside.iter().enumerate() {
            if !o {
                out.set_index(base + p, true);
            }
        }
    }
    out
}

/// One step of 6-neighborhood erosion; voxels on the grid boundary do not
/// survive.
pub fn erode6(mask: &BinaryMask) -> BinaryMask {
    let g = mask.geometry();
    BinaryMask::from_fn(g.clone(), |v| {
        if !mask.get(v) {
            return false;
        }
        let mut count = 0;
        for_each_neighbor(g, Adjacency::Six, v, |n| count += mask.get_index(n) as usize);
        count == 6
    })
}

/// Convex hull of integer points (Andrew's monotone chain), counter-clockwise,
/// collinear points dropped. Fewer than three non-collinear points yield a
/// degenerate hull with fewer than three vertices.
pub fn convex_hull(points: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    fn cross(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }
    let mut hull: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Inclusive point-in-convex-polygon test for a counter-clockwise hull with
/// at least three vertices.
pub fn hull_contains(hull: &[[i64; 2]], p: [i64; 2]) -> bool {
    let n = hull.len();
    (0..n).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0
    })
}
