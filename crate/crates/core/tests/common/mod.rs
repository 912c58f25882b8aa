//! Reference implementations used as test oracles, written independently of
//! the library algorithms, plus random input generators.
#![allow(dead_code)]

use lungseg::fc::AffinityParams;
use lungseg::morphology::Adjacency;
use lungseg::{BinaryMask, HuVolume, VolumeGeometry, Voxel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(rng: &mut impl Rng, dims: [usize; 3], lo: f32, hi: f32) -> HuVolume {
    let g = VolumeGeometry::new(dims, [1.0; 3]);
    let values = (0..g.len()).map(|_| rng.random_range(lo..=hi)).collect();
    HuVolume::new(g, values).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, geometry: &VolumeGeometry, density: f64) -> BinaryMask {
    BinaryMask::from_fn(geometry.clone(), |_| rng.random_bool(density))
}

pub fn random_voxel(rng: &mut impl Rng, dims: [usize; 3]) -> Voxel {
    [0, 1, 2].map(|a| rng.random_range(0..dims[a]))
}

/// Neighbors by direct coordinate comparison (no offset tables).
pub fn neighbors(dims: [usize; 3], v: Voxel, adjacency: Adjacency) -> Vec<Voxel> {
    let mut out = Vec::new();
    for x in v[0].saturating_sub(1)..=(v[0] + 1).min(dims[0] - 1) {
        for y in v[1].saturating_sub(1)..=(v[1] + 1).min(dims[1] - 1) {
            for z in v[2].saturating_sub(1)..=(v[2] + 1).min(dims[2] - 1) {
                let w = [x, y, z];
                let manhattan: usize = (0..3).map(|a| v[a].abs_diff(w[a])).sum();
                let ok = match adjacency {
                    Adjacency::Six => manhattan == 1,
                    Adjacency::TwentySix => manhattan >= 1,
                };
                if ok {
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Link strength exactly as stored by the library: affinity in f64 from
/// the f32 intensities, rounded to f32.
pub fn link(volume: &HuVolume, params: &AffinityParams, a: Voxel, b: Voxel) -> f32 {
    let (fa, fb) = (volume.at(a) as f64, volume.at(b) as f64);
    let dev = (fa + fb) / 2.0 - params.mean_hu;
    (-(dev * dev) / (2.0 * params.sigma_hu * params.sigma_hu)).exp() as f32
}

fn voxels(dims: [usize; 3]) -> Vec<Voxel> {
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                out.push([x, y, z]);
            }
        }
    }
    out
}

fn flat(dims: [usize; 3], v: Voxel) -> usize {
    v[0] + dims[0] * (v[1] + dims[1] * v[2])
}

/// Max-min connectivity by enumerating every simple path from the seeds.
/// Exponential; only for grids of a few dozen voxels.
pub fn fc_all_simple_paths(
    volume: &HuVolume,
    seeds: &[Voxel],
    params: &AffinityParams,
    domain: &BinaryMask,
) -> Vec<f32> {
    let dims = volume.geometry().dims;
    let mut best = vec![0f32; volume.geometry().len()];
    let mut on_path = vec![false; best.len()];
    fn walk(
        v: Voxel,
        m: f32,
        ctx: (&HuVolume, &AffinityParams, &BinaryMask, [usize; 3]),
        best: &mut [f32],
        on_path: &mut [bool],
    ) {
        let (volume, params, domain, dims) = ctx;
        let i = flat(dims, v);
        best[i] = best[i].max(m);
        on_path[i] = true;
        for w in neighbors(dims, v, params.adjacency) {
            let j = flat(dims, w);
            if !on_path[j] && domain.get(w) {
                walk(w, m.min(link(volume, params, v, w)), ctx, best, on_path);
            }
        }
        on_path[i] = false;
    }
    for &s in seeds {
        walk(s, 1.0, (volume, params, domain, dims), &mut best, &mut on_path);
    }
    best
}

/// Max-min connectivity by depth-first search over simple paths, cutting a
/// branch only when it reaches a voxel no stronger than a path already
/// found there (such a branch cannot improve any voxel).
pub fn fc_simple_paths_bounded(
    volume: &HuVolume,
    seeds: &[Voxel],
    params: &AffinityParams,
    domain: &BinaryMask,
) -> Vec<f32> {
    let dims = volume.geometry().dims;
    let n = volume.geometry().len();
    let mut best = vec![0f32; n];
    let mut on_path = vec![false; n];
    // explicit stack: (voxel, path min, next neighbor to try)
    for &s in seeds {
        best[flat(dims, s)] = 1.0;
    }
    for &s in seeds {
        let mut stack: Vec<(Voxel, f32, Vec<Voxel>)> =
            vec![(s, 1.0, neighbors(dims, s, params.adjacency))];
        on_path[flat(dims, s)] = true;
        while let Some((v, m, pending)) = stack.last_mut() {
            let (v, m) = (*v, *m);
            match pending.pop() {
                None => {
                    on_path[flat(dims, v)] = false;
                    stack.pop();
                }
                Some(w) => {
                    let j = flat(dims, w);
                    if on_path[j] || !domain.get(w) {
                        continue;
                    }
                    let mw = m.min(link(volume, params, v, w));
                    if mw <= best[j] {
                        continue;
                    }
                    best[j] = mw;
                    on_path[j] = true;
                    stack.push((w, mw, neighbors(dims, w, params.adjacency)));
                }
            }
        }
    }
    best
}

/// Max-min connectivity from a maximum spanning forest: adding links in
/// decreasing strength, a voxel's connectivity is the strength of the link
/// that first joins it to the seeds' component.
pub fn fc_spanning_forest(
    volume: &HuVolume,
    seeds: &[Voxel],
    params: &AffinityParams,
    domain: &BinaryMask,
) -> Vec<f32> {
    let dims = volume.geometry().dims;
    let n = volume.geometry().len();
    let mut edges = Vec::new();
    for v in voxels(dims) {
        if !domain.get(v) {
            continue;
        }
        for w in neighbors(dims, v, params.adjacency) {
            if flat(dims, w) > flat(dims, v) && domain.get(w) {
                edges.push((link(volume, params, v, w), flat(dims, v), flat(dims, w)));
            }
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut strength = vec![0f32; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let root0 = flat(dims, seeds[0]);
    for &s in seeds {
        let (a, b) = (find(&mut parent, root0), find(&mut parent, flat(dims, s)));
        if a != b {
            parent[b] = a;
            let moved = std::mem::take(&mut members[b]);
            members[a].extend(moved);
        }
    }
    for i in &members[find(&mut parent, root0)] {
        strength[*i] = 1.0;
    }
    for (k, a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            continue;
        }
        let seed_root = find(&mut parent, root0);
        let joining = if ra == seed_root {
            Some(rb)
        } else if rb == seed_root {
            Some(ra)
        } else {
            None
        };
        if let Some(other) = joining {
            for i in &members[other] {
                strength[*i] = k;
            }
        }
        let (big, small) = if members[ra].len() >= members[rb].len() { (ra, rb) } else { (rb, ra) };
        parent[small] = big;
        let moved = std::mem::take(&mut members[small]);
        members[big].extend(moved);
    }
    strength
}
