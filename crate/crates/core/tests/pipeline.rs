mod common;

use lungseg::fc::{segment_auto, AffinityParams, DEFAULT_THETA};
use lungseg::metrics::dice_coefficient;
use lungseg::morphology::{for_each_neighbor, Adjacency};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::seeds::*;
use lungseg::{BinaryMask, HuVolume, Side};

fn dilate(mask: &BinaryMask) -> BinaryMask {
    let g = mask.geometry();
    let mut out = mask.clone();
    for i in mask.iter_set() {
        for_each_neighbor(g, Adjacency::Six, g.voxel(i), |n| out.set_index(n, true));
    }
    out
}

fn mirrored(volume: &HuVolume) -> HuVolume {
    let g = volume.geometry();
    let values = (0..g.len())
        .map(|i| volume.at(mirror_voxel(g, g.voxel(i))))
        .collect();
    HuVolume::new(g.clone(), values).unwrap()
}

#[test]
fn rasterized_lungs_match_analytic_volume() {
    let spec = PhantomSpec::cube(128, 0.0, 0);
    let p = generate_thorax_phantom(&spec).unwrap();
    let analytic = spec.layout().lung_volume_mm3();
    for side in [Side::Left, Side::Right] {
        let got = p.truth(side).count() as f64 * spec.geometry().voxel_volume_mm3();
        assert!((got - analytic).abs() / analytic < 0.02, "{side}: {got} vs {analytic}");
    }
}

#[test]
fn lung_intensity_mean_is_unbiased() {
    let spec = PhantomSpec::cube(64, 50.0, 21);
    let p = generate_thorax_phantom(&spec).unwrap();
    let lungs = p.truth_left.union(&p.truth_right).unwrap();
    let n = lungs.count() as f64;
    let mean = lungs.iter_set().map(|i| p.volume.values()[i] as f64).sum::<f64>() / n;
    assert!((mean - spec.lung_mean_hu).abs() < 3.0 * spec.lung_noise_sd / n.sqrt());
}

#[test]
fn auto_seeds_are_plausible_lateral_and_deterministic() {
    for rng_seed in 0..3 {
        let p = generate_thorax_phantom(&PhantomSpec::cube(72, 50.0, rng_seed)).unwrap();
        let (seeds, body) = auto_seeds(&p.volume).unwrap();
        let (again, _) = auto_seeds(&p.volume).unwrap();
        assert_eq!(seeds, again);
        let centroid = body.centroid().unwrap();
        for side in [Side::Left, Side::Right] {
            assert!(!seeds.side(side).is_empty());
            for &v in seeds.side(side) {
                let hu = p.volume.at(v);
                assert!((-700.0..=-400.0).contains(&hu), "{hu}");
                assert!(p.truth(side).get(v));
                assert_eq!(p.volume.geometry().side_of(v[0] as f64, centroid[0]), side);
                assert_ne!(v[0] as f64, centroid[0]);
            }
        }
    }
}

#[test]
fn seeds_are_the_brute_force_minimum_of_the_selected_region() {
    let p = generate_thorax_phantom(&PhantomSpec::cube(64, 50.0, 5)).unwrap();
    let body = extract_body_mask(&p.volume).unwrap();
    let ribs = extract_rib_cage(&p.volume, &body);
    let regions = candidate_regions(&p.volume, &body, &ribs).unwrap();
    let seeds = select_seeds(&regions).unwrap();
    let g = p.volume.geometry();
    for side in [Side::Left, Side::Right] {
        let region = most_robust_region(&regions, side).unwrap();
        let min = region
            .mask
            .iter_set()
            .map(|i| p.volume.values()[i])
            .fold(f32::INFINITY, f32::min);
        let mut at_min: Vec<_> = region
            .mask
            .iter_set()
            .filter(|&i| p.volume.values()[i] == min)
            .map(|i| g.voxel(i))
            .collect();
        at_min.sort();
        at_min.truncate(MAX_SEEDS_PER_SIDE);
        assert_eq!(seeds.side(side), &at_min[..]);
    }
}

#[test]
fn mirroring_swaps_seed_sides() {
    let p = generate_thorax_phantom(&PhantomSpec::cube(64, 50.0, 8)).unwrap();
    let g = p.volume.geometry();
    let (seeds, _) = auto_seeds(&p.volume).unwrap();
    let (flipped, _) = auto_seeds(&mirrored(&p.volume)).unwrap();
    for side in [Side::Left, Side::Right] {
        let mut expect: Vec<_> = seeds.side(side).iter().map(|&v| mirror_voxel(g, v)).collect();
        expect.sort();
        let mut got = flipped.side(side.opposite()).to_vec();
        got.sort();
        assert_eq!(got, expect);
    }
}

#[test]
fn noisy_phantom_candidates_stay_near_truth() {
    let p = generate_thorax_phantom(&PhantomSpec::cube(64, 50.0, 2)).unwrap();
    let body = extract_body_mask(&p.volume).unwrap();
    let ribs = extract_rib_cage(&p.volume, &body);
    let regions = candidate_regions(&p.volume, &body, &ribs).unwrap();
    assert!(regions.len() >= 2);
    let largest_left = regions.iter().find(|r| r.side == Side::Left).unwrap();
    assert!(largest_left.mask.is_subset_of(&dilate(&p.truth_left)).unwrap());
}

#[test]
fn one_click_segmentation_recovers_both_lungs() {
    let p = generate_thorax_phantom(&PhantomSpec::cube(64, 50.0, 4)).unwrap();
    let result = segment_auto(&p.volume, &AffinityParams::default(), DEFAULT_THETA).unwrap();
    for side in [Side::Left, Side::Right] {
        assert_eq!(result.mask(side).geometry(), p.volume.geometry());
        assert!(dice_coefficient(result.mask(side), p.truth(side)).unwrap() >= 0.98);
    }
    let (i, l, r) = result.left_mask.overlap_counts(&result.right_mask).unwrap();
    assert_eq!(i, 0);
    assert_eq!(result.combined_mask.count(), l + r);
}
