//! Fuzzy connectedness on a small synthetic volume: two low-density blobs
//! joined by a thin bridge, seeded in one blob. Prints the strength along
//! the bridge and the mask size at several thresholds.
//!
//! cargo run -p lungseg --example connectivity_scene

use lungseg::fc::{compute_connectivity, threshold_scene, AffinityParams};
use lungseg::{BinaryMask, HuVolume, VolumeGeometry};

fn main() -> lungseg::Result<()> {
    let g = VolumeGeometry::new([40, 20, 20], [1.0; 3]);
    let blob = |v: [usize; 3], cx: f64| {
        let d2 = (v[0] as f64 - cx).powi(2) + (v[1] as f64 - 10.0).powi(2) + (v[2] as f64 - 10.0).powi(2);
        d2 <= 36.0
    };
    let values = (0..g.len())
        .map(|i| {
            let v = g.voxel(i);
            if blob(v, 10.0) || blob(v, 30.0) {
                -560.0
            } else if v[1] == 10 && v[2] == 10 {
                // bridge with a denser middle section
                if (18..=22).contains(&v[0]) { -350.0 } else { -500.0 }
            } else {
                20.0
            }
        })
        .collect();
    let volume = HuVolume::new(g.clone(), values)?;
    let domain = BinaryMask::full(g);
    let scene = compute_connectivity(&volume, &[[10, 10, 10]], &AffinityParams::default(), &domain)?;

    print!("strength along bridge:");
    for x in (10..=30).step_by(2) {
        print!(" {:.3}", scene.at([x, 10, 10]));
    }
    println!();
    for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mask = threshold_scene(&scene, theta)?;
        println!("theta {theta:.1}: {:>5} voxels", mask.count());
    }
    Ok(())
}
