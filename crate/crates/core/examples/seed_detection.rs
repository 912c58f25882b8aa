//! Show the intermediate steps of automatic seed detection: body mask, rib
//! hull, candidate regions and the chosen seeds.
//!
//! cargo run -p lungseg --example seed_detection -- [scan.nii.gz]

use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::seeds::{candidate_regions, extract_body_mask, extract_rib_cage, select_seeds, RibHull};
use lungseg::Side;

fn main() -> lungseg::Result<()> {
    let volume = match std::env::args().nth(1) {
        Some(path) => lungseg::io::load_volume(path)?,
        None => generate_thorax_phantom(&PhantomSpec::cube(96, 50.0, 3))?.volume,
    };
    let body = extract_body_mask(&volume)?;
    let ribs = extract_rib_cage(&volume, &body);
    let hull = RibHull::from_ribs(&ribs);
    println!(
        "body {} voxels, bone {} voxels, hull on {} axial slices",
        body.count(),
        ribs.count(),
        hull.constrained_slices()
    );

    let regions = candidate_regions(&volume, &body, &ribs)?;
    for (k, r) in regions.iter().enumerate() {
        println!(
            "region {k}: {:>5} side, {:>7} voxels, centroid [{:.1}, {:.1}, {:.1}], min {} HU at {} location(s)",
            r.side.to_string(),
            r.voxel_count,
            r.centroid[0],
            r.centroid[1],
            r.centroid[2],
            r.min_hu,
            r.min_hu_locations.len()
        );
    }
    let seeds = select_seeds(&regions)?;
    for side in [Side::Left, Side::Right] {
        println!("{side} seeds: {:?}", seeds.side(side));
    }
    Ok(())
}
