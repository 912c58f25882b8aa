//! Read a NIfTI-1 or ANALYZE volume, print its geometry, and write a
//! thresholded mask next to it.
//!
//! cargo run -p lungseg --example nifti_roundtrip -- scan.nii.gz [out.nii.gz]

use lungseg::io::{load_mask, load_volume, save_mask};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::BinaryMask;

fn main() -> lungseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = std::env::temp_dir();
    let input = match args.next() {
        Some(p) => p.into(),
        None => {
            // no input given: write a phantom to read back
            let p = dir.join("lungseg_phantom.nii.gz");
            let phantom = generate_thorax_phantom(&PhantomSpec::cube(64, 30.0, 1))?;
            lungseg::io::save_volume(&phantom.volume, &p)?;
            p
        }
    };
    let output = args.next().map(Into::into).unwrap_or_else(|| dir.join("lungseg_air.nii.gz"));

    let volume = load_volume(&input)?;
    let g = volume.geometry();
    let (lo, hi) = volume.min_max();
    let codes: String = g.axis_codes().iter().map(|d| d.code()).collect();
    println!("{}: dims {:?}, spacing {:?} mm, orientation {codes}", input.display(), g.dims, g.spacing);
    println!("HU range [{lo}, {hi}]");

    let air = BinaryMask::from_fn(g.clone(), |v| volume.at(v) < -400.0);
    save_mask(&air, &output)?;
    let back = load_mask(&output, None)?;
    assert_eq!(back.bits(), air.bits());
    println!("wrote {} ({} voxels below -400 HU)", output.display(), air.count());
    Ok(())
}
