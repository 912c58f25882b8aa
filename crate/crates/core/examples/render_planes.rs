//! Render the central axial, coronal and sagittal slices of a segmented
//! phantom as PNG files with the mask overlay.
//!
//! cargo run -p lungseg --example render_planes -- [out_dir]

use lungseg::fc::{segment_auto, AffinityParams, DEFAULT_THETA};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::render::{render_slice, DEFAULT_WINDOW_CENTER, DEFAULT_WINDOW_WIDTH};
use lungseg::Plane;

fn main() -> lungseg::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let p = generate_thorax_phantom(&PhantomSpec::cube(96, 50.0, 2))?;
    let result = segment_auto(&p.volume, &AffinityParams::default(), DEFAULT_THETA)?;
    for plane in Plane::ALL {
        let index = p.volume.geometry().slice_count(plane) / 2;
        let image = render_slice(
            &p.volume,
            Some(&result.combined_mask),
            plane,
            index,
            DEFAULT_WINDOW_CENTER,
            DEFAULT_WINDOW_WIDTH,
        )?;
        let path = std::path::Path::new(&out).join(format!("lungseg_{plane}.png"));
        std::fs::write(&path, image.to_png()?)?;
        println!("{} ({}x{})", path.display(), image.width, image.height);
    }
    Ok(())
}
