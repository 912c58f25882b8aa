//! Overlap summary and volume correlation reports on synthetic data: noisy
//! phantoms segmented by fuzzy connectedness and by a plain HU threshold,
//! both compared with the known truth.
//!
//! cargo run --release -p lungseg --example evaluation_reports

use lungseg::fc::{segment_auto, AffinityParams, DEFAULT_THETA};
use lungseg::metrics::*;
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::seeds::extract_body_mask;
use lungseg::{BinaryMask, Side};

fn main() -> lungseg::Result<()> {
    let mut cases = Vec::new();
    let mut volumes = Vec::new();
    for seed in 0..6u64 {
        let size = 64 + 8 * seed as usize;
        let p = generate_thorax_phantom(&PhantomSpec::cube(size, 90.0, seed))?;
        let case_id = format!("case{seed}");
        let fc = segment_auto(&p.volume, &AffinityParams::default(), DEFAULT_THETA)?;
        let body = extract_body_mask(&p.volume)?;
        let threshold = BinaryMask::from_fn(p.volume.geometry().clone(), |v| {
            body.get(v) && (-700.0..=-400.0).contains(&p.volume.at(v))
        });
        for side in [Side::Left, Side::Right] {
            let truth = p.truth(side);
            cases.push(CaseOverlap {
                case_id: case_id.clone(),
                object: format!("{side} lung"),
                overlap: overlap_coefficient(fc.mask(side), truth)?,
                dice: dice_coefficient(fc.mask(side), truth)?,
            });
            let by_threshold = threshold.intersection(truth)?;
            cases.push(CaseOverlap {
                case_id: case_id.clone(),
                object: format!("{side} (threshold)"),
                overlap: overlap_coefficient(&by_threshold, truth)?,
                dice: dice_coefficient(&by_threshold, truth)?,
            });
        }
        for (method, ml) in [
            ("truth", volume_ml(&p.truth_left) + volume_ml(&p.truth_right)),
            ("fc", volume_ml(&fc.combined_mask)),
            ("threshold", volume_ml(&threshold)),
        ] {
            volumes.push(VolumeRecord {
                case_id: case_id.clone(),
                method: method.into(),
                volume_ml: ml,
            });
        }
    }
    print!("{}", format_overlap_table(&summarize_by_object(&cases)?));
    println!();
    print!("{}", format_correlation_table(&pearson_correlation_matrix(&volumes)?));
    Ok(())
}
