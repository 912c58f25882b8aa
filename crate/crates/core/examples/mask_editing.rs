//! Paint corrections onto a mask with add and delete strokes in different
//! planes, then undo them one at a time.
//!
//! cargo run -p lungseg --example mask_editing

use lungseg::edit::{EditHistory, Stroke, StrokeMode};
use lungseg::metrics::volume_ml;
use lungseg::{BinaryMask, Plane, VolumeGeometry};

fn main() -> lungseg::Result<()> {
    let g = VolumeGeometry::new([64, 64, 32], [0.7, 0.7, 2.5]);
    let mut mask = BinaryMask::from_fn(g, |v| {
        (v[0] as f64 - 32.0).powi(2) + (v[1] as f64 - 32.0).powi(2) < 200.0
    });
    let mut history = EditHistory::new();
    println!("start: {:.2} mL", volume_ml(&mask));

    let strokes = [
        Stroke {
            plane: Plane::Axial,
            slice_index: 16,
            points: vec![[10.0, 10.0], [30.0, 20.0]],
            radius_px: 3,
            mode: StrokeMode::Add,
        },
        Stroke {
            plane: Plane::Coronal,
            slice_index: 32,
            points: vec![[20.0, 4.0], [44.0, 28.0]],
            radius_px: 2,
            mode: StrokeMode::Delete,
        },
        Stroke {
            plane: Plane::Sagittal,
            slice_index: 55,
            points: vec![[32.0, 16.0]],
            radius_px: 5,
            mode: StrokeMode::Add,
        },
    ];
    for s in &strokes {
        let (id, record) = history.apply(&mut mask, s)?;
        println!("edit {id}: {} {} stroke changed {} voxels -> {:.2} mL", s.plane, s.mode, record.changed(), volume_ml(&mask));
    }
    while let Some(record) = history.undo(&mut mask, None)? {
        println!("undo {} voxels -> {:.2} mL", record.changed(), volume_ml(&mask));
    }
    Ok(())
}
