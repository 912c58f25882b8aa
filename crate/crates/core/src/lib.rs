//! Lung field annotation for thoracic CT: automatic seed detection, fuzzy
//! connectedness segmentation, stroke-based mask editing, evaluation
//! metrics and synthetic phantoms.
//!
//! ```no_run
//! use lungseg::{fc, io, metrics};
//!
//! let volume = io::load_volume("chest.nii.gz")?;
//! let result = fc::segment_auto(&volume, &fc::AffinityParams::default(), fc::DEFAULT_THETA)?;
//! println!("left {:.1} mL", metrics::volume_ml(&result.left_mask));
//! io::save_labels(volume.geometry(), &result.side_labels(), "lungs.nii.gz")?;
//! # Ok::<(), lungseg::Error>(())
//! ```

pub mod edit;
pub mod error;
pub mod fc;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod render;
pub mod seeds;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{Direction, Plane, Side, VolumeGeometry, Voxel};
pub use morphology::Adjacency;
pub use volume::{BinaryMask, HuVolume, MaskLabel};
