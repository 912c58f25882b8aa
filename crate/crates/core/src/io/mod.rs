//! Volume and mask file I/O.

pub mod nifti;

pub use nifti::{
    decode_volume, encode_mask, encode_volume, load_mask, load_volume, save_labels, save_mask,
    save_volume, Datatype, NiftiHeader,
};
