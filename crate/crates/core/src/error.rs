use std::path::PathBuf;

use crate::geometry::Voxel;
use crate::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("no body found: largest above-threshold component covers {fraction:.4} of the grid")]
    NoBodyFound { fraction: f64 },
    #[error("no candidate lung region in the parenchyma band")]
    NoCandidateRegion,
    #[error("no candidate region on the {0} side; a manual seed is required")]
    MissingSide(Side),
    #[error("voxel {0:?} is outside the volume bounds")]
    OutOfBounds(Voxel),

    #[error("seed {0:?} lies outside the connectivity domain")]
    SeedOutsideDomain(Voxel),
    #[error("connectivity threshold must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("invalid affinity parameters: {0}")]
    InvalidParams(String),
    #[error("segmentation produced no seed-connected voxels{}", side_suffix(.0))]
    EmptyResult(Option<Side>),

    #[error("stroke mode {0} is not valid for this operation")]
    WrongMode(crate::edit::StrokeMode),
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
    #[error("edit record is not the most recent edit")]
    StaleRecord,

    #[error("mask geometries differ")]
    GeometryMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("incomplete volume table: {0}")]
    IncompleteTable(String),
    #[error("method {0} has constant volumes")]
    ConstantSeries(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("slice index {index} out of range for {plane} plane with {len} slices")]
    IndexOutOfRange {
        plane: crate::Plane,
        index: usize,
        len: usize,
    },
    #[error("window width must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("png encoding failed: {0}")]
    Png(String),
}

fn side_suffix(side: &Option<Side>) -> String {
    match side {
        Some(s) => format!(" on the {s} side"),
        None => String::new(),
    }
}

impl Error {
    /// Stable snake_case identifier, used in CLI stderr lines and service payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "file_not_found",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::CorruptHeader(_) => "corrupt_header",
            Error::Io(_) => "io_error",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::NoBodyFound { .. } => "no_body_found",
            Error::NoCandidateRegion => "no_candidate_region",
            Error::MissingSide(_) => "missing_side",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::SeedOutsideDomain(_) => "seed_outside_domain",
            Error::InvalidTheta(_) => "invalid_theta",
            Error::InvalidParams(_) => "invalid_params",
            Error::EmptyResult(_) => "empty_result",
            Error::WrongMode(_) => "wrong_mode",
            Error::InvalidStroke(_) => "invalid_stroke",
            Error::StaleRecord => "stale_record",
            Error::GeometryMismatch => "geometry_mismatch",
            Error::EmptyInput => "empty_input",
            Error::IncompleteTable(_) => "incomplete_table",
            Error::ConstantSeries(_) => "constant_series",
            Error::Csv(_) => "csv_error",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidWindow(_) => "invalid_window",
            Error::Png(_) => "png_error",
        }
    }
}
