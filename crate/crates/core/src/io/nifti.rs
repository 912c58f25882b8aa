//! NIfTI-1 and ANALYZE 7.5 reading and writing.
//!
//! Reading sniffs gzip by content and the container by the header magic:
//! `n+1\0` is a single `.nii` file, `ni1\0` a `.hdr`/`.img` pair, and a
//! header with neither magic but a valid `sizeof_hdr` is treated as a
//! plain ANALYZE 7.5 pair. Byte order is detected from `sizeof_hdr`.
//!
//! Writing always produces little-endian NIfTI-1, gzip-compressed iff the
//! path ends in `.gz`, and a `.hdr`/`.img` pair when the path names one.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::geometry::VolumeGeometry;
use crate::volume::{BinaryMask, HuVolume};

pub const HEADER_SIZE: usize = 348;
/// Data offset of single-file output: header plus the 4-byte extension flag.
pub const SINGLE_FILE_DATA_OFFSET: usize = 352;

const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Datatype {
    U8,
    I16,
    I32,
    F32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I16 => 4,
            Datatype::I32 => 8,
            Datatype::F32 => 16,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(Datatype::U8),
            4 => Some(Datatype::I16),
            8 => Some(Datatype::I32),
            16 => Some(Datatype::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::U8 => 1,
            Datatype::I16 => 2,
            Datatype::I32 | Datatype::F32 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Container {
    Single,
    Pair,
    Analyze,
}

/// The header fields this crate reads or writes.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
    pub big_endian: bool,
}

struct Fields<'a> {
    buf: &'a [u8],
    big_endian: bool,
}

impl Fields<'_> {
    fn bytes<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[at..at + N]);
        b
    }
    fn i16(&self, at: usize) -> i16 {
        let b = self.bytes::<2>(at);
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }
    fn f32(&self, at: usize) -> f32 {
        let b = self.bytes::<4>(at);
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

impl NiftiHeader {
    /// Header for an axis-aligned or oriented grid, with identity scaling.
    pub fn for_geometry(geometry: &VolumeGeometry, datatype: Datatype, pair: bool) -> Self {
        let mut dim = [1i16; 8];
        dim[0] = 3;
        for a in 0..3 {
            dim[a + 1] = geometry.dims[a] as i16;
        }
        let mut pixdim = [0f32; 8];
        pixdim[0] = 1.0;
        for a in 0..3 {
            pixdim[a + 1] = geometry.spacing[a] as f32;
        }
        let affine = geometry.affine();
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = affine[r][c] as f32;
            }
        }
        NiftiHeader {
            dim,
            datatype: datatype.code(),
            bitpix: (datatype.size() * 8) as i16,
            pixdim,
            vox_offset: if pair { 0.0 } else { SINGLE_FILE_DATA_OFFSET as f32 },
            scl_slope: 1.0,
            scl_inter: 0.0,
            xyzt_units: 2,
            qform_code: 0,
            sform_code: 1,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow,
            magic: if pair { *MAGIC_PAIR } else { *MAGIC_SINGLE },
            big_endian: false,
        }
    }

    /// Parses the first 348 bytes of `buf`.
    pub fn parse(buf: &[u8]) -> Result<Self> {
        if buf.len() < HEADER_SIZE {
            return Err(Error::UnsupportedFormat(format!(
                "file too short for a NIfTI/ANALYZE header ({} bytes)",
                buf.len()
            )));
        }
        let le = i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let be = i32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let big_endian = match (le, be) {
            (348, _) => false,
            (_, 348) => true,
            (540, _) | (_, 540) => {
                return Err(Error::UnsupportedFormat("NIfTI-2 is not supported".into()))
            }
            _ => {
                return Err(Error::CorruptHeader(format!(
                    "sizeof_hdr is {le}, expected 348"
                )))
            }
        };
        let f = Fields { buf, big_endian };
        let mut dim = [0i16; 8];
        for (i, d) in dim.iter_mut().enumerate() {
            *d = f.i16(40 + 2 * i);
        }
        let mut pixdim = [0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = f.f32(76 + 4 * i);
        }
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f.f32(280 + 16 * r + 4 * c);
            }
        }
        Ok(NiftiHeader {
            dim,
            datatype: f.i16(70),
            bitpix: f.i16(72),
            pixdim,
            vox_offset: f.f32(108),
            scl_slope: f.f32(112),
            scl_inter: f.f32(116),
            xyzt_units: buf[123],
            qform_code: f.i16(252),
            sform_code: f.i16(254),
            quatern: [f.f32(256), f.f32(260), f.f32(264)],
            qoffset: [f.f32(268), f.f32(272), f.f32(276)],
            srow,
            magic: f.bytes::<4>(344),
            big_endian,
        })
    }

    /// Little-endian 348-byte encoding.
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        let mut b = [0u8; HEADER_SIZE];
        let put = |b: &mut [u8; HEADER_SIZE], at: usize, bytes: &[u8]| {
            b[at..at + bytes.len()].copy_from_slice(bytes)
        };
        put(&mut b, 0, &(HEADER_SIZE as i32).to_le_bytes());
        b[38] = b'r';
        for (i, d) in self.dim.iter().enumerate() {
            put(&mut b, 40 + 2 * i, &d.to_le_bytes());
        }
        put(&mut b, 70, &self.datatype.to_le_bytes());
        put(&mut b, 72, &self.bitpix.to_le_bytes());
        for (i, p) in self.pixdim.iter().enumerate() {
            put(&mut b, 76 + 4 * i, &p.to_le_bytes());
        }
        put(&mut b, 108, &self.vox_offset.to_le_bytes());
        put(&mut b, 112, &self.scl_slope.to_le_bytes());
        put(&mut b, 116, &self.scl_inter.to_le_bytes());
        b[123] = self.xyzt_units;
        put(&mut b, 148, b"lungseg");
        put(&mut b, 252, &self.qform_code.to_le_bytes());
        put(&mut b, 254, &self.sform_code.to_le_bytes());
        for i in 0..3 {
            put(&mut b, 256 + 4 * i, &self.quatern[i].to_le_bytes());
            put(&mut b, 268 + 4 * i, &self.qoffset[i].to_le_bytes());
        }
        for (r, row) in self.srow.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                put(&mut b, 280 + 16 * r + 4 * c, &v.to_le_bytes());
            }
        }
        put(&mut b, 344, &self.magic);
        b
    }

    fn container(&self) -> Result<Container> {
        match &self.magic {
            m if m == MAGIC_SINGLE => Ok(Container::Single),
            m if m == MAGIC_PAIR => Ok(Container::Pair),
            [b'n', b'+' | b'i', ..] => Err(Error::UnsupportedFormat(format!(
                "unknown NIfTI magic {:?}",
                String::from_utf8_lossy(&self.magic)
            ))),
            _ => Ok(Container::Analyze),
        }
    }

    fn geometry(&self) -> Result<VolumeGeometry> {
        let ndim = self.dim[0];
        if !(1..=7).contains(&ndim) {
            return Err(Error::CorruptHeader(format!("dim[0] is {ndim}")));
        }
        let ndim = ndim as usize;
        let mut dims = [1usize; 3];
        for a in 0..3 {
            if a < ndim {
                let d = self.dim[a + 1];
                if d < 1 {
                    return Err(Error::CorruptHeader(format!("dim[{}] is {d}", a + 1)));
                }
                dims[a] = d as usize;
            }
        }
        if (4..=ndim).any(|a| self.dim[a] > 1) {
            return Err(Error::UnsupportedFormat(format!(
                "{ndim}-D volumes are not supported"
            )));
        }
        let mut spacing = [1.0f64; 3];
        for a in 0..ndim.min(3) {
            let s = self.pixdim[a + 1].abs() as f64;
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::CorruptHeader(format!(
                    "pixdim[{}] is {}",
                    a + 1,
                    self.pixdim[a + 1]
                )));
            }
            spacing[a] = s;
        }

        let mut geometry = VolumeGeometry::new(dims, spacing);
        if self.sform_code > 0 {
            for a in 0..3 {
                let col = [
                    self.srow[0][a] as f64,
                    self.srow[1][a] as f64,
                    self.srow[2][a] as f64,
                ];
                let norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 0.0 && norm.is_finite() {
                    geometry.direction[a] = col.map(|c| c / norm);
                }
            }
            geometry.origin = [
                self.srow[0][3] as f64,
                self.srow[1][3] as f64,
                self.srow[2][3] as f64,
            ];
        } else if self.qform_code > 0 {
            geometry.direction = quaternion_direction(self.quatern, self.pixdim[0]);
            geometry.origin = self.qoffset.map(|o| o as f64);
        }
        if !geometry.origin.iter().all(|o| o.is_finite()) {
            return Err(Error::CorruptHeader("non-finite origin".into()));
        }
        if geometry.is_oblique() {
            log::warn!(
                "oblique orientation; axis codes taken from the dominant direction: {:?}",
                geometry.axis_codes()
            );
        }
        Ok(geometry)
    }

    /// Affine calibration `(slope, intercept)`; a zero or non-finite slope
    /// leaves raw values unchanged.
    pub fn calibration(&self) -> (f32, f32) {
        if self.scl_slope != 0.0 && self.scl_slope.is_finite() {
            let inter = if self.scl_inter.is_finite() {
                self.scl_inter
            } else {
                0.0
            };
            (self.scl_slope, inter)
        } else {
            (1.0, 0.0)
        }
    }
}

/// Rotation columns from the NIfTI quaternion parameters `(b, c, d)`.
fn quaternion_direction(q: [f32; 3], qfac: f32) -> [[f64; 3]; 3] {
    let (b, c, d) = (q[0] as f64, q[1] as f64, q[2] as f64);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let r = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    let flip = if qfac < 0.0 { -1.0 } else { 1.0 };
    let mut cols = [[0.0; 3]; 3];
    for (axis, col) in cols.iter_mut().enumerate() {
        let sign = if axis == 2 { flip } else { 1.0 };
        for row in 0..3 {
            col[row] = r[row][axis] * sign;
        }
    }
    cols
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    gunzip_if_needed(raw)
}

/// Decompresses `raw` when it starts with the gzip magic.
pub fn gunzip_if_needed(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::with_capacity(raw.len() * 4);
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::UnsupportedFormat(format!("bad gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Splits `name` into its stem and whether it carried `.gz`, when it ends in
/// `.{ext}` or `.{ext}.gz` (case-insensitive).
fn strip_ext<'a>(name: &'a str, ext: &str) -> Option<(&'a str, bool)> {
    let lower = name.to_ascii_lowercase();
    if lower.ends_with(&format!(".{ext}.gz")) {
        Some((&name[..name.len() - ext.len() - 4], true))
    } else if lower.ends_with(&format!(".{ext}")) {
        Some((&name[..name.len() - ext.len() - 1], false))
    } else {
        None
    }
}

/// Existing `.{to}` or `.{to}.gz` sibling of a `.{from}` path, defaulting
/// to the plain name when neither exists.
fn sibling(path: &Path, from: &str, to: &str) -> Option<PathBuf> {
    let name = file_name(path);
    let (stem, _) = strip_ext(&name, from)?;
    [format!("{stem}.{to}"), format!("{stem}.{to}.gz")]
        .into_iter()
        .map(|n| path.with_file_name(n))
        .find(|p| p.exists())
        .or_else(|| Some(path.with_file_name(format!("{stem}.{to}"))))
}

/// Loads a CT volume and calibrates it to Hounsfield units.
pub fn load_volume(path: impl AsRef<Path>) -> Result<HuVolume> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let lower = file_name(path).to_ascii_lowercase();
    let header_path = if lower.ends_with(".img") || lower.ends_with(".img.gz") {
        sibling(path, "img", "hdr").unwrap_or_else(|| path.to_path_buf())
    } else {
        path.to_path_buf()
    };
    let bytes = read_maybe_gz(&header_path)?;
    let header = NiftiHeader::parse(&bytes)?;
    match header.container()? {
        Container::Single => decode_data(&header, &bytes, header.vox_offset),
        Container::Pair | Container::Analyze => {
            let img_path = sibling(&header_path, "hdr", "img").ok_or_else(|| {
                Error::UnsupportedFormat(format!(
                    "{} has a paired-file header but no .hdr extension",
                    header_path.display()
                ))
            })?;
            let data = read_maybe_gz(&img_path)?;
            decode_data(&header, &data, header.vox_offset)
        }
    }
}

/// Decodes an in-memory single-file NIfTI-1 image, gzipped or not.
pub fn decode_volume(bytes: &[u8]) -> Result<HuVolume> {
    let bytes = gunzip_if_needed(bytes.to_vec())?;
    let header = NiftiHeader::parse(&bytes)?;
    match header.container()? {
        Container::Single => decode_data(&header, &bytes, header.vox_offset),
        _ => Err(Error::UnsupportedFormat(
            "paired .hdr/.img images cannot be decoded from a single buffer".into(),
        )),
    }
}

fn decode_data(header: &NiftiHeader, buf: &[u8], offset: f32) -> Result<HuVolume> {
    let geometry = header.geometry()?;
    let datatype = Datatype::from_code(header.datatype).ok_or_else(|| {
        Error::UnsupportedFormat(format!("unsupported datatype code {}", header.datatype))
    })?;
    if !(offset.is_finite() && offset >= 0.0) {
        return Err(Error::CorruptHeader(format!("vox_offset is {offset}")));
    }
    let offset = offset as usize;
    let n = geometry.len();
    let needed = n * datatype.size();
    let data = buf
        .get(offset..)
        .filter(|d| d.len() >= needed)
        .ok_or_else(|| {
            Error::CorruptHeader(format!(
                "data section holds {} bytes, {} needed",
                buf.len().saturating_sub(offset),
                needed
            ))
        })?;
    let (slope, inter) = header.calibration();
    let be = header.big_endian;
    let raw: Vec<f32> = match datatype {
        Datatype::U8 => data[..n].iter().map(|&v| v as f32).collect(),
        Datatype::I16 => data[..needed]
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                (if be { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) }) as f32
            })
            .collect(),
        Datatype::I32 => data[..needed]
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                (if be { i32::from_be_bytes(b) } else { i32::from_le_bytes(b) }) as f32
            })
            .collect(),
        Datatype::F32 => data[..needed]
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                if be {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect(),
    };
    let values = if (slope, inter) == (1.0, 0.0) {
        raw
    } else {
        raw.into_iter().map(|v| slope * v + inter).collect()
    };
    HuVolume::new(geometry, values)
}

/// Loads a mask; voxels equal to `label` (or any nonzero voxel) are set.
pub fn load_mask(path: impl AsRef<Path>, label: Option<f32>) -> Result<BinaryMask> {
    let volume = load_volume(path)?;
    Ok(BinaryMask::from_volume(&volume, label))
}

fn is_gz(path: &Path) -> bool {
    file_name(path).to_ascii_lowercase().ends_with(".gz")
}

fn is_pair_path(path: &Path) -> bool {
    let lower = file_name(path).to_ascii_lowercase();
    [".hdr", ".hdr.gz", ".img", ".img.gz"]
        .iter()
        .any(|ext| lower.ends_with(ext))
}

fn maybe_gzip(bytes: Vec<u8>, gzip: bool) -> Result<Vec<u8>> {
    if !gzip {
        return Ok(bytes);
    }
    let mut enc = GzEncoder::new(Vec::with_capacity(bytes.len() / 8), Compression::default());
    enc.write_all(&bytes)?;
    Ok(enc.finish()?)
}

/// Single-file NIfTI-1 bytes for a header and its data section.
fn single_file(header: &NiftiHeader, data: &[u8], gzip: bool) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(SINGLE_FILE_DATA_OFFSET + data.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&[0u8; 4]);
    out.extend_from_slice(data);
    maybe_gzip(out, gzip)
}

fn write_image(path: &Path, geometry: &VolumeGeometry, datatype: Datatype, data: &[u8]) -> Result<()> {
    let gzip = is_gz(path);
    if is_pair_path(path) {
        let header = NiftiHeader::for_geometry(geometry, datatype, true);
        let name = file_name(path);
        let (hdr, img) = if strip_ext(&name, "img").is_some() {
            (sibling_for_write(path, "img", "hdr"), path.to_path_buf())
        } else {
            (path.to_path_buf(), sibling_for_write(path, "hdr", "img"))
        };
        fs::write(&hdr, maybe_gzip(header.to_bytes().to_vec(), gzip)?)?;
        fs::write(&img, maybe_gzip(data.to_vec(), gzip)?)?;
    } else {
        let header = NiftiHeader::for_geometry(geometry, datatype, false);
        fs::write(path, single_file(&header, data, gzip)?)?;
    }
    Ok(())
}

fn sibling_for_write(path: &Path, from: &str, to: &str) -> PathBuf {
    let name = file_name(path);
    match strip_ext(&name, from) {
        Some((stem, true)) => path.with_file_name(format!("{stem}.{to}.gz")),
        Some((stem, false)) => path.with_file_name(format!("{stem}.{to}")),
        None => path.with_extension(to),
    }
}

/// Writes an unsigned 8-bit mask with values 0/1 and identity scaling.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_image(path.as_ref(), mask.geometry(), Datatype::U8, mask.bits())
}

/// Writes a label map (one byte per voxel, arbitrary values) on a mask grid.
pub fn save_labels(geometry: &VolumeGeometry, labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    if labels.len() != geometry.len() {
        return Err(Error::GeometryMismatch);
    }
    write_image(path.as_ref(), geometry, Datatype::U8, labels)
}

/// In-memory single-file encoding of a mask.
pub fn encode_mask(mask: &BinaryMask, gzip: bool) -> Result<Vec<u8>> {
    let header = NiftiHeader::for_geometry(mask.geometry(), Datatype::U8, false);
    single_file(&header, mask.bits(), gzip)
}

/// In-memory single-file encoding of a volume as 32-bit float.
pub fn encode_volume(volume: &HuVolume, gzip: bool) -> Result<Vec<u8>> {
    let header = NiftiHeader::for_geometry(volume.geometry(), Datatype::F32, false);
    single_file(&header, &f32_bytes(volume.values()), gzip)
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes a volume as 32-bit float HU with identity scaling.
pub fn save_volume(volume: &HuVolume, path: impl AsRef<Path>) -> Result<()> {
    write_image(
        path.as_ref(),
        volume.geometry(),
        Datatype::F32,
        &f32_bytes(volume.values()),
    )
}
