//! Byte layout of field files.
//!
//! All integers and floats are little-endian; strings carry a `u16` byte
//! length prefix and no terminator.
//!
//! ```text
//! magic        8 bytes  "RF3DFLD\0"
//! version      u16      = 1
//! grid         3 x f64 extent_m, 3 x f64 voxel_m, 3 x u32 counts, 3 x f64 origin_m
//! binning      u32 bin_count, f64 bin_width_keV
//! fixed meta   str software_name, str software_version, str physics_model_id,
//!              str scene_digest, 3 x f64 tube_position_m, 3 x f64 tube_direction,
//!              u8 shape tag (0 cone: f64 opening_angle_deg |
//!                            1 pyramid: f64 rect_w_m, f64 rect_h_m, f64 at_distance_m),
//!              str spectrum_id, u64 primary_count, u64 rng_seed,
//!              f64 epsilon_rel_achieved, str timestamp_utc
//! dynamic meta u32 count, then per entry: str key, u8 tag, payload
//!              (0 i64 | 1 f64 | 2 str | 3 3 x f64)
//! toc          u32 channel count; per channel: str name, u32 layer count;
//!              per layer: str name, str unit, f64 statistical_error,
//!              u8 element kind (0 f32 | 1 f64 | 2 f32 vector | 3 f32 histogram),
//!              u32 arity, u64 byte offset, u64 byte length, u32 crc32
//! data         one block per layer at its declared absolute offset,
//!              voxels in x-fastest order, each voxel's `arity` values contiguous
//! ```
//!
//! Data blocks follow the table of contents back to back in table order, so a
//! reader can fetch any single layer after parsing only the header.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::field::{
    Channel, ElementKind, EnergyBinning, FieldError, FieldMetadata, FieldShape, GridSpec, Layer,
    LayerData, MetaValue, RadiationField,
};
use crate::vec3::Vec3;

pub const MAGIC: [u8; 8] = *b"RF3DFLD\0";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad magic number")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated stream while reading {0}")]
    Truncated(String),
    #[error("checksum mismatch in layer {channel}/{layer}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch {
        channel: String,
        layer: String,
        stored: u32,
        computed: u32,
    },
    #[error("layer {channel}/{layer} declares {declared} bytes, grid requires {expected}")]
    LayerLength {
        channel: String,
        layer: String,
        declared: u64,
        expected: u64,
    },
    #[error("layer {channel}/{layer} has data offset {offset} inside the header")]
    BadOffset {
        channel: String,
        layer: String,
        offset: u64,
    },
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("invalid {what} tag {tag}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("no layer {channel}/{layer}; available: {}", available.join(", "))]
    NotFound {
        channel: String,
        layer: String,
        available: Vec<String>,
    },
    #[error("read failed: {0}")]
    Source(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Sequential reader the header parser pulls bytes from.
pub trait ByteSource {
    /// Fill `buf` completely. `what` names the item being read for error
    /// messages; a short read must map to [`DecodeError::Truncated`].
    fn read_into(&mut self, buf: &mut [u8], what: &str) -> Result<(), DecodeError>;
}

/// [`ByteSource`] over an in-memory buffer.
#[derive(Debug, Clone)]
pub struct SliceSource<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> SliceSource<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        SliceSource { bytes, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

impl ByteSource for SliceSource<'_> {
    fn read_into(&mut self, buf: &mut [u8], what: &str) -> Result<(), DecodeError> {
        let end = self
            .pos
            .checked_add(buf.len())
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DecodeError::Truncated(String::from(what)))?;
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(())
    }
}

/// Table-of-contents entry for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEntry {
    pub name: String,
    pub unit: String,
    pub statistical_error: f64,
    pub kind: ElementKind,
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEntry {
    pub name: String,
    pub layers: Vec<LayerEntry>,
}

/// Everything before the data blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FileHeader {
    pub grid: GridSpec,
    pub binning: EnergyBinning,
    pub metadata: FieldMetadata,
    pub channels: Vec<ChannelEntry>,
    /// Byte length of the encoded header; the first data block starts here.
    pub header_len: u64,
}

impl FileHeader {
    /// Locates a layer entry, or reports the names that do exist.
    pub fn find(&self, channel: &str, layer: &str) -> Result<&LayerEntry, DecodeError> {
        let not_found = |available: Vec<String>| DecodeError::NotFound {
            channel: String::from(channel),
            layer: String::from(layer),
            available,
        };
        let Some(ch) = self.channels.iter().find(|c| c.name == channel) else {
            return Err(not_found(self.layer_paths()));
        };
        ch.layers
            .iter()
            .find(|l| l.name == layer)
            .ok_or_else(|| not_found(self.layer_paths()))
    }

    /// `channel/layer` for every stored layer, in file order.
    pub fn layer_paths(&self) -> Vec<String> {
        self.channels
            .iter()
            .flat_map(|c| {
                c.layers
                    .iter()
                    .map(move |l| format!("{}/{}", c.name, l.name))
            })
            .collect()
    }

    /// Total file size implied by the table of contents.
    pub fn file_len(&self) -> u64 {
        self.channels
            .iter()
            .flat_map(|c| &c.layers)
            .map(|l| l.offset.saturating_add(l.length))
            .fold(self.header_len, u64::max)
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    // lengths were checked by RadiationField::validate
    fn str(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

fn layer_crc(layer: &Layer) -> u32 {
    let mut h = crc32fast::Hasher::new();
    match &layer.data {
        LayerData::F32(v) => v.iter().for_each(|x| h.update(&x.to_le_bytes())),
        LayerData::F64(v) => v.iter().for_each(|x| h.update(&x.to_le_bytes())),
    }
    h.finalize()
}

fn write_header(field: &RadiationField, data_start: u64, w: &mut Writer) {
    w.buf.extend_from_slice(&MAGIC);
    w.u16(VERSION);

    let g = &field.grid;
    w.vec3(g.extent_m);
    w.vec3(g.voxel_m);
    g.counts.iter().for_each(|&c| w.u32(c));
    w.vec3(g.origin_m);

    w.u32(field.binning.bin_count);
    w.f64(field.binning.bin_width_keV);

    let m = &field.metadata;
    w.str(&m.software_name);
    w.str(&m.software_version);
    w.str(&m.physics_model_id);
    w.str(&m.scene_digest);
    w.vec3(m.tube_position_m);
    w.vec3(m.tube_direction);
    match m.field_shape {
        FieldShape::Cone { opening_angle_deg } => {
            w.u8(0);
            w.f64(opening_angle_deg);
        }
        FieldShape::Pyramid {
            rect_w_m,
            rect_h_m,
            at_distance_m,
        } => {
            w.u8(1);
            w.f64(rect_w_m);
            w.f64(rect_h_m);
            w.f64(at_distance_m);
        }
    }
    w.str(&m.spectrum_id);
    w.u64(m.primary_count);
    w.u64(m.rng_seed);
    w.f64(m.epsilon_rel_achieved);
    w.str(&m.timestamp_utc);

    w.u32(m.dynamic.len() as u32);
    for (key, value) in &m.dynamic {
        w.str(key);
        w.u8(value.tag());
        match value {
            MetaValue::Int(v) => w.i64(*v),
            MetaValue::Float(v) => w.f64(*v),
            MetaValue::Text(s) => w.str(s),
            MetaValue::Vec3(v) => v.iter().for_each(|&x| w.f64(x)),
        }
    }

    let mut offset = data_start;
    w.u32(field.channels.len() as u32);
    for channel in &field.channels {
        w.str(&channel.name);
        w.u32(channel.layers.len() as u32);
        for layer in &channel.layers {
            let len = layer.byte_len() as u64;
            w.str(&layer.name);
            w.str(&layer.unit);
            w.f64(layer.statistical_error);
            w.u8(layer.kind.tag());
            w.u32(layer.kind.arity());
            w.u64(offset);
            w.u64(len);
            w.u32(if data_start == 0 { 0 } else { layer_crc(layer) });
            offset += len;
        }
    }
}

/// Encodes everything up to the first data block, with final offsets and checksums.
pub fn encode_header(field: &RadiationField) -> Result<Vec<u8>, FieldError> {
    field.validate()?;
    // offsets are fixed-width, so a dry run gives the header size
    let mut sizing = Writer { buf: Vec::new() };
    write_header(field, 0, &mut sizing);
    let header_len = sizing.buf.len();
    let mut w = Writer {
        buf: Vec::with_capacity(header_len),
    };
    write_header(field, header_len as u64, &mut w);
    debug_assert_eq!(w.buf.len(), header_len);
    Ok(w.buf)
}

/// Appends the data block of `layer` to `out`.
pub fn encode_layer_data(layer: &Layer, out: &mut Vec<u8>) {
    out.reserve(layer.byte_len());
    match &layer.data {
        LayerData::F32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        LayerData::F64(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
}

/// Whole file as one buffer.
pub fn encode(field: &RadiationField) -> Result<Vec<u8>, FieldError> {
    let mut out = encode_header(field)?;
    for layer in field.channels.iter().flat_map(|c| &c.layers) {
        encode_layer_data(layer, &mut out);
    }
    Ok(out)
}

struct Reader<'s, S: ByteSource + ?Sized> {
    src: &'s mut S,
    pos: u64,
}

impl<S: ByteSource + ?Sized> Reader<'_, S> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N], DecodeError> {
        let mut b = [0u8; N];
        self.src.read_into(&mut b, what)?;
        self.pos += N as u64;
        Ok(b)
    }
    fn u8(&mut self, what: &str) -> Result<u8, DecodeError> {
        Ok(self.bytes::<1>(what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16, DecodeError> {
        self.bytes(what).map(u16::from_le_bytes)
    }
    fn u32(&mut self, what: &str) -> Result<u32, DecodeError> {
        self.bytes(what).map(u32::from_le_bytes)
    }
    fn u64(&mut self, what: &str) -> Result<u64, DecodeError> {
        self.bytes(what).map(u64::from_le_bytes)
    }
    fn i64(&mut self, what: &str) -> Result<i64, DecodeError> {
        self.bytes(what).map(i64::from_le_bytes)
    }
    fn f64(&mut self, what: &str) -> Result<f64, DecodeError> {
        self.bytes(what).map(f64::from_le_bytes)
    }
    fn vec3(&mut self, what: &str) -> Result<Vec3, DecodeError> {
        Ok(Vec3::new(self.f64(what)?, self.f64(what)?, self.f64(what)?))
    }
    fn str(&mut self, what: &'static str) -> Result<String, DecodeError> {
        let len = self.u16(what)? as usize;
        let mut buf = alloc::vec![0u8; len];
        self.src.read_into(&mut buf, what)?;
        self.pos += len as u64;
        String::from_utf8(buf).map_err(|_| DecodeError::InvalidUtf8(what))
    }
}

/// Parses magic, version, grid, binning, metadata and table of contents.
///
/// Reads exactly `header_len` bytes from `src` and nothing beyond.
pub fn decode_header<S: ByteSource + ?Sized>(src: &mut S) -> Result<FileHeader, DecodeError> {
    let mut r = Reader { src, pos: 0 };
    if r.bytes::<8>("magic")? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }

    let extent_m = r.vec3("grid")?;
    let voxel_m = r.vec3("grid")?;
    let counts = [r.u32("grid")?, r.u32("grid")?, r.u32("grid")?];
    let origin_m = r.vec3("grid")?;
    let grid = GridSpec {
        extent_m,
        voxel_m,
        counts,
        origin_m,
    };
    grid.validate()?;

    let binning = EnergyBinning {
        bin_count: r.u32("binning")?,
        bin_width_keV: r.f64("binning")?,
    };
    binning.validate()?;

    let software_name = r.str("software_name")?;
    let software_version = r.str("software_version")?;
    let physics_model_id = r.str("physics_model_id")?;
    let scene_digest = r.str("scene_digest")?;
    let tube_position_m = r.vec3("tube_position_m")?;
    let tube_direction = r.vec3("tube_direction")?;
    let field_shape = match r.u8("field_shape")? {
        0 => FieldShape::Cone {
            opening_angle_deg: r.f64("field_shape")?,
        },
        1 => FieldShape::Pyramid {
            rect_w_m: r.f64("field_shape")?,
            rect_h_m: r.f64("field_shape")?,
            at_distance_m: r.f64("field_shape")?,
        },
        tag => {
            return Err(DecodeError::InvalidTag {
                what: "field shape",
                tag,
            })
        }
    };
    let spectrum_id = r.str("spectrum_id")?;
    let primary_count = r.u64("primary_count")?;
    let rng_seed = r.u64("rng_seed")?;
    let epsilon_rel_achieved = r.f64("epsilon_rel_achieved")?;
    let timestamp_utc = r.str("timestamp_utc")?;

    let dynamic_count = r.u32("dynamic metadata")?;
    let mut dynamic = Vec::new();
    for _ in 0..dynamic_count {
        let key = r.str("dynamic metadata key")?;
        let value = match r.u8("dynamic metadata")? {
            0 => MetaValue::Int(r.i64("dynamic metadata")?),
            1 => MetaValue::Float(r.f64("dynamic metadata")?),
            2 => MetaValue::Text(r.str("dynamic metadata")?),
            3 => MetaValue::Vec3([
                r.f64("dynamic metadata")?,
                r.f64("dynamic metadata")?,
                r.f64("dynamic metadata")?,
            ]),
            tag => {
                return Err(DecodeError::InvalidTag {
                    what: "metadata value",
                    tag,
                })
            }
        };
        dynamic.push((key, value));
    }
    let metadata = FieldMetadata {
        software_name,
        software_version,
        physics_model_id,
        scene_digest,
        tube_position_m,
        tube_direction,
        field_shape,
        spectrum_id,
        primary_count,
        rng_seed,
        epsilon_rel_achieved,
        timestamp_utc,
        dynamic,
    };
    metadata.validate()?;

    let voxels = grid.voxel_count() as u64;
    let channel_count = r.u32("table of contents")?;
    let mut channels = Vec::new();
    for _ in 0..channel_count {
        let name = r.str("channel name")?;
        let layer_count = r.u32("table of contents")?;
        let mut layers = Vec::new();
        for _ in 0..layer_count {
            let layer_name = r.str("layer name")?;
            let unit = r.str("layer unit")?;
            let statistical_error = r.f64("table of contents")?;
            let tag = r.u8("table of contents")?;
            let arity = r.u32("table of contents")?;
            let kind = ElementKind::from_tag(tag, arity).ok_or(DecodeError::InvalidTag {
                what: "element kind",
                tag,
            })?;
            let offset = r.u64("table of contents")?;
            let length = r.u64("table of contents")?;
            let crc32 = r.u32("table of contents")?;
            let expected = voxels
                .checked_mul(arity as u64)
                .and_then(|n| n.checked_mul(kind.value_size() as u64));
            if expected != Some(length) {
                return Err(DecodeError::LayerLength {
                    channel: name,
                    layer: layer_name,
                    declared: length,
                    expected: expected.unwrap_or(u64::MAX),
                });
            }
            layers.push(LayerEntry {
                name: layer_name,
                unit,
                statistical_error,
                kind,
                offset,
                length,
                crc32,
            });
        }
        channels.push(ChannelEntry { name, layers });
    }

    let header_len = r.pos;
    for ch in &channels {
        for l in &ch.layers {
            if l.offset < header_len {
                return Err(DecodeError::BadOffset {
                    channel: ch.name.clone(),
                    layer: l.name.clone(),
                    offset: l.offset,
                });
            }
        }
    }

    Ok(FileHeader {
        grid,
        binning,
        metadata,
        channels,
        header_len,
    })
}

/// Builds a layer from its raw data block, verifying the checksum.
pub fn decode_layer(channel: &str, entry: &LayerEntry, block: &[u8]) -> Result<Layer, DecodeError> {
    if block.len() as u64 != entry.length {
        return Err(DecodeError::Truncated(format!(
            "layer {channel}/{}",
            entry.name
        )));
    }
    let computed = crc32fast::hash(block);
    if computed != entry.crc32 {
        return Err(DecodeError::ChecksumMismatch {
            channel: String::from(channel),
            layer: entry.name.clone(),
            stored: entry.crc32,
            computed,
        });
    }
    let data = match entry.kind {
        ElementKind::ScalarF64 => LayerData::F64(
            block
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        ),
        _ => LayerData::F32(
            block
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect(),
        ),
    };
    Ok(Layer {
        name: entry.name.clone(),
        unit: entry.unit.clone(),
        statistical_error: entry.statistical_error,
        kind: entry.kind,
        data,
    })
}

/// Assembles a field from a parsed header and a block lookup, then validates it.
pub fn assemble<F>(header: FileHeader, mut block: F) -> Result<RadiationField, DecodeError>
where
    F: FnMut(&str, &LayerEntry) -> Result<Layer, DecodeError>,
{
    let mut channels = Vec::with_capacity(header.channels.len());
    for ch in &header.channels {
        let mut channel = Channel::new(ch.name.clone());
        for entry in &ch.layers {
            channel.layers.push(block(&ch.name, entry)?);
        }
        channels.push(channel);
    }
    let field = RadiationField {
        grid: header.grid,
        binning: header.binning,
        metadata: header.metadata,
        channels,
    };
    field.validate()?;
    Ok(field)
}

/// Decodes a complete file held in memory.
pub fn decode(bytes: &[u8]) -> Result<RadiationField, DecodeError> {
    let header = decode_header(&mut SliceSource::new(bytes))?;
    assemble(header, |channel, entry| {
        let block = slice_block(bytes, entry)
            .ok_or_else(|| DecodeError::Truncated(format!("layer {channel}/{}", entry.name)))?;
        decode_layer(channel, entry, block)
    })
}

/// Decodes a single layer from a complete file held in memory.
pub fn decode_single_layer(bytes: &[u8], channel: &str, layer: &str) -> Result<Layer, DecodeError> {
    let header = decode_header(&mut SliceSource::new(bytes))?;
    let entry = header.find(channel, layer)?;
    let block = slice_block(bytes, entry)
        .ok_or_else(|| DecodeError::Truncated(format!("layer {channel}/{layer}")))?;
    decode_layer(channel, entry, block)
}

fn slice_block<'a>(bytes: &'a [u8], entry: &LayerEntry) -> Option<&'a [u8]> {
    let start = usize::try_from(entry.offset).ok()?;
    let end = start.checked_add(usize::try_from(entry.length).ok()?)?;
    bytes.get(start..end)
}
