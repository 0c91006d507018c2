//! In-memory model of a voxelized radiation field: a grid, an energy binning,
//! reproducibility metadata, and named channels of named layers.

use alloc::string::String;
use alloc::vec::Vec;

use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid energy binning: {0}")]
    InvalidBinning(&'static str),
    #[error("duplicate channel name {0:?}")]
    DuplicateChannel(String),
    #[error("duplicate layer name {layer:?} in channel {channel:?}")]
    DuplicateLayer { channel: String, layer: String },
    #[error("layer {channel}/{layer}: data holds {actual} values, grid needs {expected}")]
    LayerLength {
        channel: String,
        layer: String,
        expected: usize,
        actual: usize,
    },
    #[error("layer {channel}/{layer}: element kind does not match the stored value type")]
    ElementTypeMismatch { channel: String, layer: String },
    #[error(
        "layer {channel}/{layer}: histogram arity {arity} differs from field bin count {bins}"
    )]
    BinningMismatch {
        channel: String,
        layer: String,
        arity: u32,
        bins: u32,
    },
    #[error("layer {channel}/{layer}: histogram of voxel {voxel} sums to {sum}, not 1 or 0")]
    HistogramNotNormalized {
        channel: String,
        layer: String,
        voxel: usize,
        sum: f64,
    },
    #[error("layer {channel}/{layer}: statistical error {value} outside [0, 1]")]
    StatisticalError {
        channel: String,
        layer: String,
        value: f64,
    },
    #[error("string of {0} bytes exceeds the 65535 byte limit")]
    StringTooLong(usize),
    #[error("invalid metadata: {0}")]
    Metadata(&'static str),
    #[error("duplicate dynamic metadata key {0:?}")]
    DuplicateMetaKey(String),
    #[error("voxel ({ix}, {iy}, {iz}) outside grid of {nx}x{ny}x{nz}")]
    IndexOutOfRange {
        ix: usize,
        iy: usize,
        iz: usize,
        nx: u32,
        ny: u32,
        nz: u32,
    },
}

/// Voxel grid geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub extent_m: Vec3,
    pub voxel_m: Vec3,
    pub counts: [u32; 3],
    pub origin_m: Vec3,
}

impl GridSpec {
    /// Grid whose voxel counts are derived from extent and voxel size.
    pub fn new(extent_m: Vec3, voxel_m: Vec3, origin_m: Vec3) -> Result<Self, FieldError> {
        let mut counts = [0u32; 3];
        for (axis, count) in counts.iter_mut().enumerate() {
            let (e, v) = (extent_m[axis], voxel_m[axis]);
            if !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite()) {
                return Err(FieldError::InvalidGrid(
                    "extents and voxel sizes must be positive",
                ));
            }
            let n = libm::round(e / v);
            if !(1.0..=u32::MAX as f64).contains(&n) {
                return Err(FieldError::InvalidGrid("voxel count per axis out of range"));
            }
            *count = n as u32;
        }
        let grid = GridSpec {
            extent_m,
            voxel_m,
            counts,
            origin_m,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid centered on `center_m`.
    pub fn centered(extent_m: Vec3, voxel_m: Vec3, center_m: Vec3) -> Result<Self, FieldError> {
        Self::new(extent_m, voxel_m, center_m - extent_m * 0.5)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        for axis in 0..3 {
            let (e, v) = (self.extent_m[axis], self.voxel_m[axis]);
            if !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite()) {
                return Err(FieldError::InvalidGrid(
                    "extents and voxel sizes must be positive",
                ));
            }
            if self.counts[axis] == 0 || libm::round(e / v) != self.counts[axis] as f64 {
                return Err(FieldError::InvalidGrid(
                    "counts must equal round(extent / voxel)",
                ));
            }
        }
        if !self.origin_m.is_finite() {
            return Err(FieldError::InvalidGrid("origin must be finite"));
        }
        if self.checked_voxel_count().is_none() {
            return Err(FieldError::InvalidGrid("voxel count overflows"));
        }
        Ok(())
    }

    pub fn checked_voxel_count(&self) -> Option<usize> {
        (self.counts[0] as usize)
            .checked_mul(self.counts[1] as usize)?
            .checked_mul(self.counts[2] as usize)
    }

    pub fn voxel_count(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).product()
    }

    /// Flat index with x varying fastest.
    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.counts[1] as usize + iy) * self.counts[0] as usize + ix
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let nx = self.counts[0] as usize;
        let ny = self.counts[1] as usize;
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    /// Upper corner of the voxelized volume.
    pub fn max_corner(&self) -> Vec3 {
        self.origin_m
            + self.voxel_m.mul_elem(Vec3::new(
                self.counts[0] as f64,
                self.counts[1] as f64,
                self.counts[2] as f64,
            ))
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        self.origin_m
            + self
                .voxel_m
                .mul_elem(Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5))
    }

    /// Voxel containing `p`, or `None` outside the grid.
    #[inline]
    pub fn voxel_of(&self, p: Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for (axis, slot) in idx.iter_mut().enumerate() {
            let f = libm::floor((p[axis] - self.origin_m[axis]) / self.voxel_m[axis]);
            if !(f >= 0.0 && f < self.counts[axis] as f64) {
                return None;
            }
            *slot = f as usize;
        }
        Some(idx)
    }
}

/// Uniform energy histogram starting at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct EnergyBinning {
    pub bin_count: u32,
    pub bin_width_keV: f64,
}

#[allow(non_snake_case)]
impl EnergyBinning {
    pub fn new(bin_count: u32, bin_width_keV: f64) -> Result<Self, FieldError> {
        let b = EnergyBinning {
            bin_count,
            bin_width_keV,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.bin_count == 0 {
            return Err(FieldError::InvalidBinning("bin count must be positive"));
        }
        if !(self.bin_width_keV > 0.0 && self.bin_width_keV.is_finite()) {
            return Err(FieldError::InvalidBinning("bin width must be positive"));
        }
        Ok(())
    }

    pub fn max_energy_keV(&self) -> f64 {
        self.bin_count as f64 * self.bin_width_keV
    }

    /// Bin of `energy_keV`; energies beyond the last bin clamp into it.
    #[inline]
    pub fn bin_index(&self, energy_keV: f64) -> usize {
        let b = libm::floor(energy_keV / self.bin_width_keV);
        if b >= 0.0 {
            (b as usize).min(self.bin_count as usize - 1)
        } else {
            0
        }
    }

    pub fn bin_center_keV(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width_keV
    }
}

/// Value type and arity of one voxel's element in a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    ScalarF32,
    ScalarF64,
    VectorF32(u32),
    HistogramF32(u32),
}

impl ElementKind {
    pub fn arity(&self) -> u32 {
        match *self {
            ElementKind::ScalarF32 | ElementKind::ScalarF64 => 1,
            ElementKind::VectorF32(n) | ElementKind::HistogramF32(n) => n,
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            ElementKind::ScalarF32 => 0,
            ElementKind::ScalarF64 => 1,
            ElementKind::VectorF32(_) => 2,
            ElementKind::HistogramF32(_) => 3,
        }
    }

    pub fn from_tag(tag: u8, arity: u32) -> Option<Self> {
        match (tag, arity) {
            (0, 1) => Some(ElementKind::ScalarF32),
            (1, 1) => Some(ElementKind::ScalarF64),
            (2, n) if n > 0 => Some(ElementKind::VectorF32(n)),
            (3, n) if n > 0 => Some(ElementKind::HistogramF32(n)),
            _ => None,
        }
    }

    /// Bytes per stored value.
    pub fn value_size(&self) -> usize {
        match self {
            ElementKind::ScalarF64 => 8,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl LayerData {
    pub fn len(&self) -> usize {
        match self {
            LayerData::F32(v) => v.len(),
            LayerData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match self {
            LayerData::F32(v) => Some(v),
            LayerData::F64(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match self {
            LayerData::F64(v) => Some(v),
            LayerData::F32(_) => None,
        }
    }

    /// Value `i` widened to `f64`.
    pub fn get(&self, i: usize) -> Option<f64> {
        match self {
            LayerData::F32(v) => v.get(i).map(|&x| x as f64),
            LayerData::F64(v) => v.get(i).copied(),
        }
    }
}

/// Borrowed element of one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementView<'a> {
    F32(&'a [f32]),
    F64(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub unit: String,
    pub statistical_error: f64,
    pub kind: ElementKind,
    pub data: LayerData,
}

impl Layer {
    pub fn byte_len(&self) -> usize {
        self.data.len() * self.kind.value_size()
    }

    /// Element of voxel `(ix, iy, iz)`.
    pub fn voxel_at(
        &self,
        grid: &GridSpec,
        ix: usize,
        iy: usize,
        iz: usize,
    ) -> Result<ElementView<'_>, FieldError> {
        let [nx, ny, nz] = grid.counts;
        if ix >= nx as usize || iy >= ny as usize || iz >= nz as usize {
            return Err(FieldError::IndexOutOfRange {
                ix,
                iy,
                iz,
                nx,
                ny,
                nz,
            });
        }
        let arity = self.kind.arity() as usize;
        let start = grid.flat_index(ix, iy, iz) * arity;
        let range = start..start + arity;
        let oob = || FieldError::IndexOutOfRange {
            ix,
            iy,
            iz,
            nx,
            ny,
            nz,
        };
        match &self.data {
            LayerData::F32(v) => v.get(range).map(ElementView::F32).ok_or_else(oob),
            LayerData::F64(v) => v.get(range).map(ElementView::F64).ok_or_else(oob),
        }
    }

    fn validate(
        &self,
        channel: &str,
        grid: &GridSpec,
        binning: &EnergyBinning,
    ) -> Result<(), FieldError> {
        check_str(&self.name)?;
        check_str(&self.unit)?;
        let names = || (String::from(channel), self.name.clone());
        if !(0.0..=1.0).contains(&self.statistical_error) {
            let (channel, layer) = names();
            return Err(FieldError::StatisticalError {
                channel,
                layer,
                value: self.statistical_error,
            });
        }
        let type_ok = matches!(
            (&self.kind, &self.data),
            (ElementKind::ScalarF64, LayerData::F64(_))
                | (
                    ElementKind::ScalarF32
                        | ElementKind::VectorF32(_)
                        | ElementKind::HistogramF32(_),
                    LayerData::F32(_)
                )
        );
        if !type_ok || self.kind.arity() == 0 {
            let (channel, layer) = names();
            return Err(FieldError::ElementTypeMismatch { channel, layer });
        }
        let expected = grid
            .checked_voxel_count()
            .and_then(|n| n.checked_mul(self.kind.arity() as usize))
            .ok_or(FieldError::InvalidGrid("voxel count overflows"))?;
        if self.data.len() != expected {
            let (channel, layer) = names();
            return Err(FieldError::LayerLength {
                channel,
                layer,
                expected,
                actual: self.data.len(),
            });
        }
        if let ElementKind::HistogramF32(bins) = self.kind {
            if bins != binning.bin_count {
                let (channel, layer) = names();
                return Err(FieldError::BinningMismatch {
                    channel,
                    layer,
                    arity: bins,
                    bins: binning.bin_count,
                });
            }
            let values = self.data.as_f32().unwrap_or(&[]);
            for (voxel, hist) in values.chunks_exact(bins as usize).enumerate() {
                let sum: f64 = hist.iter().map(|&x| x as f64).sum();
                let all_zero = hist.iter().all(|&x| x == 0.0);
                if !all_zero && !((sum - 1.0).abs() <= HISTOGRAM_TOLERANCE) {
                    let (channel, layer) = names();
                    return Err(FieldError::HistogramNotNormalized {
                        channel,
                        layer,
                        voxel,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Allowed deviation of a hit voxel's histogram sum from one.
pub const HISTOGRAM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Channel {
    pub name: String,
    pub layers: Vec<Layer>,
}

impl Channel {
    pub fn new(name: impl Into<String>) -> Self {
        Channel {
            name: name.into(),
            layers: Vec::new(),
        }
    }

    pub fn with_layer(mut self, layer: Layer) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Layer> {
        self.layers.iter_mut().find(|l| l.name == name)
    }
}

/// Shape of the primary beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldShape {
    /// Circular cone; the opening angle is the full apex angle.
    Cone { opening_angle_deg: f64 },
    /// Rectangular pyramid whose base is `rect_w_m` by `rect_h_m` at `at_distance_m` from the apex.
    Pyramid {
        rect_w_m: f64,
        rect_h_m: f64,
        at_distance_m: f64,
    },
}

impl FieldShape {
    pub fn validate(&self) -> Result<(), FieldError> {
        match *self {
            FieldShape::Cone { opening_angle_deg } => {
                if !(opening_angle_deg > 0.0 && opening_angle_deg < 180.0) {
                    return Err(FieldError::Metadata(
                        "cone opening angle must lie in (0, 180)",
                    ));
                }
            }
            FieldShape::Pyramid {
                rect_w_m,
                rect_h_m,
                at_distance_m,
            } => {
                let ok = [rect_w_m, rect_h_m, at_distance_m]
                    .iter()
                    .all(|v| *v > 0.0 && v.is_finite());
                if !ok {
                    return Err(FieldError::Metadata("pyramid dimensions must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Typed value of a dynamic metadata entry.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Int(i64),
    Float(f64),
    Text(String),
    Vec3([f64; 3]),
}

impl MetaValue {
    pub fn tag(&self) -> u8 {
        match self {
            MetaValue::Int(_) => 0,
            MetaValue::Float(_) => 1,
            MetaValue::Text(_) => 2,
            MetaValue::Vec3(_) => 3,
        }
    }
}

impl core::fmt::Display for MetaValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetaValue::Int(v) => write!(f, "{v}"),
            MetaValue::Float(v) => write!(f, "{v}"),
            MetaValue::Text(v) => write!(f, "{v:?}"),
            MetaValue::Vec3([x, y, z]) => write!(f, "[{x}, {y}, {z}]"),
        }
    }
}

/// Simulation record written with every field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMetadata {
    pub software_name: String,
    pub software_version: String,
    pub physics_model_id: String,
    pub scene_digest: String,
    pub tube_position_m: Vec3,
    pub tube_direction: Vec3,
    pub field_shape: FieldShape,
    pub spectrum_id: String,
    pub primary_count: u64,
    pub rng_seed: u64,
    pub epsilon_rel_achieved: f64,
    pub timestamp_utc: String,
    /// Free-form entries, kept in insertion order.
    pub dynamic: Vec<(String, MetaValue)>,
}

impl FieldMetadata {
    pub fn dynamic_value(&self, key: &str) -> Option<&MetaValue> {
        self.dynamic.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        for s in [
            &self.software_name,
            &self.software_version,
            &self.physics_model_id,
            &self.scene_digest,
            &self.spectrum_id,
            &self.timestamp_utc,
        ] {
            check_str(s)?;
            if s.is_empty() {
                return Err(FieldError::Metadata(
                    "fixed string fields must not be empty",
                ));
            }
        }
        if !self.tube_position_m.is_finite() {
            return Err(FieldError::Metadata("tube position must be finite"));
        }
        if (self.tube_direction.norm() - 1.0).abs() > 1e-6 {
            return Err(FieldError::Metadata("tube direction must be a unit vector"));
        }
        self.field_shape.validate()?;
        if !(0.0..=1.0).contains(&self.epsilon_rel_achieved) {
            return Err(FieldError::Metadata(
                "epsilon_rel_achieved must lie in [0, 1]",
            ));
        }
        for (i, (key, value)) in self.dynamic.iter().enumerate() {
            check_str(key)?;
            if let MetaValue::Text(s) = value {
                check_str(s)?;
            }
            if self.dynamic[..i].iter().any(|(k, _)| k == key) {
                return Err(FieldError::DuplicateMetaKey(key.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiationField {
    pub grid: GridSpec,
    pub binning: EnergyBinning,
    pub metadata: FieldMetadata,
    pub channels: Vec<Channel>,
}

impl RadiationField {
    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn layer(&self, channel: &str, layer: &str) -> Option<&Layer> {
        self.channel(channel)?.layer(layer)
    }

    /// Checks every type invariant; codecs call this before writing.
    pub fn validate(&self) -> Result<(), FieldError> {
        self.grid.validate()?;
        self.binning.validate()?;
        self.metadata.validate()?;
        for (i, channel) in self.channels.iter().enumerate() {
            check_str(&channel.name)?;
            if self.channels[..i].iter().any(|c| c.name == channel.name) {
                return Err(FieldError::DuplicateChannel(channel.name.clone()));
            }
            for (j, layer) in channel.layers.iter().enumerate() {
                if channel.layers[..j].iter().any(|l| l.name == layer.name) {
                    return Err(FieldError::DuplicateLayer {
                        channel: channel.name.clone(),
                        layer: layer.name.clone(),
                    });
                }
                layer.validate(&channel.name, &self.grid, &self.binning)?;
            }
        }
        Ok(())
    }
}

fn check_str(s: &str) -> Result<(), FieldError> {
    if s.len() > u16::MAX as usize {
        Err(FieldError::StringTooLong(s.len()))
    } else {
        Ok(())
    }
}
