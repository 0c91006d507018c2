//! Relative air kerma from scored fields, circular detector scans, the
//! measurement calibration factor and point-wise error statistics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::field::{GridSpec, LayerData, RadiationField};
use crate::material::{loglog_interpolate, AIR_ENERGY_TRANSFER};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DosimetryError {
    #[error("no channel {0:?} in field")]
    MissingChannel(String),
    #[error("channel {channel:?} lacks a usable {layer:?} layer")]
    MissingLayer {
        channel: String,
        layer: &'static str,
    },
    #[error("transfer coefficient table does not cover {0} keV")]
    TableRange(f64),
    #[error("invalid transfer table: {0}")]
    InvalidTable(&'static str),
    #[error("scan point at {angle_deg} deg lies outside the interpolable grid")]
    OutOfBounds { angle_deg: f64 },
    #[error("invalid scan: {0}")]
    InvalidScan(&'static str),
    #[error("curves share fewer than two angles")]
    EmptyIntersection,
    #[error("simulated curve integrates to zero")]
    ZeroSimulatedIntegral,
    #[error("measured value at {angle_deg} deg is not positive")]
    NonPositiveMeasurement { angle_deg: f64 },
}

/// Low-energy extension of the air energy-transfer table (keV, cm^2/g),
/// so bin centers down to a few keV are covered. The argon K edge near
/// 3.2 keV is not resolved.
const AIR_ENERGY_TRANSFER_LOW: [(f64, f64); 6] = [
    (2.0, 526.2),
    (3.0, 161.4),
    (4.0, 76.36),
    (5.0, 39.31),
    (6.0, 22.70),
    (8.0, 9.446),
];

/// Mass energy-transfer coefficients, interpolated log-log.
#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct TransmissionTable {
    entries: Vec<(f64, f64)>,
}

#[allow(non_snake_case)]
impl TransmissionTable {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self, DosimetryError> {
        if entries.len() < 2 {
            return Err(DosimetryError::InvalidTable("need at least two entries"));
        }
        for (i, &(e, mu)) in entries.iter().enumerate() {
            if !(e > 0.0 && mu > 0.0 && e.is_finite() && mu.is_finite()) {
                return Err(DosimetryError::InvalidTable("entries must be positive"));
            }
            if i > 0 && e <= entries[i - 1].0 {
                return Err(DosimetryError::InvalidTable(
                    "energies must increase strictly",
                ));
            }
        }
        Ok(TransmissionTable { entries })
    }

    /// Dry air, 2–200 keV.
    pub fn air() -> Self {
        let entries = AIR_ENERGY_TRANSFER_LOW
            .iter()
            .chain(AIR_ENERGY_TRANSFER.iter())
            .copied()
            .chain(core::iter::once((200.0, 0.02672)))
            .collect();
        TransmissionTable::new(entries).expect("built-in table is valid")
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn coefficient(&self, energy_keV: f64) -> Result<f64, DosimetryError> {
        loglog_interpolate(&self.entries, energy_keV, |p| *p)
            .ok_or(DosimetryError::TableRange(energy_keV))
    }
}

/// Relative air kerma per primary photon on the field grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KermaTensor {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl KermaTensor {
    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.grid.flat_index(ix, iy, iz)]
    }

    /// Interpolated value at `p`, or `None` where interpolation would leave the grid.
    pub fn sample(&self, p: Vec3, mode: Sampling) -> Option<f64> {
        match mode {
            Sampling::Nearest => {
                let [ix, iy, iz] = self.grid.voxel_of(p)?;
                Some(self.at(ix, iy, iz))
            }
            Sampling::Trilinear => self.trilinear(p),
        }
    }

    fn trilinear(&self, p: Vec3) -> Option<f64> {
        let g = &self.grid;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let n = g.counts[axis] as usize;
            // position in voxel-center coordinates
            let u = (p[axis] - g.origin_m[axis]) / g.voxel_m[axis] - 0.5;
            if n == 1 {
                if !(-0.5..=0.5).contains(&u) {
                    return None;
                }
                continue;
            }
            if !(u >= 0.0 && u <= (n - 1) as f64) {
                return None;
            }
            let i = (libm::floor(u) as usize).min(n - 2);
            lo[axis] = i;
            hi[axis] = i + 1;
            frac[axis] = u - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let pick = |axis: usize| corner >> axis & 1 == 1;
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for axis in 0..3 {
                if pick(axis) {
                    w *= frac[axis];
                    idx[axis] = hi[axis];
                } else {
                    w *= 1.0 - frac[axis];
                    idx[axis] = lo[axis];
                }
            }
            if w != 0.0 {
                acc += w * self.at(idx[0], idx[1], idx[2]);
            }
        }
        Some(acc)
    }
}

/// Relative air kerma summed over `channels`.
///
/// Per voxel and energy bin the contribution is `p_b * F * mu_tr(E_b) * E_b`
/// with `E_b` the bin center; contributions are added channel by channel,
/// bins in ascending order, each product evaluated left to right.
pub fn kerma_tensor(
    field: &RadiationField,
    channels: &[&str],
    table: &TransmissionTable,
) -> Result<KermaTensor, DosimetryError> {
    let bins = field.binning.bin_count as usize;
    let weights: Vec<(f64, f64)> = (0..bins)
        .map(|b| {
            let e = field.binning.bin_center_keV(b);
            table.coefficient(e).map(|mu| (mu, e))
        })
        .collect::<Result<_, _>>()?;
    let voxels = field.grid.voxel_count();
    let mut values = alloc::vec![0f64; voxels];
    for &name in channels {
        let channel = field
            .channel(name)
            .ok_or_else(|| DosimetryError::MissingChannel(String::from(name)))?;
        let missing = |layer| DosimetryError::MissingLayer {
            channel: String::from(name),
            layer,
        };
        let spectrum = match channel.layer("spectrum").map(|l| &l.data) {
            Some(LayerData::F32(v)) if v.len() == voxels * bins => v,
            _ => return Err(missing("spectrum")),
        };
        let hits = match channel.layer("hits").map(|l| &l.data) {
            Some(LayerData::F32(v)) if v.len() == voxels => v,
            _ => return Err(missing("hits")),
        };
        for (v, value) in values.iter_mut().enumerate() {
            let f = hits[v] as f64;
            if f == 0.0 {
                continue;
            }
            let p = &spectrum[v * bins..(v + 1) * bins];
            for (b, &(mu, e)) in weights.iter().enumerate() {
                *value += p[b] as f64 * f * mu * e;
            }
        }
    }
    Ok(KermaTensor {
        grid: field.grid,
        values,
    })
}

/// Coordinate plane of a circular scan; angles run from the first axis towards the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    pub fn axes(self) -> (Vec3, Vec3) {
        match self {
            Plane::XY => (Vec3::X, Vec3::Y),
            Plane::XZ => (Vec3::X, Vec3::Z),
            Plane::YZ => (Vec3::Y, Vec3::Z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Trilinear interpolation between voxel centers.
    #[default]
    Trilinear,
    /// Value of the containing voxel.
    Nearest,
}

/// Field values on a circle, by angle in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScanCurve {
    pub center_m: Vec3,
    pub radius_m: f64,
    pub plane: Plane,
    pub samples: Vec<(f64, f64)>,
}

impl PolarScanCurve {
    /// Curve from raw samples, as read from a measurement file.
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self, DosimetryError> {
        for (i, &(a, v)) in samples.iter().enumerate() {
            if !(0.0..360.0).contains(&a) || !v.is_finite() {
                return Err(DosimetryError::InvalidScan(
                    "angles must lie in [0, 360) and values be finite",
                ));
            }
            if i > 0 && a <= samples[i - 1].0 {
                return Err(DosimetryError::InvalidScan("angles must increase strictly"));
            }
        }
        Ok(PolarScanCurve {
            center_m: Vec3::ZERO,
            radius_m: 1.0,
            plane: Plane::XY,
            samples,
        })
    }

    pub fn scaled(&self, factor: f64) -> PolarScanCurve {
        PolarScanCurve {
            samples: self.samples.iter().map(|&(a, v)| (a, v * factor)).collect(),
            ..self.clone()
        }
    }

    pub fn value_at(&self, angle_deg: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|(a, _)| (a - angle_deg).abs() <= ANGLE_MATCH_DEG)
            .map(|&(_, v)| v)
    }
}

/// Angles closer than this are treated as the same scan position.
pub const ANGLE_MATCH_DEG: f64 = 1e-9;

/// Samples `tensor` on a circle at `0, step, 2 step, ...` degrees below 360.
pub fn polar_scan(
    tensor: &KermaTensor,
    center_m: Vec3,
    radius_m: f64,
    plane: Plane,
    step_deg: f64,
    mode: Sampling,
) -> Result<PolarScanCurve, DosimetryError> {
    if !(step_deg > 0.0 && step_deg <= 360.0) {
        return Err(DosimetryError::InvalidScan("step must lie in (0, 360]"));
    }
    let n = libm::ceil(360.0 / step_deg - 1e-9) as usize;
    let angles: Vec<f64> = (0..n)
        .map(|i| i as f64 * step_deg)
        .filter(|&a| a < 360.0)
        .collect();
    polar_scan_at(tensor, center_m, radius_m, plane, &angles, mode)
}

/// Samples `tensor` on a circle at the given angles.
pub fn polar_scan_at(
    tensor: &KermaTensor,
    center_m: Vec3,
    radius_m: f64,
    plane: Plane,
    angles_deg: &[f64],
    mode: Sampling,
) -> Result<PolarScanCurve, DosimetryError> {
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(DosimetryError::InvalidScan("radius must be positive"));
    }
    let (a, b) = plane.axes();
    let mut samples = Vec::with_capacity(angles_deg.len());
    for &angle in angles_deg {
        let (s, c) = libm::sincos(angle.to_radians());
        let p = center_m + a * (radius_m * c) + b * (radius_m * s);
        let value = tensor
            .sample(p, mode)
            .ok_or(DosimetryError::OutOfBounds { angle_deg: angle })?;
        samples.push((angle, value));
    }
    Ok(PolarScanCurve {
        center_m,
        radius_m,
        plane,
        samples,
    })
}

/// Pairs `(angle, measured, simulated)` at angles present in both curves.
pub fn matched(measured: &PolarScanCurve, simulated: &PolarScanCurve) -> Vec<(f64, f64, f64)> {
    measured
        .samples
        .iter()
        .filter_map(|&(a, m)| simulated.value_at(a).map(|s| (a, m, s)))
        .collect()
}

/// Trapezoidal integral over ascending abscissae.
pub fn trapezoid(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (x, y) in points {
        if let Some((x0, y0)) = prev {
            total += 0.5 * (x - x0) * (y0 + y);
        }
        prev = Some((x, y));
    }
    total
}

/// Ratio of the angular integrals of measured over simulated, on their common angles.
pub fn conversion_factor(
    measured: &PolarScanCurve,
    simulated: &PolarScanCurve,
) -> Result<f64, DosimetryError> {
    let pairs = matched(measured, simulated);
    if pairs.len() < 2 {
        return Err(DosimetryError::EmptyIntersection);
    }
    let m = trapezoid(pairs.iter().map(|&(a, m, _)| (a, m)));
    let s = trapezoid(pairs.iter().map(|&(a, _, s)| (a, s)));
    if s == 0.0 || !s.is_finite() {
        return Err(DosimetryError::ZeroSimulatedIntegral);
    }
    Ok(m / s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub median_rel: f64,
    pub mean_rel: f64,
    pub std_rel: f64,
    pub excluded_angles: Vec<f64>,
    /// Angles the statistics were computed over.
    pub angles: Vec<f64>,
}

/// Point-wise relative error `|m - s| / m` per matched angle.
pub fn relative_errors(
    measured: &PolarScanCurve,
    simulated_scaled: &PolarScanCurve,
    excluded_angles: &[f64],
) -> Result<Vec<(f64, f64)>, DosimetryError> {
    matched(measured, simulated_scaled)
        .into_iter()
        .filter(|(a, _, _)| {
            !excluded_angles
                .iter()
                .any(|x| (x - a).abs() <= ANGLE_MATCH_DEG)
        })
        .map(|(a, m, s)| {
            if m > 0.0 {
                Ok((a, (m - s).abs() / m))
            } else {
                Err(DosimetryError::NonPositiveMeasurement { angle_deg: a })
            }
        })
        .collect()
}

/// Median, mean and population standard deviation of the relative errors.
pub fn error_stats(
    measured: &PolarScanCurve,
    simulated_scaled: &PolarScanCurve,
    excluded_angles: &[f64],
) -> Result<ErrorStats, DosimetryError> {
    let errors = relative_errors(measured, simulated_scaled, excluded_angles)?;
    if errors.is_empty() {
        return Err(DosimetryError::EmptyIntersection);
    }
    let mut e: Vec<f64> = errors.iter().map(|&(_, e)| e).collect();
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    e.sort_unstable_by(f64::total_cmp);
    let mid = e.len() / 2;
    let median = if e.len() % 2 == 1 {
        e[mid]
    } else {
        0.5 * (e[mid - 1] + e[mid])
    };
    Ok(ErrorStats {
        median_rel: median,
        mean_rel: mean,
        std_rel: libm::sqrt(var),
        excluded_angles: excluded_angles.to_vec(),
        angles: errors.iter().map(|&(a, _)| a).collect(),
    })
}
