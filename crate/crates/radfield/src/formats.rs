//! Text inputs and outputs: spectrum and curve CSVs, scene JSON.

use std::io::{Read, Write};

use radfield_core::dosimetry::{DosimetryError, PolarScanCurve};
use radfield_core::geometry::{Axis, Body, Scene, SceneError, Shape, Transform};
use radfield_core::material::{Material, MaterialError};
use radfield_core::spectrum::{Spectrum, SpectrumError};
use radfield_core::Vec3;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header {expected:?}, found {found:?}")]
    Header {
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Curve(#[from] DosimetryError),
    #[error("{0}")]
    Invalid(String),
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Rows of a two-column numeric CSV with a fixed header.
fn read_pairs<R: Read>(
    source: R,
    columns: [&'static str; 2],
    header: &'static str,
) -> Result<Vec<(f64, f64)>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let found = reader.headers()?.clone();
    if found.len() != 2 || found.get(0) != Some(columns[0]) || found.get(1) != Some(columns[1]) {
        return Err(FormatError::Header {
            expected: header,
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64, FormatError> {
            let field = record.get(i).unwrap_or_default();
            field.parse::<f64>().map_err(|_| FormatError::Row {
                line,
                message: format!("{:?} is not a number", field),
            })
        };
        if record.len() != 2 {
            return Err(FormatError::Row {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        rows.push((parse(0)?, parse(1)?));
    }
    Ok(rows)
}

pub const SPECTRUM_HEADER: &str = "energy_keV,relative_intensity";

/// Reads a spectrum CSV. A single row describes a monoenergetic source.
pub fn read_spectrum<R: Read>(source: R) -> Result<Spectrum, FormatError> {
    let rows = read_pairs(
        source,
        ["energy_keV", "relative_intensity"],
        SPECTRUM_HEADER,
    )?;
    match rows.as_slice() {
        [(e, w)] if *w > 0.0 => Ok(Spectrum::monoenergetic(*e)?),
        _ => Ok(Spectrum::new(rows)?),
    }
}

pub const CURVE_HEADER: &str = "angle_deg,value";

pub fn read_curve<R: Read>(source: R) -> Result<PolarScanCurve, FormatError> {
    let rows = read_pairs(source, ["angle_deg", "value"], CURVE_HEADER)?;
    Ok(PolarScanCurve::from_samples(rows)?)
}

pub fn write_curve<W: Write>(sink: W, curve: &PolarScanCurve) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["angle_deg", "value"])?;
    for &(a, v) in &curve.samples {
        w.write_record([a.to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const COMPARISON_HEADER: &str = "angle_deg,measured,simulated_scaled,e_rel";

/// Writes `(angle, measured, simulated_scaled, e_rel)` rows.
pub fn write_comparison<W: Write>(
    sink: W,
    rows: &[(f64, f64, f64, f64)],
) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["angle_deg", "measured", "simulated_scaled", "e_rel"])?;
    for &(a, m, s, e) in rows {
        w.write_record([a.to_string(), m.to_string(), s.to_string(), e.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    bodies: Vec<BodyDoc>,
    #[serde(default = "default_ambient")]
    ambient: String,
}

fn default_ambient() -> String {
    "air".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyDoc {
    shape: ShapeDoc,
    #[serde(default)]
    translation_m: [f64; 3],
    #[serde(default)]
    rotation_deg: [f64; 3],
    material: String,
    #[serde(default)]
    is_patient: bool,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ShapeDoc {
    Cylinder {
        radius_m: f64,
        height_m: f64,
        #[serde(default = "default_axis")]
        axis: String,
    },
    Sphere {
        radius_m: f64,
    },
    Box {
        half_extents_m: [f64; 3],
    },
}

fn default_axis() -> String {
    "z".into()
}

fn parse_axis(s: &str) -> Result<Axis, FormatError> {
    match s {
        "x" | "X" => Ok(Axis::X),
        "y" | "Y" => Ok(Axis::Y),
        "z" | "Z" => Ok(Axis::Z),
        other => Err(FormatError::Invalid(format!(
            "unknown cylinder axis {other:?}"
        ))),
    }
}

/// Parses a scene document.
pub fn parse_scene(bytes: &[u8]) -> Result<Scene, FormatError> {
    let doc: SceneDoc = serde_json::from_slice(bytes)?;
    let mut bodies = Vec::with_capacity(doc.bodies.len());
    for b in doc.bodies {
        let shape = match b.shape {
            ShapeDoc::Cylinder {
                radius_m,
                height_m,
                axis,
            } => Shape::Cylinder {
                radius_m,
                height_m,
                axis: parse_axis(&axis)?,
            },
            ShapeDoc::Sphere { radius_m } => Shape::Sphere { radius_m },
            ShapeDoc::Box { half_extents_m } => Shape::Box {
                half_extents_m: Vec3::from_array(half_extents_m),
            },
        };
        let translation = Vec3::from_array(b.translation_m);
        let rotation = Vec3::from_array(b.rotation_deg);
        if !translation.is_finite() || !rotation.is_finite() {
            return Err(FormatError::Invalid("body placement must be finite".into()));
        }
        bodies.push(Body {
            shape,
            transform: Transform::from_euler_deg(rotation, translation),
            material: Material::by_name(&b.material)?,
            is_patient: b.is_patient,
        });
    }
    Ok(Scene::new(bodies, Material::by_name(&doc.ambient)?)?)
}
