//! Run configuration document.

use std::path::{Path, PathBuf};

use radfield_core::engine::RunLimits;
use radfield_core::geometry::Scene;
use radfield_core::scoring::EVALUATION_INTERVAL;
use radfield_core::spectrum::Spectrum;
use radfield_core::transport::SourceConfig;
use radfield_core::{EnergyBinning, FieldShape, GridSpec, Vec3};
use serde::Deserialize;

use crate::error::Error;
use crate::formats::{self, sha256_hex};

/// Environment variable overriding the configured worker count.
pub const THREADS_ENV: &str = "RADFIELD_THREADS";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths are resolved against the configuration file's directory.
    pub scene_path: PathBuf,
    pub spectrum_path: PathBuf,
    pub source: SourceDoc,
    #[serde(default)]
    pub grid: GridDoc,
    #[serde(default)]
    pub binning: BinningDoc,
    pub epsilon_threshold: f64,
    pub max_photons: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_path: PathBuf,
    /// Stored verbatim in the output; kept out of the clock so reruns are byte-identical.
    #[serde(default = "default_timestamp")]
    pub timestamp_utc: String,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn default_timestamp() -> String {
    "unspecified".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    pub position_m: [f64; 3],
    pub direction: [f64; 3],
    pub shape: ShapeDoc,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeDoc {
    Cone {
        opening_angle_deg: f64,
    },
    Pyramid {
        rect_w_m: f64,
        rect_h_m: f64,
        at_distance_m: f64,
    },
}

impl From<ShapeDoc> for FieldShape {
    fn from(s: ShapeDoc) -> Self {
        match s {
            ShapeDoc::Cone { opening_angle_deg } => FieldShape::Cone { opening_angle_deg },
            ShapeDoc::Pyramid {
                rect_w_m,
                rect_h_m,
                at_distance_m,
            } => FieldShape::Pyramid {
                rect_w_m,
                rect_h_m,
                at_distance_m,
            },
        }
    }
}

/// Grid placement: either `origin_m` (minimum corner) or `center_m`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub extent_m: [f64; 3],
    pub voxel_m: [f64; 3],
    pub origin_m: Option<[f64; 3]>,
    pub center_m: Option<[f64; 3]>,
}

impl Default for GridDoc {
    fn default() -> Self {
        GridDoc {
            extent_m: [1.0; 3],
            voxel_m: [0.02; 3],
            origin_m: None,
            center_m: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct BinningDoc {
    pub bin_count: u32,
    pub bin_width_keV: f64,
}

impl Default for BinningDoc {
    fn default() -> Self {
        BinningDoc {
            bin_count: 32,
            bin_width_keV: 4.68,
        }
    }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub scene: Scene,
    pub scene_digest: String,
    pub source: SourceConfig,
    pub spectrum_id: String,
    pub grid: GridSpec,
    pub binning: EnergyBinning,
    pub limits: RunLimits,
    pub seed: u64,
    pub workers: usize,
    pub output_path: PathBuf,
    pub timestamp_utc: String,
}

fn config_error(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", path.display()))
}

impl RunConfig {
    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self, Error> {
        serde_json::from_slice(bytes).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            source: e.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &bytes)
    }

    /// Checks the numeric constraints and loads the referenced files.
    /// `base` is the directory relative paths are resolved against.
    pub fn prepare(
        &self,
        config_path: &Path,
        workers_override: Option<usize>,
    ) -> Result<PreparedRun, Error> {
        let base = config_path.parent().unwrap_or(Path::new(""));
        let err = |msg: &str| config_error(config_path, msg);
        if !(self.epsilon_threshold > 0.0 && self.epsilon_threshold < 1.0) {
            return Err(err("epsilon_threshold must lie in (0, 1)"));
        }
        if self.max_photons < EVALUATION_INTERVAL {
            return Err(config_error(
                config_path,
                format!("max_photons must be at least {EVALUATION_INTERVAL}"),
            ));
        }
        let workers = workers_override.unwrap_or(self.workers);
        if workers == 0 {
            return Err(err("workers must be positive"));
        }

        let position = Vec3::from_array(self.source.position_m);
        let direction = Vec3::from_array(self.source.direction);
        if !position.is_finite() || !direction.is_finite() || direction.norm() == 0.0 {
            return Err(err(
                "source position and direction must be finite, direction non-zero",
            ));
        }
        let shape = FieldShape::from(self.source.shape);
        shape.validate().map_err(|e| config_error(config_path, e))?;

        let extent = Vec3::from_array(self.grid.extent_m);
        let voxel = Vec3::from_array(self.grid.voxel_m);
        let grid = match (self.grid.origin_m, self.grid.center_m) {
            (Some(_), Some(_)) => return Err(err("grid takes origin_m or center_m, not both")),
            (Some(o), None) => GridSpec::new(extent, voxel, Vec3::from_array(o)),
            (None, c) => GridSpec::centered(extent, voxel, Vec3::from_array(c.unwrap_or([0.0; 3]))),
        }
        .map_err(|e| config_error(config_path, e))?;
        let binning = EnergyBinning::new(self.binning.bin_count, self.binning.bin_width_keV)
            .map_err(|e| config_error(config_path, e))?;

        let scene_path = base.join(&self.scene_path);
        let scene_bytes = std::fs::read(&scene_path).map_err(|e| Error::io(&scene_path, e))?;
        let scene = formats::parse_scene(&scene_bytes).map_err(|source| Error::Format {
            path: scene_path.clone(),
            source,
        })?;

        let spectrum_path = base.join(&self.spectrum_path);
        let spectrum_bytes =
            std::fs::read(&spectrum_path).map_err(|e| Error::io(&spectrum_path, e))?;
        let spectrum =
            formats::read_spectrum(spectrum_bytes.as_slice()).map_err(|source| Error::Format {
                path: spectrum_path.clone(),
                source,
            })?;
        check_spectrum_range(&spectrum, &scene).map_err(|m| config_error(&spectrum_path, m))?;

        Ok(PreparedRun {
            scene,
            scene_digest: sha256_hex(&scene_bytes),
            source: SourceConfig {
                position_m: position,
                direction: direction.normalized(),
                shape,
                spectrum,
            },
            spectrum_id: format!("sha256:{}", sha256_hex(&spectrum_bytes)),
            grid,
            binning,
            limits: RunLimits {
                epsilon_threshold: self.epsilon_threshold,
                max_photons: self.max_photons,
            },
            seed: self.seed,
            workers,
            output_path: base.join(&self.output_path),
            timestamp_utc: self.timestamp_utc.clone(),
        })
    }
}

/// Transport has no data above the attenuation tables, so primaries must stay inside them.
fn check_spectrum_range(spectrum: &Spectrum, scene: &Scene) -> Result<(), String> {
    let materials = scene
        .bodies
        .iter()
        .map(|b| &b.material)
        .chain([&scene.ambient]);
    for m in materials.filter(|m| !m.is_vacuum()) {
        let top = m.table().last().map_or(f64::INFINITY, |p| p.energy_keV);
        if spectrum.max_energy_keV() > top {
            return Err(format!(
                "spectrum reaches {} keV, above the {} keV covered for {}",
                spectrum.max_energy_keV(),
                top,
                m.name
            ));
        }
    }
    Ok(())
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV}={v:?} is not a positive integer"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
    }
}
