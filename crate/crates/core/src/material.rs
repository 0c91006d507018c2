//! Photon interaction data for the built-in media.
//!
//! Tables list `(energy_keV, mu/rho total, mu/rho photoelectric, mu/rho Compton)`
//! in cm^2/g. Totals include coherent scattering, which the transport kernel
//! does not model separately; see `data/README.md` for provenance.

use alloc::string::String;
use alloc::vec::Vec;

/// One tabulated energy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct AttenuationPoint {
    pub energy_keV: f64,
    pub total_cm2_g: f64,
    pub photoelectric_cm2_g: f64,
    pub compton_cm2_g: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaterialError {
    #[error("energy {0} keV outside the attenuation table")]
    OutOfRange(f64),
    #[error("invalid material table: {0}")]
    InvalidTable(&'static str),
    #[error("unknown material {0:?}")]
    Unknown(String),
}

/// Linear attenuation split by interaction, in 1/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attenuation {
    pub total: f64,
    pub photoelectric: f64,
    pub compton: f64,
}

/// A medium; an empty table means vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub density_g_cm3: f64,
    table: Vec<AttenuationPoint>,
}

const AIR: [(f64, f64, f64, f64); 10] = [
    (10.0, 5.120, 4.7384, 0.19254),
    (15.0, 1.614, 1.3288, 0.18908),
    (20.0, 0.7779, 0.5322, 0.18578),
    (30.0, 0.3538, 0.14435, 0.17962),
    (40.0, 0.2485, 0.056694, 0.17398),
    (50.0, 0.2080, 0.027357, 0.1688),
    (60.0, 0.1875, 0.015053, 0.16402),
    (80.0, 0.1662, 0.0058558, 0.15551),
    (100.0, 0.1541, 0.0028076, 0.14813),
    (150.0, 0.1356, 0.00074772, 0.13336),
];

const WATER: [(f64, f64, f64, f64); 10] = [
    (10.0, 5.329, 4.94, 0.21409),
    (15.0, 1.673, 1.3682, 0.21025),
    (20.0, 0.8096, 0.54285, 0.20658),
    (30.0, 0.3756, 0.14531, 0.19973),
    (40.0, 0.2683, 0.056531, 0.19346),
    (50.0, 0.2269, 0.027081, 0.1877),
    (60.0, 0.2059, 0.014823, 0.18239),
    (80.0, 0.1837, 0.0057165, 0.17292),
    (100.0, 0.1707, 0.0027288, 0.16471),
    (150.0, 0.1505, 0.00071688, 0.14829),
];

const SOFT_TISSUE: [(f64, f64, f64, f64); 10] = [
    (10.0, 5.379, 4.96, 0.21204),
    (15.0, 1.694, 1.3903, 0.20823),
    (20.0, 0.8223, 0.55642, 0.2046),
    (30.0, 0.3792, 0.15071, 0.19781),
    (40.0, 0.2688, 0.059105, 0.1916),
    (50.0, 0.2264, 0.028487, 0.1859),
    (60.0, 0.2048, 0.015667, 0.18064),
    (80.0, 0.1823, 0.006091, 0.17126),
    (100.0, 0.1693, 0.0029271, 0.16313),
    (150.0, 0.1492, 0.00078541, 0.14686),
];

/// Mass energy-transfer coefficient of dry air, cm^2/g, same energy grid.
pub const AIR_ENERGY_TRANSFER: [(f64, f64); 10] = [
    (10.0, 4.742),
    (15.0, 1.334),
    (20.0, 0.5389),
    (30.0, 0.1537),
    (40.0, 0.06833),
    (50.0, 0.04098),
    (60.0, 0.03041),
    (80.0, 0.02407),
    (100.0, 0.02325),
    (150.0, 0.02496),
];

/// Log-log interpolation in a table sorted by x. `None` outside the table.
pub fn loglog_interpolate<T>(table: &[T], x: f64, key: impl Fn(&T) -> (f64, f64)) -> Option<f64> {
    let first = key(table.first()?).0;
    let last = key(table.last()?).0;
    if !(x >= first && x <= last) {
        return None;
    }
    let i = table
        .partition_point(|p| key(p).0 <= x)
        .clamp(1, table.len() - 1);
    let (x0, y0) = key(&table[i - 1]);
    let (x1, y1) = key(&table[i]);
    if x == x0 {
        return Some(y0);
    }
    if y0 <= 0.0 || y1 <= 0.0 {
        // linear fallback keeps zero columns well defined
        return Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
    }
    let t = libm::log(x / x0) / libm::log(x1 / x0);
    Some(libm::exp(libm::log(y0) + t * libm::log(y1 / y0)))
}

impl Material {
    pub fn new(
        name: impl Into<String>,
        density_g_cm3: f64,
        table: Vec<AttenuationPoint>,
    ) -> Result<Self, MaterialError> {
        if !(density_g_cm3 > 0.0 && density_g_cm3.is_finite()) {
            return Err(MaterialError::InvalidTable("density must be positive"));
        }
        if table.is_empty() {
            return Err(MaterialError::InvalidTable("table must not be empty"));
        }
        for (i, p) in table.iter().enumerate() {
            if !(p.energy_keV > 0.0) || (i > 0 && p.energy_keV <= table[i - 1].energy_keV) {
                return Err(MaterialError::InvalidTable(
                    "energies must increase strictly",
                ));
            }
            if !(p.photoelectric_cm2_g >= 0.0 && p.compton_cm2_g >= 0.0) {
                return Err(MaterialError::InvalidTable(
                    "coefficients must be non-negative",
                ));
            }
            if p.photoelectric_cm2_g + p.compton_cm2_g > p.total_cm2_g * (1.0 + 1e-12) {
                return Err(MaterialError::InvalidTable(
                    "photoelectric + Compton exceeds the total",
                ));
            }
        }
        Ok(Material {
            name: name.into(),
            density_g_cm3,
            table,
        })
    }

    fn from_rows(name: &str, density: f64, rows: &[(f64, f64, f64, f64)]) -> Self {
        let table = rows
            .iter()
            .map(|&(e, t, p, c)| AttenuationPoint {
                energy_keV: e,
                total_cm2_g: t,
                photoelectric_cm2_g: p,
                compton_cm2_g: c,
            })
            .collect();
        Material::new(name, density, table).expect("built-in table is valid")
    }

    /// Vacuum: no interactions at any energy.
    pub fn vacuum() -> Self {
        Material {
            name: "vacuum".into(),
            density_g_cm3: f64::MIN_POSITIVE,
            table: Vec::new(),
        }
    }

    /// Dry air near sea level.
    pub fn air() -> Self {
        Self::from_rows("air", 1.205e-3, &AIR)
    }

    pub fn water() -> Self {
        Self::from_rows("water", 1.0, &WATER)
    }

    /// ICRU-44 soft tissue.
    pub fn soft_tissue() -> Self {
        Self::from_rows("soft_tissue", 1.06, &SOFT_TISSUE)
    }

    pub fn by_name(name: &str) -> Result<Self, MaterialError> {
        match name {
            "vacuum" => Ok(Self::vacuum()),
            "air" => Ok(Self::air()),
            "water" => Ok(Self::water()),
            "soft_tissue" | "tissue" => Ok(Self::soft_tissue()),
            other => Err(MaterialError::Unknown(other.into())),
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &[AttenuationPoint] {
        &self.table
    }

    /// Linear attenuation coefficients at `energy_keV`, in 1/m.
    #[allow(non_snake_case)]
    pub fn attenuation(&self, energy_keV: f64) -> Result<Attenuation, MaterialError> {
        if self.is_vacuum() {
            return Ok(Attenuation {
                total: 0.0,
                photoelectric: 0.0,
                compton: 0.0,
            });
        }
        // cm^2/g * g/cm^3 = 1/cm; * 100 = 1/m
        let scale = self.density_g_cm3 * 100.0;
        let col = |f: fn(&AttenuationPoint) -> f64| {
            loglog_interpolate(&self.table, energy_keV, |p| (p.energy_keV, f(p)))
                .map(|v| v * scale)
                .ok_or(MaterialError::OutOfRange(energy_keV))
        };
        Ok(Attenuation {
            total: col(|p| p.total_cm2_g)?,
            photoelectric: col(|p| p.photoelectric_cm2_g)?,
            compton: col(|p| p.compton_cm2_g)?,
        })
    }

    /// Total linear attenuation coefficient in 1/m.
    #[allow(non_snake_case)]
    pub fn mu_per_m(&self, energy_keV: f64) -> Result<f64, MaterialError> {
        self.attenuation(energy_keV).map(|a| a.total)
    }
}

/// Exponential free path `-ln(1 - u) / mu`, in meters. Vacuum yields infinity.
#[allow(non_snake_case)]
pub fn sample_free_path(
    material: &Material,
    energy_keV: f64,
    u: f64,
) -> Result<f64, MaterialError> {
    let mu = material.mu_per_m(energy_keV)?;
    if mu <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-libm::log1p(-u) / mu)
}
