//! Tabulated X-ray spectra and inverse-CDF energy sampling.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("a spectrum needs at least two points")]
    TooFewPoints,
    #[error("energies must be finite and strictly increasing (at point {0})")]
    NotIncreasing(usize),
    #[error("intensity at point {0} is negative or not finite")]
    BadIntensity(usize),
    #[error("spectrum has zero total intensity")]
    Empty,
}

/// Piecewise-linear spectrum given as `(energy_keV, relative_intensity)` points.
///
/// Each interval between neighbouring points carries the trapezoid weight of
/// its end intensities and is sampled uniformly, so the cumulative
/// distribution is linear inside an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    points: Vec<(f64, f64)>,
    /// `cdf[i]` is the probability below `points[i].0`; `cdf[0] = 0`, last = 1.
    cdf: Vec<f64>,
}

impl Spectrum {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, SpectrumError> {
        if points.len() < 2 {
            return Err(SpectrumError::TooFewPoints);
        }
        for (i, &(e, w)) in points.iter().enumerate() {
            if !e.is_finite() || (i > 0 && e <= points[i - 1].0) {
                return Err(SpectrumError::NotIncreasing(i));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(SpectrumError::BadIntensity(i));
            }
        }
        let mut cdf = Vec::with_capacity(points.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for pair in points.windows(2) {
            let ((e0, w0), (e1, w1)) = (pair[0], pair[1]);
            acc += 0.5 * (w0 + w1) * (e1 - e0);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(SpectrumError::Empty);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Spectrum { points, cdf })
    }

    /// Monoenergetic line, represented as a very narrow interval just below `energy_keV`.
    #[allow(non_snake_case)]
    pub fn monoenergetic(energy_keV: f64) -> Result<Self, SpectrumError> {
        let width = energy_keV.abs().max(1.0) * 1e-9;
        Spectrum::new(alloc::vec![(energy_keV - width, 1.0), (energy_keV, 1.0)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    #[allow(non_snake_case)]
    pub fn min_energy_keV(&self) -> f64 {
        self.points[0].0
    }

    #[allow(non_snake_case)]
    pub fn max_energy_keV(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Probability mass of interval `i` (between points `i` and `i + 1`).
    pub fn interval_probability(&self, i: usize) -> f64 {
        self.cdf[i + 1] - self.cdf[i]
    }

    /// Energy whose cumulative probability is `u`, for `u` in `[0, 1)`.
    pub fn sample_energy(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // first index with cdf > u, so the interval is [i - 1, i]
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (e0, e1) = (self.points[i - 1].0, self.points[i].0);
        if c1 > c0 {
            e0 + (u - c0) / (c1 - c0) * (e1 - e0)
        } else {
            e0
        }
    }
}
