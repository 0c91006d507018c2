//! Photon-only Monte-Carlo transport: emission, free flight, photoelectric
//! absorption and Compton scattering through a scene of analytic bodies.

use core::f64::consts::PI;

use rand_core::RngCore;

use crate::field::FieldShape;
use crate::geometry::{Aabb, Scene};
use crate::material::{sample_free_path, Material, MaterialError};
use crate::rng::uniform;
use crate::spectrum::Spectrum;
use crate::vec3::Vec3;

/// Electron rest energy in keV.
pub const ELECTRON_REST_KEV: f64 = 510.998_95;
/// Photons below this energy are dropped.
pub const ENERGY_CUTOFF_KEV: f64 = 1.0;
/// Tracks longer than this many steps are abandoned.
pub const MAX_STEPS: u32 = 10_000;

/// Track component a segment is scored into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    /// Unscattered primary.
    Beam,
    /// Scattered, travelling inside a patient body.
    Patient,
    /// Scattered, travelling outside any patient body.
    Scatter,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Beam, Component::Patient, Component::Scatter];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn channel_name(self) -> &'static str {
        match self {
            Component::Beam => "beam",
            Component::Patient => "patient",
            Component::Scatter => "scatter",
        }
    }

    pub fn from_channel_name(name: &str) -> Option<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.channel_name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct PhotonState {
    pub position_m: Vec3,
    pub direction: Vec3,
    pub energy_keV: f64,
    pub scatter_count: u32,
    pub component: Component,
}

impl PhotonState {
    /// Unscattered photon.
    #[allow(non_snake_case)]
    pub fn primary(position_m: Vec3, direction: Vec3, energy_keV: f64) -> Self {
        PhotonState {
            position_m,
            direction: direction.normalized(),
            energy_keV,
            scatter_count: 0,
            component: Component::Beam,
        }
    }
}

/// Component of a segment travelled by `photon`.
pub fn classify_segment(photon: &PhotonState, inside_patient: bool) -> Component {
    match (photon.scatter_count, inside_patient) {
        (0, _) => Component::Beam,
        (_, true) => Component::Patient,
        (_, false) => Component::Scatter,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub position_m: Vec3,
    pub direction: Vec3,
    pub shape: FieldShape,
    pub spectrum: Spectrum,
}

impl SourceConfig {
    /// Width and height directions of a pyramid field, perpendicular to the axis.
    ///
    /// The width edge runs along `direction x z` (or `direction x y` when the
    /// axis is close to z).
    pub fn frame(&self) -> (Vec3, Vec3) {
        let axis = self.direction.normalized();
        let e1 = axis.any_orthonormal();
        (e1, axis.cross(e1))
    }
}

/// Samples a primary photon: energy from the spectrum, direction uniform over
/// the cone's solid angle or over the pyramid's base rectangle.
pub fn emit_primary<R: RngCore + ?Sized>(source: &SourceConfig, rng: &mut R) -> PhotonState {
    let axis = source.direction.normalized();
    let (e1, e2) = source.frame();
    let direction = match source.shape {
        FieldShape::Cone { opening_angle_deg } => {
            let half = 0.5 * opening_angle_deg.to_radians();
            let cos_max = libm::cos(half);
            let cos_t = 1.0 - uniform(rng) * (1.0 - cos_max);
            let sin_t = libm::sqrt((1.0 - cos_t * cos_t).max(0.0));
            let (s, c) = libm::sincos(2.0 * PI * uniform(rng));
            (e1 * (sin_t * c) + e2 * (sin_t * s) + axis * cos_t).normalized()
        }
        FieldShape::Pyramid {
            rect_w_m,
            rect_h_m,
            at_distance_m,
        } => {
            let a = (uniform(rng) - 0.5) * rect_w_m;
            let b = (uniform(rng) - 0.5) * rect_h_m;
            (axis * at_distance_m + e1 * a + e2 * b).normalized()
        }
    };
    let energy = source.spectrum.sample_energy(uniform(rng));
    PhotonState::primary(source.position_m, direction, energy)
}

/// Compton-scattered energy for scattering angle `theta`.
#[allow(non_snake_case)]
pub fn compton_energy(energy_keV: f64, theta: f64) -> f64 {
    energy_keV / (1.0 + energy_keV / ELECTRON_REST_KEV * (1.0 - libm::cos(theta)))
}

/// Samples a Klein–Nishina scattering angle with Kahn's rejection method.
///
/// Returns the scattered energy and the polar angle in radians.
#[allow(non_snake_case)]
pub fn compton_scatter<R: RngCore + ?Sized>(energy_keV: f64, rng: &mut R) -> (f64, f64) {
    let k = energy_keV / ELECTRON_REST_KEV;
    let branch = (1.0 + 2.0 * k) / (9.0 + 2.0 * k);
    // x is the ratio of scattered to incident wavelength
    let x = loop {
        let (r1, r2, r3) = (uniform(rng), uniform(rng), uniform(rng));
        if r1 <= branch {
            let x = 1.0 + 2.0 * k * r2;
            if r3 <= 4.0 * (1.0 / x - 1.0 / (x * x)) {
                break x;
            }
        } else {
            let x = (1.0 + 2.0 * k) / (1.0 + 2.0 * k * r2);
            let mu = 1.0 - (x - 1.0) / k;
            if r3 <= 0.5 * (mu * mu + 1.0 / x) {
                break x;
            }
        }
    };
    let cos_t = (1.0 - (x - 1.0) / k).clamp(-1.0, 1.0);
    (energy_keV / x, libm::acos(cos_t))
}

/// Rotates unit vector `dir` by polar angle `theta` and azimuth `phi`.
pub fn deflect(dir: Vec3, cos_t: f64, phi: f64) -> Vec3 {
    let sin_t = libm::sqrt((1.0 - cos_t * cos_t).max(0.0));
    let (sp, cp) = libm::sincos(phi);
    let out = if dir.z.abs() > 0.999_99 {
        Vec3::new(sin_t * cp, sin_t * sp, dir.z.signum() * cos_t)
    } else {
        let sq = libm::sqrt(1.0 - dir.z * dir.z);
        Vec3::new(
            sin_t * (dir.x * dir.z * cp - dir.y * sp) / sq + dir.x * cos_t,
            sin_t * (dir.y * dir.z * cp + dir.x * sp) / sq + dir.y * cos_t,
            -sin_t * cp * sq + dir.z * cos_t,
        )
    };
    out.normalized()
}

/// Straight piece of a track at constant energy and direction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
    pub energy_keV: f64,
    pub direction: Vec3,
    pub component: Component,
}

pub trait SegmentSink {
    fn segment(&mut self, segment: &Segment);
}

impl<F: FnMut(&Segment)> SegmentSink for F {
    fn segment(&mut self, segment: &Segment) {
        self(segment)
    }
}

impl SegmentSink for alloc::vec::Vec<Segment> {
    fn segment(&mut self, segment: &Segment) {
        self.push(*segment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Left the world box.
    Exited,
    /// Photoelectric absorption.
    Absorbed,
    /// Energy fell below the cutoff or below the medium's tabulated range.
    Cutoff,
    /// Gave up after [`MAX_STEPS`].
    StepCap,
}

/// Merges consecutive segments that continue each other across a material
/// boundary, so one straight flight is scored once.
struct Coalescer<'a, S: SegmentSink + ?Sized> {
    sink: &'a mut S,
    pending: Option<Segment>,
}

impl<S: SegmentSink + ?Sized> Coalescer<'_, S> {
    fn push(&mut self, seg: Segment) {
        if seg.start == seg.end {
            return;
        }
        if let Some(p) = &mut self.pending {
            if p.end == seg.start
                && p.direction == seg.direction
                && p.energy_keV == seg.energy_keV
                && p.component == seg.component
            {
                p.end = seg.end;
                return;
            }
        }
        self.flush();
        self.pending = Some(seg);
    }

    fn flush(&mut self) {
        if let Some(p) = self.pending.take() {
            self.sink.segment(&p);
        }
    }
}

/// Follows one photon until it is absorbed, leaves `world`, or falls below the cutoff.
///
/// Every straight flight is reported to `sink` with its entrance energy and
/// component. The photon state is updated in place.
pub fn trace_photon<R, S>(
    photon: &mut PhotonState,
    scene: &Scene,
    world: &Aabb,
    sink: &mut S,
    rng: &mut R,
) -> Termination
where
    R: RngCore + ?Sized,
    S: SegmentSink + ?Sized,
{
    let mut out = Coalescer {
        sink,
        pending: None,
    };
    let mut current = scene.body_at(photon.position_m);
    let mut last_exited: Option<usize> = None;

    for _ in 0..MAX_STEPS {
        if photon.energy_keV < ENERGY_CUTOFF_KEV {
            out.flush();
            return Termination::Cutoff;
        }
        let pos = photon.position_m;
        let dir = photon.direction;

        let Some((_, world_exit)) = world.ray_interval(pos, dir).filter(|&(_, t1)| t1 > 0.0) else {
            out.flush();
            return Termination::Exited;
        };

        // distance to the next body boundary along the ray
        let mut boundary = f64::INFINITY;
        let mut entering = None;
        match current {
            Some(i) => {
                if let Some((_, t1)) = scene.bodies[i].ray_interval(pos, dir) {
                    boundary = t1.max(0.0);
                } else {
                    boundary = 0.0;
                }
            }
            None => {
                for (j, body) in scene.bodies.iter().enumerate() {
                    if Some(j) == last_exited {
                        continue;
                    }
                    if let Some((t0, t1)) = body.ray_interval(pos, dir) {
                        let t = t0.max(0.0);
                        if t1 > 1e-12 && t < boundary {
                            boundary = t;
                            entering = Some(j);
                        }
                    }
                }
            }
        }

        let inside_patient = current.is_some_and(|i| scene.bodies[i].is_patient);
        photon.component = classify_segment(photon, inside_patient);
        let material: &Material = scene.material(current);

        let attenuation = match material.attenuation(photon.energy_keV) {
            Ok(a) => a,
            Err(MaterialError::OutOfRange(_)) | Err(_) => {
                out.flush();
                return Termination::Cutoff;
            }
        };
        let flight = match sample_free_path(material, photon.energy_keV, uniform(rng)) {
            Ok(s) => s,
            Err(_) => {
                out.flush();
                return Termination::Cutoff;
            }
        };

        let step = boundary.min(world_exit);
        if flight < step {
            let p = pos + dir * flight;
            out.push(Segment {
                start: pos,
                end: p,
                energy_keV: photon.energy_keV,
                direction: dir,
                component: photon.component,
            });
            photon.position_m = p;
            let interacting = attenuation.photoelectric + attenuation.compton;
            if uniform(rng) * interacting < attenuation.photoelectric {
                out.flush();
                return Termination::Absorbed;
            }
            let (energy, theta) = compton_scatter(photon.energy_keV, rng);
            let phi = 2.0 * PI * uniform(rng);
            photon.direction = deflect(dir, libm::cos(theta), phi);
            photon.energy_keV = energy;
            photon.scatter_count += 1;
            last_exited = None;
        } else {
            let p = pos + dir * step;
            out.push(Segment {
                start: pos,
                end: p,
                energy_keV: photon.energy_keV,
                direction: dir,
                component: photon.component,
            });
            photon.position_m = p;
            if world_exit <= boundary {
                out.flush();
                return Termination::Exited;
            }
            match current {
                Some(i) => {
                    last_exited = Some(i);
                    current = None;
                }
                None => {
                    current = entering;
                    last_exited = None;
                }
            }
        }
    }
    out.flush();
    Termination::StepCap
}
