//! Analytic primitives placed in a scene, and ray intervals through them.

use alloc::vec::Vec;

use crate::material::Material;
use crate::rng::{chunk_rng, uniform};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Primitive in its local frame, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Cylinder along `axis`, spanning `-height/2..height/2`.
    Cylinder {
        radius_m: f64,
        height_m: f64,
        axis: Axis,
    },
    Sphere {
        radius_m: f64,
    },
    Box {
        half_extents_m: Vec3,
    },
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb::new(
            Vec3::new(
                self.min.x.min(o.min.x),
                self.min.y.min(o.min.y),
                self.min.z.min(o.min.z),
            ),
            Vec3::new(
                self.max.x.max(o.max.x),
                self.max.y.max(o.max.y),
                self.max.z.max(o.max.z),
            ),
        )
    }

    pub fn include(self, p: Vec3) -> Aabb {
        self.union(Aabb::new(p, p))
    }

    pub fn intersection(self, o: Aabb) -> Option<Aabb> {
        let min = Vec3::new(
            self.min.x.max(o.min.x),
            self.min.y.max(o.min.y),
            self.min.z.max(o.min.z),
        );
        let max = Vec3::new(
            self.max.x.min(o.max.x),
            self.max.y.min(o.max.y),
            self.max.z.min(o.max.z),
        );
        (min.x < max.x && min.y < max.y && min.z < max.z).then_some(Aabb::new(min, max))
    }

    pub fn expand(self, margin: f64) -> Aabb {
        let m = Vec3::new(margin, margin, margin);
        Aabb::new(self.min - m, self.max + m)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Parametric interval `[t0, t1]` of the line `origin + t * dir` inside the box.
    pub fn ray_interval(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut a, mut b) = (
                (self.min[i] - origin[i]) * inv,
                (self.max[i] - origin[i]) * inv,
            );
            if a > b {
                core::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

impl Shape {
    pub fn validate(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Shape::Cylinder {
                radius_m, height_m, ..
            } => pos(radius_m) && pos(height_m),
            Shape::Sphere { radius_m } => pos(radius_m),
            Shape::Box { half_extents_m: h } => pos(h.x) && pos(h.y) && pos(h.z),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        match *self {
            Shape::Cylinder {
                radius_m,
                height_m,
                axis,
            } => {
                let a = axis.index();
                let (u, v) = ((a + 1) % 3, (a + 2) % 3);
                p[a].abs() <= 0.5 * height_m && p[u] * p[u] + p[v] * p[v] <= radius_m * radius_m
            }
            Shape::Sphere { radius_m } => p.dot(p) <= radius_m * radius_m,
            Shape::Box { half_extents_m: h } => {
                p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z
            }
        }
    }

    pub fn local_bounds(&self) -> Aabb {
        let h = match *self {
            Shape::Cylinder {
                radius_m,
                height_m,
                axis,
            } => {
                let mut h = [radius_m; 3];
                h[axis.index()] = 0.5 * height_m;
                Vec3::from_array(h)
            }
            Shape::Sphere { radius_m } => Vec3::new(radius_m, radius_m, radius_m),
            Shape::Box { half_extents_m } => half_extents_m,
        };
        Aabb::new(-h, h)
    }

    /// Interval `[t0, t1]` of the line `origin + t * dir` inside the primitive.
    pub fn ray_interval(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        match *self {
            Shape::Box { .. } => self.local_bounds().ray_interval(origin, dir),
            Shape::Sphere { radius_m } => solve_quadratic(
                dir.dot(dir),
                2.0 * origin.dot(dir),
                origin.dot(origin) - radius_m * radius_m,
            ),
            Shape::Cylinder {
                radius_m,
                height_m,
                axis,
            } => {
                let a = axis.index();
                let (u, v) = ((a + 1) % 3, (a + 2) % 3);
                let qa = dir[u] * dir[u] + dir[v] * dir[v];
                let c = origin[u] * origin[u] + origin[v] * origin[v] - radius_m * radius_m;
                let (mut t0, mut t1) = if qa == 0.0 {
                    if c > 0.0 {
                        return None;
                    }
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    solve_quadratic(qa, 2.0 * (origin[u] * dir[u] + origin[v] * dir[v]), c)?
                };
                let half = 0.5 * height_m;
                if dir[a] == 0.0 {
                    if origin[a].abs() > half {
                        return None;
                    }
                } else {
                    let (mut s0, mut s1) =
                        ((-half - origin[a]) / dir[a], (half - origin[a]) / dir[a]);
                    if s0 > s1 {
                        core::mem::swap(&mut s0, &mut s1);
                    }
                    t0 = t0.max(s0);
                    t1 = t1.min(s1);
                }
                (t0 <= t1).then_some((t0, t1))
            }
        }
    }
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    // numerically stable form
    let q = if b >= 0.0 {
        -0.5 * (b + sq)
    } else {
        -0.5 * (b - sq)
    };
    let (r0, r1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some(if r0 <= r1 { (r0, r1) } else { (r1, r0) })
}

/// Rigid placement: `world = rotation * local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    /// Rotation about x, then y, then z (degrees), followed by a translation.
    pub fn from_euler_deg(rotation_deg: Vec3, translation: Vec3) -> Self {
        let (sx, cx) = libm::sincos(rotation_deg.x.to_radians());
        let (sy, cy) = libm::sincos(rotation_deg.y.to_radians());
        let (sz, cz) = libm::sincos(rotation_deg.z.to_radians());
        // Rz * Ry * Rx
        let rotation = [
            [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
            [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
            [-sy, cy * sx, cy * cx],
        ];
        Transform {
            rotation,
            translation,
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Transform {
            translation: t,
            ..Self::IDENTITY
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn inverse_rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.inverse_rotate(p - self.translation)
    }

    pub fn to_world(&self, p: Vec3) -> Vec3 {
        self.rotate(p) + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub shape: Shape,
    pub transform: Transform,
    pub material: Material,
    pub is_patient: bool,
}

impl Body {
    pub fn contains(&self, p: Vec3) -> bool {
        self.shape.contains(self.transform.to_local(p))
    }

    pub fn ray_interval(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let o = self.transform.to_local(origin);
        let d = self.transform.inverse_rotate(dir);
        self.shape.ray_interval(o, d)
    }

    pub fn bounds(&self) -> Aabb {
        let b = self.shape.local_bounds();
        let mut out: Option<Aabb> = None;
        for i in 0..8 {
            let corner = Vec3::new(
                if i & 1 == 0 { b.min.x } else { b.max.x },
                if i & 2 == 0 { b.min.y } else { b.max.y },
                if i & 4 == 0 { b.min.z } else { b.max.z },
            );
            let w = self.transform.to_world(corner);
            out = Some(match out {
                Some(a) => a.include(w),
                None => Aabb::new(w, w),
            });
        }
        out.expect("eight corners")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("body {0} has non-positive or non-finite dimensions")]
    InvalidShape(usize),
    #[error("bodies {0} and {1} overlap")]
    Overlap(usize, usize),
}

/// Number of probe points per body pair in the overlap check.
pub const OVERLAP_PROBES: usize = 10_000;

/// Non-overlapping bodies embedded in an ambient medium.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bodies: Vec<Body>,
    pub ambient: Material,
}

impl Scene {
    /// Builds a scene, rejecting bodies that share volume.
    ///
    /// Overlap is detected by probing points uniformly in the intersection of
    /// each pair's bounding boxes.
    pub fn new(bodies: Vec<Body>, ambient: Material) -> Result<Self, SceneError> {
        for (i, b) in bodies.iter().enumerate() {
            if !b.shape.validate() {
                return Err(SceneError::InvalidShape(i));
            }
        }
        let mut rng = chunk_rng(0x5eed_0fb0_d1e5, 0);
        for i in 0..bodies.len() {
            for j in i + 1..bodies.len() {
                let Some(common) = bodies[i].bounds().intersection(bodies[j].bounds()) else {
                    continue;
                };
                let span = common.max - common.min;
                for _ in 0..OVERLAP_PROBES {
                    let p = common.min
                        + span.mul_elem(Vec3::new(
                            uniform(&mut rng),
                            uniform(&mut rng),
                            uniform(&mut rng),
                        ));
                    if bodies[i].contains(p) && bodies[j].contains(p) {
                        return Err(SceneError::Overlap(i, j));
                    }
                }
            }
        }
        Ok(Scene { bodies, ambient })
    }

    pub fn empty(ambient: Material) -> Self {
        Scene {
            bodies: Vec::new(),
            ambient,
        }
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.bodies.iter().map(Body::bounds).reduce(Aabb::union)
    }

    /// Index of the body containing `p`, if any.
    pub fn body_at(&self, p: Vec3) -> Option<usize> {
        self.bodies.iter().position(|b| b.contains(p))
    }

    pub fn material(&self, body: Option<usize>) -> &Material {
        match body {
            Some(i) => &self.bodies[i].material,
            None => &self.ambient,
        }
    }
}
