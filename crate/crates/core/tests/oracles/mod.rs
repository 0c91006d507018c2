//! Independent reference implementations used by the test suites.
#![allow(dead_code, non_snake_case)]

pub mod fields;

use radfield_core::field::{ElementKind, Layer, LayerData, RadiationField};
use radfield_core::{Channel, FieldMetadata, FieldShape, GridSpec, MetaValue, Vec3};

/// Voxels crossed by `start..end` with their chord lengths, by an
/// Amanatides–Woo walk over the part of the segment inside the grid.
pub fn dda_voxels(start: Vec3, end: Vec3, grid: &GridSpec) -> Vec<([usize; 3], f64)> {
    let d = end - start;
    let len = d.norm();
    let lo = grid.origin_m;
    let hi = grid.max_corner();
    // clip to the box, parametric in [0, 1]
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if d[a] == 0.0 {
            if start[a] < lo[a] || start[a] > hi[a] {
                return vec![];
            }
        } else {
            let (mut ta, mut tb) = ((lo[a] - start[a]) / d[a], (hi[a] - start[a]) / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 >= t1 || len == 0.0 {
        return vec![];
    }
    let p = start + d * t0;
    let mut idx = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let n = grid.counts[a] as i64;
        let v = grid.voxel_m[a];
        let f = ((p[a] - lo[a]) / v).floor() as i64;
        idx[a] = f.clamp(0, n - 1);
        if d[a] > 0.0 {
            step[a] = 1;
            let boundary = lo[a] + (idx[a] + 1) as f64 * v;
            t_max[a] = (boundary - start[a]) / d[a];
            t_delta[a] = v / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            let boundary = lo[a] + idx[a] as f64 * v;
            t_max[a] = (boundary - start[a]) / d[a];
            t_delta[a] = -v / d[a];
        }
    }
    let mut out = Vec::new();
    let mut t = t0;
    loop {
        let a = (0..3)
            .min_by(|&i, &j| t_max[i].total_cmp(&t_max[j]))
            .unwrap();
        let t_next = t_max[a].min(t1);
        if t_next > t {
            out.push((
                [idx[0] as usize, idx[1] as usize, idx[2] as usize],
                (t_next - t) * len,
            ));
        }
        if t_max[a] >= t1 {
            break;
        }
        t = t_max[a];
        idx[a] += step[a];
        if idx[a] < 0 || idx[a] >= grid.counts[a] as i64 {
            break;
        }
        t_max[a] += t_delta[a];
    }
    out
}

/// Mean and population variance by two passes with compensated sums.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = neumaier(xs.iter().copied()) / n;
    let var = neumaier(xs.iter().map(|x| (x - mean) * (x - mean))) / n;
    (mean, var)
}

pub fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Probability of a Klein–Nishina scattering angle in each `[k w, (k+1) w]` degree bin.
pub fn klein_nishina_bins(energy_keV: f64, width_deg: f64) -> Vec<f64> {
    let k = energy_keV / 510.998_95;
    let pdf = |theta: f64| {
        let c = theta.cos();
        let ratio = 1.0 / (1.0 + k * (1.0 - c));
        ratio * ratio * (ratio + 1.0 / ratio - (1.0 - c * c)) * theta.sin()
    };
    let simpson = |a: f64, b: f64| {
        let n = 400;
        let h = (b - a) / n as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let bins = (180.0 / width_deg).round() as usize;
    let raw: Vec<f64> = (0..bins)
        .map(|b| {
            simpson(
                (b as f64 * width_deg).to_radians(),
                ((b + 1) as f64 * width_deg).to_radians(),
            )
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Log-log interpolation over `(x, y)` points, `None` outside.
pub fn loglog(points: &[(f64, f64)], x: f64) -> Option<f64> {
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x >= x0 && x <= x1 {
            if x == x0 {
                return Some(y0);
            }
            if x == x1 {
                return Some(y1);
            }
            let f = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
            return Some((y0.ln() + f * (y1.ln() - y0.ln())).exp());
        }
    }
    None
}

/// Relative air kerma per voxel by direct evaluation: channels in order,
/// bins ascending, `p * F * mu(E) * E` with `E` the bin midpoint.
pub fn kerma_brute(field: &RadiationField, channels: &[&str], table: &[(f64, f64)]) -> Vec<f64> {
    let g = &field.grid;
    let bins = field.binning.bin_count as usize;
    let mut out = vec![0.0; g.voxel_count()];
    for iz in 0..g.counts[2] as usize {
        for iy in 0..g.counts[1] as usize {
            for ix in 0..g.counts[0] as usize {
                let v = (iz * g.counts[1] as usize + iy) * g.counts[0] as usize + ix;
                for name in channels {
                    let ch = field.channels.iter().find(|c| c.name == *name).unwrap();
                    let layer = |n: &str| ch.layers.iter().find(|l| l.name == n).unwrap();
                    let LayerData::F32(p) = &layer("spectrum").data else {
                        panic!()
                    };
                    let LayerData::F32(f) = &layer("hits").data else {
                        panic!()
                    };
                    let f = f[v] as f64;
                    if f == 0.0 {
                        continue;
                    }
                    for b in 0..bins {
                        let e = (b as f64 + 0.5) * field.binning.bin_width_keV;
                        out[v] += p[v * bins + b] as f64 * f * loglog(table, e).unwrap() * e;
                    }
                }
            }
        }
    }
    out
}

pub fn metadata() -> FieldMetadata {
    FieldMetadata {
        software_name: "radfield".into(),
        software_version: "0.1.0".into(),
        physics_model_id: "oracle".into(),
        scene_digest: "none".into(),
        tube_position_m: Vec3::new(0.0, 0.0, -1.0),
        tube_direction: Vec3::Z,
        field_shape: FieldShape::Cone {
            opening_angle_deg: 10.0,
        },
        spectrum_id: "oracle".into(),
        primary_count: 1,
        rng_seed: 0,
        epsilon_rel_achieved: 0.0,
        timestamp_utc: "unspecified".into(),
        dynamic: vec![("note".into(), MetaValue::Text("oracle".into()))],
    }
}

/// Channel with `spectrum` and `hits` layers from raw values; histograms are normalized here.
pub fn kerma_channel(name: &str, bins: usize, mut spectrum: Vec<f32>, hits: Vec<f32>) -> Channel {
    for (v, h) in spectrum.chunks_mut(bins).enumerate() {
        let s: f64 = h.iter().map(|&x| x as f64).sum();
        if hits[v] == 0.0 || s == 0.0 {
            h.fill(0.0);
        } else {
            h.iter_mut().for_each(|x| *x = (*x as f64 / s) as f32);
            let s: f64 = h.iter().map(|&x| x as f64).sum();
            let top = (0..h.len()).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap();
            h[top] = (h[top] as f64 + 1.0 - s) as f32;
        }
    }
    let layer = |name: &str, kind, data| Layer {
        name: name.into(),
        unit: "1".into(),
        statistical_error: 0.0,
        kind,
        data: LayerData::F32(data),
    };
    Channel::new(name)
        .with_layer(layer(
            "spectrum",
            ElementKind::HistogramF32(bins as u32),
            spectrum,
        ))
        .with_layer(layer("hits", ElementKind::ScalarF32, hits))
}
