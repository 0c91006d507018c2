//! Random valid fields for round-trip tests.

use proptest::prelude::*;
use radfield_core::field::{ElementKind, Layer, LayerData, RadiationField};
use radfield_core::{
    chunk_rng, uniform, Channel, EnergyBinning, FieldMetadata, FieldShape, GridSpec, MetaValue,
    Vec3,
};
use rand_core::RngCore;

pub fn grid(max_count: u32) -> impl Strategy<Value = GridSpec> {
    (
        prop::array::uniform3(1..=max_count),
        prop::array::uniform3(0.001f64..0.1),
        prop::array::uniform3(-1.0f64..1.0),
    )
        .prop_map(|(counts, voxel, origin)| {
            let voxel = Vec3::from_array(voxel);
            let extent = voxel.mul_elem(Vec3::new(
                counts[0] as f64,
                counts[1] as f64,
                counts[2] as f64,
            ));
            let g = GridSpec::new(extent, voxel, Vec3::from_array(origin)).unwrap();
            assert_eq!(g.counts, counts);
            g
        })
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1e3f64..1e3).prop_map(Vec3::from_array)
}

fn text() -> impl Strategy<Value = String> {
    "\\PC{1,12}"
}

fn meta_value() -> impl Strategy<Value = MetaValue> {
    prop_oneof![
        any::<i64>().prop_map(MetaValue::Int),
        any::<f64>()
            .prop_filter("comparable", |x| !x.is_nan())
            .prop_map(MetaValue::Float),
        "\\PC{0,20}".prop_map(MetaValue::Text),
        prop::array::uniform3(any::<f64>().prop_filter("comparable", |x| !x.is_nan()))
            .prop_map(MetaValue::Vec3),
    ]
}

pub fn metadata() -> impl Strategy<Value = FieldMetadata> {
    let shape = prop_oneof![
        (0.001f64..179.0).prop_map(|a| FieldShape::Cone {
            opening_angle_deg: a
        }),
        (0.01f64..5.0, 0.01f64..5.0, 0.01f64..5.0).prop_map(|(w, h, d)| FieldShape::Pyramid {
            rect_w_m: w,
            rect_h_m: h,
            at_distance_m: d
        }),
    ];
    (
        (text(), text(), text(), text(), vec3(), vec3()),
        (
            shape,
            text(),
            any::<u64>(),
            any::<u64>(),
            0.0f64..=1.0,
            text(),
        ),
        prop::collection::vec(("[a-z_]{1,10}", meta_value()), 0..5),
    )
        .prop_map(
            |(
                (name, version, model, digest, pos, dir),
                (shape, spectrum, count, seed, eps, ts),
                dynamic,
            )| {
                let dir = if dir.norm() > 1e-3 {
                    dir.normalized()
                } else {
                    Vec3::Z
                };
                let dynamic = dynamic
                    .into_iter()
                    .enumerate()
                    .map(|(i, (k, v))| (format!("{k}{i}"), v))
                    .collect();
                FieldMetadata {
                    software_name: name,
                    software_version: version,
                    physics_model_id: model,
                    scene_digest: digest,
                    tube_position_m: pos,
                    tube_direction: dir,
                    field_shape: shape,
                    spectrum_id: spectrum,
                    primary_count: count,
                    rng_seed: seed,
                    epsilon_rel_achieved: eps,
                    timestamp_utc: ts,
                    dynamic,
                }
            },
        )
}

/// Layer data filled from `seed`; histograms are normalized or all-zero per voxel.
pub fn layer_data(kind: ElementKind, voxels: usize, seed: u64) -> LayerData {
    let mut rng = chunk_rng(seed, 1);
    let arity = kind.arity() as usize;
    match kind {
        ElementKind::ScalarF64 => LayerData::F64(
            (0..voxels)
                .map(|_| f64::from_bits(rng.next_u64()))
                .collect(),
        ),
        ElementKind::HistogramF32(_) => {
            let mut data = vec![0f32; voxels * arity];
            for h in data.chunks_mut(arity) {
                if uniform(&mut rng) < 0.2 {
                    continue;
                }
                h.iter_mut().for_each(|x| *x = uniform(&mut rng) as f32);
                let s: f64 = h.iter().map(|&x| x as f64).sum();
                h.iter_mut().for_each(|x| *x = (*x as f64 / s) as f32);
                let s: f64 = h.iter().map(|&x| x as f64).sum();
                let top = (0..arity).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap();
                h[top] = (h[top] as f64 + 1.0 - s) as f32;
            }
            LayerData::F32(data)
        }
        _ => LayerData::F32(
            (0..voxels * arity)
                .map(|_| f32::from_bits(rng.next_u32()))
                .collect(),
        ),
    }
}

pub fn field(max_count: u32) -> impl Strategy<Value = RadiationField> {
    (grid(max_count), 1u32..=32, 0.1f64..10.0, metadata())
        .prop_flat_map(|(grid, bins, width, meta)| {
            let kind = prop_oneof![
                Just(ElementKind::ScalarF32),
                Just(ElementKind::ScalarF64),
                (1u32..=4).prop_map(ElementKind::VectorF32),
                Just(ElementKind::HistogramF32(bins)),
            ];
            let layer = (kind, "[a-z]{1,8}", "\\PC{0,6}", 0.0f64..=1.0, any::<u64>());
            let channel = ("[a-z]{1,8}", prop::collection::vec(layer, 1..=3));
            (
                Just(grid),
                Just(EnergyBinning::new(bins, width).unwrap()),
                Just(meta),
                prop::collection::vec(channel, 1..=3),
            )
        })
        .prop_map(|(grid, binning, metadata, channels)| {
            let voxels = grid.voxel_count();
            let channels = channels
                .into_iter()
                .enumerate()
                .map(|(ci, (cname, layers))| Channel {
                    name: format!("{cname}{ci}"),
                    layers: layers
                        .into_iter()
                        .enumerate()
                        .map(|(li, (kind, lname, unit, err, seed))| Layer {
                            name: format!("{lname}{li}"),
                            unit,
                            statistical_error: err,
                            kind,
                            data: layer_data(kind, voxels, seed),
                        })
                        .collect(),
                })
                .collect();
            let f = RadiationField {
                grid,
                binning,
                metadata,
                channels,
            };
            f.validate().expect("generated field is valid");
            f
        })
}

/// Equality with layer data compared bit for bit.
pub fn bit_equal(a: &RadiationField, b: &RadiationField) -> bool {
    a.grid == b.grid
        && a.binning == b.binning
        && a.metadata == b.metadata
        && a.channels.len() == b.channels.len()
        && a.channels.iter().zip(&b.channels).all(|(x, y)| {
            x.name == y.name
                && x.layers.len() == y.layers.len()
                && x.layers
                    .iter()
                    .zip(&y.layers)
                    .all(|(l, m)| layer_bit_equal(l, m))
        })
}

pub fn layer_bit_equal(l: &Layer, m: &Layer) -> bool {
    l.name == m.name
        && l.unit == m.unit
        && l.statistical_error.to_bits() == m.statistical_error.to_bits()
        && l.kind == m.kind
        && match (&l.data, &m.data) {
            (LayerData::F32(a), LayerData::F32(b)) => a
                .iter()
                .map(|x| x.to_bits())
                .eq(b.iter().map(|x| x.to_bits())),
            (LayerData::F64(a), LayerData::F64(b)) => a
                .iter()
                .map(|x| x.to_bits())
                .eq(b.iter().map(|x| x.to_bits())),
            _ => false,
        }
}
