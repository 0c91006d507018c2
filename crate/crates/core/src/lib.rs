//! Voxelized photon radiation fields.
//!
//! This crate holds everything that does not touch the operating system:
//! a simplified photon transport kernel (photoelectric absorption and
//! Klein–Nishina Compton scattering through analytic primitives), the voxel
//! scoring machinery with checkpointed Welford variance and a percentile
//! termination criterion, air-kerma post-processing, and the in-memory model
//! and byte codec of the field file format.
//!
//! File, CSV and JSON handling, worker threads and the command line live in
//! the `radfield` crate.
#![no_std]
#![forbid(unsafe_code)]
// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod codec;
pub mod dosimetry;
pub mod engine;
pub mod field;
pub mod geometry;
pub mod material;
pub mod scoring;
pub mod spectrum;
pub mod transport;
pub mod traversal;
pub mod vec3;
pub mod welford;

mod rng;

pub use field::{
    Channel, ElementKind, EnergyBinning, FieldError, FieldMetadata, FieldShape, GridSpec, Layer,
    LayerData, MetaValue, RadiationField,
};
pub use rng::{chunk_rng, uniform, ChunkRng};
pub use vec3::Vec3;

#[cfg(test)]
pub(crate) fn test_metadata() -> FieldMetadata {
    FieldMetadata {
        software_name: "radfield".into(),
        software_version: "test".into(),
        physics_model_id: "test".into(),
        scene_digest: "none".into(),
        tube_position_m: Vec3::ZERO,
        tube_direction: Vec3::Z,
        field_shape: FieldShape::Cone {
            opening_angle_deg: 10.0,
        },
        spectrum_id: "test".into(),
        primary_count: 1,
        rng_seed: 0,
        epsilon_rel_achieved: 1.0,
        timestamp_utc: "unspecified".into(),
        dynamic: alloc::vec::Vec::new(),
    }
}
