//! Multi-threaded simulation runs.

use std::time::{Duration, Instant};

use radfield_core::engine::{run, RunOutcome, RunStatus, Simulation, CHUNK_SIZE};
use radfield_core::scoring::{finalize, FIELD_PERCENTILE};
use radfield_core::{FieldMetadata, MetaValue, RadiationField};
use rayon::prelude::*;

use crate::config::PreparedRun;
use crate::error::Error;

pub const SOFTWARE_NAME: &str = "radfield";
pub const PHYSICS_MODEL_ID: &str = "photoelectric+klein-nishina/analytic-primitives/1";

#[derive(Debug)]
pub struct Report {
    pub field: RadiationField,
    pub status: RunStatus,
    pub primaries: u64,
    pub field_epsilon: f64,
    pub capped_tracks: u64,
    pub wall_time: Duration,
}

/// Traces and scores until convergence or budget exhaustion, then builds the field.
pub fn simulate(run_cfg: &PreparedRun) -> Result<Report, Error> {
    let started = Instant::now();
    let sim = Simulation::new(
        run_cfg.scene.clone(),
        run_cfg.source.clone(),
        run_cfg.grid,
        run_cfg.binning,
        run_cfg.seed,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run_cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", run_cfg.workers)))?;
    let outcome = pool.install(|| {
        run(&sim, run_cfg.limits, |sim, work| {
            work.par_iter()
                .map(|&(k, n)| sim.trace_chunk(k, n))
                .collect()
        })
    });
    let metadata = metadata(run_cfg, &outcome);
    let field = finalize(&outcome.scoring, outcome.field_epsilon, metadata)
        .map_err(|e| Error::Config(format!("cannot build field: {e}")))?;
    Ok(Report {
        field,
        status: outcome.status,
        primaries: outcome.scoring.primaries_traced,
        field_epsilon: outcome.field_epsilon,
        capped_tracks: outcome.capped_tracks,
        wall_time: started.elapsed(),
    })
}

fn metadata(cfg: &PreparedRun, outcome: &RunOutcome) -> FieldMetadata {
    let termination = match outcome.status {
        RunStatus::Converged => "converged",
        RunStatus::BudgetExhausted => "budget_exhausted",
    };
    FieldMetadata {
        software_name: SOFTWARE_NAME.into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        physics_model_id: PHYSICS_MODEL_ID.into(),
        scene_digest: cfg.scene_digest.clone(),
        tube_position_m: cfg.source.position_m,
        tube_direction: cfg.source.direction,
        field_shape: cfg.source.shape,
        spectrum_id: cfg.spectrum_id.clone(),
        primary_count: outcome.scoring.primaries_traced,
        rng_seed: cfg.seed,
        epsilon_rel_achieved: outcome.field_epsilon.clamp(0.0, 1.0),
        timestamp_utc: cfg.timestamp_utc.clone(),
        dynamic: vec![
            ("termination".into(), MetaValue::Text(termination.into())),
            (
                "epsilon_threshold".into(),
                MetaValue::Float(cfg.limits.epsilon_threshold),
            ),
            (
                "max_photons".into(),
                MetaValue::Int(cfg.limits.max_photons as i64),
            ),
            (
                "evaluations".into(),
                MetaValue::Int(outcome.evaluations as i64),
            ),
            (
                "capped_tracks".into(),
                MetaValue::Int(outcome.capped_tracks as i64),
            ),
            ("chunk_size".into(), MetaValue::Int(CHUNK_SIZE as i64)),
            (
                "epsilon_percentile".into(),
                MetaValue::Text(format!(
                    "rank min(n, floor({FIELD_PERCENTILE}n/100)+1) of n hit (voxel, channel) errors"
                )),
            ),
        ],
    }
}
