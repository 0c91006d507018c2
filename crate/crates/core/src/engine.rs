//! Chunked simulation driver.
//!
//! Primaries are traced in chunks of [`CHUNK_SIZE`]; chunk `k` draws from the
//! random stream `k` of the run seed, and traced chunks are scored in chunk
//! order. The result is therefore the same whichever worker traced which
//! chunk. Tracing is delegated to a caller-supplied batch function so the
//! caller can spread a round over threads.

use alloc::vec::Vec;
use core::ops::Range;

use crate::field::{EnergyBinning, GridSpec};
use crate::geometry::{Aabb, Scene};
use crate::rng::chunk_rng;
use crate::scoring::{
    evaluate_termination, ConvergenceState, Decision, ScoringGrid, EVALUATION_INTERVAL,
};
use crate::transport::{emit_primary, trace_photon, Segment, SourceConfig, Termination};

pub const CHUNK_SIZE: u64 = 1000;

/// Margin added around the grid, source and bodies to form the world box (m).
pub const WORLD_MARGIN_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub scene: Scene,
    pub source: SourceConfig,
    pub grid: GridSpec,
    pub binning: EnergyBinning,
    pub seed: u64,
    pub world: Aabb,
}

/// Segments produced by one chunk of primaries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChunkTrace {
    pub chunk: u64,
    pub photons: u64,
    pub segments: Vec<Segment>,
    /// Tracks stopped by the step cap.
    pub capped: u64,
}

impl Simulation {
    pub fn new(
        scene: Scene,
        source: SourceConfig,
        grid: GridSpec,
        binning: EnergyBinning,
        seed: u64,
    ) -> Self {
        let mut world = Aabb::new(grid.origin_m, grid.max_corner()).include(source.position_m);
        if let Some(b) = scene.bounds() {
            world = world.union(b);
        }
        Simulation {
            scene,
            source,
            grid,
            binning,
            seed,
            world: world.expand(WORLD_MARGIN_M),
        }
    }

    /// Traces `photons` primaries from stream `chunk`.
    pub fn trace_chunk(&self, chunk: u64, photons: u64) -> ChunkTrace {
        let mut rng = chunk_rng(self.seed, chunk);
        let mut out = ChunkTrace {
            chunk,
            photons,
            segments: Vec::new(),
            capped: 0,
        };
        for _ in 0..photons {
            let mut photon = emit_primary(&self.source, &mut rng);
            if trace_photon(
                &mut photon,
                &self.scene,
                &self.world,
                &mut out.segments,
                &mut rng,
            ) == Termination::StepCap
            {
                out.capped += 1;
            }
        }
        out
    }

    /// Chunk numbers and sizes needed to trace primaries `start..end`.
    pub fn chunks(range: Range<u64>) -> impl Iterator<Item = (u64, u64)> {
        debug_assert!(range.start.is_multiple_of(CHUNK_SIZE));
        let first = range.start / CHUNK_SIZE;
        let last = range.end.div_ceil(CHUNK_SIZE);
        (first..last).map(move |k| (k, (range.end - k * CHUNK_SIZE).min(CHUNK_SIZE)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLimits {
    /// Stop once the field error reaches this value.
    pub epsilon_threshold: f64,
    pub max_photons: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub scoring: ScoringGrid,
    pub field_epsilon: f64,
    pub capped_tracks: u64,
    pub evaluations: u64,
}

/// Runs rounds of [`EVALUATION_INTERVAL`] primaries until the field converges
/// or `max_photons` have been traced.
///
/// `trace_round` receives `(chunk, photons)` pairs and must return one trace
/// per pair, in any order.
pub fn run<F>(sim: &Simulation, limits: RunLimits, mut trace_round: F) -> RunOutcome
where
    F: FnMut(&Simulation, &[(u64, u64)]) -> Vec<ChunkTrace>,
{
    let mut scoring = ScoringGrid::new(sim.grid, sim.binning);
    let mut state = ConvergenceState::new();
    let mut capped = 0;
    let mut evaluations = 0;
    let mut traced = 0u64;
    loop {
        let end = (traced + EVALUATION_INTERVAL).min(limits.max_photons);
        if end > traced {
            let work: Vec<(u64, u64)> = Simulation::chunks(traced..end).collect();
            let mut traces = trace_round(sim, &work);
            traces.sort_unstable_by_key(|t| t.chunk);
            for trace in &traces {
                for seg in &trace.segments {
                    scoring.score_segment(seg);
                }
                capped += trace.capped;
                scoring.primaries_traced += trace.photons;
                state.record_primaries(trace.photons);
            }
            traced = end;
        }
        evaluations += 1;
        let decision = evaluate_termination(&mut state, &scoring, limits.epsilon_threshold);
        let status = if decision == Decision::Stop {
            Some(RunStatus::Converged)
        } else if traced >= limits.max_photons {
            Some(RunStatus::BudgetExhausted)
        } else {
            None
        };
        if let Some(status) = status {
            return RunOutcome {
                status,
                field_epsilon: state.field_epsilon,
                scoring,
                capped_tracks: capped,
                evaluations,
            };
        }
    }
}

/// Traces a round on the calling thread.
pub fn trace_serial(sim: &Simulation, work: &[(u64, u64)]) -> Vec<ChunkTrace> {
    work.iter().map(|&(k, n)| sim.trace_chunk(k, n)).collect()
}
