//! Voxel scoring: per-voxel entrance histograms, hit counts and direction
//! sums, checkpointed Welford variance of the normalized histogram, the
//! per-voxel relative error and the field-level termination criterion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::field::{
    Channel, ElementKind, EnergyBinning, FieldError, FieldMetadata, GridSpec, Layer, LayerData,
    RadiationField,
};
use crate::transport::{Component, Segment};
use crate::traversal::for_each_entrance;
use crate::vec3::Vec3;
use crate::welford::Welford;

/// Entrances per voxel between two variance checkpoints.
pub const CHECKPOINT_INTERVAL: u32 = 50;
/// Primaries between two evaluations of the termination criterion.
pub const EVALUATION_INTERVAL: u64 = 50_000;
/// Largest variance a probability in `[0, 1]` can have.
pub const MAX_BIN_VARIANCE: f64 = 0.25;
/// Share of hit voxels whose error must lie below the field error.
pub const FIELD_PERCENTILE: u64 = 95;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("cannot merge accumulators with different energy binnings")]
    BinningMismatch,
    #[error("cannot merge scoring grids with different geometry")]
    GridMismatch,
    #[error("no primaries were traced")]
    ZeroPrimaries,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Scoring state of one voxel in one component channel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelAccumulator {
    pub hits: u64,
    pub bin_counts: Vec<u64>,
    pub direction_sum: Vec3,
    pub photons_since_checkpoint: u32,
    pub welford: Vec<Welford>,
}

impl VoxelAccumulator {
    pub fn new(bin_count: usize) -> Self {
        VoxelAccumulator {
            hits: 0,
            bin_counts: vec![0; bin_count],
            direction_sum: Vec3::ZERO,
            photons_since_checkpoint: 0,
            welford: vec![Welford::new(); bin_count],
        }
    }

    /// Records one photon entrance.
    #[allow(non_snake_case)]
    pub fn score_entrance(&mut self, energy_keV: f64, direction: Vec3, binning: &EnergyBinning) {
        self.score_bin(binning.bin_index(energy_keV), direction);
    }

    #[inline]
    pub fn score_bin(&mut self, bin: usize, direction: Vec3) {
        self.hits += 1;
        self.bin_counts[bin] += 1;
        self.direction_sum += direction;
        self.photons_since_checkpoint += 1;
        if self.photons_since_checkpoint == CHECKPOINT_INTERVAL {
            self.welford_checkpoint();
            self.photons_since_checkpoint = 0;
        }
    }

    /// Feeds the current normalized histogram into each bin's variance stream.
    pub fn welford_checkpoint(&mut self) {
        if self.hits == 0 {
            return;
        }
        let hits = self.hits as f64;
        for (w, &count) in self.welford.iter_mut().zip(&self.bin_counts) {
            w.push(count as f64 / hits);
        }
    }

    pub fn checkpoints(&self) -> u64 {
        self.welford.first().map_or(0, |w| w.n)
    }

    /// Mean over bins of the variance normalized by its maximum, in `[0, 1]`.
    ///
    /// A voxel without any checkpoint reports 1 (unconverged).
    pub fn epsilon_rel(&self) -> f64 {
        if self.checkpoints() == 0 || self.welford.is_empty() {
            return 1.0;
        }
        let sum: f64 = self
            .welford
            .iter()
            .map(|w| w.variance() / MAX_BIN_VARIANCE)
            .sum();
        (sum / self.welford.len() as f64).clamp(0.0, 1.0)
    }

    /// Combined state of two accumulators.
    ///
    /// Photons pending towards the next checkpoint carry over modulo the
    /// checkpoint interval, which keeps merging associative.
    pub fn merge(&self, other: &VoxelAccumulator) -> Result<VoxelAccumulator, ScoringError> {
        if self.bin_counts.len() != other.bin_counts.len() {
            return Err(ScoringError::BinningMismatch);
        }
        Ok(VoxelAccumulator {
            hits: self.hits + other.hits,
            bin_counts: self
                .bin_counts
                .iter()
                .zip(&other.bin_counts)
                .map(|(a, b)| a + b)
                .collect(),
            direction_sum: self.direction_sum + other.direction_sum,
            photons_since_checkpoint: (self.photons_since_checkpoint
                + other.photons_since_checkpoint)
                % CHECKPOINT_INTERVAL,
            welford: self
                .welford
                .iter()
                .zip(&other.welford)
                .map(|(a, b)| a.merge(b))
                .collect(),
        })
    }
}

const UNHIT: u32 = u32::MAX;

/// Sparse per-voxel accumulators of one component.
#[derive(Debug, Clone, PartialEq)]
struct ComponentGrid {
    slots: Vec<u32>,
    pool: Vec<VoxelAccumulator>,
}

impl ComponentGrid {
    fn new(voxels: usize) -> Self {
        ComponentGrid {
            slots: vec![UNHIT; voxels],
            pool: Vec::new(),
        }
    }

    fn get(&self, flat: usize) -> Option<&VoxelAccumulator> {
        match self.slots[flat] {
            UNHIT => None,
            s => Some(&self.pool[s as usize]),
        }
    }

    fn get_or_insert(&mut self, flat: usize, bins: usize) -> &mut VoxelAccumulator {
        if self.slots[flat] == UNHIT {
            self.slots[flat] = self.pool.len() as u32;
            self.pool.push(VoxelAccumulator::new(bins));
        }
        &mut self.pool[self.slots[flat] as usize]
    }
}

/// Accumulators for the beam, patient and scatter components over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringGrid {
    pub grid: GridSpec,
    pub binning: EnergyBinning,
    components: [ComponentGrid; 3],
    pub primaries_traced: u64,
}

impl ScoringGrid {
    pub fn new(grid: GridSpec, binning: EnergyBinning) -> Self {
        let v = grid.voxel_count();
        ScoringGrid {
            grid,
            binning,
            components: [
                ComponentGrid::new(v),
                ComponentGrid::new(v),
                ComponentGrid::new(v),
            ],
            primaries_traced: 0,
        }
    }

    pub fn accumulator(&self, component: Component, flat: usize) -> Option<&VoxelAccumulator> {
        self.components[component.index()].get(flat)
    }

    pub fn accumulator_mut(&mut self, component: Component, flat: usize) -> &mut VoxelAccumulator {
        let bins = self.binning.bin_count as usize;
        self.components[component.index()].get_or_insert(flat, bins)
    }

    /// Hit accumulators of `component` with their flat voxel index.
    pub fn hit_voxels(
        &self,
        component: Component,
    ) -> impl Iterator<Item = (usize, &VoxelAccumulator)> {
        let c = &self.components[component.index()];
        c.slots
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != UNHIT)
            .map(move |(flat, &s)| (flat, &c.pool[s as usize]))
    }

    pub fn hit_voxel_count(&self) -> usize {
        self.components.iter().map(|c| c.pool.len()).sum()
    }

    /// Scores every voxel the segment passes, once per voxel.
    pub fn score_segment(&mut self, segment: &Segment) {
        let bin = self.binning.bin_index(segment.energy_keV);
        let bins = self.binning.bin_count as usize;
        let dir = segment.direction;
        let target = &mut self.components[segment.component.index()];
        for_each_entrance(segment.start, segment.end, &self.grid, |e| {
            target.get_or_insert(e.flat, bins).score_bin(bin, dir);
        });
    }

    /// Adds another grid's counts into this one, voxel by voxel.
    pub fn merge_from(&mut self, other: &ScoringGrid) -> Result<(), ScoringError> {
        if self.binning != other.binning {
            return Err(ScoringError::BinningMismatch);
        }
        if self.grid != other.grid {
            return Err(ScoringError::GridMismatch);
        }
        let bins = self.binning.bin_count as usize;
        for (mine, theirs) in self.components.iter_mut().zip(&other.components) {
            for (flat, &slot) in theirs.slots.iter().enumerate() {
                if slot == UNHIT {
                    continue;
                }
                let src = &theirs.pool[slot as usize];
                let dst = mine.get_or_insert(flat, bins);
                *dst = dst.merge(src)?;
            }
        }
        self.primaries_traced += other.primaries_traced;
        Ok(())
    }
}

/// Outcome of a termination check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

/// Convergence bookkeeping between evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceState {
    /// Per (component, voxel) error, indexed `component * voxels + flat`;
    /// unhit voxels hold the sentinel 1.
    pub epsilon_rel_per_voxel: Vec<f64>,
    pub field_epsilon: f64,
    pub photons_since_global_eval: u64,
}

impl ConvergenceState {
    pub fn new() -> Self {
        ConvergenceState {
            epsilon_rel_per_voxel: Vec::new(),
            field_epsilon: 1.0,
            photons_since_global_eval: 0,
        }
    }

    pub fn record_primaries(&mut self, n: u64) {
        self.photons_since_global_eval += n;
    }

    /// Whether enough primaries have been traced since the last evaluation.
    pub fn evaluation_due(&self) -> bool {
        self.photons_since_global_eval >= EVALUATION_INTERVAL
    }
}

impl Default for ConvergenceState {
    fn default() -> Self {
        Self::new()
    }
}

/// 1-based rank of the field error among `n` sorted voxel errors: the
/// smallest rank with at least 95 % of the voxels strictly before it.
pub fn percentile_rank(n: usize) -> usize {
    let n64 = n as u64;
    ((n64 * FIELD_PERCENTILE / 100 + 1).min(n64)) as usize
}

/// Field error of a set of voxel errors; 1 when the set is empty.
pub fn field_epsilon(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    values[percentile_rank(values.len()) - 1]
}

/// Recomputes every voxel error and decides whether the field has converged.
pub fn evaluate_termination(
    state: &mut ConvergenceState,
    scoring: &ScoringGrid,
    threshold: f64,
) -> Decision {
    let voxels = scoring.grid.voxel_count();
    state.epsilon_rel_per_voxel.clear();
    state.epsilon_rel_per_voxel.resize(3 * voxels, 1.0);
    let mut hit = Vec::with_capacity(scoring.hit_voxel_count());
    for component in Component::ALL {
        let base = component.index() * voxels;
        for (flat, acc) in scoring.hit_voxels(component) {
            let eps = acc.epsilon_rel();
            state.epsilon_rel_per_voxel[base + flat] = eps;
            hit.push(eps);
        }
    }
    state.photons_since_global_eval = 0;
    let any_hit = !hit.is_empty();
    state.field_epsilon = field_epsilon(&mut hit);
    if any_hit && state.field_epsilon <= threshold {
        Decision::Stop
    } else {
        Decision::Continue
    }
}

/// Normalized histogram as `f32`, nudged so its sum is one within `f32` resolution.
fn normalized_histogram(counts: &[u64], hits: u64, out: &mut [f32]) {
    let total = hits as f64;
    let mut largest = 0;
    for (i, (&c, o)) in counts.iter().zip(out.iter_mut()).enumerate() {
        *o = (c as f64 / total) as f32;
        if c > counts[largest] {
            largest = i;
        }
    }
    let sum: f64 = out.iter().map(|&x| x as f64).sum();
    out[largest] = (out[largest] as f64 + (1.0 - sum)) as f32;
}

/// Converts accumulated scores into a field with one channel per component.
///
/// Each channel holds `spectrum` (normalized entrance-energy histogram),
/// `hits` (entrances per primary) and `direction` (mean entrance direction,
/// normalized). All three carry `field_epsilon` as statistical error.
pub fn finalize(
    scoring: &ScoringGrid,
    field_epsilon: f64,
    metadata: FieldMetadata,
) -> Result<RadiationField, ScoringError> {
    if scoring.primaries_traced == 0 {
        return Err(ScoringError::ZeroPrimaries);
    }
    let voxels = scoring.grid.voxel_count();
    let bins = scoring.binning.bin_count as usize;
    let primaries = scoring.primaries_traced as f64;
    let error = field_epsilon.clamp(0.0, 1.0);
    let mut channels = Vec::with_capacity(3);
    for component in Component::ALL {
        let mut spectrum = vec![0f32; voxels * bins];
        let mut hits = vec![0f32; voxels];
        let mut direction = vec![0f32; voxels * 3];
        for (flat, acc) in scoring.hit_voxels(component) {
            if acc.hits == 0 {
                continue;
            }
            normalized_histogram(
                &acc.bin_counts,
                acc.hits,
                &mut spectrum[flat * bins..(flat + 1) * bins],
            );
            hits[flat] = (acc.hits as f64 / primaries) as f32;
            let d = acc.direction_sum.normalized();
            direction[flat * 3..flat * 3 + 3]
                .copy_from_slice(&[d.x as f32, d.y as f32, d.z as f32]);
        }
        let layer = |name: &str, unit: &str, kind, data| Layer {
            name: String::from(name),
            unit: String::from(unit),
            statistical_error: error,
            kind,
            data: LayerData::F32(data),
        };
        channels.push(
            Channel::new(component.channel_name())
                .with_layer(layer(
                    "spectrum",
                    "1",
                    ElementKind::HistogramF32(bins as u32),
                    spectrum,
                ))
                .with_layer(layer("hits", "1/primary", ElementKind::ScalarF32, hits))
                .with_layer(layer(
                    "direction",
                    "1",
                    ElementKind::VectorF32(3),
                    direction,
                )),
        );
    }
    let field = RadiationField {
        grid: scoring.grid,
        binning: scoring.binning,
        metadata,
        channels,
    };
    field.validate()?;
    Ok(field)
}
