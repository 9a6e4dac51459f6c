//! Spatial mutations: per-nucleotide edits of the four quadrant blocks.
//!
//! substitution_noise moves a fraction of each block's mass onto random
//! words, quadrant_crop attenuates whole blocks as a crop would,
//! histogram_rescale applies a power law to bin masses (gamma or blur, which
//! lose weak features), and
//! overlay_inject adds a fixed pattern to the bottom blocks (logo or
//! subtitle).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MutationKind, MutationSpec};
use crate::dna::VisualNucleotide;
use crate::error::{Error, Result};

const NOISE_FRACTION: [f64; 3] = [0.05, 0.15, 0.30];
const NOISE_WORDS: f64 = 8.0;
const CROP: [f64; 3] = [0.1, 0.25, 0.5];
const GAMMA: [f64; 3] = [0.9, 0.75, 0.5];
const OVERLAY_WEIGHT: [f64; 3] = [0.1, 0.2, 0.4];
const OVERLAY_WORDS: usize = 12;

/// The decisions shared by every nucleotide of one mutated sequence.
#[derive(Clone, Debug)]
pub(crate) struct SpatialPlan {
    kind: MutationKind,
    block: usize,
    fraction: f64,
    words: usize,
    crop: f64,
    quadrants: Vec<usize>,
    gamma: f64,
    weight: f64,
    /// Unit-mass pattern over one block.
    pattern: Vec<(usize, f64)>,
}

impl SpatialPlan {
    pub(crate) fn new(spec: &MutationSpec, dim: usize) -> Result<Self> {
        if !spec.kind.is_spatial() {
            return Err(Error::KindMismatch(spec.kind.name()));
        }
        if dim == 0 || !dim.is_multiple_of(4) {
            return Err(Error::InvalidParameter(format!(
                "bag dimension {dim} is not four quadrant blocks"
            )));
        }
        let block = dim / 4;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let quadrants = match spec.param("quadrant") {
            Some(q) => vec![q as usize],
            None => {
                let count = if spec.strength == 1 { 1 } else { 2 };
                let mut q = sample(&mut rng, 4, count).into_vec();
                q.sort_unstable();
                q
            }
        };
        let pattern = {
            let n = OVERLAY_WORDS.min(block);
            let idx = sample(&mut rng, block, n).into_vec();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = w.iter().sum();
            idx.into_iter()
                .zip(w)
                .map(|(i, w)| (i, w / total))
                .collect()
        };
        Ok(SpatialPlan {
            kind: spec.kind,
            block,
            fraction: spec.by_strength("fraction", NOISE_FRACTION),
            words: spec.param("words").unwrap_or(NOISE_WORDS) as usize,
            crop: spec.by_strength("crop", CROP),
            quadrants,
            gamma: spec.by_strength("gamma", GAMMA),
            weight: spec.by_strength("weight", OVERLAY_WEIGHT),
            pattern,
        })
    }

    pub(crate) fn apply<R: Rng>(&self, values: &[f32], rng: &mut R) -> Result<Vec<f32>> {
        if values.len() != 4 * self.block {
            return Err(Error::DimensionMismatch {
                expected: 4 * self.block,
                got: values.len(),
            });
        }
        let mut out: Vec<f64> = values.iter().map(|&v| v.max(0.0) as f64).collect();
        match self.kind {
            MutationKind::SubstitutionNoise => self.noise(&mut out, rng),
            MutationKind::QuadrantCrop => self.crop(&mut out),
            MutationKind::HistogramRescale => self.rescale(&mut out),
            MutationKind::OverlayInject => self.overlay(&mut out),
            _ => unreachable!("temporal kinds are rejected by SpatialPlan::new"),
        }
        if self.is_identity() {
            return Ok(values.to_vec());
        }
        Ok(out.into_iter().map(|v| v.max(0.0) as f32).collect())
    }

    fn is_identity(&self) -> bool {
        match self.kind {
            MutationKind::SubstitutionNoise => self.fraction == 0.0 || self.words == 0,
            MutationKind::QuadrantCrop => self.crop == 0.0,
            MutationKind::HistogramRescale => self.gamma == 1.0,
            MutationKind::OverlayInject => self.weight == 0.0,
            _ => false,
        }
    }

    fn blocks<'a>(&self, v: &'a mut [f64]) -> std::slice::ChunksMut<'a, f64> {
        v.chunks_mut(self.block)
    }

    fn noise<R: Rng>(&self, v: &mut [f64], rng: &mut R) {
        let words = self.words.min(self.block);
        if words == 0 {
            return;
        }
        for b in self.blocks(v) {
            let mass: f64 = b.iter().sum();
            if mass <= 0.0 {
                continue;
            }
            let moved = self.fraction * mass;
            for x in b.iter_mut() {
                *x *= 1.0 - self.fraction;
            }
            let idx = sample(rng, self.block, words).into_vec();
            let w: Vec<f64> = (0..words).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            for (i, w) in idx.into_iter().zip(w) {
                b[i] += moved * w / total;
            }
        }
    }

    fn crop(&self, v: &mut [f64]) {
        let before: f64 = v.iter().sum();
        for &q in &self.quadrants {
            for x in &mut v[q * self.block..(q + 1) * self.block] {
                *x *= 1.0 - self.crop;
            }
        }
        let after: f64 = v.iter().sum();
        if after > 0.0 {
            let s = before / after;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn rescale(&self, v: &mut [f64]) {
        v.iter_mut().for_each(|x| *x = x.powf(self.gamma));
    }

    fn overlay(&self, v: &mut [f64]) {
        let total: f64 = v.iter().sum();
        let mass = if total > 0.0 { total / 4.0 } else { 1.0 };
        for q in [2, 3] {
            for &(i, p) in &self.pattern {
                v[q * self.block + i] += self.weight * mass * p;
            }
        }
    }
}

/// Applies a spatial mutation to one nucleotide.
pub fn mutate_nucleotide(x: &VisualNucleotide, spec: &MutationSpec) -> Result<VisualNucleotide> {
    Ok(VisualNucleotide {
        values: mutate_values(&x.values, spec)?,
        interval_start: x.interval_start,
        interval_length: x.interval_length,
    })
}

/// Applies a spatial mutation to a raw bag.
pub fn mutate_values(values: &[f32], spec: &MutationSpec) -> Result<Vec<f32>> {
    let plan = SpatialPlan::new(spec, values.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    plan.apply(values, &mut rng)
}
