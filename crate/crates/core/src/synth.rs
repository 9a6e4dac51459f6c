//! Synthetic corpora for tests, benchmarks and demos.
//!
//! Bag-level videos are built from shots. Every video mixes a genre palette
//! shared with other videos and a palette of its own; each shot reweights the
//! palette, drifts slowly over its intervals, and every interval draws
//! Poisson word counts per quadrant. A fraction of shots is dark, with very
//! few features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};

use crate::bitcode::Bitcode;
use crate::dna::VideoDna;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub videos: usize,
    pub length: usize,
    pub k_gray: usize,
    pub k_color: usize,
    pub genres: usize,
    pub shot_min: usize,
    pub shot_max: usize,
    /// Mean number of feature points per quadrant and interval.
    pub points: f64,
    /// Probability that a shot is dark.
    pub dark_fraction: f64,
    /// Standard deviation of the per-interval log-weight drift.
    pub drift: f64,
    /// Standard deviation of the per-shot log feature count.
    pub mass_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            videos: 100,
            length: 600,
            k_gray: 256,
            k_color: 32,
            genres: 8,
            shot_min: 4,
            shot_max: 15,
            points: 60.0,
            dark_fraction: 0.08,
            drift: 0.15,
            mass_spread: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn dim(&self) -> usize {
        4 * (self.k_gray + self.k_color)
    }

    fn validate(&self) -> Result<()> {
        if self.k_gray == 0 || self.k_color == 0 || self.genres == 0 {
            return Err(Error::InvalidParameter(
                "vocabulary sizes and genres must be positive".into(),
            ));
        }
        if self.shot_min == 0 || self.shot_min > self.shot_max {
            return Err(Error::InvalidParameter(
                "need 0 < shot_min <= shot_max".into(),
            ));
        }
        let non_negative = |v: f64| v >= 0.0;
        if self.points.is_nan()
            || self.points <= 0.0
            || !(0.0..=1.0).contains(&self.dark_fraction)
            || !non_negative(self.drift)
            || !non_negative(self.mass_spread)
        {
            return Err(Error::InvalidParameter(
                "points, dark_fraction or drift out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse random weights over `k` words: a few dominant words on a faint
/// floor.
fn palette<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let gamma = Gamma::new(0.3, 1.0).expect("valid shape");
    let mut w: Vec<f64> = (0..k).map(|_| gamma.sample(rng) + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Per-quadrant gray and color palettes.
#[derive(Clone)]
struct Look {
    gray: Vec<Vec<f64>>,
    color: Vec<Vec<f64>>,
}

impl Look {
    fn random<R: Rng>(rng: &mut R, kg: usize, kc: usize) -> Self {
        Look {
            gray: (0..4).map(|_| palette(rng, kg)).collect(),
            color: (0..4).map(|_| palette(rng, kc)).collect(),
        }
    }

    fn mix(&self, other: &Look, t: f64) -> Look {
        let m = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .map(|(p, q)| (1.0 - t) * p + t * q)
                        .collect()
                })
                .collect()
        };
        Look {
            gray: m(&self.gray, &other.gray),
            color: m(&self.color, &other.color),
        }
    }

    fn perturb<R: Rng>(&mut self, rng: &mut R, dist: &LogNormal<f64>) {
        for w in self.gray.iter_mut().chain(self.color.iter_mut()) {
            w.iter_mut().for_each(|v| *v *= dist.sample(rng));
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
        }
    }
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> f32 {
    if lambda < 1e-9 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as f32
}

/// Generates `config.videos` bag-level sequences with source ids
/// `synth0000`, `synth0001`, ...
pub fn synth_corpus(config: &SynthConfig) -> Result<Vec<VideoDna>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (kg, kc) = (config.k_gray, config.k_color);
    let genres: Vec<Look> = (0..config.genres)
        .map(|_| Look::random(&mut rng, kg, kc))
        .collect();
    (0..config.videos)
        .map(|v| {
            let own = Look::random(&mut rng, kg, kc);
            let look = genres[rng.random_range(0..genres.len())].mix(&own, 0.5);
            let mut vrng = ChaCha8Rng::seed_from_u64(rng.random());
            let rows = synth_rows(&mut vrng, config, &look);
            VideoDna::new(format!("synth{v:04}"), 2.0, 1.0, config.dim(), rows)
        })
        .collect()
}

fn synth_rows(rng: &mut ChaCha8Rng, config: &SynthConfig, look: &Look) -> Vec<Vec<f32>> {
    let (kg, kc) = (config.k_gray, config.k_color);
    let block = kg + kc;
    let shot_spread = LogNormal::new(0.0, 0.8).expect("valid sigma");
    let drift = LogNormal::new(0.0, config.drift.max(1e-12)).expect("valid sigma");
    let level: Normal<f64> = Normal::new(0.0, config.mass_spread).expect("valid sigma");
    let mut rows = Vec::with_capacity(config.length);
    while rows.len() < config.length {
        let len = rng.random_range(config.shot_min..=config.shot_max);
        let mut shot = look.clone();
        shot.perturb(rng, &shot_spread);
        let dark = rng.random_bool(config.dark_fraction);
        let points = if dark {
            config.points * 0.1
        } else {
            config.points * level.sample(rng).exp()
        };
        for _ in 0..len.min(config.length - rows.len()) {
            if config.drift > 0.0 {
                shot.perturb(rng, &drift);
            }
            let mut row = vec![0f32; 4 * block];
            for q in 0..4 {
                let m = points * rng.random_range(0.8..1.2);
                for (g, &w) in shot.gray[q].iter().enumerate() {
                    row[q * block + g] = poisson(rng, m * w);
                }
                for (c, &w) in shot.color[q].iter().enumerate() {
                    row[q * block + kg + c] = poisson(rng, m * w);
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Code-level shots: each shot has a random base code and every interval
/// flips `flips` random bits of it.
pub fn synth_code_shots(
    shots: usize,
    bits: usize,
    shot_min: usize,
    shot_max: usize,
    flips: usize,
    seed: u64,
) -> Result<Vec<Vec<Bitcode>>> {
    if bits == 0 || shot_min == 0 || shot_min > shot_max || flips > bits {
        return Err(Error::InvalidParameter(
            "invalid code-shot parameters".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..shots)
        .map(|_| {
            let base = random_code(&mut rng, bits);
            let len = rng.random_range(shot_min..=shot_max);
            (0..len)
                .map(|_| {
                    let mut c = base.clone();
                    for i in rand::seq::index::sample(&mut rng, bits, flips) {
                        c.set(i, !c.get(i));
                    }
                    c
                })
                .collect()
        })
        .collect())
}

pub fn random_code<R: Rng>(rng: &mut R, bits: usize) -> Bitcode {
    let b: Vec<bool> = (0..bits).map(|_| rng.random()).collect();
    Bitcode::from_bools(&b)
}

/// A code-only sequence of `len` random codes.
pub fn random_code_sequence(
    source_id: &str,
    len: usize,
    bits: usize,
    seed: u64,
) -> Result<VideoDna> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VideoDna::from_codes(
        source_id,
        (0..len).map(|_| random_code(&mut rng, bits)).collect(),
    )
}
