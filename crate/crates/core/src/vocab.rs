//! Visual vocabularies: k-means training, nearest-word quantization and
//! tf-idf weighting of visual-word histograms.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{BinReader, BinWrite};
use crate::error::{Error, Result};

/// Grayscale descriptor dimension emitted by the frame feature extractor.
pub const GRAY_DESCRIPTOR_DIM: usize = 64;
/// Color descriptor dimension emitted by the frame feature extractor.
pub const COLOR_DESCRIPTOR_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescriptorKind {
    Grayscale,
    Color,
}

impl DescriptorKind {
    fn code(self) -> u8 {
        match self {
            DescriptorKind::Grayscale => 0,
            DescriptorKind::Color => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DescriptorKind::Grayscale),
            1 => Some(DescriptorKind::Color),
            _ => None,
        }
    }
}

/// A set of `k` centroids of identical dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    kind: DescriptorKind,
    dim: usize,
    centroids: Vec<f32>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit centroids.
    pub fn from_centroids(kind: DescriptorKind, centroids: &[Vec<f32>]) -> Result<Self> {
        let first = centroids.first().ok_or(Error::EmptyInput("centroids"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::EmptyInput("centroid dimension"));
        }
        let mut flat = Vec::with_capacity(dim * centroids.len());
        for c in centroids {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite centroid".into()));
            }
            flat.extend_from_slice(c);
        }
        Ok(Vocabulary {
            kind,
            dim,
            centroids: flat,
        })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[f32] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f32]> {
        self.centroids.chunks_exact(self.dim)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"VDVC")?;
        w.put_u32(1)?;
        w.put_u8(self.kind.code())?;
        w.put_u32(self.k() as u32)?;
        w.put_u32(self.dim as u32)?;
        w.put_f32s(&self.centroids)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r);
        r.magic(b"VDVC")?;
        r.version(1)?;
        let at = r.offset();
        let kind = DescriptorKind::from_code(r.u8()?)
            .ok_or_else(|| Error::format(at, "unknown descriptor kind"))?;
        let k = r.u32()? as usize;
        let at = r.offset();
        let dim = r.u32()? as usize;
        if k == 0 || dim == 0 {
            return Err(Error::format(at, "vocabulary with zero words or dimension"));
        }
        let at = r.offset();
        let centroids = r.f32_vec(k * dim)?;
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(at, "non-finite centroid component"));
        }
        r.finish()?;
        Ok(Vocabulary {
            kind,
            dim,
            centroids,
        })
    }
}

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
}

/// Result of a k-means run with its objective trace.
///
/// `objective[0]` is the cost of the seeding, `objective[t]` the cost after
/// the t-th Lloyd update.
#[derive(Clone, Debug)]
pub struct KMeansRun {
    pub vocabulary: Vocabulary,
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y;
            d * d
        })
        .sum()
}

fn nearest(point: &[f32], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn distinct_count(descriptors: &[Vec<f32>]) -> usize {
    descriptors
        .iter()
        .map(|d| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Trains a vocabulary with distance-squared seeding and Lloyd iterations.
pub fn train_vocabulary(
    descriptors: &[Vec<f32>],
    kind: DescriptorKind,
    config: &KMeansConfig,
) -> Result<Vocabulary> {
    Ok(train_vocabulary_traced(descriptors, kind, config)?.vocabulary)
}

pub fn train_vocabulary_traced(
    descriptors: &[Vec<f32>],
    kind: DescriptorKind,
    config: &KMeansConfig,
) -> Result<KMeansRun> {
    let first = descriptors
        .first()
        .ok_or(Error::EmptyInput("descriptors"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::EmptyInput("descriptor dimension"));
    }
    for d in descriptors {
        if d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite descriptor".into()));
        }
    }
    if config.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let distinct = distinct_count(descriptors);
    if config.k > distinct {
        return Err(Error::KTooLarge {
            k: config.k,
            distinct,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = seed_centers(descriptors, config.k, &mut rng);

    let n = descriptors.len();
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0f64; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    let assign_all =
        |centers: &[Vec<f64>], assign: &mut [usize], dist: &mut [f64]| -> (f64, bool) {
            let mut total = 0.0;
            let mut changed = false;
            for (i, p) in descriptors.iter().enumerate() {
                let (c, d) = nearest(p, centers);
                if assign[i] != c {
                    changed = true;
                    assign[i] = c;
                }
                dist[i] = d;
                total += d;
            }
            (total, changed)
        };

    let (cost, _) = assign_all(&centers, &mut assign, &mut dist);
    objective.push(cost);

    for _ in 0..config.max_iters {
        iterations += 1;
        // Update step.
        let mut sums = vec![vec![0f64; dim]; config.k];
        let mut counts = vec![0usize; config.k];
        for (p, &a) in descriptors.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v as f64;
            }
        }
        let mut taken: HashSet<usize> = HashSet::new();
        for c in 0..config.k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers[c] = sums[c].iter().map(|s| s * inv).collect();
            }
        }
        for c in 0..config.k {
            if counts[c] == 0 {
                // Re-seed to the point farthest from its current centroid.
                let far =
                    (0..n)
                        .filter(|i| !taken.contains(i))
                        .fold(None::<(usize, f64)>, |best, i| match best {
                            Some((_, bd)) if bd >= dist[i] => best,
                            _ => Some((i, dist[i])),
                        });
                if let Some((i, _)) = far {
                    taken.insert(i);
                    centers[c] = descriptors[i].iter().map(|&v| v as f64).collect();
                    dist[i] = 0.0;
                }
            }
        }
        let (cost, changed) = assign_all(&centers, &mut assign, &mut dist);
        objective.push(cost);
        if !changed {
            break;
        }
    }

    let centroids: Vec<Vec<f32>> = centers
        .iter()
        .map(|c| c.iter().map(|&v| v as f32).collect())
        .collect();
    Ok(KMeansRun {
        vocabulary: Vocabulary::from_centroids(kind, &centroids)?,
        objective,
        iterations,
    })
}

fn seed_centers(descriptors: &[Vec<f32>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = descriptors.len();
    let to_f64 = |p: &[f32]| p.iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let mut centers = vec![to_f64(&descriptors[rng.random_range(0..n)])];
    let mut d2: Vec<f64> = descriptors
        .iter()
        .map(|p| sq_dist(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total mass")
        } else {
            // Unreachable when k <= distinct points; kept total for safety.
            rng.random_range(0..n)
        };
        let c = to_f64(&descriptors[pick]);
        for (p, d) in descriptors.iter().zip(d2.iter_mut()) {
            let nd = sq_dist(p, &c);
            if nd < *d {
                *d = nd;
            }
        }
        centers.push(c);
    }
    centers
}

/// Index of the nearest centroid by Euclidean distance, ties to the lowest index.
pub fn quantize(descriptor: &[f32], vocab: &Vocabulary) -> Result<usize> {
    if descriptor.len() != vocab.dim {
        return Err(Error::DimensionMismatch {
            expected: vocab.dim,
            got: descriptor.len(),
        });
    }
    let mut best = (0, f64::INFINITY);
    for (i, c) in vocab.centroids().enumerate() {
        let d: f64 = descriptor
            .iter()
            .zip(c)
            .map(|(&x, &y)| {
                let t = x as f64 - y as f64;
                t * t
            })
            .sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// Smoothed inverse document frequencies of visual words.
#[derive(Clone, Debug, PartialEq)]
pub struct IdfWeights {
    weights: Vec<f32>,
    corpus_size: u64,
}

impl IdfWeights {
    pub fn new(weights: Vec<f32>, corpus_size: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("idf weights"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "idf weights must be finite and >= 0".into(),
            ));
        }
        Ok(IdfWeights {
            weights,
            corpus_size,
        })
    }

    /// All-ones weights, reducing the tf-idf distance to plain Euclidean.
    pub fn uniform(dim: usize) -> Self {
        IdfWeights {
            weights: vec![1.0; dim],
            corpus_size: 0,
        }
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"VDIF")?;
        w.put_u32(1)?;
        w.put_u32(self.weights.len() as u32)?;
        w.put_u64(self.corpus_size)?;
        w.put_f32s(&self.weights)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r);
        r.magic(b"VDIF")?;
        r.version(1)?;
        let d = r.u32()? as usize;
        let corpus_size = r.u64()?;
        let at = r.offset();
        let weights = r.f32_vec(d)?;
        r.finish()?;
        IdfWeights::new(weights, corpus_size).map_err(|e| Error::format(at, e.to_string()))
    }
}

/// `w_i = ln((1 + N) / (1 + df_i)) + 1` over a corpus of `N` bags.
pub fn compute_idf(bags: &[Vec<f32>]) -> Result<IdfWeights> {
    let first = bags.first().ok_or(Error::EmptyInput("bags"))?;
    let d = first.len();
    let mut df = vec![0u64; d];
    for bag in bags {
        if bag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bag.len(),
            });
        }
        for (c, &v) in df.iter_mut().zip(bag) {
            if v > 0.0 {
                *c += 1;
            }
        }
    }
    let n = bags.len() as f64;
    let weights = df
        .iter()
        .map(|&c| (((1.0 + n) / (1.0 + c as f64)).ln() + 1.0) as f32)
        .collect();
    IdfWeights::new(weights, bags.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect()
    }

    #[test]
    fn k1_centroid_is_mean() {
        let pts = random_points(10, 5, 3);
        let v = train_vocabulary(
            &pts,
            DescriptorKind::Grayscale,
            &KMeansConfig {
                k: 1,
                seed: 9,
                max_iters: 10,
            },
        )
        .unwrap();
        for j in 0..5 {
            let mean: f64 = pts.iter().map(|p| p[j] as f64).sum::<f64>() / 10.0;
            assert!((v.centroid(0)[j] as f64 - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn recovers_square_clusters() {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut pts = Vec::new();
        for c in &centers {
            for _ in 0..50 {
                pts.push(vec![
                    (c[0] + noise.sample(&mut rng)) as f32,
                    (c[1] + noise.sample(&mut rng)) as f32,
                ]);
            }
        }
        let v = train_vocabulary(
            &pts,
            DescriptorKind::Color,
            &KMeansConfig {
                k: 4,
                seed: 1,
                max_iters: 50,
            },
        )
        .unwrap();
        let mut used = [false; 4];
        for c in v.centroids() {
            let (i, d) = centers
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let dx = c[0] as f64 - t[0];
                    let dy = c[1] as f64 - t[1];
                    (i, (dx * dx + dy * dy).sqrt())
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 0.5, "centroid {c:?} is {d} from nearest center");
            assert!(!used[i], "two centroids on one center");
            used[i] = true;
        }
    }

    #[test]
    fn objective_is_monotone() {
        let pts = random_points(400, 8, 11);
        let run = train_vocabulary_traced(
            &pts,
            DescriptorKind::Grayscale,
            &KMeansConfig {
                k: 16,
                seed: 5,
                max_iters: 30,
            },
        )
        .unwrap();
        for w in run.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", run.objective);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let pts = random_points(200, 4, 2);
        let cfg = KMeansConfig {
            k: 7,
            seed: 77,
            max_iters: 20,
        };
        let a = train_vocabulary(&pts, DescriptorKind::Color, &cfg).unwrap();
        let b = train_vocabulary(&pts, DescriptorKind::Color, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let cfg = KMeansConfig {
            k: 3,
            seed: 0,
            max_iters: 5,
        };
        assert!(matches!(
            train_vocabulary(&[], DescriptorKind::Color, &cfg),
            Err(Error::EmptyInput(_))
        ));
        let dup = vec![vec![1.0f32, 2.0]; 10];
        assert!(matches!(
            train_vocabulary(&dup, DescriptorKind::Color, &cfg),
            Err(Error::KTooLarge { k: 3, distinct: 1 })
        ));
    }

    #[test]
    fn quantize_exact_and_ties() {
        let cents: Vec<Vec<f32>> = (0..8).map(|i| vec![i as f32, 0.0]).collect();
        let v = Vocabulary::from_centroids(DescriptorKind::Color, &cents).unwrap();
        assert_eq!(quantize(&[7.0, 0.0], &v).unwrap(), 7);

        let cents = vec![
            vec![10.0, 10.0],
            vec![20.0, 20.0],
            vec![0.0, 1.0],
            vec![30.0, 30.0],
            vec![40.0, 40.0],
            vec![0.0, -1.0],
        ];
        let v = Vocabulary::from_centroids(DescriptorKind::Color, &cents).unwrap();
        assert_eq!(quantize(&[0.0, 0.0], &v).unwrap(), 2);
        assert!(matches!(
            quantize(&[0.0], &v),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn quantize_matches_linear_scan() {
        let cents = random_points(50, 6, 8);
        let v = Vocabulary::from_centroids(DescriptorKind::Grayscale, &cents).unwrap();
        for q in random_points(1000, 6, 9) {
            // Independent scan in f32 arithmetic with explicit tie rule.
            let mut best = 0;
            let mut best_d = f32::INFINITY;
            for (i, c) in cents.iter().enumerate() {
                let d: f32 = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            assert_eq!(quantize(&q, &v).unwrap(), best);
        }
    }

    #[test]
    fn idf_values() {
        let bags = vec![
            vec![1.0, 0.0, 2.0],
            vec![3.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ];
        let idf = compute_idf(&bags).unwrap();
        let w = idf.weights();
        assert!((w[0] - 1.0).abs() < 1e-6);
        assert!((w[1] as f64 - (4.0f64.ln() + 1.0)).abs() < 1e-6);
        assert!((w[1] - 2.386_294).abs() < 1e-5);
        assert_eq!(idf.corpus_size(), 3);

        let single = compute_idf(&[vec![5.0, 0.0]]).unwrap();
        assert!((single.weights()[0] - 1.0).abs() < 1e-6);
        assert!((single.weights()[1] as f64 - (2.0f64.ln() + 1.0)).abs() < 1e-6);
        assert!(matches!(compute_idf(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn idf_permutation_equivariant() {
        let bags: Vec<Vec<f32>> = random_points(30, 12, 4)
            .into_iter()
            .map(|b| b.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let perm: Vec<usize> = (0..12).rev().collect();
        let permuted: Vec<Vec<f32>> = bags
            .iter()
            .map(|b| perm.iter().map(|&p| b[p]).collect())
            .collect();
        let a = compute_idf(&bags).unwrap();
        let b = compute_idf(&permuted).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(b.weights()[i], a.weights()[p]);
        }
    }
}
