//! Frame features to video DNA: quadrant bags of visual words per frame,
//! then coordinate-wise median pooling over fixed time intervals.

mod extract;

use std::io::{BufRead, Write};

pub use extract::{extract_frame_features, load_frame, TARGET_WIDTH};

use crate::dna::VideoDna;
use crate::error::{Error, Result};
use crate::vocab::{quantize, Vocabulary, COLOR_DESCRIPTOR_DIM, GRAY_DESCRIPTOR_DIM};

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePoint {
    /// Normalized horizontal position in [0, 1].
    pub x: f32,
    /// Normalized vertical position in [0, 1].
    pub y: f32,
    pub gray_desc: Vec<f32>,
    pub color_desc: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub frame_index: u64,
    pub timestamp: f64,
    pub points: Vec<FeaturePoint>,
}

/// Concatenated per-quadrant histograms of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBag {
    pub timestamp: f64,
    pub histogram: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequencerConfig {
    /// Pooling interval length T in seconds.
    pub interval: f64,
    /// Interval step in seconds.
    pub step: f64,
    pub max_points: usize,
    pub overlap_fraction: f64,
}

impl Default for SequencerConfig {
    fn default() -> Self {
        SequencerConfig {
            interval: 2.0,
            step: 1.0,
            max_points: 450,
            overlap_fraction: 0.10,
        }
    }
}

impl SequencerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval > 0.0 && self.step > 0.0 && self.step <= self.interval) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < step ({}) <= T ({})",
                self.step, self.interval
            )));
        }
        if !(0.0..0.5).contains(&self.overlap_fraction) {
            return Err(Error::InvalidParameter(format!(
                "overlap fraction {} outside [0, 0.5)",
                self.overlap_fraction
            )));
        }
        Ok(())
    }
}

/// Dimension of a frame bag for the given vocabulary sizes.
pub fn bag_dim(k_gray: usize, k_color: usize) -> usize {
    4 * (k_gray + k_color)
}

/// Quadrants (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right) whose
/// region, grown by `overlap` on its inner edges, contains the point.
pub fn quadrant_membership(x: f32, y: f32, overlap: f64) -> [bool; 4] {
    let (x, y) = (x as f64, y as f64);
    let left = x < 0.5 + overlap;
    let right = x >= 0.5 - overlap;
    let top = y < 0.5 + overlap;
    let bottom = y >= 0.5 - overlap;
    [top && left, top && right, bottom && left, bottom && right]
}

pub fn build_frame_bag(
    features: &FrameFeatures,
    gray_vocab: &Vocabulary,
    color_vocab: &Vocabulary,
    overlap_fraction: f64,
) -> Result<FrameBag> {
    let (kg, kc) = (gray_vocab.k(), color_vocab.k());
    let block = kg + kc;
    let mut histogram = vec![0f32; 4 * block];
    for p in &features.points {
        let g = quantize(&p.gray_desc, gray_vocab)?;
        let c = quantize(&p.color_desc, color_vocab)?;
        let member = quadrant_membership(p.x, p.y, overlap_fraction);
        for (q, _) in member.iter().enumerate().filter(|(_, &m)| m) {
            histogram[q * block + g] += 1.0;
            histogram[q * block + kg + c] += 1.0;
        }
    }
    Ok(FrameBag {
        timestamp: features.timestamp,
        histogram,
    })
}

fn median_in_place(values: &mut [f32]) -> f32 {
    let n = values.len();
    let mid = n / 2;
    let (lo, m, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        ((lower as f64 + upper as f64) / 2.0) as f32
    }
}

/// Coordinate-wise median of a non-empty set of equal-length vectors; even
/// counts average the two middle values.
pub fn coordinate_median(vectors: &[&[f32]]) -> Vec<f32> {
    let d = vectors[0].len();
    let mut column = vec![0f32; vectors.len()];
    (0..d)
        .map(|j| {
            for (c, v) in column.iter_mut().zip(vectors) {
                *c = v[j];
            }
            median_in_place(&mut column)
        })
        .collect()
}

/// Median-pools timed frame bags into nucleotides over intervals
/// `[i * step, i * step + T)` measured from the first frame.
///
/// Interior intervals without frames become zero nucleotides and are listed
/// in [`VideoDna::empty_intervals`].
pub fn sequence(bags: &[FrameBag], config: &SequencerConfig, source_id: &str) -> Result<VideoDna> {
    config.validate()?;
    let first = bags.first().ok_or(Error::EmptyInput("frame bags"))?;
    let d = first.histogram.len();
    for w in bags.windows(2) {
        if w[1].timestamp.partial_cmp(&w[0].timestamp) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidParameter(format!(
                "timestamps must strictly increase ({} then {})",
                w[0].timestamp, w[1].timestamp
            )));
        }
    }
    for b in bags {
        if b.histogram.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.histogram.len(),
            });
        }
    }
    let origin = first.timestamp;
    let rel: Vec<f64> = bags.iter().map(|b| b.timestamp - origin).collect();
    let last = *rel.last().unwrap();
    let count = (last / config.step).floor() as usize + 1;

    let mut rows = Vec::with_capacity(count);
    let mut empty = Vec::new();
    for i in 0..count {
        let start = i as f64 * config.step;
        let end = start + config.interval;
        let lo = rel.partition_point(|&t| t < start);
        let hi = rel.partition_point(|&t| t < end);
        if lo == hi {
            empty.push(i);
            rows.push(vec![0f32; d]);
            continue;
        }
        let members: Vec<&[f32]> = bags[lo..hi]
            .iter()
            .map(|b| b.histogram.as_slice())
            .collect();
        rows.push(coordinate_median(&members));
    }
    let mut dna = VideoDna::new(
        source_id,
        config.interval as f32,
        config.step as f32,
        d,
        rows,
    )?;
    dna.set_empty_intervals(empty);
    Ok(dna)
}

/// Full pipeline from per-frame features to a sequence.
pub fn sequence_features(
    frames: &[FrameFeatures],
    gray_vocab: &Vocabulary,
    color_vocab: &Vocabulary,
    config: &SequencerConfig,
    source_id: &str,
) -> Result<VideoDna> {
    let bags = frames
        .iter()
        .map(|f| build_frame_bag(f, gray_vocab, color_vocab, config.overlap_fraction))
        .collect::<Result<Vec<_>>>()?;
    sequence(&bags, config, source_id)
}

/// Parses the whitespace-separated feature text format: one point per line,
/// `frame_index timestamp x y g0..g63 c0..c15`, grouped by frame.
pub fn read_feature_file<R: BufRead>(r: R) -> Result<Vec<FrameFeatures>> {
    let expected = 4 + GRAY_DESCRIPTOR_DIM + COLOR_DESCRIPTOR_DIM;
    let mut frames: Vec<FrameFeatures> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != expected {
            return Err(Error::parse(
                lineno + 1,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let frame_index: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno + 1, "bad frame index"))?;
        let nums = fields[1..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(lineno + 1, "bad decimal field"))?;
        let (x, y) = (nums[1] as f32, nums[2] as f32);
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::parse(lineno + 1, "point coordinates outside [0, 1]"));
        }
        let point = FeaturePoint {
            x,
            y,
            gray_desc: nums[3..3 + GRAY_DESCRIPTOR_DIM]
                .iter()
                .map(|&v| v as f32)
                .collect(),
            color_desc: nums[3 + GRAY_DESCRIPTOR_DIM..]
                .iter()
                .map(|&v| v as f32)
                .collect(),
        };
        match frames.last_mut() {
            Some(f) if f.frame_index == frame_index => f.points.push(point),
            Some(f) if frame_index < f.frame_index || nums[0] <= f.timestamp => {
                return Err(Error::parse(lineno + 1, "frames out of order"));
            }
            _ => frames.push(FrameFeatures {
                frame_index,
                timestamp: nums[0],
                points: vec![point],
            }),
        }
    }
    Ok(frames)
}

pub fn write_feature_file<W: Write>(w: &mut W, frames: &[FrameFeatures]) -> Result<()> {
    for f in frames {
        for p in &f.points {
            write!(w, "{} {} {} {}", f.frame_index, f.timestamp, p.x, p.y)?;
            for v in p.gray_desc.iter().chain(&p.color_desc) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::DescriptorKind;

    fn unit_vocab(kind: DescriptorKind, k: usize, dim: usize) -> Vocabulary {
        let cents: Vec<Vec<f32>> = (0..k)
            .map(|i| {
                let mut c = vec![0f32; dim];
                c[i % dim] = 1.0 + (i / dim) as f32;
                c
            })
            .collect();
        Vocabulary::from_centroids(kind, &cents).unwrap()
    }

    fn point(x: f32, y: f32) -> FeaturePoint {
        FeaturePoint {
            x,
            y,
            gray_desc: {
                let mut g = vec![0.0; 64];
                g[5] = 1.0;
                g
            },
            color_desc: {
                let mut c = vec![0.0; 16];
                c[2] = 1.0;
                c
            },
        }
    }

    #[test]
    fn full_size_dimension() {
        assert_eq!(bag_dim(2048, 124), 8688);
    }

    #[test]
    fn quadrant_rules() {
        assert_eq!(
            quadrant_membership(0.25, 0.25, 0.0),
            [true, false, false, false]
        );
        assert_eq!(quadrant_membership(0.5, 0.5, 0.10), [true; 4]);
        assert_eq!(
            quadrant_membership(0.55, 0.2, 0.10),
            [true, true, false, false]
        );
        assert_eq!(
            quadrant_membership(1.0, 1.0, 0.10),
            [false, false, false, true]
        );
    }

    #[test]
    fn bag_layout_and_mass() {
        let gv = unit_vocab(DescriptorKind::Grayscale, 8, 64);
        let cv = unit_vocab(DescriptorKind::Color, 4, 16);
        let frame = FrameFeatures {
            frame_index: 0,
            timestamp: 0.0,
            points: vec![point(0.25, 0.25), point(0.5, 0.5)],
        };
        let bag = build_frame_bag(&frame, &gv, &cv, 0.10).unwrap();
        assert_eq!(bag.histogram.len(), 4 * 12);
        // Quadrant 0 holds both points, the others only the centre point.
        assert_eq!(bag.histogram[5], 2.0);
        assert_eq!(bag.histogram[8 + 2], 2.0);
        for q in 1..4 {
            assert_eq!(bag.histogram[q * 12 + 5], 1.0);
            assert_eq!(bag.histogram[q * 12 + 8 + 2], 1.0);
        }
        // Each (point, quadrant) incidence adds one gray and one color count.
        let incidences = 1 + 4;
        assert_eq!(bag.histogram.iter().sum::<f32>(), 2.0 * incidences as f32);
    }

    fn bag(t: f64, v: f32) -> FrameBag {
        FrameBag {
            timestamp: t,
            histogram: vec![v, 2.0 * v],
        }
    }

    #[test]
    fn median_pooling() {
        let cfg = SequencerConfig::default();
        let dna = sequence(&[bag(0.0, 3.0)], &cfg, "a").unwrap();
        assert_eq!(dna.row(0), &[3.0, 6.0]);

        let three = [bag(0.0, 1.0), bag(0.5, 100.0), bag(0.9, 5.0)];
        let dna = sequence(
            &three,
            &SequencerConfig {
                step: 1.0,
                interval: 1.0,
                ..cfg.clone()
            },
            "a",
        )
        .unwrap();
        assert_eq!(dna.row(0)[0], 5.0);

        let even = [bag(0.0, 1.0), bag(0.5, 4.0)];
        let dna = sequence(
            &even,
            &SequencerConfig {
                step: 1.0,
                interval: 1.0,
                ..cfg
            },
            "a",
        )
        .unwrap();
        assert_eq!(dna.row(0)[0], 2.5);
    }

    #[test]
    fn interval_membership_at_one_fps() {
        let bags: Vec<FrameBag> = (0..10).map(|i| bag(i as f64, i as f32)).collect();
        let dna = sequence(&bags, &SequencerConfig::default(), "v").unwrap();
        assert_eq!(dna.len(), 10);
        for i in 0..9 {
            // Two-frame support: mean of frames i and i+1.
            assert_eq!(dna.row(i)[0], i as f32 + 0.5);
        }
        assert_eq!(dna.row(9)[0], 9.0);
        assert!(dna.empty_intervals().is_empty());
    }

    #[test]
    fn gaps_become_flagged_zero_nucleotides() {
        let bags = vec![bag(0.0, 1.0), bag(5.0, 2.0)];
        let dna = sequence(&bags, &SequencerConfig::default(), "v").unwrap();
        assert_eq!(dna.len(), 6);
        assert_eq!(dna.empty_intervals(), &[1, 2, 3]);
        assert_eq!(dna.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            sequence(&[], &SequencerConfig::default(), "v"),
            Err(Error::EmptyInput(_))
        ));
        let bad = [bag(1.0, 0.0), bag(1.0, 0.0)];
        assert!(sequence(&bad, &SequencerConfig::default(), "v").is_err());
    }

    #[test]
    fn median_is_order_invariant_and_robust() {
        let a = [1.0f32, 7.0, 3.0, 9.0, 4.0];
        let vs: Vec<Vec<f32>> = a.iter().map(|&v| vec![v]).collect();
        let refs: Vec<&[f32]> = vs.iter().map(|v| v.as_slice()).collect();
        let m = coordinate_median(&refs)[0];
        let mut rev = refs.clone();
        rev.reverse();
        assert_eq!(coordinate_median(&rev)[0], m);
        // Replace the two frames above the median (fewer than half) with
        // outliers on the same side.
        let robust: Vec<Vec<f32>> =
            vec![vec![1.0], vec![1e9], vec![3.0], vec![f32::MAX], vec![4.0]];
        let rr: Vec<&[f32]> = robust.iter().map(|v| v.as_slice()).collect();
        assert_eq!(coordinate_median(&rr)[0], m);
    }

    #[test]
    fn feature_file_roundtrip() {
        let frames = vec![
            FrameFeatures {
                frame_index: 0,
                timestamp: 0.0,
                points: vec![point(0.1, 0.2), point(0.9, 0.75)],
            },
            FrameFeatures {
                frame_index: 2,
                timestamp: 0.08,
                points: vec![point(0.5, 0.5)],
            },
        ];
        let mut buf = Vec::new();
        write_feature_file(&mut buf, &frames).unwrap();
        let back = read_feature_file(&buf[..]).unwrap();
        assert_eq!(back, frames);
        assert!(matches!(
            read_feature_file(&b"0 0 0.5 0.5 1 2\n"[..]),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
