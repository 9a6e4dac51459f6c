//! Learned Hamming metric `d(x, x') = hamming(sign(Ax + b), sign(Ax' + b))`,
//! the tf-idf weighted Euclidean baseline, and the exponential cross-talk
//! loss both are judged by.

mod eigen;
mod roc;
mod train;

use std::io::{Read, Write};

pub use roc::{equal_error_rate, Eer};
pub use train::{
    calibrate_threshold, train_metric, train_metric_traced, weak_learner, RoundStats, TrainConfig,
    TrainReport, TrainingSet, WeakClassifier,
};

use crate::binio::{BinReader, BinWrite};
use crate::bitcode::Bitcode;
use crate::dna::VideoDna;
use crate::error::{Error, Result};
use crate::vocab::IdfWeights;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricModel {
    bits: usize,
    dim: usize,
    /// `bits x dim`, row-major.
    projection: Vec<f32>,
    offsets: Vec<f32>,
    threshold: f32,
}

impl MetricModel {
    pub fn new(rows: Vec<Vec<f32>>, offsets: Vec<f32>, threshold: f32) -> Result<Self> {
        let bits = rows.len();
        if bits == 0 {
            return Err(Error::EmptyInput("projection rows"));
        }
        if offsets.len() != bits {
            return Err(Error::DimensionMismatch {
                expected: bits,
                got: offsets.len(),
            });
        }
        let dim = rows[0].len();
        let mut projection = Vec::with_capacity(bits * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            projection.extend_from_slice(r);
        }
        let m = MetricModel {
            bits,
            dim,
            projection,
            offsets,
            threshold,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self
            .projection
            .iter()
            .chain(&self.offsets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        for r in self.projection.chunks_exact(self.dim) {
            let n = r.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-4 {
                return Err(Error::InvalidParameter(format!(
                    "projection row norm {n} is not 1"
                )));
            }
        }
        if !(0.0..=self.bits as f32).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside [0, {}]",
                self.threshold, self.bits
            )));
        }
        Ok(())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Decision threshold `d0` on the Hamming distance.
    pub fn threshold(&self) -> f32 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f32) -> Result<Self> {
        self.threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.projection[i * self.dim..(i + 1) * self.dim]
    }

    pub fn offset(&self, i: usize) -> f32 {
        self.offsets[i]
    }

    /// `A_i . x + b_i` accumulated in double precision.
    pub fn response(&self, i: usize, x: &[f32]) -> f64 {
        train::dot(self.row(i), x) + self.offsets[i] as f64
    }

    /// Bits `sign(Ax + b)` with `sign(0) = +1`.
    pub fn project(&self, x: &[f32]) -> Result<Bitcode> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut code = Bitcode::zeros(self.bits);
        for i in 0..self.bits {
            code.set(i, self.response(i, x) >= 0.0);
        }
        Ok(code)
    }

    /// Learned distance between two nucleotides.
    pub fn distance(&self, x: &[f32], y: &[f32]) -> Result<u32> {
        self.project(x)?.hamming(&self.project(y)?)
    }

    /// Bitcodes for every nucleotide of a sequence.
    pub fn encode(&self, dna: &VideoDna) -> Result<Vec<Bitcode>> {
        dna.rows().iter().map(|r| self.project(r)).collect()
    }

    /// Attaches bitcodes to a sequence.
    pub fn encode_into(&self, dna: &mut VideoDna) -> Result<()> {
        let codes = self.encode(dna)?;
        dna.set_bitcodes(codes)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"VDMM")?;
        w.put_u32(1)?;
        w.put_u32(self.bits as u32)?;
        w.put_u32(self.dim as u32)?;
        w.put_f32(self.threshold)?;
        w.put_f32s(&self.projection)?;
        w.put_f32s(&self.offsets)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r);
        r.magic(b"VDMM")?;
        r.version(1)?;
        let bits = r.u32()? as usize;
        let at = r.offset();
        let dim = r.u32()? as usize;
        if bits == 0 || dim == 0 {
            return Err(Error::format(at, "model with zero bits or dimension"));
        }
        let threshold = r.f32()?;
        let projection = r.f32_vec(bits * dim)?;
        let offsets = r.f32_vec(bits)?;
        let end = r.offset();
        r.finish()?;
        let m = MetricModel {
            bits,
            dim,
            projection,
            offsets,
            threshold,
        };
        m.validate()
            .map_err(|e| Error::format(end, e.to_string()))?;
        Ok(m)
    }
}

/// `sqrt(sum_i w_i^2 (x_i - y_i)^2)`.
pub fn tfidf_distance(x: &[f32], y: &[f32], idf: &IdfWeights) -> Result<f64> {
    if x.len() != y.len() || x.len() != idf.dim() {
        return Err(Error::DimensionMismatch {
            expected: idf.dim(),
            got: if x.len() != idf.dim() {
                x.len()
            } else {
                y.len()
            },
        });
    }
    Ok(x.iter()
        .zip(y)
        .zip(idf.weights())
        .map(|((&a, &b), &w)| {
            let t = w as f64 * (a as f64 - b as f64);
            t * t
        })
        .sum::<f64>()
        .sqrt())
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Weighted exponential cross-talk loss of `model` at its threshold `d0`.
///
/// With `weights = None` every pair weighs 1 and the result is
/// `mean_P exp(sign(d - d0)) + mean_N exp(sign(d0 - d))`.
pub fn exp_loss(model: &MetricModel, pairs: &TrainingSet, weights: Option<&[f64]>) -> Result<f64> {
    let np = pairs.positives.len();
    let total = np + pairs.negatives.len();
    if let Some(w) = weights {
        if w.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: w.len(),
            });
        }
    }
    let d0 = model.threshold() as f64;
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let term = |set: &[(Vec<f32>, Vec<f32>)], base: usize, positive: bool| -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, (a, b)) in set.iter().enumerate() {
            let d = model.distance(a, b)? as f64;
            let s = if positive { sign(d - d0) } else { sign(d0 - d) };
            let w = weight(base + k);
            num += w * s.exp();
            den += w;
        }
        Ok(if den > 0.0 { num / den } else { 0.0 })
    };
    Ok(term(&pairs.positives, 0, true)? + term(&pairs.negatives, np, false)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn identity_model(d: usize, threshold: f32) -> MetricModel {
        let rows = (0..d)
            .map(|i| {
                let mut r = vec![0f32; d];
                r[i] = 1.0;
                r
            })
            .collect();
        MetricModel::new(rows, vec![0.0; d], threshold).unwrap()
    }

    #[test]
    fn project_signs() {
        let m = identity_model(4, 2.0);
        let c = m.project(&[0.5, 1.0, 2.0, 3.0]).unwrap();
        assert!((0..4).all(|i| c.get(i)));

        let m = MetricModel::new(vec![vec![0.6, 0.8]], vec![-1.0], 0.5).unwrap();
        // A . x = 1 = -b exactly: sign(0) = +1.
        assert!(m.project(&[1.0, 0.5]).unwrap().get(0));
        assert!(matches!(
            m.project(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn positive_row_rescaling_preserves_bits() {
        let rows = vec![vec![0.6f32, 0.8], vec![1.0, 0.0]];
        let m = MetricModel::new(rows.clone(), vec![0.3, -0.2], 1.0).unwrap();
        let x = [0.7f32, -0.9];
        let c = m.project(&x).unwrap();
        // Rescale row 0 and its offset by 4; project manually.
        let r = 4.0f64;
        let resp = (rows[0][0] as f64 * r) * x[0] as f64
            + (rows[0][1] as f64 * r) * x[1] as f64
            + 0.3f32 as f64 * r;
        assert_eq!(resp >= 0.0, c.get(0));
    }

    #[test]
    fn tfidf_examples() {
        let idf = IdfWeights::new(vec![2.0, 1.0], 1).unwrap();
        assert_eq!(tfidf_distance(&[1.0, 0.0], &[1.0, 0.0], &idf).unwrap(), 0.0);
        assert!(
            (tfidf_distance(&[1.0, 0.0], &[0.0, 1.0], &idf).unwrap() - 5f64.sqrt()).abs() < 1e-12
        );
        let ones = IdfWeights::uniform(2);
        assert!((tfidf_distance(&[3.0, 0.0], &[0.0, 4.0], &ones).unwrap() - 5.0).abs() < 1e-12);
        assert!(tfidf_distance(&[1.0], &[0.0, 1.0], &ones).is_err());
    }

    fn pair(a: &[f32], b: &[f32]) -> (Vec<f32>, Vec<f32>) {
        (a.to_vec(), b.to_vec())
    }

    #[test]
    fn exp_loss_extremes() {
        let m = identity_model(4, 2.0);
        let same = pair(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]);
        let opposite = pair(&[1.0, 1.0, 1.0, 1.0], &[-1.0, -1.0, -1.0, -1.0]);
        let good = TrainingSet {
            positives: vec![same.clone(), same.clone()],
            negatives: vec![opposite.clone()],
        };
        assert!((exp_loss(&m, &good, None).unwrap() - 2.0 / E).abs() < 1e-12);
        let bad = TrainingSet {
            positives: vec![opposite],
            negatives: vec![same],
        };
        assert!((exp_loss(&m, &bad, None).unwrap() - 2.0 * E).abs() < 1e-12);
    }

    #[test]
    fn exp_loss_mixed_by_hand() {
        // 2 positives at Hamming 0 and 3, 2 negatives at 1 and 4; d0 = 2.
        let m = identity_model(4, 2.0);
        let p = [1.0f32, 1.0, 1.0, 1.0];
        let flip =
            |k: usize| -> Vec<f32> { (0..4).map(|i| if i < k { -1.0 } else { 1.0 }).collect() };
        let set = TrainingSet {
            positives: vec![pair(&p, &flip(0)), pair(&p, &flip(3))],
            negatives: vec![pair(&p, &flip(1)), pair(&p, &flip(4))],
        };
        // Positives: exp(sign(-2)) = e^-1, exp(sign(1)) = e. Negatives:
        // exp(sign(1)) = e, exp(sign(-2)) = e^-1.
        let expect = (1.0 / E + E) / 2.0 + (E + 1.0 / E) / 2.0;
        assert!((exp_loss(&m, &set, None).unwrap() - expect).abs() < 1e-12);
        // Weighted: all weight on the well-classified pair of each class.
        let w = [1.0, 0.0, 0.0, 1.0];
        assert!((exp_loss(&m, &set, Some(&w)).unwrap() - 2.0 / E).abs() < 1e-12);
    }

    #[test]
    fn model_file_roundtrip() {
        let m = identity_model(3, 1.5);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = MetricModel::read_from(&buf[..]).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn invariants_enforced() {
        assert!(MetricModel::new(vec![vec![2.0, 0.0]], vec![0.0], 0.5).is_err());
        assert!(MetricModel::new(vec![vec![1.0, 0.0]], vec![0.0], 2.0).is_err());
    }
}
